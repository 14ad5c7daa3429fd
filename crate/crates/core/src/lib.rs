//! Exact counting of maximal pattern-avoiding 0-1 grids.
//!
//! A grid avoids a set of forbidden patterns when no translate of any
//! pattern fits entirely on ones; it is maximal when flipping any zero to a
//! one creates an occurrence. Grids are read column by column through a
//! finite automaton whose transfer matrix yields weight enumerators,
//! rational generating functions and limiting densities. A brute-force
//! oracle and a random sequential adsorption simulator sit alongside for
//! checking and comparison.

pub mod adsorption;
pub mod automaton;
pub mod error;
pub mod oracle;
pub mod pattern;
pub mod poly;
pub mod transfer;

pub use error::{Error, Guards, Result};
pub use pattern::{builtin, Builtin, Pattern, PatternSet};
pub use poly::{BivarPoly, BivarRational, PolyQ, PolyZ};
pub use transfer::{
    generating_function, limiting_density, weight_enumerator, Density, GeneratingFunction,
    WeightEnumerator,
};
