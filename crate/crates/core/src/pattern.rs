//! Forbidden patterns and the builtin pattern families.
//!
//! A pattern is a finite set of lattice offsets `(dr, dc)`; an occurrence in a
//! 0-1 matrix is a translate whose cells all hold a 1. Blank positions in a
//! displayed shape are unconstrained, so only the 1-cells are stored.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest row or column span a pattern may have.
pub const MAX_SPAN: usize = 63;

/// A normalized, non-empty set of cells. Cells are kept sorted, so two patterns
/// with the same cell set compare equal.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pattern {
    cells: Vec<(i32, i32)>,
}

impl Pattern {
    /// Builds a pattern from arbitrary offsets, translating it so that the
    /// minimum row and column offsets are both zero.
    pub fn new<I>(cells: I) -> Result<Self>
    where
        I: IntoIterator<Item = (i32, i32)>,
    {
        let raw: Vec<(i32, i32)> = cells.into_iter().collect();
        if raw.is_empty() {
            return Err(Error::InvalidInput("pattern has no cells".into()));
        }
        let set: BTreeSet<(i32, i32)> = raw.iter().copied().collect();
        if set.len() != raw.len() {
            return Err(Error::InvalidInput("pattern has duplicate cells".into()));
        }
        let pattern = Self::normalized(set);
        if pattern.height() > MAX_SPAN || pattern.width() >= MAX_SPAN {
            return Err(Error::InvalidInput(format!(
                "pattern {pattern} spans more than {MAX_SPAN} rows or columns"
            )));
        }
        Ok(pattern)
    }

    fn normalized(set: BTreeSet<(i32, i32)>) -> Self {
        let min_r = set.iter().map(|c| c.0).min().unwrap_or(0);
        let min_c = set.iter().map(|c| c.1).min().unwrap_or(0);
        let mut cells: Vec<(i32, i32)> = set
            .into_iter()
            .map(|(r, c)| (r - min_r, c - min_c))
            .collect();
        cells.sort_unstable();
        Pattern { cells }
    }

    /// Re-normalizes; the identity on any constructed pattern.
    pub fn normalize(&self) -> Self {
        Self::normalized(self.cells.iter().copied().collect())
    }

    pub fn cells(&self) -> &[(i32, i32)] {
        &self.cells
    }

    /// Horizontal span: max column offset minus min column offset.
    pub fn width(&self) -> usize {
        let max = self.cells.iter().map(|c| c.1).max().unwrap_or(0);
        let min = self.cells.iter().map(|c| c.1).min().unwrap_or(0);
        (max - min) as usize
    }

    /// Number of rows spanned.
    pub fn height(&self) -> usize {
        let max = self.cells.iter().map(|c| c.0).max().unwrap_or(0);
        let min = self.cells.iter().map(|c| c.0).min().unwrap_or(0);
        (max - min + 1) as usize
    }

    /// Bit `dr` of entry `dc` is set iff `(dr, dc)` is a cell.
    pub fn column_masks(&self) -> Vec<u64> {
        let mut masks = vec![0u64; self.width() + 1];
        for &(dr, dc) in &self.cells {
            masks[dc as usize] |= 1u64 << dr;
        }
        masks
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (r, c)) in self.cells.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "({r},{c})")?;
        }
        write!(f, "}}")
    }
}

/// Free function form of [`Pattern::width`].
pub fn width(p: &Pattern) -> usize {
    p.width()
}

/// A deduplicated, sorted list of patterns with cached geometry. Equality
/// ignores the name.
#[derive(Clone, Debug)]
pub struct PatternSet {
    name: Option<String>,
    patterns: Vec<Pattern>,
    width: usize,
    height: usize,
}

impl PatternSet {
    pub fn new(patterns: Vec<Pattern>) -> Result<Self> {
        if patterns.is_empty() {
            return Err(Error::InvalidInput("pattern set is empty".into()));
        }
        let mut patterns = patterns;
        patterns.sort();
        patterns.dedup();
        let width = patterns.iter().map(Pattern::width).max().unwrap_or(0);
        let height = patterns.iter().map(Pattern::height).max().unwrap_or(1);
        Ok(PatternSet {
            name: None,
            patterns,
            width,
            height,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    /// The machine width `W`: the largest pattern width.
    pub fn machine_width(&self) -> usize {
        self.width
    }

    /// The tallest pattern's row span `H`.
    pub fn height(&self) -> usize {
        self.height
    }

    /// Parses the JSON pattern-file format
    /// `{"name": "...", "patterns": [[[dr,dc],...], ...]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: PatternFile = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("pattern file: {e}")))?;
        let patterns = file
            .patterns
            .into_iter()
            .map(|cells| Pattern::new(cells.into_iter().map(|[r, c]| (r, c))))
            .collect::<Result<Vec<_>>>()?;
        let set = PatternSet::new(patterns)?;
        Ok(match file.name {
            Some(name) => set.with_name(name),
            None => set,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let file = PatternFile {
            name: self.name.clone(),
            patterns: self
                .patterns
                .iter()
                .map(|p| p.cells().iter().map(|&(r, c)| [r, c]).collect())
                .collect(),
        };
        serde_json::to_value(file).expect("pattern file serializes")
    }
}

impl PartialEq for PatternSet {
    fn eq(&self, other: &PatternSet) -> bool {
        self.patterns == other.patterns
    }
}

impl Eq for PatternSet {}

#[derive(Serialize, Deserialize)]
struct PatternFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    patterns: Vec<Vec<[i32; 2]>>,
}

/// Free function form of [`PatternSet::machine_width`].
pub fn machine_width(set: &PatternSet) -> usize {
    set.machine_width()
}

/// The named pattern families.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Builtin {
    /// `b` consecutive ones in a row.
    HorizontalRun(usize),
    /// Two ones in a row at any distance `1..=b`.
    Spaced(usize),
    /// Horizontal and vertical dimers.
    Dimers,
    /// Dimers plus both diagonals.
    Kings,
    /// A 2×2 block of ones.
    Block22,
    /// The T shape: three in a row with one below the middle.
    TBlock,
}

impl Builtin {
    pub fn name(&self) -> String {
        match self {
            Builtin::HorizontalRun(b) => format!("hrun:{b}"),
            Builtin::Spaced(b) => format!("spaced:{b}"),
            Builtin::Dimers => "dimers".into(),
            Builtin::Kings => "kings".into(),
            Builtin::Block22 => "block22".into(),
            Builtin::TBlock => "tblock".into(),
        }
    }

    pub fn pattern_set(&self) -> Result<PatternSet> {
        let pat = |cells: &[(i32, i32)]| Pattern::new(cells.iter().copied());
        let patterns = match *self {
            Builtin::HorizontalRun(b) => {
                if b < 2 {
                    return Err(Error::InvalidInput(format!("hrun needs b >= 2, got {b}")));
                }
                vec![Pattern::new((0..b as i32).map(|c| (0, c)))?]
            }
            Builtin::Spaced(b) => {
                if b < 1 {
                    return Err(Error::InvalidInput("spaced needs b >= 1".into()));
                }
                (1..=b as i32)
                    .map(|k| pat(&[(0, 0), (0, k)]))
                    .collect::<Result<_>>()?
            }
            Builtin::Dimers => vec![pat(&[(0, 0), (0, 1)])?, pat(&[(0, 0), (1, 0)])?],
            Builtin::Kings => vec![
                pat(&[(0, 0), (0, 1)])?,
                pat(&[(0, 0), (1, 0)])?,
                pat(&[(0, 0), (1, 1)])?,
                pat(&[(0, 1), (1, 0)])?,
            ],
            Builtin::Block22 => vec![pat(&[(0, 0), (0, 1), (1, 0), (1, 1)])?],
            Builtin::TBlock => vec![pat(&[(0, 0), (0, 1), (0, 2), (1, 1)])?],
        };
        Ok(PatternSet::new(patterns)?.with_name(self.name()))
    }
}

impl FromStr for Builtin {
    type Err = Error;

    /// Parses `name[:param]`, e.g. `kings` or `hrun:3`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (s, None),
        };
        let param = param
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidInput(format!("bad parameter '{p}' for {name}")))
            })
            .transpose()?;
        let needs = |b: Option<usize>| {
            b.ok_or_else(|| Error::InvalidInput(format!("builtin '{name}' needs a parameter")))
        };
        let no_param = |v: Builtin| match param {
            Some(_) => Err(Error::InvalidInput(format!("builtin '{name}' takes no parameter"))),
            None => Ok(v),
        };
        match name.trim() {
            "hrun" => Ok(Builtin::HorizontalRun(needs(param)?)),
            "spaced" => Ok(Builtin::Spaced(needs(param)?)),
            "dimers" => no_param(Builtin::Dimers),
            "kings" => no_param(Builtin::Kings),
            "block22" => no_param(Builtin::Block22),
            "tblock" => no_param(Builtin::TBlock),
            other => Err(Error::InvalidInput(format!("unknown builtin '{other}'"))),
        }
    }
}

/// Looks up a builtin family by name and optional parameter.
pub fn builtin(name: &str, param: Option<usize>) -> Result<PatternSet> {
    let spec = match param {
        Some(p) => format!("{name}:{p}"),
        None => name.to_string(),
    };
    spec.parse::<Builtin>()?.pattern_set()
}
