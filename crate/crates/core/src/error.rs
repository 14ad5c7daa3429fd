use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("resource guard exceeded: {what} needs {needed}, limit is {limit}")]
    Guard {
        what: &'static str,
        needed: u128,
        limit: u128,
    },
    #[error("no convergence: {0}")]
    Convergence(String),
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Limits on the work any single request may do.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Guards {
    /// Largest `rows * cols` the exhaustive oracle will enumerate.
    pub cells: usize,
    /// Largest number of automaton states materialized.
    pub states: usize,
}

impl Default for Guards {
    fn default() -> Self {
        Guards {
            cells: 28,
            states: 2_000_000,
        }
    }
}

impl Guards {
    /// Applies overrides of the form `cells=30,states=1000000`.
    pub fn with_overrides(mut self, spec: &str) -> Result<Self> {
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("bad guard override '{part}'")))?;
            let value: usize = value
                .trim()
                .parse()
                .ok()
                .filter(|v| *v > 0)
                .ok_or_else(|| Error::InvalidInput(format!("bad guard value in '{part}'")))?;
            match key.trim() {
                "cells" => self.cells = value,
                "states" => self.states = value,
                other => return Err(Error::InvalidInput(format!("unknown guard '{other}'"))),
            }
        }
        Ok(self)
    }

    pub(crate) fn check(what: &'static str, needed: u128, limit: u128) -> Result<()> {
        if needed > limit {
            Err(Error::Guard {
                what,
                needed,
                limit,
            })
        } else {
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides() {
        let g = Guards::default().with_overrides("cells=30, states=5").unwrap();
        assert_eq!(g, Guards { cells: 30, states: 5 });
        assert!(Guards::default().with_overrides("cells=0").is_err());
        assert!(Guards::default().with_overrides("depth=3").is_err());
        assert!(Guards::default().with_overrides("cells").is_err());
        assert_eq!(Guards::default().with_overrides("").unwrap(), Guards::default());
    }
}
