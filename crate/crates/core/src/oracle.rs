//! Brute-force ground truth: enumerate every 0-1 matrix of a small grid and
//! test each one directly. Deliberately free of any cleverness beyond
//! precomputing the occurrence masks.

use num_bigint::BigInt;
use rayon::prelude::*;

use crate::error::{Error, Guards, Result};
use crate::pattern::PatternSet;
use crate::poly::PolyZ;
use crate::transfer::WeightEnumerator;

/// An `rows × cols` 0-1 matrix.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Grid {
    rows: usize,
    cols: usize,
    cells: Vec<bool>,
}

impl Grid {
    pub fn new(rows: usize, cols: usize) -> Self {
        Grid {
            rows,
            cols,
            cells: vec![false; rows * cols],
        }
    }

    /// Builds a grid from row slices of 0/1 values.
    pub fn from_rows(rows: &[&[u8]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidInput("ragged grid".into()));
        }
        let mut g = Grid::new(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                g.set(i, j, v != 0);
            }
        }
        Ok(g)
    }

    /// Builds a grid from column words (bit `i` = row `i`).
    pub fn from_columns(rows: usize, columns: &[u64]) -> Self {
        let mut g = Grid::new(rows, columns.len());
        for (j, &c) in columns.iter().enumerate() {
            for i in 0..rows {
                g.set(i, j, c >> i & 1 == 1);
            }
        }
        g
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.cells[row * self.cols + col] = value;
    }

    pub fn ones(&self) -> usize {
        self.cells.iter().filter(|&&b| b).count()
    }

    pub fn column_word(&self, col: usize) -> u64 {
        (0..self.rows).fold(0, |w, i| w | (self.get(i, col) as u64) << i)
    }

    pub fn columns(&self) -> Vec<u64> {
        (0..self.cols).map(|j| self.column_word(j)).collect()
    }

    /// All origins `(row, col)` at which a box of `height × span` fits.
    fn placements(&self, height: usize, span: usize) -> impl Iterator<Item = (usize, usize)> {
        let rows = (self.rows + 1).saturating_sub(height);
        let cols = (self.cols + 1).saturating_sub(span);
        (0..rows).flat_map(move |i| (0..cols).map(move |j| (i, j)))
    }

    fn has_occurrence(&self, set: &PatternSet, through: Option<(usize, usize)>) -> bool {
        set.patterns().iter().any(|p| {
            self.placements(p.height(), p.width() + 1).any(|(i, j)| {
                let cells = p
                    .cells()
                    .iter()
                    .map(|&(dr, dc)| (i + dr as usize, j + dc as usize));
                let hits_target = through.is_none_or(|t| cells.clone().any(|c| c == t));
                hits_target && cells.clone().all(|(a, b)| self.get(a, b))
            })
        })
    }
}

/// No translate of any pattern fits in the grid with all its cells equal to 1.
pub fn is_avoiding(grid: &Grid, set: &PatternSet) -> bool {
    !grid.has_occurrence(set, None)
}

/// Avoiding, and every 0 would create an occurrence if flipped to 1.
pub fn is_maximal(grid: &Grid, set: &PatternSet) -> bool {
    if !is_avoiding(grid, set) {
        return false;
    }
    let mut g = grid.clone();
    for i in 0..grid.rows {
        for j in 0..grid.cols {
            if g.get(i, j) {
                continue;
            }
            g.set(i, j, true);
            let blocked = g.has_occurrence(set, Some((i, j)));
            g.set(i, j, false);
            if !blocked {
                return false;
            }
        }
    }
    true
}

/// Occurrence masks over the bit layout `col * rows + row`.
struct MaskTable {
    all: Vec<u64>,
    by_cell: Vec<Vec<u64>>,
}

impl MaskTable {
    fn new(rows: usize, cols: usize, set: &PatternSet) -> Self {
        let grid = Grid::new(rows, cols);
        let mut all = Vec::new();
        let mut by_cell = vec![Vec::new(); rows * cols];
        for p in set.patterns() {
            for (i, j) in grid.placements(p.height(), p.width() + 1) {
                let mask = p.cells().iter().fold(0u64, |m, &(dr, dc)| {
                    m | 1u64 << ((j + dc as usize) * rows + i + dr as usize)
                });
                all.push(mask);
                for bit in 0..rows * cols {
                    if mask >> bit & 1 == 1 {
                        by_cell[bit].push(mask);
                    }
                }
            }
        }
        MaskTable { all, by_cell }
    }

    fn is_maximal(&self, g: u64, cells: usize) -> bool {
        if self.all.iter().any(|&m| g & m == m) {
            return false;
        }
        (0..cells).all(|b| {
            let bit = 1u64 << b;
            g & bit != 0 || self.by_cell[b].iter().any(|&m| (g | bit) & m == m)
        })
    }
}

/// Largest grid the bitmask enumeration can represent.
pub const HARD_CELL_LIMIT: usize = 40;

/// Weight enumerator by enumerating all `2^(rows·cols)` matrices.
pub fn weight_enumerator_bruteforce(
    rows: usize,
    cols: usize,
    set: &PatternSet,
    guards: &Guards,
) -> Result<WeightEnumerator> {
    let cells = rows * cols;
    Guards::check("oracle cells", cells as u128, guards.cells.min(HARD_CELL_LIMIT) as u128)?;
    let table = MaskTable::new(rows, cols, set);
    let total: u64 = 1 << cells;
    let chunk: u64 = 1 << 14;
    let counts = (0..total.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut hist = vec![0u64; cells + 1];
            for g in c * chunk..((c + 1) * chunk).min(total) {
                if table.is_maximal(g, cells) {
                    hist[g.count_ones() as usize] += 1;
                }
            }
            hist
        })
        .reduce(
            || vec![0u64; cells + 1],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let poly = PolyZ::from_coeffs(counts.into_iter().map(BigInt::from).collect());
    Ok(WeightEnumerator::new(rows, cols, set, poly))
}

/// Every maximal grid, for witness-level checks on tiny inputs.
pub fn maximal_grids(
    rows: usize,
    cols: usize,
    set: &PatternSet,
    guards: &Guards,
) -> Result<Vec<Grid>> {
    let cells = rows * cols;
    Guards::check("oracle cells", cells as u128, guards.cells.min(HARD_CELL_LIMIT) as u128)?;
    let table = MaskTable::new(rows, cols, set);
    Ok((0..1u64 << cells)
        .filter(|&g| table.is_maximal(g, cells))
        .map(|g| {
            let mask = (1u64 << rows) - 1;
            let columns: Vec<u64> = (0..cols).map(|j| g >> (j * rows) & mask).collect();
            Grid::from_columns(rows, &columns)
        })
        .collect())
}
