//! Random sequential adsorption, and the exact one-row distributions for
//! the adjacent-pair pattern under both the uniform and the adsorption
//! measures.
//!
//! In adsorption every cell is visited once in a uniformly random order and
//! receives a 1 unless that would complete a forbidden occurrence. The
//! result is always maximal, but not uniformly distributed.
//!
//! Trials use ChaCha8 seeded with the run seed, on stream `trial index`, so a
//! trial's outcome depends only on `(seed, index)`.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Guards, Result};
use crate::oracle::Grid;
use crate::pattern::PatternSet;
use crate::poly::{ratio_to_f64, PolyQ, PolyZ};
use crate::transfer::round_sig;

/// Upper bound on `rows · cols · trials` for one simulation run.
const SIMULATION_LIMIT: u128 = 20_000_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RsaOutcome {
    pub grid: Grid,
    pub occupied: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RsaStats {
    pub rows: usize,
    pub cols: usize,
    pub trials: u64,
    pub seed: u64,
    /// Occupied count → number of trials ending with it.
    pub histogram: BTreeMap<usize, u64>,
    pub mean_density: f64,
    pub stderr: f64,
}

impl RsaStats {
    pub fn to_json(&self) -> Value {
        let histogram: Vec<Value> = self.histogram.iter().map(|(k, v)| json!([k, v])).collect();
        json!({
            "rows": self.rows,
            "cols": self.cols,
            "trials": self.trials,
            "seed": self.seed,
            "histogram": histogram,
            "mean_density": round_sig(self.mean_density),
            "stderr": round_sig(self.stderr),
        })
    }
}

/// Occurrence tables for one grid size; reusable across trials.
pub struct RsaSimulator {
    rows: usize,
    cols: usize,
    occurrence_size: Vec<u32>,
    by_cell: Vec<Vec<u32>>,
}

impl RsaSimulator {
    pub fn new(rows: usize, cols: usize, set: &PatternSet) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput("simulation needs rows, cols >= 1".into()));
        }
        let mut occurrence_size = Vec::new();
        let mut by_cell = vec![Vec::new(); rows * cols];
        for p in set.patterns() {
            let (h, w) = (p.height(), p.width());
            if h > rows || w >= cols {
                continue;
            }
            for i in 0..=rows - h {
                for j in 0..cols - w {
                    let id = occurrence_size.len() as u32;
                    occurrence_size.push(p.cells().len() as u32);
                    for &(dr, dc) in p.cells() {
                        by_cell[(i + dr as usize) * cols + j + dc as usize].push(id);
                    }
                }
            }
        }
        Ok(RsaSimulator {
            rows,
            cols,
            occurrence_size,
            by_cell,
        })
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    /// Runs the process on a given visiting order of cells (`row * cols + col`).
    pub fn fill(&self, order: &[usize]) -> RsaOutcome {
        let mut filled = vec![0u32; self.occurrence_size.len()];
        let mut grid = Grid::new(self.rows, self.cols);
        let mut occupied = 0;
        for &cell in order {
            let blocked = self.by_cell[cell]
                .iter()
                .any(|&o| filled[o as usize] + 1 == self.occurrence_size[o as usize]);
            if blocked {
                continue;
            }
            for &o in &self.by_cell[cell] {
                filled[o as usize] += 1;
            }
            grid.set(cell / self.cols, cell % self.cols, true);
            occupied += 1;
        }
        debug_assert!(self.is_maximal_fill(&grid, &filled));
        RsaOutcome { grid, occupied }
    }

    fn is_maximal_fill(&self, grid: &Grid, filled: &[u32]) -> bool {
        let avoiding = filled
            .iter()
            .zip(&self.occurrence_size)
            .all(|(f, s)| f < s);
        let maximal = (0..self.cells()).all(|c| {
            grid.get(c / self.cols, c % self.cols)
                || self.by_cell[c]
                    .iter()
                    .any(|&o| filled[o as usize] + 1 == self.occurrence_size[o as usize])
        });
        avoiding && maximal
    }

    /// Trial `index` of the run seeded with `seed`.
    pub fn trial(&self, seed: u64, index: u64) -> RsaOutcome {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let mut order: Vec<usize> = (0..self.cells()).collect();
        order.shuffle(&mut rng);
        self.fill(&order)
    }
}

/// Runs `trials` independent adsorption trials.
pub fn simulate_rsa(
    rows: usize,
    cols: usize,
    set: &PatternSet,
    trials: u64,
    seed: u64,
) -> Result<RsaStats> {
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be at least 1".into()));
    }
    Guards::check(
        "simulation work",
        rows as u128 * cols as u128 * trials as u128,
        SIMULATION_LIMIT,
    )?;
    let sim = RsaSimulator::new(rows, cols, set)?;
    let histogram = (0..trials)
        .into_par_iter()
        .fold(BTreeMap::new, |mut h: BTreeMap<usize, u64>, i| {
            *h.entry(sim.trial(seed, i).occupied).or_default() += 1;
            h
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        });
    let cells = sim.cells() as f64;
    let n = trials as f64;
    let mean = histogram.iter().map(|(&k, &v)| k as f64 * v as f64).sum::<f64>() / n;
    let var = if trials > 1 {
        histogram
            .iter()
            .map(|(&k, &v)| v as f64 * (k as f64 - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0)
    } else {
        0.0
    };
    Ok(RsaStats {
        rows,
        cols,
        trials,
        seed,
        histogram,
        mean_density: mean / cells,
        stderr: var.sqrt() / cells / n.sqrt(),
    })
}

/// `g_n(z)`: weight enumerator of maximal rows of length `n` avoiding two
/// adjacent ones, from `g_n = z (g_{n-2} + g_{n-3})` with `g_0 = 1`,
/// `g_1 = z`, `g_2 = 2z`.
pub fn uniform_enumerators_1d(n: usize) -> Vec<PolyZ> {
    let mut g = vec![PolyZ::one(), PolyZ::z(), PolyZ::monomial(2, 1)];
    for k in 3..=n {
        let next = (&g[k - 2] + &g[k - 3]).shift(1);
        g.push(next);
    }
    g.truncate(n + 1);
    g
}

/// `(g_n, G_n)` with `G_n = g_n / g_n(1)`.
pub fn uniform_pgf_1d(n: usize) -> (PolyZ, PolyQ) {
    let g = uniform_enumerators_1d(n).pop().expect("n + 1 terms");
    let pgf = g
        .to_q()
        .scale(&BigRational::new(BigInt::one(), g.eval_one()));
    (g, pgf)
}

/// Exact `G'_n(1)` via the scalar recurrences for `g_n(1)` and `g'_n(1)`.
pub fn uniform_mean_1d(n: usize) -> BigRational {
    // (g_k(1), g'_k(1)) for k = m-3, m-2, m-1
    let mut window: [(BigInt, BigInt); 3] = [
        (1.into(), 0.into()),
        (1.into(), 1.into()),
        (2.into(), 2.into()),
    ];
    if n < 3 {
        let (v, d) = &window[n];
        return BigRational::new(d.clone(), v.clone());
    }
    for _ in 3..=n {
        let v = &window[1].0 + &window[0].0;
        let d = &v + &window[1].1 + &window[0].1;
        window.rotate_left(1);
        window[2] = (v, d);
    }
    let (v, d) = &window[2];
    BigRational::new(d.clone(), v.clone())
}

/// `P_0, …, P_n` with `P_k = k! · F_k`, which has integer coefficients: it
/// counts visiting orders by the number of seats they fill. Multiplying the
/// adsorption recurrence
/// `n F_n = z (2 F_{n-2} + Σ_{i=2}^{n-1} F_{i-2} F_{n-i-1})` through by
/// `(n-1)!` gives
/// `P_n = z (2(n-1) P_{n-2} + (n-1)(n-2) Σ_{a+b=n-3} C(n-3, a) P_a P_b)`.
fn rsa_scaled_table(n: usize) -> Vec<Shifted> {
    let mut p: Vec<Shifted> = vec![Shifted::constant(1u32.into()), Shifted::z()];
    let mut binom: Vec<BigUint> = vec![BigUint::one()];
    for m in 2..=n {
        let mut acc = p[m - 2].scaled(&BigUint::from(2 * (m - 1)));
        if m >= 3 {
            // binom holds row m - 3 of Pascal's triangle here
            let mut conv = Shifted::default();
            let k = m - 3;
            for a in 0..=k / 2 {
                let b = k - a;
                let mut term = p[a].mul(&p[b]).scaled(&binom[a]);
                if a != b {
                    term = term.scaled(&BigUint::from(2u32));
                }
                conv.add(&term);
            }
            acc.add(&conv.scaled(&BigUint::from((m - 1) * (m - 2))));
            // advance to row m - 2
            let mut next = vec![BigUint::one(); binom.len() + 1];
            for i in 1..binom.len() {
                next[i] = &binom[i - 1] + &binom[i];
            }
            binom = next;
        }
        acc.low += 1;
        p.push(acc);
    }
    p.truncate(n + 1);
    p
}

/// `F_0, …, F_n`, the exact adsorption probability generating functions for
/// one row of `k` seats avoiding two adjacent ones.
pub fn rsa_pgf_table_1d(n: usize) -> Vec<PolyQ> {
    let mut factorial = BigInt::one();
    rsa_scaled_table(n)
        .into_iter()
        .enumerate()
        .map(|(k, p)| {
            if k > 0 {
                factorial *= BigInt::from(k);
            }
            let inv = BigRational::new(BigInt::one(), factorial.clone());
            p.into_poly().to_q().scale(&inv)
        })
        .collect()
}

/// `F_n(z)`.
pub fn rsa_pgf_1d(n: usize) -> PolyQ {
    rsa_pgf_table_1d(n).pop().expect("n + 1 terms")
}

/// Exact `F'_n(1)`, the expected number of filled seats under adsorption.
///
/// Since `F_k(1) = 1` for every `k`, differentiating the recurrence at
/// `z = 1` gives `F'_n(1) = 1 + (2/n)(F'_{n-2}(1) + Σ_{k=0}^{n-3} F'_k(1))`,
/// which is linear in `n`.
pub fn rsa_mean_1d(n: usize) -> BigRational {
    // F'_{m-3}(1), F'_{m-2}(1), F'_{m-1}(1)
    let mut window = [BigRational::zero(), BigRational::zero(), BigRational::one()];
    let mut prefix = BigRational::zero(); // Σ_{k ≤ m-3} F'_k(1)
    if n < 2 {
        return window[n + 1].clone();
    }
    for m in 2..=n {
        if m >= 3 {
            prefix += &window[0];
        }
        let two_over_m = BigRational::new(2.into(), BigInt::from(m));
        let value = BigRational::one() + two_over_m * (&window[1] + &prefix);
        window.rotate_left(1);
        window[2] = value;
    }
    window[2].clone()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityComparison {
    pub n: usize,
    pub uniform: BigRational,
    pub rsa: BigRational,
    /// `rsa / uniform`.
    pub ratio: BigRational,
}

impl DensityComparison {
    pub fn uniform_f64(&self) -> f64 {
        ratio_to_f64(&self.uniform)
    }

    pub fn rsa_f64(&self) -> f64 {
        ratio_to_f64(&self.rsa)
    }

    pub fn ratio_f64(&self) -> f64 {
        ratio_to_f64(&self.ratio)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "n": self.n,
            "uniform": round_sig(self.uniform_f64()),
            "rsa": round_sig(self.rsa_f64()),
            "ratio": round_sig(self.ratio_f64()),
            "uniform_exact": self.uniform.to_string(),
            "rsa_exact": self.rsa.to_string(),
        })
    }
}

/// Densities `G'_n(1)/n` and `F'_n(1)/n` and their ratio.
pub fn density_comparison_1d(n: usize) -> Result<DensityComparison> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let len = BigRational::from_integer(BigInt::from(n));
    let uniform = uniform_mean_1d(n) / &len;
    let rsa = rsa_mean_1d(n) / &len;
    let ratio = &rsa / &uniform;
    Ok(DensityComparison {
        n,
        uniform,
        rsa,
        ratio,
    })
}

/// Nonnegative integer polynomial stored from degree `low` upward.
#[derive(Clone, Debug, Default)]
struct Shifted {
    low: usize,
    coeffs: Vec<BigUint>,
}

impl Shifted {
    fn constant(c: BigUint) -> Self {
        Shifted {
            low: 0,
            coeffs: vec![c],
        }
    }

    fn z() -> Self {
        Shifted {
            low: 1,
            coeffs: vec![BigUint::one()],
        }
    }

    fn scaled(&self, c: &BigUint) -> Self {
        Shifted {
            low: self.low,
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    fn mul(&self, other: &Shifted) -> Shifted {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Shifted::default();
        }
        let mut coeffs = vec![BigUint::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Shifted {
            low: self.low + other.low,
            coeffs,
        }
    }

    fn add(&mut self, other: &Shifted) {
        if other.coeffs.is_empty() {
            return;
        }
        if self.coeffs.is_empty() {
            *self = other.clone();
            return;
        }
        if other.low < self.low {
            let mut v = vec![BigUint::zero(); self.low - other.low];
            v.append(&mut self.coeffs);
            self.coeffs = v;
            self.low = other.low;
        }
        let off = other.low - self.low;
        if self.coeffs.len() < off + other.coeffs.len() {
            self.coeffs.resize(off + other.coeffs.len(), BigUint::zero());
        }
        for (d, s) in self.coeffs[off..].iter_mut().zip(&other.coeffs) {
            *d += s;
        }
    }

    fn into_poly(self) -> PolyZ {
        let mut v = vec![BigInt::zero(); self.low];
        v.extend(self.coeffs.into_iter().map(BigInt::from));
        PolyZ::from_coeffs(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{is_avoiding, is_maximal};
    use crate::pattern::builtin;

    fn hrun2() -> PatternSet {
        builtin("hrun", Some(2)).unwrap()
    }

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    /// Histogram of filled seats over all visiting orders (Heap's algorithm).
    fn all_orders_histogram(sim: &RsaSimulator) -> BTreeMap<usize, u64> {
        let n = sim.cells();
        let mut order: Vec<usize> = (0..n).collect();
        let mut c = vec![0usize; n];
        let mut hist = BTreeMap::new();
        *hist.entry(sim.fill(&order).occupied).or_insert(0) += 1;
        let mut i = 0;
        while i < n {
            if c[i] < i {
                if i % 2 == 0 {
                    order.swap(0, i);
                } else {
                    order.swap(c[i], i);
                }
                *hist.entry(sim.fill(&order).occupied).or_insert(0) += 1;
                c[i] += 1;
                i = 0;
            } else {
                c[i] = 0;
                i += 1;
            }
        }
        hist
    }

    #[test]
    fn exhaustive_small_rows() {
        let sim = RsaSimulator::new(1, 2, &hrun2()).unwrap();
        assert_eq!(all_orders_histogram(&sim), BTreeMap::from([(1, 2)]));
        let sim = RsaSimulator::new(1, 3, &hrun2()).unwrap();
        // 101 from four orders, 010 from two: mean 5/3
        assert_eq!(all_orders_histogram(&sim), BTreeMap::from([(1, 2), (2, 4)]));
    }

    #[test]
    fn recurrence_matches_all_orders() {
        let table = rsa_pgf_table_1d(9);
        let mut factorial = 1u64;
        for (n, f) in table.iter().enumerate().skip(1) {
            factorial *= n as u64;
            let sim = RsaSimulator::new(1, n, &hrun2()).unwrap();
            let hist = all_orders_histogram(&sim);
            let expected: PolyQ = PolyQ::from_coeffs(
                (0..=n)
                    .map(|k| q(*hist.get(&k).unwrap_or(&0) as i64, factorial as i64))
                    .collect(),
            );
            assert_eq!(f, &expected, "n = {n}");
        }
    }

    #[test]
    fn first_adsorption_pgfs() {
        let t = rsa_pgf_table_1d(3);
        assert_eq!(t[0], PolyQ::one());
        assert_eq!(t[1], PolyZ::z().to_q());
        assert_eq!(t[2], PolyZ::z().to_q());
        assert_eq!(t[3], PolyQ::from_coeffs(vec![q(0, 1), q(1, 3), q(2, 3)]));
    }

    #[test]
    fn uniform_enumerators() {
        let g = uniform_enumerators_1d(5);
        assert_eq!(g[2], PolyZ::from_i64s(&[0, 2]));
        assert_eq!(g[3], PolyZ::from_i64s(&[0, 1, 1]));
        assert_eq!(g[5], PolyZ::from_i64s(&[0, 0, 3, 1]));
        assert_eq!(uniform_enumerators_1d(0), vec![PolyZ::one()]);
        let (_, pgf) = uniform_pgf_1d(17);
        assert_eq!(pgf.eval_one(), BigRational::one());
        for n in 0..30 {
            let (g, _) = uniform_pgf_1d(n);
            assert_eq!(
                uniform_mean_1d(n),
                BigRational::new(g.derivative().eval_one(), g.eval_one())
            );
        }
    }

    #[test]
    fn mean_recurrence_matches_polynomials() {
        let table = rsa_pgf_table_1d(60);
        for (n, f) in table.iter().enumerate() {
            assert_eq!(rsa_mean_1d(n), f.derivative().eval_one(), "n = {n}");
        }
        assert_eq!(rsa_mean_1d(3), q(5, 3));
    }

    #[test]
    fn supports_agree() {
        let rsa = rsa_pgf_table_1d(25);
        let uni = uniform_enumerators_1d(25);
        for n in 0..=25 {
            assert_eq!(rsa[n].support(), uni[n].to_q().support(), "n = {n}");
        }
    }

    #[test]
    fn simulated_outcomes_are_maximal() {
        for (r, s, set) in [(1, 7, hrun2()), (3, 4, builtin("kings", None).unwrap())] {
            let sim = RsaSimulator::new(r, s, &set).unwrap();
            for i in 0..200 {
                let out = sim.trial(11, i);
                assert!(is_avoiding(&out.grid, &set));
                assert!(is_maximal(&out.grid, &set));
                assert_eq!(out.occupied, out.grid.ones());
            }
        }
    }

    #[test]
    fn two_seats_always_half() {
        let stats = simulate_rsa(1, 2, &hrun2(), 500, 3).unwrap();
        assert_eq!(stats.mean_density, 0.5);
        assert_eq!(stats.stderr, 0.0);
        assert_eq!(stats.histogram, BTreeMap::from([(1, 500)]));
    }

    #[test]
    fn seeded_runs_repeat() {
        let a = simulate_rsa(2, 9, &builtin("dimers", None).unwrap(), 300, 42).unwrap();
        let b = simulate_rsa(2, 9, &builtin("dimers", None).unwrap(), 300, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json().to_string(), b.to_json().to_string());
        let c = simulate_rsa(2, 9, &builtin("dimers", None).unwrap(), 300, 43).unwrap();
        assert_ne!(a.histogram, c.histogram);
        assert_eq!(a.histogram.values().sum::<u64>(), 300);
    }

    #[test]
    fn simulation_errors() {
        assert!(simulate_rsa(1, 3, &hrun2(), 0, 1).is_err());
        assert!(simulate_rsa(0, 3, &hrun2(), 1, 1).is_err());
        assert!(matches!(
            simulate_rsa(100, 100_000, &hrun2(), 100_000, 1),
            Err(Error::Guard { .. })
        ));
        assert!(density_comparison_1d(0).is_err());
    }

    #[test]
    fn three_seat_simulation_mean() {
        let stats = simulate_rsa(1, 3, &hrun2(), 60_000, 5).unwrap();
        let exact = 5.0 / 9.0;
        assert!((stats.mean_density - exact).abs() < 5.0 * stats.stderr, "{stats:?}");
    }
}
