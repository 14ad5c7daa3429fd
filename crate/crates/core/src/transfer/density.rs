//! Limiting average density of ones among maximal configurations as the
//! number of columns grows.
//!
//! With `λ(z)` the dominant eigenvalue of `M(z)`, `W_s(z)` grows like
//! `λ(z)^s`, so the mean number of ones per column tends to `λ'(1) / λ(1)`.
//! `λ(1)` and its eigenvectors come from power iteration on `M(1)`, and
//! `λ'(1) = uᵀ M'(1) v / uᵀ v` by first-order perturbation, where `M'(1)`
//! replaces each entry `z^t` by `t`.

use serde_json::{json, Value};

use super::TransferMatrix;
use crate::automaton::build_automaton;
use crate::error::{Error, Guards, Result};
use crate::pattern::PatternSet;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
const ITERATION_CAP: usize = 1_000_000;
/// Power iteration on `M` gets this many steps before switching to `M + I`.
const PERIODIC_PATIENCE: usize = 20_000;
const STALL_LIMIT: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Density {
    pub density: f64,
    /// Finite-`s` estimate `(W'_{s+1}/W_{s+1} - W'_s/W_s) / rows` at the
    /// point where it stopped moving.
    pub crosscheck: f64,
    /// Perron root `λ(1)` of the dominant component.
    pub growth: f64,
}

impl Density {
    pub fn to_json(&self) -> Value {
        json!({
            "density": round_sig(self.density),
            "method": "perturbation",
            "crosscheck": round_sig(self.crosscheck),
        })
    }
}

/// Rounds to 12 significant digits for stable textual output.
pub fn round_sig(v: f64) -> f64 {
    format!("{v:.11e}").parse().unwrap_or(v)
}

type DenseRows = Vec<Vec<(usize, f64, f64)>>;

/// Dominant eigenpair of a nonnegative irreducible matrix given as sparse
/// rows `(j, value)`. Returns `(λ, right vector)`; Collatz–Wielandt bounds
/// decide convergence.
fn perron(rows: &[Vec<(usize, f64)>]) -> Result<(f64, Vec<f64>)> {
    let n = rows.len();
    let mut shift = 0.0;
    let mut x = vec![1.0 / n as f64; n];
    let mut y = vec![0.0; n];
    let mut best_gap = f64::INFINITY;
    let mut stalled = 0;
    for iter in 0..ITERATION_CAP {
        if iter == PERIODIC_PATIENCE && shift == 0.0 {
            // oscillation means a periodic component; M + I is primitive
            shift = 1.0;
            x.fill(1.0 / n as f64);
            best_gap = f64::INFINITY;
            stalled = 0;
        }
        for (i, row) in rows.iter().enumerate() {
            y[i] = shift * x[i] + row.iter().map(|&(j, v)| v * x[j]).sum::<f64>();
        }
        let (lo, hi) = x
            .iter()
            .zip(&y)
            .map(|(&a, &b)| b / a)
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r), hi.max(r)));
        let norm: f64 = y.iter().sum();
        for (a, b) in x.iter_mut().zip(&y) {
            *a = b / norm;
        }
        let gap = hi - lo;
        if gap <= 4.0 * f64::EPSILON * hi {
            return Ok(((lo + hi) / 2.0 - shift, x));
        }
        // rounding can keep the bounds a few ulps apart forever
        if gap < best_gap {
            best_gap = gap;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= STALL_LIMIT && best_gap <= 1e-13 * hi {
                return Ok(((lo + hi) / 2.0 - shift, x));
            }
        }
    }
    Err(Error::Convergence(format!(
        "power iteration did not settle within {ITERATION_CAP} steps"
    )))
}

fn transpose(rows: &[Vec<(usize, f64)>]) -> Vec<Vec<(usize, f64)>> {
    let mut out = vec![Vec::new(); rows.len()];
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            out[j].push((i, v));
        }
    }
    out
}

/// `λ'(1) / λ(1)` on one recurrent component.
fn component_rate(block: &[Vec<(usize, u32)>]) -> Result<(f64, f64)> {
    let values: Vec<Vec<(usize, f64)>> = block
        .iter()
        .map(|row| row.iter().map(|&(j, _)| (j, 1.0)).collect())
        .collect();
    let (lambda, right) = perron(&values)?;
    let (_, left) = perron(&transpose(&values))?;
    let mut num = 0.0;
    for (i, row) in block.iter().enumerate() {
        for &(j, t) in row {
            num += left[i] * t as f64 * right[j];
        }
    }
    let den: f64 = left.iter().zip(&right).map(|(a, b)| a * b).sum();
    Ok((lambda, num / den / lambda))
}

/// Iterates value and derivative vectors at `z = 1` until the per-column
/// increment of the mean occupancy stops changing. The derivative is kept
/// centred, `d - mean · v`, so the increment never comes from subtracting
/// two large means.
fn finite_slope(tm: &TransferMatrix, tol: f64) -> Result<f64> {
    let n = tm.dim();
    let rows: DenseRows = (0..n)
        .map(|i| tm.row(i).iter().map(|&(j, t)| (j, 1.0, t as f64)).collect())
        .collect();
    let accept = tm.accepting();
    let mut value = vec![0.0; n];
    let mut centred = vec![0.0; n];
    value[tm.start()] = 1.0;
    let mut next_v = vec![0.0; n];
    let mut next_d = vec![0.0; n];
    let mut seen_accepting = false;
    let mut prev_slope: Option<f64> = None;
    let mut calm = 0;
    for step in 0..ITERATION_CAP {
        next_v.fill(0.0);
        next_d.fill(0.0);
        for (i, row) in rows.iter().enumerate() {
            if value[i] == 0.0 && centred[i] == 0.0 {
                continue;
            }
            for &(j, w, t) in row {
                next_v[j] += value[i] * w;
                next_d[j] += centred[i] * w + value[i] * t;
            }
        }
        let scale = next_v.iter().cloned().fold(0.0, f64::max);
        if scale == 0.0 {
            return Err(Error::Convergence("no configurations of large width".into()));
        }
        for (v, d) in next_v.iter_mut().zip(next_d.iter_mut()) {
            *v /= scale;
            *d /= scale;
        }
        let (w, dw) = (0..n)
            .filter(|&i| accept[i])
            .fold((0.0, 0.0), |(w, dw), i| (w + next_v[i], dw + next_d[i]));
        std::mem::swap(&mut value, &mut next_v);
        std::mem::swap(&mut centred, &mut next_d);
        if w == 0.0 {
            // no accepted word at this width; the centring has to restart
            seen_accepting = false;
            prev_slope = None;
            continue;
        }
        let increment = dw / w;
        for (d, v) in centred.iter_mut().zip(&value) {
            *d -= increment * v;
        }
        if !seen_accepting {
            seen_accepting = true;
            continue;
        }
        let slope = increment / tm.grid_rows() as f64;
        if let Some(ps) = prev_slope {
            if (slope - ps).abs() < tol * 1e-3 {
                calm += 1;
            } else {
                calm = 0;
            }
            if calm >= 20 && step > 100 {
                return Ok(slope);
            }
        }
        prev_slope = Some(slope);
    }
    Err(Error::Convergence(
        "finite-width slope did not settle".into(),
    ))
}

/// Limiting density of ones per cell among maximal `rows × s` configurations
/// as `s → ∞`, cross-checked against the finite-`s` slope to within `tol`.
pub fn limiting_density(rows: usize, set: &PatternSet, tol: f64, guards: &Guards) -> Result<Density> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let a = build_automaton(rows, set, guards)?;
    let tm = super::build_transfer(&a).trimmed();
    let mut best: Option<(f64, f64)> = None;
    for comp in tm.recurrent_components() {
        let (lambda, rate) = component_rate(&tm.block(&comp))?;
        if best.is_none_or(|(l, _)| lambda > l) {
            best = Some((lambda, rate));
        }
    }
    let (growth, rate) = best.ok_or_else(|| {
        Error::InvalidInput("only finitely many widths admit maximal configurations".into())
    })?;
    let density = rate / rows as f64;
    let crosscheck = finite_slope(&tm, tol)?;
    if (density - crosscheck).abs() > tol {
        return Err(Error::Convergence(format!(
            "perturbation density {density} and finite-width slope {crosscheck} differ by more than {tol}"
        )));
    }
    Ok(Density {
        density,
        crosscheck,
        growth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::builtin;

    #[test]
    fn perron_of_small_matrices() {
        // golden ratio
        let fib = vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 1.0)]];
        let (l, _) = perron(&fib).unwrap();
        assert!((l - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-14);
        // periodic 2-cycle needs the shift
        let cyc = vec![vec![(1, 1.0)], vec![(0, 1.0)]];
        let (l, v) = perron(&cyc).unwrap();
        assert!((l - 1.0).abs() < 1e-12);
        assert!((v[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn hrun2_density() {
        let d = limiting_density(1, &builtin("hrun", Some(2)).unwrap(), 1e-9, &Guards::default())
            .unwrap();
        assert!((d.density - 0.411_495_588_662_645_76).abs() < 1e-12, "{d:?}");
        // plastic number: growth of g_n(1) = g_{n-2} + g_{n-3}
        assert!((d.growth - 1.324_717_957_244_746).abs() < 1e-12);
    }

    #[test]
    fn single_state_density() {
        // one row under a 2×2 block: only the full row is maximal
        let d = limiting_density(1, &builtin("block22", None).unwrap(), 1e-9, &Guards::default())
            .unwrap();
        assert!((d.density - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let set = builtin("hrun", Some(2)).unwrap();
        assert!(limiting_density(1, &set, 0.0, &Guards::default()).is_err());
        assert!(limiting_density(1, &set, f64::NAN, &Guards::default()).is_err());
    }

    #[test]
    fn json_rounds() {
        let d = Density {
            density: 0.411_495_588_662_645_76,
            crosscheck: 0.411_495_588_662_6,
            growth: 1.0,
        };
        assert_eq!(
            d.to_json().to_string(),
            r#"{"crosscheck":0.411495588663,"density":0.411495588663,"method":"perturbation"}"#
        );
    }
}
