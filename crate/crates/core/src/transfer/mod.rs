//! The `z`-weighted transfer matrix of the seating machine and everything
//! computed from it: weight enumerators, the bivariate generating function
//! and the limiting density.

mod density;
mod det;

use std::collections::{HashMap, HashSet};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use petgraph::algo::kosaraju_scc;
use petgraph::graph::DiGraph;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::automaton::{build_automaton, build_automaton_bounded, Automaton};
use crate::error::{Error, Guards, Result};
use crate::pattern::PatternSet;
use crate::poly::{numerator_from_series, series_expand, BivarPoly, BivarRational, PolyQ, PolyZ};

pub use density::{limiting_density, round_sig, Density, DEFAULT_TOLERANCE};
pub use det::{det_one_minus_x, det_one_minus_x_stabilized, MonomialMatrix};

/// Upper bound on `s · transitions · degree` for one enumeration.
const WORK_LIMIT: u128 = 1_000_000_000_000;

/// `W(z)` for a fixed grid: the coefficient of `z^m` counts maximal
/// avoiding `rows × cols` matrices with `m` ones.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightEnumerator {
    pub rows: usize,
    pub cols: usize,
    pub patterns: Option<String>,
    pub poly: PolyZ,
}

impl WeightEnumerator {
    pub fn new(rows: usize, cols: usize, set: &PatternSet, poly: PolyZ) -> Self {
        WeightEnumerator {
            rows,
            cols,
            patterns: set.name().map(str::to_owned),
            poly,
        }
    }

    /// Total number of maximal configurations, `W(1)`.
    pub fn total(&self) -> BigInt {
        self.poly.eval_one()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "rows": self.rows,
            "cols": self.cols,
            "patterns": self.patterns,
            "poly": self.poly.to_json(),
            "text": self.poly.to_string(),
            "total": self.total().to_string(),
            "min_degree": self.poly.min_degree(),
            "max_degree": self.poly.degree(),
        })
    }
}

/// Sparse matrix of monomials `z^t` with start and accept vectors.
#[derive(Clone, Debug)]
pub struct TransferMatrix {
    rows: usize,
    entries: MonomialMatrix,
    start: usize,
    accept: Vec<bool>,
}

impl TransferMatrix {
    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    /// Row `i`: pairs `(j, t)` meaning entry `z^t` at `(i, j)`.
    pub fn row(&self, i: usize) -> &[(usize, u32)] {
        &self.entries[i]
    }

    pub fn num_entries(&self) -> usize {
        self.entries.iter().map(Vec::len).sum()
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn accepting(&self) -> &[bool] {
        &self.accept
    }

    /// Grid row count the matrix was built for.
    pub fn grid_rows(&self) -> usize {
        self.rows
    }

    /// `W_0(z), …, W_max(z)` by iterated sparse vector-matrix products.
    pub fn enumerators(&self, max_cols: usize) -> Result<Vec<PolyZ>> {
        let work = max_cols as u128 * self.num_entries().max(1) as u128
            * (self.rows * max_cols + 1) as u128;
        Guards::check("enumeration work", work, WORK_LIMIT)?;

        let mut incoming: Vec<Vec<(usize, usize)>> = vec![Vec::new(); self.dim()];
        for (i, row) in self.entries.iter().enumerate() {
            for &(j, t) in row {
                incoming[j].push((i, t as usize));
            }
        }
        let mut vec: Vec<Counts> = vec![Counts::default(); self.dim()];
        vec[self.start] = Counts::one();
        let mut out = vec![self.collect(&vec)];
        for _ in 0..max_cols {
            vec = incoming
                .par_iter()
                .map(|sources| {
                    let mut acc = Counts::default();
                    for &(i, t) in sources {
                        acc.add_shifted(&vec[i], t);
                    }
                    acc
                })
                .collect();
            out.push(self.collect(&vec));
        }
        Ok(out)
    }

    fn collect(&self, vec: &[Counts]) -> PolyZ {
        let mut acc = Counts::default();
        for (c, _) in vec.iter().zip(&self.accept).filter(|(_, &a)| a) {
            acc.add_shifted(c, 0);
        }
        acc.into_poly()
    }

    /// States reachable from the start that can also reach acceptance.
    fn live_states(&self) -> Vec<bool> {
        let n = self.dim();
        let mut forward = vec![false; n];
        forward[self.start] = true;
        let mut stack = vec![self.start];
        while let Some(i) = stack.pop() {
            for &(j, _) in &self.entries[i] {
                if !forward[j] {
                    forward[j] = true;
                    stack.push(j);
                }
            }
        }
        let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, row) in self.entries.iter().enumerate() {
            for &(j, _) in row {
                reverse[j].push(i);
            }
        }
        let mut backward = self.accept.clone();
        let mut stack: Vec<usize> = (0..n).filter(|&i| backward[i]).collect();
        while let Some(j) = stack.pop() {
            for &i in &reverse[j] {
                if !backward[i] {
                    backward[i] = true;
                    stack.push(i);
                }
            }
        }
        forward.iter().zip(&backward).map(|(&a, &b)| a && b).collect()
    }

    /// Restriction to live states, renumbered in increasing order.
    pub fn trimmed(&self) -> TransferMatrix {
        let live = self.live_states();
        let mut new_index = vec![usize::MAX; self.dim()];
        let mut next = 0;
        for (i, &l) in live.iter().enumerate() {
            if l {
                new_index[i] = next;
                next += 1;
            }
        }
        let entries = (0..self.dim())
            .filter(|&i| live[i])
            .map(|i| {
                self.entries[i]
                    .iter()
                    .filter(|&&(j, _)| live[j])
                    .map(|&(j, t)| (new_index[j], t))
                    .collect()
            })
            .collect();
        TransferMatrix {
            rows: self.rows,
            entries,
            start: new_index[self.start],
            accept: (0..self.dim())
                .filter(|&i| live[i])
                .map(|i| self.accept[i])
                .collect(),
        }
    }

    /// Quotient by the coarsest partition in which states of a class agree
    /// on acceptance and send the same number of `z^t` entries into every
    /// class. Every `u^T M^s v` is unchanged, so the enumerators and the
    /// generating function are too. Parallel entries carry multiplicity.
    pub fn lumped(&self) -> TransferMatrix {
        let n = self.dim();
        let mut class: Vec<usize> = self.accept.iter().map(|&a| a as usize).collect();
        let mut count = class.iter().copied().collect::<HashSet<_>>().len();
        loop {
            let mut ids: HashMap<(usize, Vec<(usize, u32)>), usize> = HashMap::new();
            let next: Vec<usize> = (0..n)
                .map(|i| {
                    let mut sig: Vec<(usize, u32)> =
                        self.entries[i].iter().map(|&(j, t)| (class[j], t)).collect();
                    sig.sort_unstable();
                    let fresh = ids.len();
                    *ids.entry((class[i], sig)).or_insert(fresh)
                })
                .collect();
            class = next;
            if ids.len() == count {
                break;
            }
            count = ids.len();
        }
        let mut rep = vec![usize::MAX; count];
        for i in (0..n).rev() {
            rep[class[i]] = i;
        }
        TransferMatrix {
            rows: self.rows,
            entries: rep
                .iter()
                .map(|&i| self.entries[i].iter().map(|&(j, t)| (class[j], t)).collect())
                .collect(),
            start: class[self.start],
            accept: rep.iter().map(|&i| self.accept[i]).collect(),
        }
    }

    /// Strongly connected components that carry at least one cycle, each as
    /// a sorted list of state indices.
    pub fn recurrent_components(&self) -> Vec<Vec<usize>> {
        let mut g: DiGraph<(), ()> = DiGraph::with_capacity(self.dim(), self.num_entries());
        let nodes: Vec<_> = (0..self.dim()).map(|_| g.add_node(())).collect();
        for (i, row) in self.entries.iter().enumerate() {
            for &(j, _) in row {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
        let mut comps: Vec<Vec<usize>> = kosaraju_scc(&g)
            .into_iter()
            .map(|c| {
                let mut v: Vec<usize> = c.into_iter().map(|n| n.index()).collect();
                v.sort_unstable();
                v
            })
            .filter(|c| c.len() > 1 || self.entries[c[0]].iter().any(|&(j, _)| j == c[0]))
            .collect();
        comps.sort();
        comps
    }

    /// The block of the matrix on `states`, renumbered `0..states.len()`.
    pub fn block(&self, states: &[usize]) -> MonomialMatrix {
        let pos = |j: usize| states.binary_search(&j).ok();
        states
            .iter()
            .map(|&i| {
                self.entries[i]
                    .iter()
                    .filter_map(|&(j, t)| pos(j).map(|k| (k, t)))
                    .collect()
            })
            .collect()
    }
}

/// Dense polynomial with nonnegative coefficients stored from degree `low`.
#[derive(Clone, Debug, Default)]
struct Counts {
    low: usize,
    coeffs: Vec<BigUint>,
}

impl Counts {
    fn one() -> Self {
        Counts {
            low: 0,
            coeffs: vec![BigUint::one()],
        }
    }

    /// `self += z^shift · other`.
    fn add_shifted(&mut self, other: &Counts, shift: usize) {
        if other.coeffs.is_empty() {
            return;
        }
        let olow = other.low + shift;
        if self.coeffs.is_empty() {
            self.low = olow;
            self.coeffs = other.coeffs.clone();
            return;
        }
        if olow < self.low {
            let pad = self.low - olow;
            let mut v = vec![BigUint::zero(); pad];
            v.append(&mut self.coeffs);
            self.coeffs = v;
            self.low = olow;
        }
        let offset = olow - self.low;
        let need = offset + other.coeffs.len();
        if self.coeffs.len() < need {
            self.coeffs.resize(need, BigUint::zero());
        }
        for (dst, src) in self.coeffs[offset..].iter_mut().zip(&other.coeffs) {
            *dst += src;
        }
    }

    fn into_poly(self) -> PolyZ {
        let mut v = vec![BigInt::zero(); self.low];
        v.extend(self.coeffs.into_iter().map(BigInt::from));
        PolyZ::from_coeffs(v)
    }
}

/// Reads the transfer matrix off the automaton: one entry `z^{ones(c)}` per
/// transition on column `c`.
pub fn build_transfer(a: &Automaton) -> TransferMatrix {
    let entries: MonomialMatrix = (0..a.num_states())
        .map(|i| {
            a.transitions(i)
                .iter()
                .map(|t| (t.target, t.weight))
                .collect()
        })
        .collect();
    debug_assert!(entries.iter().all(|row| {
        let mut js: Vec<usize> = row.iter().map(|e| e.0).collect();
        js.sort_unstable();
        js.windows(2).all(|w| w[0] != w[1])
    }));
    TransferMatrix {
        rows: a.rows(),
        entries,
        start: a.initial(),
        accept: (0..a.num_states()).map(|i| a.is_accepting(i)).collect(),
    }
}

/// Exact `W_{rows, cols}(z)`.
pub fn weight_enumerator(
    rows: usize,
    cols: usize,
    set: &PatternSet,
    guards: &Guards,
) -> Result<WeightEnumerator> {
    let a = build_automaton_bounded(rows, set, guards, cols)?;
    let tm = build_transfer(&a);
    let poly = tm
        .enumerators(cols)?
        .pop()
        .expect("at least W_0");
    Ok(WeightEnumerator::new(rows, cols, set, poly))
}

/// The bivariate generating function `Σ_s W_s(z) x^s` together with the
/// data it was derived from.
#[derive(Clone, Debug)]
pub struct GeneratingFunction {
    pub function: BivarRational,
    /// States of the reduced transfer matrix the denominator was taken over.
    pub dim: usize,
    /// `W_0, …, W_{2 dim}`, used to form and check the numerator.
    pub series: Vec<PolyZ>,
}

/// `f(z, x) = u^T (I - xM)^{-1} v` with `u` the start indicator and `v` the
/// accept indicator, after trimming to live states and lumping equivalent
/// ones. The denominator is `det(I - xM)` over the remaining states,
/// assembled as a product over recurrent components since the matrix is
/// block triangular in their topological order. The numerator is
/// `den · Σ W_s x^s` truncated at `x^dim`; its true degree is below `dim`.
pub fn generating_function(
    rows: usize,
    set: &PatternSet,
    guards: &Guards,
) -> Result<GeneratingFunction> {
    let a = build_automaton(rows, set, guards)?;
    let tm = build_transfer(&a).trimmed().lumped();
    let dim = tm.dim();
    let series = tm.enumerators(2 * dim)?;
    let assemble = |det: fn(&MonomialMatrix) -> BivarPoly| -> Result<BivarRational> {
        let mut den = BivarPoly::one();
        for comp in tm.recurrent_components() {
            den = &den * &det(&tm.block(&comp));
        }
        let num = numerator_from_series(&den, &series, dim);
        BivarRational::new(num, den)
            .map_err(|e| Error::Internal(format!("denominator not normalized: {e}")))
    };
    // numerator and denominator degrees are at most dim, so agreement
    // through x^{2 dim} pins the rational function down
    let mut function = assemble(det_one_minus_x_stabilized)?;
    if series_expand(&function, 2 * dim) != series {
        function = assemble(det_one_minus_x)?;
        if series_expand(&function, 2 * dim) != series {
            return Err(Error::Internal("generating function disagrees with its series".into()));
        }
    }
    Ok(GeneratingFunction {
        function,
        dim,
        series,
    })
}

/// The uniform probability generating function `V(z) = W(z) / W(1)`.
pub fn probability_gf(w: &WeightEnumerator) -> Result<PolyQ> {
    let total = w.total();
    if total.is_zero() {
        return Err(Error::Internal(format!(
            "no maximal configurations for {}x{}",
            w.rows, w.cols
        )));
    }
    Ok(w.poly.to_q().scale(&BigRational::new(BigInt::one(), total)))
}

/// Mean number of ones under the uniform distribution, `W'(1) / W(1)`.
pub fn expected_occupancy(w: &WeightEnumerator) -> Result<BigRational> {
    let total = w.total();
    if total.is_zero() {
        return Err(Error::Internal("no maximal configurations".into()));
    }
    Ok(BigRational::new(w.poly.derivative().eval_one(), total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::builtin;
    use crate::poly::series_expand;

    fn hrun2() -> PatternSet {
        builtin("hrun", Some(2)).unwrap()
    }

    fn pz(c: &[i64]) -> PolyZ {
        PolyZ::from_i64s(c)
    }

    fn we(poly: PolyZ) -> WeightEnumerator {
        WeightEnumerator::new(1, 1, &hrun2(), poly)
    }

    #[test]
    fn transfer_shape() {
        let a = build_automaton(1, &hrun2(), &Guards::default()).unwrap();
        let tm = build_transfer(&a);
        assert_eq!(tm.dim(), a.num_states());
        assert_eq!(tm.num_entries(), a.num_transitions());
        assert!((0..tm.dim()).all(|i| tm.row(i).iter().all(|&(_, t)| t <= 1)));

        let kings = build_automaton(5, &builtin("kings", None).unwrap(), &Guards::default()).unwrap();
        let tm = build_transfer(&kings);
        let max_t = (0..tm.dim()).flat_map(|i| tm.row(i).iter().map(|e| e.1)).max();
        assert_eq!(max_t, Some(3));
    }

    #[test]
    fn small_enumerators() {
        let g = Guards::default();
        assert_eq!(weight_enumerator(1, 3, &hrun2(), &g).unwrap().poly, pz(&[0, 1, 1]));
        assert_eq!(weight_enumerator(1, 2, &hrun2(), &g).unwrap().poly, pz(&[0, 2]));
        assert_eq!(weight_enumerator(1, 0, &hrun2(), &g).unwrap().poly, pz(&[1]));
        let kings = builtin("kings", None).unwrap();
        assert_eq!(weight_enumerator(2, 2, &kings, &g).unwrap().poly, pz(&[0, 4]));
    }

    #[test]
    fn f2_matches_printed_form() {
        let gf = generating_function(1, &hrun2(), &Guards::default()).unwrap();
        let printed =
            BivarRational::parse("-(x^{2} z +x z +1)", "x^{3} z +x^{2} z -1").unwrap();
        assert!(crate::poly::cross_equal(&gf.function, &printed));
        let expanded = series_expand(&gf.function, 2 * gf.dim);
        let direct = build_transfer(&build_automaton(1, &hrun2(), &Guards::default()).unwrap())
            .enumerators(2 * gf.dim)
            .unwrap();
        assert_eq!(expanded, direct);
    }

    #[test]
    fn pgf_and_mean() {
        let v = probability_gf(&we(pz(&[0, 1, 1]))).unwrap();
        assert_eq!(v.eval_one(), BigRational::one());
        assert_eq!(v.coeff(1), BigRational::new(1.into(), 2.into()));
        assert_eq!(probability_gf(&we(pz(&[0, 2]))).unwrap(), pz(&[0, 1]).to_q());
        assert_eq!(probability_gf(&we(pz(&[1]))).unwrap(), PolyQ::one());
        assert!(probability_gf(&we(PolyZ::zero())).is_err());

        assert_eq!(
            expected_occupancy(&we(pz(&[0, 1, 1]))).unwrap(),
            BigRational::new(3.into(), 2.into())
        );
        assert_eq!(expected_occupancy(&we(pz(&[0, 2]))).unwrap(), BigRational::one());
        assert_eq!(expected_occupancy(&we(pz(&[0, 4]))).unwrap(), BigRational::one());
    }

    #[test]
    fn trimming_keeps_the_series() {
        let set = builtin("tblock", None).unwrap();
        let full = build_transfer(&build_automaton(3, &set, &Guards::default()).unwrap());
        let trimmed = full.trimmed();
        assert!(trimmed.dim() <= full.dim());
        assert_eq!(full.enumerators(8).unwrap(), trimmed.enumerators(8).unwrap());
    }

    #[test]
    fn lumping_keeps_the_series() {
        for (rows, name, param) in [(3, "tblock", None), (2, "hrun", Some(4)), (2, "spaced", Some(2))] {
            let set = builtin(name, param).unwrap();
            let live = build_transfer(&build_automaton(rows, &set, &Guards::default()).unwrap())
                .trimmed();
            let lumped = live.lumped();
            assert!(lumped.dim() < live.dim(), "{name}: {} states", live.dim());
            assert_eq!(live.enumerators(12).unwrap(), lumped.enumerators(12).unwrap());
            // idempotent
            assert_eq!(lumped.lumped().dim(), lumped.dim());
        }
    }

    #[test]
    fn enumerator_json() {
        let w = weight_enumerator(1, 2, &hrun2(), &Guards::default()).unwrap();
        let v = w.to_json();
        assert_eq!(v["text"], "2z");
        assert_eq!(v["total"], "2");
        assert_eq!(v["min_degree"], 1);
        assert_eq!(v["patterns"], "hrun:2");
    }
}
