//! `det(I - x M(z))` for a sparse matrix of monomials `z^t`, computed exactly
//! by evaluation at integer `z`, characteristic polynomials over prime
//! fields (Hessenberg reduction), interpolation in `z`, and Chinese
//! remaindering under an a-priori coefficient bound.

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};

use crate::poly::{BivarPoly, PolyZ};

/// Row-major sparse matrix: `rows[i]` lists `(j, t)` for entry `z^t` at `(i, j)`.
pub type MonomialMatrix = Vec<Vec<(usize, u32)>>;

/// Operands are below `p < 2^31`, so the product fits in a `u64`.
fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    a * b % p
}

fn pow_mod(mut base: u64, mut exp: u64, p: u64) -> u64 {
    let mut acc = 1u64 % p;
    base %= p;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, p);
        }
        base = mul_mod(base, base, p);
        exp >>= 1;
    }
    acc
}

fn inv_mod(a: u64, p: u64) -> u64 {
    pow_mod(a, p - 2, p)
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &b in &BASES {
        if n.is_multiple_of(b) {
            return n == b;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

const PRIME_BITS: u64 = 31;

/// Distinct primes just below `2^31`, largest first.
fn primes() -> impl Iterator<Item = u64> {
    ((1u64 << (PRIME_BITS - 1))..(1u64 << PRIME_BITS)).rev().filter(|&n| is_prime(n))
}

/// Coefficients `c_0 = 1, c_1, …, c_n` of `det(λI - A) = Σ c_k λ^{n-k}` over
/// `GF(p)`. Destroys `a`.
fn charpoly_mod(a: &mut [Vec<u64>], p: u64) -> Vec<u64> {
    let n = a.len();
    // similarity reduction to upper Hessenberg form
    for j in 0..n.saturating_sub(2) {
        let Some(piv) = (j + 1..n).find(|&i| a[i][j] != 0) else {
            continue;
        };
        if piv != j + 1 {
            a.swap(piv, j + 1);
            for row in a.iter_mut() {
                row.swap(piv, j + 1);
            }
        }
        let inv = inv_mod(a[j + 1][j], p);
        for k in j + 2..n {
            if a[k][j] == 0 {
                continue;
            }
            let u = mul_mod(a[k][j], inv, p);
            // row_k -= u * row_{j+1}
            let (upper, lower) = a.split_at_mut(k);
            let src = &upper[j + 1];
            for (dst, &s) in lower[0].iter_mut().zip(src) {
                *dst = (*dst + p - mul_mod(u, s, p)) % p;
            }
            // col_{j+1} += u * col_k
            for row in a.iter_mut() {
                row[j + 1] = (row[j + 1] + mul_mod(u, row[k], p)) % p;
            }
        }
    }
    // p_m(λ) = (λ - h_mm) p_{m-1} - Σ_i h_{m-i,m} (Π subdiagonal) p_{m-i-1};
    // stored as coefficient lists indexed by power of λ.
    let mut polys: Vec<Vec<u64>> = vec![vec![1]];
    for m in 1..=n {
        let prev = &polys[m - 1];
        let mut cur = vec![0u64; m + 1];
        for (k, &c) in prev.iter().enumerate() {
            cur[k + 1] = (cur[k + 1] + c) % p;
            cur[k] = (cur[k] + p - mul_mod(a[m - 1][m - 1], c, p)) % p;
        }
        let mut t = 1u64;
        for i in 1..m {
            t = mul_mod(t, a[m - i][m - i - 1], p);
            if t == 0 {
                break;
            }
            let f = mul_mod(t, a[m - i - 1][m - 1], p);
            if f == 0 {
                continue;
            }
            for (k, &c) in polys[m - i - 1].iter().enumerate() {
                cur[k] = (cur[k] + p - mul_mod(f, c, p)) % p;
            }
        }
        polys.push(cur);
    }
    // reverse so that index k holds the coefficient of λ^{n-k}
    polys.pop().expect("n + 1 polynomials").into_iter().rev().collect()
}

/// Newton-form interpolation over `GF(p)` that accepts one node at a time.
struct Newton {
    p: u64,
    nodes: Vec<u64>,
    /// `diag[l]` is the divided difference over the last `l + 1` nodes.
    diag: Vec<u64>,
    coeffs: Vec<u64>,
}

impl Newton {
    fn new(p: u64) -> Self {
        Newton {
            p,
            nodes: Vec::new(),
            diag: Vec::new(),
            coeffs: Vec::new(),
        }
    }

    /// `inverses[l - 1]` is `1 / (node - x_{m-l})` for the `m` earlier nodes.
    fn push(&mut self, node: u64, value: u64, inverses: &[u64]) {
        let p = self.p;
        let m = self.nodes.len();
        let mut next = Vec::with_capacity(m + 1);
        next.push(value);
        for l in 1..=m {
            let diff = (next[l - 1] + p - self.diag[l - 1]) % p;
            next.push(mul_mod(diff, inverses[l - 1], p));
        }
        self.coeffs.push(next[m]);
        self.diag = next;
        self.nodes.push(node);
    }

    /// The last `k` Newton coefficients are all zero.
    fn settled(&self, k: usize) -> bool {
        self.coeffs.len() > k && self.coeffs.iter().rev().take(k).all(|&c| c == 0)
    }

    fn into_monomial(self) -> Vec<u64> {
        let p = self.p;
        let n = self.coeffs.len();
        let mut out = vec![0u64; n];
        // Horner: out = out * (z - node_k) + c_k
        for k in (0..n).rev() {
            let shift = self.nodes[k];
            let mut next = vec![0u64; n];
            for d in 0..n {
                if out[d] == 0 {
                    continue;
                }
                if d + 1 < n {
                    next[d + 1] = (next[d + 1] + out[d]) % p;
                }
                next[d] = (next[d] + p - mul_mod(out[d], shift, p)) % p;
            }
            next[0] = (next[0] + self.coeffs[k]) % p;
            out = next;
        }
        out
    }
}

/// Monomial-basis coefficients of the polynomial through `(k, values[k])`,
/// `k = 0, 1, …`, over `GF(p)`.
#[cfg(test)]
fn interpolate_mod(values: &[u64], p: u64) -> Vec<u64> {
    let mut newton = Newton::new(p);
    for (k, &v) in values.iter().enumerate() {
        let inverses: Vec<u64> = (1..=k as u64).map(|l| inv_mod(l, p)).collect();
        newton.push(k as u64, v, &inverses);
    }
    newton.into_monomial()
}

/// Bits needed to bound every integer coefficient of `det(I - xM)`.
/// Expanding the determinant, the absolute coefficient sum is at most
/// `Π_i (1 + #nonzeros in row i)`.
fn coefficient_bound_bits(m: &MonomialMatrix) -> u64 {
    m.iter()
        .map(|row| ((row.len() + 1) as f64).log2())
        .sum::<f64>()
        .ceil() as u64
}

/// Exact `det(I - x M(z))` as a polynomial in `x` with `Z[z]` coefficients.
pub fn det_one_minus_x(m: &MonomialMatrix) -> BivarPoly {
    det_with(m, false)
}

/// Like [`det_one_minus_x`] but stops adding primes once the lifted result
/// survives one extra prime unchanged, instead of running to the a-priori
/// bound. The bound is still the hard stop. Callers verify the result.
pub fn det_one_minus_x_stabilized(m: &MonomialMatrix) -> BivarPoly {
    det_with(m, true)
}

/// Zero Newton coefficients in a row that end interpolation early.
const SETTLE_RUN: usize = 3;
/// Early interpolation nodes start here rather than at 0.
const NODE_OFFSET: u64 = 0x9E37_79B9;

/// Coefficients in `z` of each `c_k` over `GF(p)`, from values at up to
/// `points` nodes. With `early` the nodes are shifted and evaluation stops
/// once every `c_k` has settled.
fn residues_mod(m: &MonomialMatrix, points: usize, p: u64, early: bool) -> Vec<Vec<u64>> {
    let n = m.len();
    let mut newton: Vec<Newton> = (0..=n).map(|_| Newton::new(p)).collect();
    let start = if early { NODE_OFFSET % p } else { 0 };
    // nodes are consecutive residues, so node differences are 1, 2, …, i
    let mut inverses: Vec<u64> = Vec::with_capacity(points);
    for i in 0..points {
        let node = (start + i as u64) % p;
        if i > 0 {
            inverses.push(inv_mod(i as u64, p));
        }
        let mut a = vec![vec![0u64; n]; n];
        for (r, row) in m.iter().enumerate() {
            for &(j, t) in row {
                a[r][j] = (a[r][j] + pow_mod(node, t as u64, p)) % p;
            }
        }
        for (k, c) in charpoly_mod(&mut a, p).into_iter().enumerate() {
            newton[k].push(node, c, &inverses);
        }
        if early && newton.iter().all(|nw| nw.settled(SETTLE_RUN)) {
            break;
        }
    }
    newton.into_iter().map(Newton::into_monomial).collect()
}

/// Symmetric Chinese-remainder lift of all coefficients (Garner's scheme).
fn lift(residues: &[(u64, Vec<Vec<u64>>)]) -> BivarPoly {
    let modulus: BigInt = residues.iter().map(|(p, _)| BigInt::from(*p)).product();
    let half = &modulus >> 1;
    let n1 = residues[0].1.len();
    let points = residues
        .iter()
        .flat_map(|(_, c)| c.iter().map(Vec::len))
        .max()
        .unwrap_or(0);
    let one = |k: usize, d: usize| -> BigInt {
        let mut x = BigInt::zero();
        let mut acc = BigInt::one();
        for (p, coeffs) in residues {
            let pb = BigInt::from(*p);
            let reduce = |v: &BigInt| (v % &pb).to_u64().expect("residue fits u64");
            let r = coeffs[k].get(d).copied().unwrap_or(0);
            let delta = (r + p - reduce(&x)) % p;
            let factor = mul_mod(delta, inv_mod(reduce(&acc), *p), *p);
            x += &acc * factor;
            acc *= pb;
        }
        if x > half {
            x - &modulus
        } else {
            x
        }
    };
    let coeffs = (0..n1)
        .map(|k| PolyZ::from_coeffs((0..points).map(|d| one(k, d)).collect()))
        .collect();
    BivarPoly::from_coeffs(coeffs)
}

fn det_with(m: &MonomialMatrix, stop_when_stable: bool) -> BivarPoly {
    if m.is_empty() {
        return BivarPoly::one();
    }
    let z_degree: usize = m
        .iter()
        .map(|row| row.iter().map(|&(_, t)| t as usize).max().unwrap_or(0))
        .sum();
    let points = z_degree + 1;
    let needed_bits = coefficient_bound_bits(m) + 2;

    let mut residues: Vec<(u64, Vec<Vec<u64>>)> = Vec::new();
    let mut previous: Option<BivarPoly> = None;
    let mut bits = 0u64;
    for p in primes() {
        if bits >= needed_bits {
            break;
        }
        residues.push((p, residues_mod(m, points, p, stop_when_stable)));
        bits += PRIME_BITS - 1;
        if stop_when_stable {
            let current = lift(&residues);
            if previous.as_ref() == Some(&current) {
                return current;
            }
            previous = Some(current);
        }
    }
    match previous {
        Some(done) if stop_when_stable => done,
        _ => lift(&residues),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Cofactor expansion over Z[z][x]; the independent route.
    fn det_bruteforce(m: &MonomialMatrix) -> BivarPoly {
        let n = m.len();
        let mut entries = vec![vec![BivarPoly::zero(); n]; n];
        for i in 0..n {
            entries[i][i] = BivarPoly::one();
            for &(j, t) in &m[i] {
                let term = BivarPoly::from_coeffs(vec![PolyZ::zero(), -PolyZ::monomial(1, t as usize)]);
                entries[i][j] = &entries[i][j] + &term;
            }
        }
        fn expand(e: &[Vec<BivarPoly>], cols: &[usize]) -> BivarPoly {
            if cols.is_empty() {
                return BivarPoly::one();
            }
            let row = e.len() - cols.len();
            let mut acc = BivarPoly::zero();
            for (k, &c) in cols.iter().enumerate() {
                if e[row][c].is_zero() {
                    continue;
                }
                let rest: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
                let minor = &e[row][c] * &expand(e, &rest);
                acc = if k % 2 == 0 { &acc + &minor } else { &acc - &minor };
            }
            acc
        }
        let cols: Vec<usize> = (0..n).collect();
        expand(&entries, &cols)
    }

    #[test]
    fn primes_are_prime() {
        let ps: Vec<u64> = primes().take(3).collect();
        assert_eq!(ps, vec![2_147_483_647, 2_147_483_629, 2_147_483_587]);
        assert!(is_prime(1_000_000_007));
        assert!(!is_prime(2_147_483_649));
        assert!(!is_prime(1));
    }

    #[test]
    fn interpolation_recovers_polynomial() {
        let p = primes().next().unwrap();
        // 3 + 2z + 5z^3 with one negative coefficient: -1 z^2
        let f = |z: u64| (3 + 2 * z + 5 * z * z * z + p - (z * z) % p) % p;
        let values: Vec<u64> = (0..5).map(f).collect();
        assert_eq!(interpolate_mod(&values, p), vec![3, 2, p - 1, 5, 0]);
    }

    #[test]
    fn one_by_one_and_empty() {
        assert_eq!(det_one_minus_x(&vec![]), BivarPoly::one());
        let m: MonomialMatrix = vec![vec![(0, 1)]];
        assert_eq!(det_one_minus_x(&m), BivarPoly::parse("1 - x z").unwrap());
    }

    #[test]
    fn fibonacci_like() {
        // [[1, z], [1, 0]] -> 1 - x - x^2 z
        let m: MonomialMatrix = vec![vec![(0, 0), (1, 1)], vec![(0, 0)]];
        assert_eq!(det_one_minus_x(&m), BivarPoly::parse("1 - x - x^2 z").unwrap());
    }

    #[test]
    fn needs_pivoting() {
        // zero subdiagonal entry forces a row/column swap
        let m: MonomialMatrix = vec![
            vec![(1, 1), (2, 0)],
            vec![(0, 2)],
            vec![(0, 0), (2, 3)],
        ];
        assert_eq!(det_one_minus_x(&m), det_bruteforce(&m));
    }

    fn arb_matrix() -> impl Strategy<Value = MonomialMatrix> {
        (1usize..6).prop_flat_map(|n| {
            prop::collection::vec(
                prop::collection::vec(prop::option::of(0u32..4), n),
                n,
            )
            .prop_map(|rows| {
                rows.into_iter()
                    .map(|r| {
                        r.into_iter()
                            .enumerate()
                            .filter_map(|(j, t)| t.map(|t| (j, t)))
                            .collect()
                    })
                    .collect()
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn matches_cofactor_expansion(m in arb_matrix()) {
            let exact = det_bruteforce(&m);
            prop_assert_eq!(det_one_minus_x_stabilized(&m), exact.clone());
            prop_assert_eq!(det_one_minus_x(&m), exact);
        }
    }
}
