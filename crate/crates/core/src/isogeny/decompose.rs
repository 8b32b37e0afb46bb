//! Integer matrices `M` with `ᵗM·M = ℓ·Id` built from sums of squares, and
//! the parametrisation of the kernel of `t ↦ t·M` on `(Z/ℓZ)^r`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::gcd;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecomposeError {
    #[error("ell = {0} must be odd and at least 3")]
    BadEll(u64),
    #[error("ell = {ell} is not coprime to n = {n}")]
    NotCoprime { ell: u64, n: u32 },
    #[error("r must be 1, 2 or 4, got {0}")]
    BadR(usize),
    #[error("no decomposition of ell = {ell} with r = {r}")]
    Unavailable { ell: u64, r: usize },
}

/// A sum-of-squares decomposition and its matrix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquareDecomposition {
    pub ell: u64,
    /// The level `n` used to reduce `M⁻¹`.
    pub level: u32,
    /// Largest square dividing `ℓ`.
    pub ell1: u64,
    pub ell2: u64,
    /// The integer `s` with `M = s·M0`; `√ℓ1`, or 1 for a decomposition of
    /// `ℓ` itself.
    pub scale: u64,
    pub r: usize,
    pub t: usize,
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
    #[serde(rename = "M")]
    pub m: Vec<Vec<i64>>,
    #[serde(rename = "M_inv_n")]
    pub m_inv_n: Vec<Vec<u64>>,
    pub beta0: Option<u64>,
    pub alpha: Option<u64>,
    pub beta: Option<u64>,
    pub gamma: Option<u64>,
    pub delta: Option<u64>,
    /// Size of the kernel of multiplication by `s` on `K^t`, for `g = 1`;
    /// see [`SquareDecomposition::cardinal`].
    #[serde(rename = "N")]
    pub cardinal_g1: u64,
}

/// Smallest `d ≥ 0` with `d² = v`, if any.
fn exact_sqrt(v: u64) -> Option<u64> {
    let mut s = (v as f64).sqrt() as u64;
    while s * s > v {
        s -= 1;
    }
    while (s + 1) * (s + 1) <= v {
        s += 1;
    }
    (s * s == v).then_some(s)
}

/// Prime factorisation by trial division, with multiplicities.
pub fn factorize(mut v: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut q = 2;
    while q * q <= v {
        if v.is_multiple_of(q) {
            let mut e = 0;
            while v.is_multiple_of(q) {
                v /= q;
                e += 1;
            }
            out.push((q, e));
        }
        q += 1;
    }
    if v > 1 {
        out.push((v, 1));
    }
    out
}

/// `(s, ℓ2)` with `ℓ = s²·ℓ2` and `ℓ2` squarefree.
pub fn square_part(ell: u64) -> (u64, u64) {
    factorize(ell)
        .into_iter()
        .fold((1, 1), |(s, rest), (q, e)| (s * q.pow(e / 2), rest * q.pow(e % 2)))
}

pub(crate) fn inv_mod(a: i64, m: u64) -> Option<u64> {
    let m = m as i64;
    let (mut r0, mut r1) = (a.rem_euclid(m), m);
    let (mut s0, mut s1) = (1i64, 0i64);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    (r0 == 1 || m == 1).then(|| s0.rem_euclid(m) as u64)
}

fn rem(a: i64, m: u64) -> u64 {
    a.rem_euclid(m as i64) as u64
}

/// The two-square matrix `[[a, b], [−b, a]]`.
fn two_square_matrix(a: u64, b: u64) -> Vec<Vec<i64>> {
    let (a, b) = (a as i64, b as i64);
    vec![vec![a, b], vec![-b, a]]
}

/// Matrix of multiplication by the quaternion `a + bi + cj + dk`.
fn quaternion_matrix(a: u64, b: u64, c: u64, d: u64) -> Vec<Vec<i64>> {
    let (a, b, c, d) = (a as i64, b as i64, c as i64, d as i64);
    vec![
        vec![a, -b, -c, -d],
        vec![b, a, -d, c],
        vec![c, d, a, -b],
        vec![d, -c, b, a],
    ]
}

/// Smallest `a ≥ 1` with `v = a² + b²`, `b ≥ 1` and `gcd(a, v) = 1`.
fn two_squares(v: u64) -> Option<(u64, u64)> {
    (1..).take_while(|a| a * a < v).find_map(|a| {
        let b = exact_sqrt(v - a * a)?;
        (b >= 1 && gcd(a, v) == 1).then_some((a, b))
    })
}

/// Distinct permutations of a sorted-descending 4-tuple, in lexicographically
/// descending order.
fn permutations_desc(t: [u64; 4]) -> Vec<[u64; 4]> {
    let mut out = Vec::new();
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                for l in 0..4 {
                    let idx = [i, j, k, l];
                    let mut seen = [false; 4];
                    if idx.iter().any(|&x| std::mem::replace(&mut seen[x], true)) {
                        continue;
                    }
                    out.push(idx.map(|x| t[x]));
                }
            }
        }
    }
    out.sort_unstable_by(|x, y| y.cmp(x));
    out.dedup();
    out
}

/// Lexicographically smallest `a ≥ b ≥ c ≥ d ≥ 0` with sum of squares `v`,
/// permuted (descending order of permutations) so that `gcd(a² + b², v) = 1`.
fn four_squares(v: u64) -> Option<[u64; 4]> {
    let mut a = 0;
    while a * a <= v {
        if 4 * a * a >= v {
            for b in 0..=a {
                for c in 0..=b {
                    let rest = match v.checked_sub(a * a + b * b + c * c) {
                        Some(r) => r,
                        None => continue,
                    };
                    let Some(d) = exact_sqrt(rest) else { continue };
                    if d > c {
                        continue;
                    }
                    if let Some(p) = permutations_desc([a, b, c, d])
                        .into_iter()
                        .find(|p| gcd(p[0] * p[0] + p[1] * p[1], v) == 1)
                    {
                        return Some(p);
                    }
                }
            }
        }
        a += 1;
    }
    None
}

fn check_ell(ell: u64, n: u32) -> Result<(), DecomposeError> {
    if ell < 3 || ell.is_multiple_of(2) {
        return Err(DecomposeError::BadEll(ell));
    }
    if gcd(ell, n as u64) != 1 {
        return Err(DecomposeError::NotCoprime { ell, n });
    }
    Ok(())
}

impl SquareDecomposition {
    fn build(ell: u64, n: u32, scale: u64, r: usize, abcd: [u64; 4]) -> Self {
        let [a, b, c, d] = abcd;
        let m0 = match r {
            1 => vec![vec![1]],
            2 => two_square_matrix(a, b),
            _ => quaternion_matrix(a, b, c, d),
        };
        let m: Vec<Vec<i64>> = m0
            .iter()
            .map(|row| row.iter().map(|&x| x * scale as i64).collect())
            .collect();
        let ell_inv = inv_mod(ell as i64, n as u64).expect("ell coprime to n");
        let m_inv_n = (0..r)
            .map(|i| (0..r).map(|j| (rem(m[j][i], n as u64) * ell_inv) % n as u64).collect())
            .collect();
        let (s, ell2) = square_part(ell);
        let t = if r == 4 { 2 } else { 1 };
        let mut dec = SquareDecomposition {
            ell,
            level: n,
            ell1: s * s,
            ell2,
            scale,
            r,
            t,
            a,
            b,
            c,
            d,
            m,
            m_inv_n,
            beta0: None,
            alpha: None,
            beta: None,
            gamma: None,
            delta: None,
            cardinal_g1: scale.pow(t as u32),
        };
        match r {
            2 => dec.beta0 = inv_mod(a as i64, ell).map(|ai| rem(-(b as i64), ell) * ai % ell),
            4 => {
                if let Some(inv) = inv_mod((a * a + b * b) as i64, ell) {
                    let f = |x: i64| rem(x, ell) * inv % ell;
                    let (a, b, c, d) = (a as i64, b as i64, c as i64, d as i64);
                    dec.alpha = Some(f(a * c - d * b));
                    dec.beta = Some(f(a * d + b * c));
                    dec.gamma = Some(f(a * d + b * c));
                    dec.delta = Some(f(b * d - a * c));
                }
            }
            _ => {}
        }
        dec
    }

    /// `N = s^(t·g)`: the size of the kernel of multiplication by `s` on `K^t`.
    pub fn cardinal(&self, g: usize) -> u64 {
        self.scale.pow((self.t * g) as u32)
    }

    /// Whether the kernel parametrisation of [`Self::kernel_basis`] applies:
    /// either `r = 1`, or `M` is a decomposition of `ℓ` itself.
    pub fn is_flat(&self) -> bool {
        self.r == 1 || self.scale == 1
    }

    /// `ᵗM·M = ℓ·Id` over the integers.
    pub fn check_identity(&self) -> bool {
        let r = self.r;
        (0..r).all(|i| {
            (0..r).all(|j| {
                let s: i64 = (0..r).map(|k| self.m[k][i] * self.m[k][j]).sum();
                s == if i == j { self.ell as i64 } else { 0 }
            })
        })
    }

    /// The multiples of `P` in the Koizumi factors: column 0 of `M`.
    pub fn point_coefficients(&self) -> Vec<i64> {
        self.m.iter().map(|row| row[0]).collect()
    }

    /// `t` vectors in `(Z/ℓZ)^r` whose span under `T ↦ Σ T_i·v_i` covers the
    /// solutions of `t·M ≡ 0 (mod ℓ)`, with fibres of size `N`.
    pub fn kernel_basis(&self) -> Result<Vec<Vec<u64>>, DecomposeError> {
        let ell = self.ell;
        let unavailable = DecomposeError::Unavailable { ell, r: self.r };
        let basis = match self.r {
            1 => vec![vec![self.scale % ell]],
            2 if self.scale == 1 => vec![vec![1, self.beta0.ok_or(unavailable.clone())?]],
            4 if self.scale == 1 => self.quaternion_kernel().ok_or(unavailable.clone())?,
            _ => return Err(unavailable),
        };
        let ok = basis.iter().all(|v| {
            (0..self.r).all(|col| {
                let s: i64 = (0..self.r).map(|k| v[k] as i64 * self.m[k][col]).sum();
                rem(s, ell) == 0
            })
        });
        if ok {
            Ok(basis)
        } else {
            Err(unavailable)
        }
    }

    /// Solves `(1, 0, x, y)·M ≡ 0` and `(0, 1, x, y)·M ≡ 0` through an
    /// invertible 2×2 minor of rows 2 and 3.
    fn quaternion_kernel(&self) -> Option<Vec<Vec<u64>>> {
        let ell = self.ell;
        let m = &self.m;
        for j in 0..4 {
            for k in j + 1..4 {
                let det = m[2][j] * m[3][k] - m[2][k] * m[3][j];
                let Some(dinv) = inv_mod(det, ell) else { continue };
                let solve = |row: usize| -> Vec<u64> {
                    // (x, y)·[[m2j, m2k], [m3j, m3k]] = −(m_row,j, m_row,k)
                    let (rj, rk) = (-m[row][j], -m[row][k]);
                    let x = rj * m[3][k] - rk * m[3][j];
                    let y = rk * m[2][j] - rj * m[2][k];
                    let mut v = vec![0; 4];
                    v[row] = 1;
                    v[2] = rem(x, ell) * dinv % ell;
                    v[3] = rem(y, ell) * dinv % ell;
                    v
                };
                return Some(vec![solve(0), solve(1)]);
            }
        }
        None
    }
}

/// The decomposition chosen from the factorisation `ℓ = ℓ1·ℓ2`: a scalar
/// when `ℓ2 = 1`, two squares when every prime factor of `ℓ2` is `1 mod 4`,
/// and four squares otherwise.
pub fn decompose(ell: u64, n: u32) -> Result<SquareDecomposition, DecomposeError> {
    check_ell(ell, n)?;
    let (s, ell2) = square_part(ell);
    if ell2 == 1 {
        return Ok(SquareDecomposition::build(ell, n, s, 1, [s, 0, 0, 0]));
    }
    if factorize(ell2).iter().all(|&(q, _)| q % 4 == 1) {
        let (a, b) = two_squares(ell2).ok_or(DecomposeError::Unavailable { ell, r: 2 })?;
        return Ok(SquareDecomposition::build(ell, n, s, 2, [a, b, 0, 0]));
    }
    let abcd = four_squares(ell2).ok_or(DecomposeError::Unavailable { ell, r: 4 })?;
    Ok(SquareDecomposition::build(ell, n, s, 4, abcd))
}

/// A decomposition of `ℓ` itself with the requested `r` (no square factor
/// pulled out, except for `r = 1` which needs `ℓ` to be a square).
pub fn flat_decomposition(ell: u64, n: u32, r: usize) -> Result<SquareDecomposition, DecomposeError> {
    check_ell(ell, n)?;
    let unavailable = DecomposeError::Unavailable { ell, r };
    match r {
        1 => {
            let s = exact_sqrt(ell).ok_or(unavailable)?;
            Ok(SquareDecomposition::build(ell, n, s, 1, [s, 0, 0, 0]))
        }
        2 => {
            let (a, b) = two_squares(ell).ok_or(unavailable)?;
            Ok(SquareDecomposition::build(ell, n, 1, 2, [a, b, 0, 0]))
        }
        4 => {
            let abcd = four_squares(ell).ok_or(unavailable)?;
            Ok(SquareDecomposition::build(ell, n, 1, 4, abcd))
        }
        _ => Err(DecomposeError::BadR(r)),
    }
}

/// The decomposition the isogeny pipeline runs with: the forced `r` if
/// given, else [`decompose`], replaced by a decomposition of `ℓ` itself when
/// both `ℓ1` and `ℓ2` exceed one.
pub fn pipeline_decomposition(ell: u64, n: u32, force_r: Option<usize>) -> Result<SquareDecomposition, DecomposeError> {
    if let Some(r) = force_r {
        return flat_decomposition(ell, n, r);
    }
    let dec = decompose(ell, n)?;
    if dec.is_flat() {
        return Ok(dec);
    }
    flat_decomposition(ell, n, 2).or_else(|_| flat_decomposition(ell, n, 4))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_examples() {
        let d9 = decompose(9, 2).unwrap();
        assert_eq!((d9.r, d9.m.clone()), (1, vec![vec![3]]));
        assert_eq!(d9.cardinal(1), 3);
        let d5 = decompose(5, 2).unwrap();
        assert_eq!((d5.r, d5.a, d5.b), (2, 1, 2));
        assert_eq!(d5.m, vec![vec![1, 2], vec![-2, 1]]);
        assert_eq!(d5.beta0, Some(3));
        assert_eq!(d5.m_inv_n, vec![vec![1, 0], vec![0, 1]]);
        let d3 = decompose(3, 4).unwrap();
        assert_eq!((d3.r, [d3.a, d3.b, d3.c, d3.d]), (4, [1, 1, 1, 0]));
        assert!(matches!(decompose(4, 2), Err(DecomposeError::BadEll(4))));
        assert!(matches!(decompose(15, 6), Err(DecomposeError::NotCoprime { .. })));
    }

    #[test]
    fn forced_decompositions() {
        let f5 = flat_decomposition(5, 4, 4).unwrap();
        assert_eq!([f5.a, f5.b, f5.c, f5.d], [2, 0, 1, 0]);
        let f9 = flat_decomposition(9, 4, 4).unwrap();
        assert_eq!([f9.a, f9.b, f9.c, f9.d], [2, 2, 1, 0]);
        assert!(flat_decomposition(7, 4, 2).is_err());
        assert!(flat_decomposition(7, 4, 1).is_err());
        // 45 = 9·5 has no primitive two-square representation.
        let p45 = pipeline_decomposition(45, 4, None).unwrap();
        assert_eq!((p45.r, p45.scale), (4, 1));
        let p125 = pipeline_decomposition(125, 2, None).unwrap();
        assert_eq!((p125.r, p125.scale, p125.a, p125.b), (2, 1, 2, 11));
    }

    #[test]
    fn quaternion_basis_matches_closed_form() {
        for ell in [3u64, 5, 7, 9, 11, 23, 31, 45, 63, 99] {
            let d = flat_decomposition(ell, 4, 4).unwrap();
            let basis = d.kernel_basis().unwrap();
            assert_eq!(basis[0], vec![1, 0, d.alpha.unwrap(), d.gamma.unwrap()], "ell = {ell}");
            assert_eq!(basis[1], vec![0, 1, d.beta.unwrap(), d.delta.unwrap()], "ell = {ell}");
        }
    }

    #[test]
    fn factorisation_roundtrip() {
        for v in 1..2000u64 {
            assert_eq!(factorize(v).iter().map(|&(q, e)| q.pow(e)).product::<u64>(), v);
            let (s, rest) = square_part(v);
            assert_eq!(s * s * rest, v);
            assert!(factorize(rest).iter().all(|&(_, e)| e == 1));
        }
    }

    proptest! {
        #[test]
        fn identity_and_kernel(half in 1u64..2000, n in prop::sample::select(vec![2u32, 4, 8])) {
            let ell = 2 * half + 1;
            let dec = decompose(ell, n).unwrap();
            prop_assert!(dec.check_identity());
            let flat = pipeline_decomposition(ell, n, None).unwrap();
            prop_assert!(flat.check_identity());
            let basis = flat.kernel_basis().unwrap();
            prop_assert_eq!(basis.len(), flat.t);
        }
    }
}
