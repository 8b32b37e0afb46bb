//! Genus-one oracle: short Weierstrass-type curves `y² = x³ + a2·x² + a4·x + a6`,
//! Vélu isogenies from a kernel x-polynomial, and the dictionary between
//! level-2 theta coordinates and the Legendre model.
//!
//! The dictionary: for a null point `(a : b)` put `k = (a²−b²)/(a²+b²)`.
//! The curve is `y² = x(x−1)(x−k²)` and the Kummer point `(x0 : x1)` has
//! abscissa `x = k(a·x1 + b·x0)/(a·x1 − b·x0)`; the null point maps to
//! infinity.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::etale::{KRing, Quotient};
use crate::ff::{FieldElement, PrimeField};
use crate::kernel::gcd;
use crate::poly::Polynomial;
use crate::ring::Ring;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VeluError {
    #[error("singular curve")]
    Singular,
    #[error("degenerate theta null point")]
    DegenerateNull,
    #[error("invalid kernel: {0}")]
    InvalidKernel(&'static str),
    #[error("point is not on the curve")]
    NotOnCurve,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WeierstrassCurve {
    pub field: PrimeField,
    pub a2: FieldElement,
    pub a4: FieldElement,
    pub a6: FieldElement,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurvePoint {
    Infinity,
    Affine(FieldElement, FieldElement),
}

impl WeierstrassCurve {
    pub fn new(field: PrimeField, a2: FieldElement, a4: FieldElement, a6: FieldElement) -> Result<Self, VeluError> {
        let e = WeierstrassCurve { field, a2, a4, a6 };
        if e.discriminant().is_zero() {
            return Err(VeluError::Singular);
        }
        Ok(e)
    }

    /// `(b2, b4, b6, b8)` for `a1 = a3 = 0`.
    fn b_invariants(&self) -> [FieldElement; 4] {
        let f = &self.field;
        let b2 = f.mul(f.elem(4), self.a2);
        let b4 = f.mul(f.elem(2), self.a4);
        let b6 = f.mul(f.elem(4), self.a6);
        let b8 = f.sub(f.mul(f.elem(4), f.mul(self.a2, self.a6)), f.mul(self.a4, self.a4));
        [b2, b4, b6, b8]
    }

    pub fn discriminant(&self) -> FieldElement {
        let f = &self.field;
        let [b2, b4, b6, b8] = self.b_invariants();
        let t1 = f.mul(f.mul(b2, b2), b8);
        let t2 = f.mul(f.elem(8), f.pow(b4, 3));
        let t3 = f.mul(f.elem(27), f.mul(b6, b6));
        let t4 = f.mul(f.elem(9), f.mul(b2, f.mul(b4, b6)));
        f.add(f.neg(f.add(f.add(t1, t2), t3)), t4)
    }

    pub fn j_invariant(&self) -> FieldElement {
        let f = &self.field;
        let [b2, b4, _, _] = self.b_invariants();
        let c4 = f.sub(f.mul(b2, b2), f.mul(f.elem(24), b4));
        f.div(f.pow(c4, 3), self.discriminant()).expect("nonsingular curve")
    }

    /// `x³ + a2·x² + a4·x + a6`.
    pub fn rhs(&self, x: FieldElement) -> FieldElement {
        let f = &self.field;
        let t = f.add(f.mul(f.add(x, self.a2), x), self.a4);
        f.add(f.mul(t, x), self.a6)
    }

    pub fn contains(&self, p: &CurvePoint) -> bool {
        match *p {
            CurvePoint::Infinity => true,
            CurvePoint::Affine(x, y) => self.field.mul(y, y) == self.rhs(x),
        }
    }

    pub fn neg(&self, p: &CurvePoint) -> CurvePoint {
        match *p {
            CurvePoint::Infinity => CurvePoint::Infinity,
            CurvePoint::Affine(x, y) => CurvePoint::Affine(x, self.field.neg(y)),
        }
    }

    pub fn add(&self, p: &CurvePoint, q: &CurvePoint) -> CurvePoint {
        let f = &self.field;
        let (x1, y1, x2, y2) = match (*p, *q) {
            (CurvePoint::Infinity, _) => return *q,
            (_, CurvePoint::Infinity) => return *p,
            (CurvePoint::Affine(x1, y1), CurvePoint::Affine(x2, y2)) => (x1, y1, x2, y2),
        };
        let slope = if x1 == x2 {
            if f.add(y1, y2).is_zero() {
                return CurvePoint::Infinity;
            }
            // (3x² + 2·a2·x + a4) / 2y
            let num = f.add(
                f.add(f.mul(f.elem(3), f.mul(x1, x1)), f.mul(f.elem(2), f.mul(self.a2, x1))),
                self.a4,
            );
            f.div(num, f.add(y1, y1)).expect("y nonzero")
        } else {
            f.div(f.sub(y2, y1), f.sub(x2, x1)).expect("distinct x")
        };
        let x3 = f.sub(f.sub(f.sub(f.mul(slope, slope), self.a2), x1), x2);
        let y3 = f.sub(f.mul(slope, f.sub(x1, x3)), y1);
        CurvePoint::Affine(x3, y3)
    }

    pub fn mul(&self, m: u64, p: &CurvePoint) -> CurvePoint {
        let mut acc = CurvePoint::Infinity;
        for bit in (0..64 - m.leading_zeros()).rev() {
            acc = self.add(&acc, &acc);
            if m >> bit & 1 == 1 {
                acc = self.add(&acc, p);
            }
        }
        acc
    }
}

/// The Legendre-model curve of a level-2, genus-one null point `(a : b)`.
pub fn theta_null_to_curve(f: &PrimeField, null: &[FieldElement]) -> Result<WeierstrassCurve, VeluError> {
    let k = dictionary_k(f, null)?;
    let lambda = f.mul(k, k);
    WeierstrassCurve::new(*f, f.neg(f.add(f.one(), lambda)), lambda, f.zero()).map_err(|_| VeluError::DegenerateNull)
}

fn dictionary_k(f: &PrimeField, null: &[FieldElement]) -> Result<FieldElement, VeluError> {
    let [a, b] = null else {
        return Err(VeluError::DegenerateNull);
    };
    let (a2, b2) = (f.mul(*a, *a), f.mul(*b, *b));
    f.div(f.sub(a2, b2), f.add(a2, b2))
        .map_err(|_| VeluError::DegenerateNull)
}

/// Abscissa of a Kummer point; `None` for the image of the null point.
pub fn theta_to_x(
    f: &PrimeField,
    null: &[FieldElement],
    point: &[FieldElement],
) -> Result<Option<FieldElement>, VeluError> {
    let k = dictionary_k(f, null)?;
    let (a, b) = (null[0], null[1]);
    let num = f.mul(k, f.add(f.mul(a, point[1]), f.mul(b, point[0])));
    let den = f.sub(f.mul(a, point[1]), f.mul(b, point[0]));
    Ok(f.div(num, den).ok())
}

/// A Kummer point `(x0 : x1)` with the given abscissa.
pub fn x_to_theta(f: &PrimeField, null: &[FieldElement], x: FieldElement) -> Result<[FieldElement; 2], VeluError> {
    let k = dictionary_k(f, null)?;
    let (a, b) = (null[0], null[1]);
    Ok([f.mul(a, f.sub(x, k)), f.mul(b, f.add(x, k))])
}

/// A level-2 null point whose Legendre curve is isomorphic to `e`, when the
/// 2-torsion of `e` is rational and the needed square roots exist.
pub fn curve_to_theta_null(e: &WeierstrassCurve) -> Option<[FieldElement; 2]> {
    let f = &e.field;
    let cubic = Polynomial::new(vec![e.a6, e.a4, e.a2, f.one()]);
    let roots = cubic.roots(f, &mut ChaCha8Rng::seed_from_u64(7));
    if roots.len() != 3 {
        return None;
    }
    for (i, j, l) in [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)] {
        let lambda = f.div(f.sub(roots[l], roots[i]), f.sub(roots[j], roots[i])).ok()?;
        let Some(k) = f.sqrt(lambda) else { continue };
        for k in [k, f.neg(k)] {
            // (1 − b²)/(1 + b²) = k  ⇒  b² = (1 − k)/(1 + k)
            let Ok(b2) = f.div(f.sub(f.one(), k), f.add(f.one(), k)) else {
                continue;
            };
            if let Some(b) = f.sqrt(b2) {
                if !b.is_zero() {
                    return Some([f.one(), b]);
                }
            }
        }
    }
    None
}

/// Power sums `p_1..=p_m` of the roots of a monic polynomial.
fn power_sums(f: &PrimeField, poly: &Polynomial, m: usize) -> Vec<FieldElement> {
    let d = poly.degree().unwrap_or(0);
    // e_i with sign: poly = x^d + c_{d-1} x^{d-1} + ... ; c_{d-i} = (−1)^i e_i.
    let c = |i: usize| if i <= d { poly.coeff(d - i) } else { f.zero() };
    let mut p = vec![f.zero(); m + 1];
    for k in 1..=m {
        // p_k = −(k·c_k + Σ_{i=1}^{k−1} c_i p_{k−i}) with c_i = coeff of x^{d−i}
        let mut s = f.mul(f.elem(k as u64), c(k));
        for i in 1..k {
            s = f.add(s, f.mul(c(i), p[k - i]));
        }
        p[k] = f.neg(s);
    }
    p.remove(0);
    p
}

/// Monic polynomial with the given power sums of its `d` roots, by Newton's
/// identities (needs `d < p`).
fn from_power_sums(f: &PrimeField, p: &[FieldElement], d: usize) -> Polynomial {
    // e_0 = 1, k e_k = Σ_{i=1}^k (−1)^{i−1} e_{k−i} p_i
    let mut e = vec![f.one()];
    for k in 1..=d {
        let mut s = f.zero();
        for i in 1..=k {
            let t = f.mul(e[k - i], p[i - 1]);
            s = if i % 2 == 1 { f.add(s, t) } else { f.sub(s, t) };
        }
        e.push(f.div(s, f.elem(k as u64)).expect("degree below p"));
    }
    let coeffs: Vec<FieldElement> = (0..=d)
        .map(|i| {
            let k = d - i;
            if k.is_multiple_of(2) {
                e[k]
            } else {
                f.neg(e[k])
            }
        })
        .collect();
    Polynomial::new(coeffs)
}

/// The x-polynomial of a level-2 kernel given as the roots of `q` with
/// Kummer coordinates `(1 : c1(U))`. None of its roots may be the null point.
pub fn kernel_x_poly(
    f: &PrimeField,
    null: &[FieldElement],
    q: &Polynomial,
    c1: &Polynomial,
) -> Result<Polynomial, VeluError> {
    let k = dictionary_k(f, null)?;
    let (a, b) = (null[0], null[1]);
    let ring: KRing = Quotient::new(
        *f,
        q.monic(f)
            .map_err(|_| VeluError::InvalidKernel("zero Q"))?
            .into_coeffs(),
    );
    let u = ring.reduce(c1.coeffs());
    let num = ring.scale(&ring.add(&ring.scale(&u, a), &ring.from_fe(b)), k);
    let den = ring.sub(&ring.scale(&u, a), &ring.from_fe(b));
    let den_inv = ring
        .try_inv(&den)
        .map_err(|_| VeluError::InvalidKernel("kernel contains the zero point"))?;
    let x = ring.mul(&num, &den_inv);
    let d = ring.degree();
    let mut sums = Vec::with_capacity(d);
    let mut pow = ring.one();
    for _ in 0..d {
        pow = ring.mul(&pow, &x);
        sums.push(crate::etale::trace_k(&ring, &pow));
    }
    Ok(from_power_sums(f, &sums, d))
}

/// Division-polynomial values `f_0..=f_m` reduced modulo `psi`, where
/// `f_m = ψ_m` for odd `m` and `ψ_m / 2y` for even `m`.
fn division_values(e: &WeierstrassCurve, ring: &KRing, m: usize) -> Vec<Vec<FieldElement>> {
    let f = &e.field;
    let [b2, b4, b6, b8] = e.b_invariants();
    let x = ring.generator();
    let poly = |c: &[FieldElement]| {
        c.iter()
            .rev()
            .fold(ring.zero(), |acc, &ci| ring.add(&ring.mul(&acc, &x), &ring.from_fe(ci)))
    };
    let big_f = poly(&[
        f.mul(f.elem(4), e.a6),
        f.mul(f.elem(4), e.a4),
        f.mul(f.elem(4), e.a2),
        f.elem(4),
    ]);
    let f2 = ring.mul(&big_f, &big_f);
    let mut v = vec![ring.zero(), ring.one(), ring.one()];
    v.push(poly(&[b8, f.mul(f.elem(3), b6), f.mul(f.elem(3), b4), b2, f.elem(3)]));
    v.push(poly(&[
        f.sub(f.mul(b4, b8), f.mul(b6, b6)),
        f.sub(f.mul(b2, b8), f.mul(b4, b6)),
        f.mul(f.elem(10), b8),
        f.mul(f.elem(10), b6),
        f.mul(f.elem(5), b4),
        b2,
        f.elem(2),
    ]));
    for idx in 5..=m {
        let h = idx / 2;
        let val = if idx % 2 == 1 {
            let t1 = ring.mul(&v[h + 2], &ring.pow(&v[h], 3));
            let t2 = ring.mul(&v[h - 1], &ring.pow(&v[h + 1], 3));
            if h % 2 == 0 {
                ring.sub(&ring.mul(&f2, &t1), &t2)
            } else {
                ring.sub(&t1, &ring.mul(&f2, &t2))
            }
        } else {
            let t1 = ring.mul(&v[h + 2], &ring.square(&v[h - 1]));
            let t2 = ring.mul(&v[h - 2], &ring.square(&v[h + 1]));
            ring.mul(&v[h], &ring.sub(&t1, &t2))
        };
        v.push(val);
    }
    v.truncate(m + 1);
    v
}

/// Codomain of the isogeny with kernel x-polynomial `psi` (odd degree
/// `2·deg + 1`), after checking that `psi` cuts out a subgroup.
pub fn velu_isogeny(e: &WeierstrassCurve, psi: &Polynomial) -> Result<WeierstrassCurve, VeluError> {
    let f = &e.field;
    let d = psi.degree().unwrap_or(0);
    if d == 0 {
        return Err(VeluError::InvalidKernel("kernel polynomial must be nonconstant"));
    }
    let psi = psi.monic(f).map_err(|_| VeluError::InvalidKernel("zero polynomial"))?;
    if psi.gcd(&psi.derivative(f), f).map(|g| g.degree()) != Ok(Some(0)) {
        return Err(VeluError::InvalidKernel("kernel polynomial is not squarefree"));
    }
    let cubic = Polynomial::new(vec![e.a6, e.a4, e.a2, f.one()]);
    if psi.gcd(&cubic, f).map(|g| g.degree()) != Ok(Some(0)) {
        return Err(VeluError::InvalidKernel("kernel meets the 2-torsion"));
    }
    let ell = 2 * d + 1;
    let ring: KRing = Quotient::new(*f, psi.coeffs().to_vec());
    let fv = division_values(e, &ring, ell.max(d + 1));
    if !ring.is_zero(&fv[ell]) {
        return Err(VeluError::InvalidKernel(
            "kernel polynomial does not divide the division polynomial",
        ));
    }
    // x([k]Q) = x − ψ_{k−1}ψ_{k+1}/ψ_k² must again be a root of psi. Only
    // units k are checked: for composite ℓ, [k]Q may vanish otherwise.
    let x = ring.generator();
    let big_f = ring.scale(
        &ring.add(
            &ring.mul(
                &ring.add(&ring.mul(&ring.add(&x, &ring.from_fe(e.a2)), &x), &ring.from_fe(e.a4)),
                &x,
            ),
            &ring.from_fe(e.a6),
        ),
        f.elem(4),
    );
    for k in (2..=d).filter(|&k| gcd(k as u64, ell as u64) == 1) {
        let (mut num, mut den) = (ring.mul(&fv[k - 1], &fv[k + 1]), ring.square(&fv[k]));
        if k % 2 == 1 {
            num = ring.mul(&num, &big_f);
        } else {
            den = ring.mul(&den, &big_f);
        }
        let den_inv = ring
            .try_inv(&den)
            .map_err(|_| VeluError::InvalidKernel("multiple of a kernel point vanishes"))?;
        let xk = ring.sub(&x, &ring.mul(&num, &den_inv));
        let val = psi
            .coeffs()
            .iter()
            .rev()
            .fold(ring.zero(), |acc, &c| ring.add(&ring.mul(&acc, &xk), &ring.from_fe(c)));
        if !ring.is_zero(&val) {
            return Err(VeluError::InvalidKernel("roots are not closed under multiplication"));
        }
    }
    let p = power_sums(f, &psi, 3);
    let dd = f.elem(d as u64);
    let v = [
        f.mul(f.elem(6), p[1]),
        f.mul(f.elem(4), f.mul(e.a2, p[0])),
        f.mul(f.elem(2), f.mul(e.a4, dd)),
    ]
    .into_iter()
    .fold(f.zero(), |s, t| f.add(s, t));
    let w = [
        f.mul(f.elem(10), p[2]),
        f.mul(f.elem(8), f.mul(e.a2, p[1])),
        f.mul(f.elem(6), f.mul(e.a4, p[0])),
        f.mul(f.elem(4), f.mul(e.a6, dd)),
    ]
    .into_iter()
    .fold(f.zero(), |s, t| f.add(s, t));
    let a4 = f.sub(e.a4, f.mul(f.elem(5), v));
    let a6 = f.sub(f.sub(e.a6, f.mul(f.elem(4), f.mul(e.a2, v))), f.mul(f.elem(7), w));
    WeierstrassCurve::new(*f, e.a2, a4, a6)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f() -> PrimeField {
        PrimeField::new(1009).unwrap()
    }

    fn curve(f: &PrimeField, a2: u64, a4: u64, a6: u64) -> WeierstrassCurve {
        WeierstrassCurve::new(*f, f.elem(a2), f.elem(a4), f.elem(a6)).unwrap()
    }

    #[test]
    fn j_invariant_examples() {
        let f = f();
        assert_eq!(curve(&f, 0, 1, 0).j_invariant(), f.elem(1728));
        assert_eq!(curve(&f, 0, 0, 1).j_invariant(), f.zero());
        assert!(WeierstrassCurve::new(f, f.zero(), f.zero(), f.zero()).is_err());
    }

    #[test]
    fn dictionary_matches_worked_example() {
        let f = f();
        let e = |a, b| theta_null_to_curve(&f, &[f.elem(a), f.elem(b)]).unwrap().j_invariant();
        assert_eq!(e(971, 94), curve(&f, 762, 246, 0).j_invariant());
        assert_eq!(e(186, 513), curve(&f, 133, 875, 0).j_invariant());
        assert_eq!(e(971 * 7 % 1009, 94 * 7), e(971, 94));
    }

    #[test]
    fn worked_example_kernel_through_velu() {
        let f = f();
        let null = [f.elem(971), f.elem(94)];
        let q = Polynomial::from_u64s(&f, &[353, 746, 1]);
        let psi = kernel_x_poly(&f, &null, &q, &Polynomial::x()).unwrap();
        assert_eq!(psi.degree(), Some(2));
        let e = theta_null_to_curve(&f, &null).unwrap();
        let image = velu_isogeny(&e, &psi).unwrap();
        assert_eq!(image.j_invariant(), curve(&f, 133, 875, 0).j_invariant());
        // The linear factor of the raw kernel polynomial is the zero point.
        assert_eq!(theta_to_x(&f, &null, &[f.one(), f.elem(741)]).unwrap(), None);
    }

    #[test]
    fn dictionary_round_trip() {
        let f = f();
        let null = [f.elem(971), f.elem(94)];
        let e = theta_null_to_curve(&f, &null).unwrap();
        let back = curve_to_theta_null(&e).unwrap();
        assert_eq!(theta_null_to_curve(&f, &back).unwrap().j_invariant(), e.j_invariant());
        for x in 2..40u64 {
            let t = x_to_theta(&f, &null, f.elem(x)).unwrap();
            assert_eq!(theta_to_x(&f, &null, &t).unwrap(), Some(f.elem(x)));
        }
    }

    /// Pointwise Vélu: φ(P) = (x_P + Σ (x_{P+Q} − x_Q), y_P + Σ (y_{P+Q} − y_Q)).
    fn pointwise_codomain(e: &WeierstrassCurve, kernel: &[CurvePoint]) -> (FieldElement, FieldElement) {
        let f = &e.field;
        let mut images = Vec::new();
        for x in 0..f.modulus() {
            let x = f.elem(x);
            let Some(y) = f.sqrt(e.rhs(x)) else { continue };
            let p = CurvePoint::Affine(x, y);
            if kernel.contains(&p) {
                continue;
            }
            let (mut xi, mut yi) = (x, y);
            for q in kernel.iter().filter(|q| **q != CurvePoint::Infinity) {
                let (CurvePoint::Affine(xs, ys), CurvePoint::Affine(xq, yq)) = (e.add(&p, q), *q) else {
                    panic!()
                };
                xi = f.add(xi, f.sub(xs, xq));
                yi = f.add(yi, f.sub(ys, yq));
            }
            images.push((xi, yi));
            if images.len() == 2 && images[0].0 != images[1].0 {
                break;
            } else if images.len() == 2 {
                images.pop();
            }
        }
        // y² − x³ − a2 x² = A4 x + A6 for both images.
        let r = |(x, y): (FieldElement, FieldElement)| f.sub(f.mul(y, y), f.add(f.pow(x, 3), f.mul(e.a2, f.mul(x, x))));
        let (p0, p1) = (images[0], images[1]);
        let a4 = f.div(f.sub(r(p0), r(p1)), f.sub(p0.0, p1.0)).unwrap();
        let a6 = f.sub(r(p0), f.mul(a4, p0.0));
        (a4, a6)
    }

    #[test]
    fn three_isogeny_matches_pointwise_formula() {
        let f = f();
        let mut checked = 0;
        for a4 in 1..60u64 {
            let Ok(e) = WeierstrassCurve::new(f, f.elem(3), f.elem(a4), f.elem(5)) else {
                continue;
            };
            // A rational 3-torsion abscissa is a root of ψ_3.
            let [b2, b4, b6, b8] = e.b_invariants();
            let psi3 = Polynomial::new(vec![b8, f.mul(f.elem(3), b6), f.mul(f.elem(3), b4), b2, f.elem(3)]);
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            for x in psi3.roots(&f, &mut rng) {
                let Some(y) = f.sqrt(e.rhs(x)) else { continue };
                let t = CurvePoint::Affine(x, y);
                assert_eq!(e.mul(3, &t), CurvePoint::Infinity);
                let image = velu_isogeny(&e, &Polynomial::new(vec![f.neg(x), f.one()])).unwrap();
                let kernel = [CurvePoint::Infinity, t, e.neg(&t)];
                assert_eq!(pointwise_codomain(&e, &kernel), (image.a4, image.a6));
                checked += 1;
            }
        }
        assert!(checked >= 3, "only {checked} curves with rational 3-torsion");
    }

    #[test]
    fn rejects_non_kernels() {
        let f = f();
        let e = curve(&f, 762, 246, 0);
        let bad = Polynomial::from_u64s(&f, &[5, 17, 1]);
        assert!(matches!(velu_isogeny(&e, &bad), Err(VeluError::InvalidKernel(_))));
        assert!(matches!(
            velu_isogeny(&e, &Polynomial::constant(f.one())),
            Err(VeluError::InvalidKernel(_))
        ));
    }
}
