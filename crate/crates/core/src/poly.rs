//! Dense univariate polynomials.
//!
//! The free functions work over any [`Ring`] with coefficient vectors indexed
//! by degree; [`Polynomial`] is the public value type over `F_p`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ff::{FieldElement, PrimeField};
use crate::ring::{InvFailure, Ring};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolyError {
    #[error("division by the zero polynomial")]
    DivisionByZero,
    #[error("gcd of two zero polynomials is undefined")]
    BothZero,
}

pub fn trim<R: Ring>(r: &R, v: &mut Vec<R::Elem>) {
    while v.last().is_some_and(|c| r.is_zero(c)) {
        v.pop();
    }
}

pub fn degree<R: Ring>(r: &R, v: &[R::Elem]) -> Option<usize> {
    v.iter().rposition(|c| !r.is_zero(c))
}

pub fn add<R: Ring>(r: &R, a: &[R::Elem], b: &[R::Elem]) -> Vec<R::Elem> {
    let n = a.len().max(b.len());
    let mut out: Vec<R::Elem> = (0..n)
        .map(|i| match (a.get(i), b.get(i)) {
            (Some(x), Some(y)) => r.add(x, y),
            (Some(x), None) => x.clone(),
            (None, Some(y)) => y.clone(),
            (None, None) => unreachable!(),
        })
        .collect();
    trim(r, &mut out);
    out
}

pub fn sub<R: Ring>(r: &R, a: &[R::Elem], b: &[R::Elem]) -> Vec<R::Elem> {
    let n = a.len().max(b.len());
    let mut out: Vec<R::Elem> = (0..n)
        .map(|i| match (a.get(i), b.get(i)) {
            (Some(x), Some(y)) => r.sub(x, y),
            (Some(x), None) => x.clone(),
            (None, Some(y)) => r.neg(y),
            (None, None) => unreachable!(),
        })
        .collect();
    trim(r, &mut out);
    out
}

pub fn mul<R: Ring>(r: &R, a: &[R::Elem], b: &[R::Elem]) -> Vec<R::Elem> {
    let mut out = r.mul_poly(a, b);
    trim(r, &mut out);
    out
}

pub fn scale<R: Ring>(r: &R, a: &[R::Elem], c: &R::Elem) -> Vec<R::Elem> {
    let mut out: Vec<R::Elem> = a.iter().map(|x| r.mul(x, c)).collect();
    trim(r, &mut out);
    out
}

pub fn derivative<R: Ring>(r: &R, a: &[R::Elem]) -> Vec<R::Elem> {
    let f = r.field();
    let mut out: Vec<R::Elem> = a
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| r.scale(c, f.elem(i as u64)))
        .collect();
    trim(r, &mut out);
    out
}

pub fn eval<R: Ring>(r: &R, a: &[R::Elem], x: &R::Elem) -> R::Elem {
    let mut acc = r.zero();
    for c in a.iter().rev() {
        acc = r.add(&r.mul(&acc, x), c);
    }
    acc
}

/// Quotient and remainder by a monic divisor (no inversion needed).
pub fn divmod_monic<R: Ring>(r: &R, a: &[R::Elem], m: &[R::Elem]) -> (Vec<R::Elem>, Vec<R::Elem>) {
    let d = m.len() - 1;
    if a.len() <= d {
        let mut rem = a.to_vec();
        trim(r, &mut rem);
        return (Vec::new(), rem);
    }
    let mut rem = a.to_vec();
    let mut q = vec![r.zero(); a.len() - d];
    for i in (d..a.len()).rev() {
        let c = rem[i].clone();
        if r.is_zero(&c) {
            continue;
        }
        q[i - d] = c.clone();
        for j in 0..d {
            let t = r.mul(&c, &m[j]);
            rem[i - d + j] = r.sub(&rem[i - d + j], &t);
        }
        rem[i] = r.zero();
    }
    rem.truncate(d);
    trim(r, &mut rem);
    trim(r, &mut q);
    (q, rem)
}

/// Euclidean division; the divisor's leading coefficient must be invertible.
pub fn divmod<R: Ring>(
    r: &R,
    a: &[R::Elem],
    b: &[R::Elem],
) -> Result<(Vec<R::Elem>, Vec<R::Elem>), InvFailure<R::Split>> {
    let db = degree(r, b).ok_or(InvFailure::Zero)?;
    let lc_inv = r.try_inv(&b[db])?;
    let monic: Vec<R::Elem> = b[..=db].iter().map(|c| r.mul(c, &lc_inv)).collect();
    let (q, rem) = divmod_monic(r, a, &monic);
    Ok((scale(r, &q, &lc_inv), rem))
}

/// Makes a nonzero polynomial monic.
pub fn monic<R: Ring>(r: &R, a: &[R::Elem]) -> Result<Vec<R::Elem>, InvFailure<R::Split>> {
    let d = degree(r, a).ok_or(InvFailure::Zero)?;
    let inv = r.try_inv(&a[d])?;
    Ok(a[..=d].iter().map(|c| r.mul(c, &inv)).collect())
}

/// Extended gcd: `(g, u, v)` with `g = u*a + v*b` and `g` monic.
pub fn xgcd<R: Ring>(
    r: &R,
    a: &[R::Elem],
    b: &[R::Elem],
) -> Result<(Vec<R::Elem>, Vec<R::Elem>, Vec<R::Elem>), InvFailure<R::Split>> {
    let mut r0 = a.to_vec();
    let mut r1 = b.to_vec();
    trim(r, &mut r0);
    trim(r, &mut r1);
    if r0.is_empty() && r1.is_empty() {
        return Err(InvFailure::Zero);
    }
    let (mut s0, mut s1) = (vec![r.one()], Vec::new());
    let (mut t0, mut t1) = (Vec::new(), vec![r.one()]);
    while !r1.is_empty() {
        let (q, rem) = divmod(r, &r0, &r1)?;
        r0 = std::mem::replace(&mut r1, rem);
        let ns = sub(r, &s0, &mul(r, &q, &s1));
        s0 = std::mem::replace(&mut s1, ns);
        let nt = sub(r, &t0, &mul(r, &q, &t1));
        t0 = std::mem::replace(&mut t1, nt);
    }
    let d = r0.len() - 1;
    let inv = r.try_inv(&r0[d])?;
    Ok((scale(r, &r0, &inv), scale(r, &s0, &inv), scale(r, &t0, &inv)))
}

/// A polynomial over `F_p`, coefficients constant term first, trimmed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    coeffs: Vec<FieldElement>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn constant(c: FieldElement) -> Self {
        Self::new(vec![c])
    }

    /// The monomial `X`.
    pub fn x() -> Self {
        Polynomial {
            coeffs: vec![FieldElement::ZERO, FieldElement::ONE],
        }
    }

    pub fn new(mut coeffs: Vec<FieldElement>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    pub fn from_u64s(f: &PrimeField, vals: &[u64]) -> Self {
        Self::new(vals.iter().map(|&v| f.elem(v)).collect())
    }

    pub fn from_i64s(f: &PrimeField, vals: &[i64]) -> Self {
        Self::new(vals.iter().map(|&v| f.from_i64(v)).collect())
    }

    /// The monic polynomial with the given roots.
    pub fn from_roots(f: &PrimeField, roots: &[FieldElement]) -> Self {
        let mut acc = vec![FieldElement::ONE];
        for &r in roots {
            acc = mul(f, &acc, &[f.neg(r), FieldElement::ONE]);
        }
        Self::new(acc)
    }

    pub fn coeffs(&self) -> &[FieldElement] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<FieldElement> {
        self.coeffs
    }

    pub fn coeff(&self, i: usize) -> FieldElement {
        self.coeffs.get(i).copied().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> FieldElement {
        self.coeffs.last().copied().unwrap_or_default()
    }

    pub fn is_monic(&self) -> bool {
        self.leading() == FieldElement::ONE
    }

    pub fn add(&self, other: &Self, f: &PrimeField) -> Self {
        Self::new(add(f, &self.coeffs, &other.coeffs))
    }

    pub fn sub(&self, other: &Self, f: &PrimeField) -> Self {
        Self::new(sub(f, &self.coeffs, &other.coeffs))
    }

    pub fn mul(&self, other: &Self, f: &PrimeField) -> Self {
        Self::new(mul(f, &self.coeffs, &other.coeffs))
    }

    pub fn scale(&self, c: FieldElement, f: &PrimeField) -> Self {
        Self::new(scale(f, &self.coeffs, &c))
    }

    pub fn divmod(&self, den: &Self, f: &PrimeField) -> Result<(Self, Self), PolyError> {
        if den.is_zero() {
            return Err(PolyError::DivisionByZero);
        }
        let (q, r) = divmod(f, &self.coeffs, &den.coeffs).map_err(|_| PolyError::DivisionByZero)?;
        Ok((Self::new(q), Self::new(r)))
    }

    pub fn rem(&self, den: &Self, f: &PrimeField) -> Result<Self, PolyError> {
        Ok(self.divmod(den, f)?.1)
    }

    /// `(d, u, v)` with `d = gcd(self, other) = u*self + v*other`, `d` monic.
    pub fn xgcd(&self, other: &Self, f: &PrimeField) -> Result<(Self, Self, Self), PolyError> {
        let (d, u, v) = xgcd(f, &self.coeffs, &other.coeffs).map_err(|_| PolyError::BothZero)?;
        Ok((Self::new(d), Self::new(u), Self::new(v)))
    }

    pub fn gcd(&self, other: &Self, f: &PrimeField) -> Result<Self, PolyError> {
        Ok(self.xgcd(other, f)?.0)
    }

    pub fn derivative(&self, f: &PrimeField) -> Self {
        Self::new(derivative(f, &self.coeffs))
    }

    pub fn eval(&self, x: FieldElement, f: &PrimeField) -> FieldElement {
        eval(f, &self.coeffs, &x)
    }

    pub fn monic(&self, f: &PrimeField) -> Result<Self, PolyError> {
        monic(f, &self.coeffs)
            .map(Self::new)
            .map_err(|_| PolyError::DivisionByZero)
    }

    pub fn pow_mod(&self, mut e: u64, m: &Self, f: &PrimeField) -> Result<Self, PolyError> {
        let mut base = self.rem(m, f)?;
        let mut acc = Self::constant(f.one()).rem(m, f)?;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base, f).rem(m, f)?;
            }
            base = base.mul(&base, f).rem(m, f)?;
            e >>= 1;
        }
        Ok(acc)
    }

    /// The squarefree part `f / gcd(f, f')` (for `deg f < p`), made monic.
    pub fn squarefree_part(&self, f: &PrimeField) -> Result<Self, PolyError> {
        let g = self.gcd(&self.derivative(f), f)?;
        let (q, _) = self.divmod(&g, f)?;
        q.monic(f)
    }

    /// The roots in `F_p`, sorted, via gcd with `X^p - X` and random splitting.
    pub fn roots<G: rand::Rng + ?Sized>(&self, f: &PrimeField, rng: &mut G) -> Vec<FieldElement> {
        if self.degree().unwrap_or(0) == 0 {
            return Vec::new();
        }
        let m = self.monic(f).expect("nonzero");
        let xp = Self::x().pow_mod(f.modulus(), &m, f).expect("nonzero modulus");
        let split = m.gcd(&xp.sub(&Self::x(), f), f).expect("nonzero");
        let mut out = Vec::new();
        split_linear(&split, f, rng, &mut out);
        out.sort();
        out
    }
}

fn split_linear<G: rand::Rng + ?Sized>(h: &Polynomial, f: &PrimeField, rng: &mut G, out: &mut Vec<FieldElement>) {
    match h.degree() {
        None | Some(0) => {}
        Some(1) => out.push(f.neg(h.coeff(0))),
        Some(d) => loop {
            let shift = Polynomial::new(vec![f.random(rng), f.one()]);
            let t = shift
                .pow_mod((f.modulus() - 1) / 2, h, f)
                .expect("nonzero")
                .sub(&Polynomial::constant(f.one()), f);
            let g = h.gcd(&t, f).expect("nonzero");
            let dg = g.degree().unwrap_or(0);
            if dg > 0 && dg < d {
                split_linear(&g, f, rng, out);
                split_linear(&h.divmod(&g, f).expect("nonzero").0, f, rng, out);
                return;
            }
        },
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(fm, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(fm, " + ")?;
            }
            first = false;
            match i {
                0 => write!(fm, "{c}")?,
                1 if c.value() == 1 => write!(fm, "U")?,
                1 => write!(fm, "{c}*U")?,
                _ if c.value() == 1 => write!(fm, "U^{i}")?,
                _ => write!(fm, "{c}*U^{i}")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn f() -> PrimeField {
        PrimeField::new(1009).unwrap()
    }

    #[test]
    fn worked_example_factorisation() {
        let f = f();
        let r = Polynomial::from_u64s(&f, &[339, 660, 447, 546, 751, 1]);
        let q = Polynomial::from_u64s(&f, &[353, 746, 1]);
        let lin = Polynomial::from_u64s(&f, &[268, 1]);
        let (r1, rem) = r.divmod(&q, &f).unwrap();
        assert!(rem.is_zero());
        let (r2, rem) = r1.divmod(&q, &f).unwrap();
        assert!(rem.is_zero());
        let (r3, rem) = r2.divmod(&lin, &f).unwrap();
        assert!(rem.is_zero());
        assert_eq!(r3, Polynomial::constant(f.one()));
        assert_eq!(r.squarefree_part(&f).unwrap(), q.mul(&lin, &f));
    }

    #[test]
    fn division_and_gcd_examples() {
        let f = f();
        let q = Polynomial::from_u64s(&f, &[353, 746, 1]);
        let (quo, rem) = q.divmod(&Polynomial::x(), &f).unwrap();
        assert_eq!(quo, Polynomial::from_u64s(&f, &[746, 1]));
        assert_eq!(rem, Polynomial::constant(f.elem(353)));
        let one = Polynomial::constant(f.one());
        assert_eq!(q.divmod(&one, &f).unwrap(), (q.clone(), Polynomial::zero()));
        assert_eq!(q.divmod(&Polynomial::zero(), &f), Err(PolyError::DivisionByZero));

        let lin = Polynomial::from_u64s(&f, &[268, 1]);
        assert_eq!(q.gcd(&lin, &f).unwrap(), one);
        assert_ne!(q.eval(f.from_i64(-268), &f), f.zero());
        let g = Polynomial::from_u64s(&f, &[6, 0, 2]);
        let (d, u, v) = g.xgcd(&Polynomial::zero(), &f).unwrap();
        assert_eq!(d, g.monic(&f).unwrap());
        assert_eq!(u, Polynomial::constant(f.inv(f.elem(2)).unwrap()));
        assert!(v.is_zero());
        assert_eq!(g.xgcd(&g, &f).unwrap().0, g.monic(&f).unwrap());
        assert_eq!(
            Polynomial::zero().xgcd(&Polynomial::zero(), &f),
            Err(PolyError::BothZero)
        );

        assert_eq!(Polynomial::constant(f.elem(5)).derivative(&f), Polynomial::zero());
        assert_eq!(q.derivative(&f), Polynomial::from_u64s(&f, &[746, 2]));
        let mut xp = vec![0u64; 1010];
        xp[1009] = 1;
        assert_eq!(Polynomial::from_u64s(&f, &xp).derivative(&f), Polynomial::zero());

        assert_eq!(q.eval(f.zero(), &f), f.elem(353));
        assert_eq!(Polynomial::zero().eval(f.elem(17), &f), f.zero());
        assert_eq!(lin.eval(f.elem(741), &f), f.zero());
    }

    #[test]
    fn roots_of_split_polynomial() {
        let f = f();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let roots: Vec<_> = [3u64, 17, 500, 1000].iter().map(|&v| f.elem(v)).collect();
        let p = Polynomial::from_roots(&f, &roots).mul(&Polynomial::from_u64s(&f, &[1, 0, 1]), &f);
        let found = p.roots(&f, &mut rng);
        // X^2 + 1 splits since 1009 = 1 mod 4.
        assert_eq!(found.len(), 6);
        for r in roots {
            assert!(found.contains(&r));
        }
        let q = Polynomial::from_u64s(&f, &[353, 746, 1]);
        assert!(q.roots(&f, &mut rng).is_empty());
    }

    proptest::proptest! {
        #[test]
        fn division_and_bezout(
            a in proptest::collection::vec(0u64..1009, 0..12),
            b in proptest::collection::vec(0u64..1009, 1..8),
        ) {
            let f = PrimeField::new(1009).unwrap();
            let (a, b) = (Polynomial::from_u64s(&f, &a), Polynomial::from_u64s(&f, &b));
            proptest::prop_assume!(!b.is_zero());
            let (q, r) = a.divmod(&b, &f).unwrap();
            proptest::prop_assert_eq!(q.mul(&b, &f).add(&r, &f), a.clone());
            proptest::prop_assert!(r.is_zero() || r.degree() < b.degree());
            let (g, u, v) = a.xgcd(&b, &f).unwrap();
            proptest::prop_assert_eq!(u.mul(&a, &f).add(&v.mul(&b, &f), &f), g.clone());
            proptest::prop_assert!(g.is_monic());
            proptest::prop_assert!(a.rem(&g, &f).unwrap().is_zero());
            proptest::prop_assert!(b.rem(&g, &f).unwrap().is_zero());
        }
    }
}
