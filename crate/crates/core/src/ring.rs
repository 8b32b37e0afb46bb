//! Commutative coefficient rings for theta arithmetic.
//!
//! Theta coordinates live either in the base field or in a quotient algebra
//! `R[X]/(m)`. Inversion in such an algebra can fail in two ways: the element
//! is zero, or it is a nonzero zero divisor, in which case a factor of a
//! modulus is reported so the caller can refine its CRT decomposition.

use std::fmt::Debug;

use crate::ff::{FieldElement, PrimeField};

/// Why an inversion failed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InvFailure<S> {
    /// The element is zero.
    Zero,
    /// The element is a zero divisor; the payload describes a factor.
    Split(S),
}

/// Split payload of a field: inversion in a field never splits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoSplit {}

pub trait Ring: Clone + Send + Sync {
    type Elem: Clone + PartialEq + Debug + Send + Sync;
    type Split: Clone + Debug + Send + Sync;

    fn field(&self) -> &PrimeField;
    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn from_fe(&self, c: FieldElement) -> Self::Elem;
    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn sub(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn neg(&self, a: &Self::Elem) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn scale(&self, a: &Self::Elem, c: FieldElement) -> Self::Elem;
    fn is_zero(&self, a: &Self::Elem) -> bool;
    fn try_inv(&self, a: &Self::Elem) -> Result<Self::Elem, InvFailure<Self::Split>>;

    /// Product of two dense polynomials with coefficients in this ring.
    fn mul_poly(&self, a: &[Self::Elem], b: &[Self::Elem]) -> Vec<Self::Elem> {
        generic_mul_poly(self, a, b)
    }

    fn square(&self, a: &Self::Elem) -> Self::Elem {
        self.mul(a, a)
    }

    fn pow(&self, a: &Self::Elem, mut e: u64) -> Self::Elem {
        let mut base = a.clone();
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            base = self.square(&base);
            e >>= 1;
        }
        acc
    }

    /// `a^e` for a signed exponent; negative powers need an inverse.
    fn pow_signed(&self, a: &Self::Elem, e: i64) -> Result<Self::Elem, InvFailure<Self::Split>> {
        if e >= 0 {
            Ok(self.pow(a, e as u64))
        } else {
            let inv = self.try_inv(a)?;
            Ok(self.pow(&inv, e.unsigned_abs()))
        }
    }
}

const GENERIC_KARATSUBA: usize = 16;

pub(crate) fn generic_mul_poly<R: Ring>(r: &R, a: &[R::Elem], b: &[R::Elem]) -> Vec<R::Elem> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    if a.len().min(b.len()) < GENERIC_KARATSUBA {
        let mut out = vec![r.zero(); a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            if r.is_zero(x) {
                continue;
            }
            for (j, y) in b.iter().enumerate() {
                out[i + j] = r.add(&out[i + j], &r.mul(x, y));
            }
        }
        return out;
    }
    let h = a.len().max(b.len()).div_ceil(2);
    let split = |v: &[R::Elem]| -> (Vec<R::Elem>, Vec<R::Elem>) {
        if v.len() <= h {
            (v.to_vec(), Vec::new())
        } else {
            (v[..h].to_vec(), v[h..].to_vec())
        }
    };
    let (a0, a1) = split(a);
    let (b0, b1) = split(b);
    let z0 = generic_mul_poly(r, &a0, &b0);
    let z2 = generic_mul_poly(r, &a1, &b1);
    let sa = add_slices(r, &a0, &a1);
    let sb = add_slices(r, &b0, &b1);
    let z1 = generic_mul_poly(r, &sa, &sb);
    let mut out = vec![r.zero(); a.len() + b.len() - 1];
    for (i, c) in z0.iter().enumerate() {
        out[i] = r.add(&out[i], c);
        out[i + h] = r.sub(&out[i + h], c);
    }
    for (i, c) in z2.iter().enumerate() {
        out[i + 2 * h] = r.add(&out[i + 2 * h], c);
        out[i + h] = r.sub(&out[i + h], c);
    }
    for (i, c) in z1.iter().enumerate() {
        out[i + h] = r.add(&out[i + h], c);
    }
    out
}

fn add_slices<R: Ring>(r: &R, a: &[R::Elem], b: &[R::Elem]) -> Vec<R::Elem> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| match (a.get(i), b.get(i)) {
            (Some(x), Some(y)) => r.add(x, y),
            (Some(x), None) => x.clone(),
            (None, Some(y)) => y.clone(),
            (None, None) => unreachable!(),
        })
        .collect()
}

impl Ring for PrimeField {
    type Elem = FieldElement;
    type Split = NoSplit;

    fn field(&self) -> &PrimeField {
        self
    }
    fn zero(&self) -> FieldElement {
        FieldElement::ZERO
    }
    fn one(&self) -> FieldElement {
        FieldElement::ONE
    }
    fn from_fe(&self, c: FieldElement) -> FieldElement {
        c
    }
    fn add(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        PrimeField::add(self, *a, *b)
    }
    fn sub(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        PrimeField::sub(self, *a, *b)
    }
    fn neg(&self, a: &FieldElement) -> FieldElement {
        PrimeField::neg(self, *a)
    }
    fn mul(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        PrimeField::mul(self, *a, *b)
    }
    fn scale(&self, a: &FieldElement, c: FieldElement) -> FieldElement {
        PrimeField::mul(self, *a, c)
    }
    fn is_zero(&self, a: &FieldElement) -> bool {
        a.is_zero()
    }
    fn try_inv(&self, a: &FieldElement) -> Result<FieldElement, InvFailure<NoSplit>> {
        self.inv(*a).map_err(|_| InvFailure::Zero)
    }
    fn mul_poly(&self, a: &[FieldElement], b: &[FieldElement]) -> Vec<FieldElement> {
        fp_mul_poly(self, a, b)
    }
}

const FP_KARATSUBA: usize = 32;

/// Dense product over `F_p`: lazy-reduced schoolbook below the Karatsuba
/// threshold, Karatsuba above it.
pub(crate) fn fp_mul_poly(f: &PrimeField, a: &[FieldElement], b: &[FieldElement]) -> Vec<FieldElement> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![FieldElement::ZERO; a.len() + b.len() - 1];
    fp_mul_into(f, a, b, &mut out);
    out
}

fn fp_mul_into(f: &PrimeField, a: &[FieldElement], b: &[FieldElement], out: &mut [FieldElement]) {
    if a.len().min(b.len()) < FP_KARATSUBA {
        schoolbook(f, a, b, out);
        return;
    }
    // Unbalanced operands: cut the longer one into chunks of the shorter length.
    let (a, b) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if a.len() >= 2 * b.len() {
        let mut tmp = vec![FieldElement::ZERO; 2 * b.len() - 1];
        for (ci, chunk) in a.chunks(b.len()).enumerate() {
            let t = &mut tmp[..chunk.len() + b.len() - 1];
            t.iter_mut().for_each(|x| *x = FieldElement::ZERO);
            fp_mul_into(f, chunk, b, t);
            let off = ci * b.len();
            for (i, v) in t.iter().enumerate() {
                out[off + i] = f.add(out[off + i], *v);
            }
        }
        return;
    }
    let h = a.len().div_ceil(2);
    let (a0, a1) = a.split_at(h);
    let (b0, b1) = if b.len() > h { b.split_at(h) } else { (b, &b[b.len()..]) };
    let mut z0 = vec![FieldElement::ZERO; a0.len() + b0.len() - 1];
    fp_mul_into(f, a0, b0, &mut z0);
    let z2 = if b1.is_empty() {
        Vec::new()
    } else {
        let mut z2 = vec![FieldElement::ZERO; a1.len() + b1.len() - 1];
        fp_mul_into(f, a1, b1, &mut z2);
        z2
    };
    let sa: Vec<FieldElement> = (0..h)
        .map(|i| f.add(a0[i], a1.get(i).copied().unwrap_or_default()))
        .collect();
    let sb: Vec<FieldElement> = (0..b0.len())
        .map(|i| f.add(b0[i], b1.get(i).copied().unwrap_or_default()))
        .collect();
    let mut z1 = vec![FieldElement::ZERO; sa.len() + sb.len() - 1];
    fp_mul_into(f, &sa, &sb, &mut z1);
    for (i, c) in z0.iter().enumerate() {
        out[i] = f.add(out[i], *c);
        z1[i] = f.sub(z1[i], *c);
    }
    for (i, c) in z2.iter().enumerate() {
        out[i + 2 * h] = f.add(out[i + 2 * h], *c);
        z1[i] = f.sub(z1[i], *c);
    }
    for (i, c) in z1.iter().enumerate() {
        if i + h < out.len() {
            out[i + h] = f.add(out[i + h], *c);
        } else {
            debug_assert!(c.is_zero());
        }
    }
}

fn schoolbook(f: &PrimeField, a: &[FieldElement], b: &[FieldElement], out: &mut [FieldElement]) {
    let limit = f.acc_limit();
    let p = f.modulus() as u128;
    for k in 0..a.len() + b.len() - 1 {
        let lo = k.saturating_sub(b.len() - 1);
        let hi = k.min(a.len() - 1);
        let mut acc: u128 = out[k].value() as u128;
        let mut count = 1;
        for i in lo..=hi {
            acc += a[i].value() as u128 * b[k - i].value() as u128;
            count += 1;
            if count >= limit {
                acc %= p;
                count = 1;
            }
        }
        out[k] = f.from_u128(acc);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn naive(f: &PrimeField, a: &[FieldElement], b: &[FieldElement]) -> Vec<FieldElement> {
        let mut out = vec![FieldElement::ZERO; a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] = f.add(out[i + j], f.mul(*x, *y));
            }
        }
        out
    }

    #[test]
    fn fast_products_match_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for p in [1009u64, 4611686009971671041] {
            let f = PrimeField::new(p).unwrap();
            for (la, lb) in [(1, 1), (5, 40), (33, 33), (100, 37), (129, 250), (300, 7)] {
                let a: Vec<_> = (0..la).map(|_| f.random(&mut rng)).collect();
                let b: Vec<_> = (0..lb).map(|_| f.random(&mut rng)).collect();
                assert_eq!(fp_mul_poly(&f, &a, &b), naive(&f, &a, &b), "{la}x{lb}");
                assert_eq!(generic_mul_poly(&f, &a, &b), naive(&f, &a, &b));
            }
        }
    }
}
