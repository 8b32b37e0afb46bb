//! Prime fields with a runtime modulus.
//!
//! Elements are plain canonical residues; every operation goes through the
//! [`PrimeField`] that owns the modulus, so one binary serves every field.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported modulus (exclusive).
pub const MAX_MODULUS: u64 = 1 << 62;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("modulus {0} is not an odd prime")]
    NotOddPrime(u64),
    #[error("modulus {0} is not below 2^62")]
    TooLarge(u64),
    #[error("division by zero")]
    DivisionByZero,
    #[error("{value} is not a canonical residue modulo {p}")]
    NonCanonical { value: u64, p: u64 },
}

/// A residue in `[0, p)`. The modulus lives in the [`PrimeField`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FieldElement(u64);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(0);
    pub const ONE: FieldElement = FieldElement(1);

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PrimeField {
    p: u64,
    /// How many products `< p^2` fit in a `u128` accumulator.
    acc_limit: usize,
}

impl PrimeField {
    pub fn new(p: u64) -> Result<Self, FieldError> {
        if p >= MAX_MODULUS {
            return Err(FieldError::TooLarge(p));
        }
        if p < 3 || p.is_multiple_of(2) || !is_prime(p) {
            return Err(FieldError::NotOddPrime(p));
        }
        let sq = (p as u128 - 1) * (p as u128 - 1);
        let acc_limit = (u128::MAX / sq).min(1 << 20) as usize;
        Ok(PrimeField { p, acc_limit })
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    pub(crate) fn acc_limit(&self) -> usize {
        self.acc_limit
    }

    /// Reduces an arbitrary integer.
    pub fn elem(&self, v: u64) -> FieldElement {
        FieldElement(v % self.p)
    }

    pub fn from_i64(&self, v: i64) -> FieldElement {
        let r = v.rem_euclid(self.p as i64);
        FieldElement(r as u64)
    }

    pub(crate) fn from_u128(&self, v: u128) -> FieldElement {
        FieldElement((v % self.p as u128) as u64)
    }

    /// Accepts only canonical residues (used for external input).
    pub fn check(&self, v: u64) -> Result<FieldElement, FieldError> {
        if v < self.p {
            Ok(FieldElement(v))
        } else {
            Err(FieldError::NonCanonical { value: v, p: self.p })
        }
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement(0)
    }

    pub fn one(&self) -> FieldElement {
        FieldElement(1)
    }

    #[inline]
    pub fn add(&self, x: FieldElement, y: FieldElement) -> FieldElement {
        let s = x.0 + y.0;
        FieldElement(if s >= self.p { s - self.p } else { s })
    }

    #[inline]
    pub fn sub(&self, x: FieldElement, y: FieldElement) -> FieldElement {
        FieldElement(if x.0 >= y.0 { x.0 - y.0 } else { x.0 + self.p - y.0 })
    }

    #[inline]
    pub fn neg(&self, x: FieldElement) -> FieldElement {
        FieldElement(if x.0 == 0 { 0 } else { self.p - x.0 })
    }

    #[inline]
    pub fn mul(&self, x: FieldElement, y: FieldElement) -> FieldElement {
        FieldElement(((x.0 as u128 * y.0 as u128) % self.p as u128) as u64)
    }

    pub fn pow(&self, x: FieldElement, mut e: u64) -> FieldElement {
        let mut base = x;
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    pub fn inv(&self, x: FieldElement) -> Result<FieldElement, FieldError> {
        if x.0 == 0 {
            return Err(FieldError::DivisionByZero);
        }
        // Extended Euclid on machine integers.
        let (mut r0, mut r1) = (self.p as i128, x.0 as i128);
        let (mut t0, mut t1) = (0i128, 1i128);
        while r1 != 0 {
            let q = r0 / r1;
            (r0, r1) = (r1, r0 - q * r1);
            (t0, t1) = (t1, t0 - q * t1);
        }
        debug_assert_eq!(r0, 1);
        Ok(FieldElement(t0.rem_euclid(self.p as i128) as u64))
    }

    pub fn div(&self, x: FieldElement, y: FieldElement) -> Result<FieldElement, FieldError> {
        Ok(self.mul(x, self.inv(y)?))
    }

    /// Legendre symbol as 0, 1 or -1.
    pub fn legendre(&self, x: FieldElement) -> i32 {
        if x.0 == 0 {
            return 0;
        }
        if self.pow(x, (self.p - 1) / 2).0 == 1 {
            1
        } else {
            -1
        }
    }

    /// A square root by Tonelli-Shanks, if one exists.
    pub fn sqrt(&self, x: FieldElement) -> Option<FieldElement> {
        if x.0 == 0 {
            return Some(x);
        }
        if self.legendre(x) != 1 {
            return None;
        }
        let p = self.p;
        if p % 4 == 3 {
            return Some(self.pow(x, (p + 1) / 4));
        }
        let mut q = p - 1;
        let mut s = 0u32;
        while q.is_multiple_of(2) {
            q /= 2;
            s += 1;
        }
        let mut z = FieldElement(2);
        while self.legendre(z) != -1 {
            z = FieldElement(z.0 + 1);
        }
        let mut m = s;
        let mut c = self.pow(z, q);
        let mut t = self.pow(x, q);
        let mut r = self.pow(x, q.div_ceil(2));
        while t.0 != 1 {
            let mut i = 0;
            let mut t2 = t;
            while t2.0 != 1 {
                t2 = self.mul(t2, t2);
                i += 1;
            }
            let mut b = c;
            for _ in 0..(m - i - 1) {
                b = self.mul(b, b);
            }
            m = i;
            c = self.mul(b, b);
            t = self.mul(t, c);
            r = self.mul(r, b);
        }
        Some(r)
    }

    pub fn random<G: rand::Rng + ?Sized>(&self, rng: &mut G) -> FieldElement {
        FieldElement(rng.gen_range(0..self.p))
    }

    pub fn random_nonzero<G: rand::Rng + ?Sized>(&self, rng: &mut G) -> FieldElement {
        FieldElement(rng.gen_range(1..self.p))
    }
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut a: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    a %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, a, m);
        }
        a = mul_mod(a, a, m);
        e >>= 1;
    }
    r
}

/// Deterministic Miller-Rabin, exact for all `u64`.
pub fn is_prime(n: u64) -> bool {
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
    'outer: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// A uniformly random prime in `[lo, hi)` satisfying `filter`.
pub fn random_prime<G: rand::Rng + ?Sized>(rng: &mut G, lo: u64, hi: u64, filter: impl Fn(u64) -> bool) -> u64 {
    loop {
        let c = rng.gen_range(lo..hi) | 1;
        if c < hi && is_prime(c) && filter(c) {
            return c;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f1009() -> PrimeField {
        PrimeField::new(1009).unwrap()
    }

    #[test]
    fn small_values() {
        let f = f1009();
        let e = |v| f.elem(v);
        assert_eq!(f.add(e(971), e(94)), e(56));
        assert_eq!(f.add(e(0), e(123)), e(123));
        assert_eq!(f.add(e(1008), e(1)), e(0));
        assert_eq!(f.mul(e(971), e(971)), e(435));
        assert_eq!(f.mul(e(971), e(94)), e(464));
        assert_eq!(f.mul(e(1), e(77)), e(77));
        assert_eq!(f.inv(e(1)).unwrap(), e(1));
        assert_eq!(f.inv(e(2)).unwrap(), e(505));
        assert_eq!(f.inv(e(0)), Err(FieldError::DivisionByZero));
    }

    #[test]
    fn rejects_bad_moduli() {
        assert!(PrimeField::new(1).is_err());
        assert!(PrimeField::new(2).is_err());
        assert!(PrimeField::new(1001).is_err());
        assert!(PrimeField::new(1 << 62).is_err());
        assert!(PrimeField::new(4611686009971671041).is_ok());
        assert!(f1009().check(1009).is_err());
    }

    #[test]
    fn primality_matches_trial_division() {
        for n in 0u64..5000 {
            let naive = n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0);
            assert_eq!(is_prime(n), naive, "{n}");
        }
        assert!(!is_prime(3_215_031_751));
    }

    #[test]
    fn sqrt_roundtrip() {
        for p in [1009u64, 1013, 65537, 998244353] {
            let f = PrimeField::new(p).unwrap();
            for v in 1..200 {
                let x = f.elem(v);
                match f.sqrt(x) {
                    Some(r) => assert_eq!(f.mul(r, r), x),
                    None => assert_eq!(f.legendre(x), -1),
                }
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn field_axioms(a in 0u64..1_000_003, b in 0u64..1_000_003, c in 0u64..1_000_003) {
            let f = PrimeField::new(1_000_003).unwrap();
            let (a, b, c) = (f.elem(a), f.elem(b), f.elem(c));
            proptest::prop_assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
            proptest::prop_assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
            proptest::prop_assert_eq!(f.add(f.sub(a, b), b), a);
            proptest::prop_assert_eq!(f.pow(a, 1_000_003), a);
            if !a.is_zero() {
                proptest::prop_assert_eq!(f.mul(a, f.inv(a).unwrap()), f.one());
            }
        }
    }
}
