//! Kernels in single-polynomial form: a squarefree `Q(U)` and coordinate
//! polynomials `C_ν(U)` with `C_0 = 1`, so that the roots of `Q` are the
//! kernel points `(C_ν(u))_ν`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::etale::{refine_components, KRing, KSplit, Quotient, QuotientSplit, Refine};
use crate::ff::{FieldElement, PrimeField};
use crate::poly::Polynomial;
use crate::theta::{param, proj_equal, AffineThetaPoint, Exponents, ThetaError, ThetaNullPoint};

/// Which kernel points the roots of `Q` enumerate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// All `ℓ^g` points, zero included.
    Full,
    /// The `ℓ^g − 1` nonzero points.
    Punctured,
    /// One point of each `±` pair of nonzero points (level 2 only).
    KummerHalf,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KernelError {
    #[error("ell = {0} must be odd and at least 3")]
    BadEll(u64),
    #[error("ell = {ell} must be coprime to n = {n} and p = {p}")]
    NotCoprime { ell: u64, n: u32, p: u64 },
    #[error("Q has degree {got}, expected {expected} for this convention")]
    Degree { expected: usize, got: usize },
    #[error("Q is not squarefree")]
    NotSquarefree,
    #[error("the kummer_half convention needs level 2")]
    KummerHalfLevel,
    #[error("coordinate polynomial for index {0} is missing")]
    MissingCoordinate(usize),
    #[error("coordinate index {0} is out of range")]
    BadIndex(usize),
    #[error("C_0 must be 1")]
    BadNormalisation,
    #[error("cannot determine a convention for a raw polynomial of degree {0}")]
    UnknownConvention(usize),
    #[error("invalid kernel: {reason}")]
    Invalid { reason: String, factor: Option<Polynomial> },
}

/// Serialized form of a kernel.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelJson {
    pub ell: u64,
    pub convention: Convention,
    #[serde(rename = "Q")]
    pub q: Vec<u64>,
    pub coords: BTreeMap<String, Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelDescriptor {
    ell: u64,
    convention: Convention,
    q: Polynomial,
    coords: Vec<Polynomial>,
}

/// `ℓ^g`.
pub fn kernel_size(ell: u64, g: usize) -> usize {
    (ell as usize).pow(g as u32)
}

fn expected_degree(convention: Convention, ell: u64, g: usize) -> usize {
    let s = kernel_size(ell, g);
    match convention {
        Convention::Full => s,
        Convention::Punctured => s - 1,
        Convention::KummerHalf => (s - 1) / 2,
    }
}

/// Checks `ℓ` odd, `ℓ ≥ 3`, and coprime to `n` and `p`.
pub fn check_ell(ell: u64, n: u32, p: u64) -> Result<(), KernelError> {
    if ell < 3 || ell.is_multiple_of(2) {
        return Err(KernelError::BadEll(ell));
    }
    if gcd(ell, n as u64) != 1 || ell.is_multiple_of(p) {
        return Err(KernelError::NotCoprime { ell, n, p });
    }
    Ok(())
}

pub(crate) fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl KernelDescriptor {
    /// Builds and checks the structural invariants. `coords` must list one
    /// polynomial per theta index.
    pub fn new(
        null: &ThetaNullPoint,
        ell: u64,
        convention: Convention,
        q: Polynomial,
        coords: Vec<Polynomial>,
    ) -> Result<Self, KernelError> {
        let f = null.field();
        let group = null.group();
        check_ell(ell, group.n(), f.modulus())?;
        if convention == Convention::KummerHalf && group.n() != 2 {
            return Err(KernelError::KummerHalfLevel);
        }
        let got = q.degree().unwrap_or(0);
        let expected = expected_degree(convention, ell, group.g());
        if got != expected || q.is_zero() {
            return Err(KernelError::Degree { expected, got });
        }
        let q = q.monic(f).expect("nonzero");
        if q.gcd(&q.derivative(f), f).map(|g| g.degree()) != Ok(Some(0)) {
            return Err(KernelError::NotSquarefree);
        }
        if coords.len() != group.size() {
            return Err(KernelError::MissingCoordinate(coords.len().min(group.size())));
        }
        if coords[0] != Polynomial::constant(f.one()) {
            return Err(KernelError::BadNormalisation);
        }
        let coords = coords.into_iter().map(|c| c.rem(&q, f).expect("nonzero")).collect();
        Ok(KernelDescriptor {
            ell,
            convention,
            q,
            coords,
        })
    }

    /// Accepts a possibly non-squarefree polynomial. Repeated factors are
    /// removed; the convention is read off the remaining degree. At level 2,
    /// a polynomial with one root per `±` pair plus the zero point loses the
    /// zero point and becomes `kummer_half`.
    pub fn from_raw(
        null: &ThetaNullPoint,
        ell: u64,
        raw: &Polynomial,
        coords: Vec<Polynomial>,
    ) -> Result<Self, KernelError> {
        let f = null.field();
        let g = null.group().g();
        let mut q = raw
            .squarefree_part(f)
            .map_err(|_| KernelError::Degree { expected: 1, got: 0 })?;
        let d = q.degree().unwrap_or(0);
        let s = kernel_size(ell, g);
        let half = (s - 1) / 2;
        let convention = if d == s {
            Convention::Full
        } else if d == s - 1 {
            Convention::Punctured
        } else if null.group().n() == 2 && d == half {
            Convention::KummerHalf
        } else if null.group().n() == 2 && d == half + 1 {
            let zero = zero_point_factor(null, &q, &coords);
            if zero.degree() != Some(1) {
                return Err(KernelError::UnknownConvention(d));
            }
            q = q.divmod(&zero, f).expect("nonzero").0;
            Convention::KummerHalf
        } else {
            return Err(KernelError::UnknownConvention(d));
        };
        Self::new(null, ell, convention, q, coords)
    }

    pub fn from_json(null: &ThetaNullPoint, json: &KernelJson) -> Result<Self, KernelError> {
        let f = null.field();
        let size = null.size();
        let mut coords = vec![None; size];
        for (key, c) in &json.coords {
            let idx: usize = key.parse().map_err(|_| KernelError::BadIndex(usize::MAX))?;
            if idx >= size {
                return Err(KernelError::BadIndex(idx));
            }
            coords[idx] = Some(Polynomial::from_u64s(f, c));
        }
        let coords = coords
            .into_iter()
            .enumerate()
            .map(|(i, c)| c.ok_or(KernelError::MissingCoordinate(i)))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(
            null,
            json.ell,
            json.convention,
            Polynomial::from_u64s(f, &json.q),
            coords,
        )
    }

    pub fn to_json(&self) -> KernelJson {
        let vals = |p: &Polynomial| p.coeffs().iter().map(|c| c.value()).collect::<Vec<_>>();
        KernelJson {
            ell: self.ell,
            convention: self.convention,
            q: vals(&self.q),
            coords: self
                .coords
                .iter()
                .enumerate()
                .map(|(i, c)| (i.to_string(), vals(c)))
                .collect(),
        }
    }

    pub fn ell(&self) -> u64 {
        self.ell
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn q(&self) -> &Polynomial {
        &self.q
    }

    pub fn coords(&self) -> &[Polynomial] {
        &self.coords
    }
}

/// The canonical formal kernel point over `F_p[U]/(m)`, `m | Q`, carrying the
/// formal scalar `λ` in `slot` with exponent one.
pub fn formal_point(
    field: &PrimeField,
    kd: &KernelDescriptor,
    m: &Polynomial,
    slot: usize,
) -> (KRing, AffineThetaPoint<KRing>) {
    let ring: KRing = Quotient::new(*field, m.coeffs().to_vec());
    let coords = kd.coords.iter().map(|c| ring.reduce(c.coeffs())).collect();
    (ring, AffineThetaPoint::new(coords, Exponents::unit(slot)))
}

/// The monic factor of `q` whose roots give the zero point.
pub fn zero_point_factor(null: &ThetaNullPoint, q: &Polynomial, coords: &[Polynomial]) -> Polynomial {
    let f = null.field();
    let nc = null.coords();
    coords.iter().enumerate().fold(q.clone(), |acc, (nu, c)| {
        // null_0·C_ν(U) − null_ν·C_0(U)
        let rel = c.scale(nc[0], f).sub(&coords[0].scale(nc[nu], f), f);
        acc.gcd(&rel, f).expect("q nonzero")
    })
}

/// Outcome of [`validate_kernel`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct KernelDiagnostics {
    pub ell: u64,
    pub convention: Convention,
    pub degree: usize,
    pub components: usize,
    pub splits: usize,
}

/// Checks the torsion condition in every CRT component, the position of the
/// zero point relative to the convention, and the coprimality conditions.
pub fn validate_kernel(kd: &KernelDescriptor, null: &ThetaNullPoint) -> Result<KernelDiagnostics, KernelError> {
    let f = *null.field();
    check_ell(kd.ell, null.group().n(), f.modulus())?;
    let zero = zero_point_factor(null, &kd.q, &kd.coords);
    let zero_deg = zero.degree().unwrap_or(0);
    match kd.convention {
        Convention::Full if zero_deg == 0 => {
            return Err(KernelError::Invalid {
                reason: "zero point is not a root of Q".into(),
                factor: None,
            })
        }
        Convention::Punctured | Convention::KummerHalf if zero_deg > 0 => {
            return Err(KernelError::Invalid {
                reason: "zero point is a root of Q".into(),
                factor: Some(zero),
            })
        }
        _ => {}
    }
    let (parts, splits) = refine_components(&f, &kd.q, |m| {
        let (ring, eta) = formal_point(&f, kd, m, param::LAMBDA1);
        let mult = null.multiply(&ring, kd.ell, &eta).map_err(|e| split_or_fail(&f, e))?;
        let mult = mult.with_exps(Exponents::ZERO);
        if proj_equal(&ring, &mult, &null.lift(&ring)) {
            Ok(())
        } else {
            Err(Refine::Fail(KernelError::Invalid {
                reason: "ell-torsion check failed".into(),
                factor: Some(m.clone()),
            }))
        }
    })?;
    Ok(KernelDiagnostics {
        ell: kd.ell,
        convention: kd.convention,
        degree: kd.q.degree().unwrap_or(0),
        components: parts.len(),
        splits,
    })
}

fn split_or_fail(f: &PrimeField, e: ThetaError<KSplit>) -> Refine<KernelError> {
    match e {
        ThetaError::Split(QuotientSplit::Modulus(g)) => Refine::Split(Polynomial::new(g).monic(f).expect("nonzero")),
        ThetaError::Split(QuotientSplit::Base(never)) => match never {},
        other => Refine::Fail(KernelError::Invalid {
            reason: other.to_string(),
            factor: None,
        }),
    }
}

/// Specialises the formal point at a root `u` of `Q`.
pub fn point_at(kd: &KernelDescriptor, f: &PrimeField, u: FieldElement) -> Vec<FieldElement> {
    kd.coords.iter().map(|c| c.eval(u, f)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::Ring;

    fn example() -> (PrimeField, ThetaNullPoint) {
        let f = PrimeField::new(1009).unwrap();
        let null = ThetaNullPoint::new(f, 1, 2, vec![f.elem(971), f.elem(94)]).unwrap();
        (f, null)
    }

    fn coords(f: &PrimeField) -> Vec<Polynomial> {
        vec![Polynomial::constant(f.one()), Polynomial::x()]
    }

    #[test]
    fn worked_example_validates() {
        let (f, null) = example();
        let q = Polynomial::from_u64s(&f, &[353, 746, 1]);
        let kd = KernelDescriptor::new(&null, 5, Convention::KummerHalf, q, coords(&f)).unwrap();
        let d = validate_kernel(&kd, &null).unwrap();
        assert_eq!(d.components, 1);
        let (ring, eta) = formal_point(&f, &kd, kd.q(), param::LAMBDA1);
        assert_eq!(eta.coords, vec![ring.one(), ring.generator()]);
    }

    #[test]
    fn raw_quintic_is_stripped() {
        let (f, null) = example();
        let raw = Polynomial::from_u64s(&f, &[339, 660, 447, 546, 751, 1]);
        let kd = KernelDescriptor::from_raw(&null, 5, &raw, coords(&f)).unwrap();
        assert_eq!(kd.convention(), Convention::KummerHalf);
        assert_eq!(kd.q(), &Polynomial::from_u64s(&f, &[353, 746, 1]));
        let zero = zero_point_factor(&null, &raw.squarefree_part(&f).unwrap(), &coords(&f));
        assert_eq!(zero, Polynomial::from_u64s(&f, &[268, 1]));
    }

    #[test]
    fn generic_polynomial_is_rejected() {
        let (f, null) = example();
        let q = Polynomial::from_u64s(&f, &[1, 0, 1]);
        let kd = KernelDescriptor::new(&null, 5, Convention::KummerHalf, q, coords(&f)).unwrap();
        match validate_kernel(&kd, &null) {
            Err(KernelError::Invalid { reason, .. }) => assert_eq!(reason, "ell-torsion check failed"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ell_checks() {
        assert!(check_ell(15, 2, 1009).is_ok());
        assert!(check_ell(9, 2, 1009).is_ok());
        assert_eq!(check_ell(4, 2, 1009), Err(KernelError::BadEll(4)));
        assert!(check_ell(1, 2, 1009).is_err());
        assert!(matches!(check_ell(3, 6, 1009), Err(KernelError::NotCoprime { .. })));
    }

    #[test]
    fn json_round_trip() {
        let (f, null) = example();
        let q = Polynomial::from_u64s(&f, &[353, 746, 1]);
        let kd = KernelDescriptor::new(&null, 5, Convention::KummerHalf, q, coords(&f)).unwrap();
        let text = serde_json::to_string(&kd.to_json()).unwrap();
        let back: KernelJson = serde_json::from_str(&text).unwrap();
        assert_eq!(KernelDescriptor::from_json(&null, &back).unwrap(), kd);
        assert!(text.contains("\"kummer_half\""));
    }
}
