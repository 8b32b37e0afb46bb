//! The isogeny `A → A/K` from a formal kernel point.
//!
//! Each Koizumi factor `X_m + t_m` is a point `x_m·P + Σ_i π_im·I^(i)` of the
//! lattice spanned by `P` and the formal kernel points `I^(i)` (one per
//! tensor leg), with `x_m = M[m][0]` and `(π_i)` the kernel parametrisation
//! of [`SquareDecomposition::kernel_basis`]. Lifts of lattice points are
//! produced by ladders from the basis lifts and their normalised pairwise
//! sums; formal scalars are tracked as exponents and substituted by their
//! `ℓ`-th powers once the product is assembled. The sum over the kernel is
//! a trace in each CRT component.

pub mod decompose;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::etale::{
    refine_components, trace_b, trace_k, BRing, BSplit, KRing, KSplit, Quotient, QuotientSplit, Refine,
};
use crate::ff::{FieldElement, PrimeField};
use crate::kernel::{formal_point, Convention, KernelDescriptor, KernelError};
use crate::poly::{self, Polynomial};
use crate::ring::{InvFailure, NoSplit, Ring};
use crate::theta::{normalize_projective, param, AffineThetaPoint, Exponents, ThetaError, ThetaNullPoint, NUM_PARAMS};

pub use decompose::{decompose, flat_decomposition, pipeline_decomposition, DecomposeError, SquareDecomposition};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IsogenyError {
    #[error(transparent)]
    Decompose(#[from] DecomposeError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("operation needs 4 | n, got n = {0}")]
    UnsupportedLevel(u32),
    #[error("r = {r} cannot run on a {convention:?} kernel")]
    UnsupportedConvention { r: usize, convention: Convention },
    #[error("point has {got} coordinates, expected {expected}")]
    PointLength { expected: usize, got: usize },
    #[error("point has all coordinates zero")]
    ZeroPoint,
    #[error("degenerate computation: {0}")]
    Degenerate(String),
    #[error("normalization equations disagree between coordinates")]
    InconsistentNormalization,
    #[error("formal exponent {exponent} in slot {slot} is not a multiple of ell")]
    ImpureExponent { slot: usize, exponent: i64 },
    #[error("the computed projective point vanishes")]
    ZeroOutput,
}

static PURITY_CHECKS: AtomicU64 = AtomicU64::new(0);
static PURITY_VIOLATIONS: AtomicU64 = AtomicU64::new(0);

/// Process-wide counts of exponent substitutions and of those that found an
/// exponent not divisible by `ℓ`.
pub fn purity_counters() -> (u64, u64) {
    (
        PURITY_CHECKS.load(Ordering::Relaxed),
        PURITY_VIOLATIONS.load(Ordering::Relaxed),
    )
}

/// Failure inside one CRT component.
#[derive(Debug, Clone)]
pub enum Fault<S> {
    Split(S),
    Fail(IsogenyError),
}

impl<S> From<ThetaError<S>> for Fault<S> {
    fn from(e: ThetaError<S>) -> Self {
        match e {
            ThetaError::Split(s) => Fault::Split(s),
            other => Fault::Fail(IsogenyError::Degenerate(other.cast::<()>().to_string())),
        }
    }
}

impl<S> From<InvFailure<S>> for Fault<S> {
    fn from(e: InvFailure<S>) -> Self {
        match e {
            InvFailure::Split(s) => Fault::Split(s),
            InvFailure::Zero => Fault::Fail(IsogenyError::Degenerate("inverting zero".into())),
        }
    }
}

impl<S> From<IsogenyError> for Fault<S> {
    fn from(e: IsogenyError) -> Self {
        Fault::Fail(e)
    }
}

/// Known values `c_s = s^ℓ` of the formal scalars.
#[derive(Clone, Debug)]
pub struct Relations<R: Ring>(pub Vec<Option<R::Elem>>);

impl<R: Ring> Default for Relations<R> {
    fn default() -> Self {
        Relations(vec![None; NUM_PARAMS])
    }
}

impl<R: Ring> Relations<R> {
    pub fn get(&self, slot: usize) -> Option<&R::Elem> {
        self.0[slot].as_ref()
    }

    pub fn set(&mut self, slot: usize, c: R::Elem) {
        self.0[slot] = Some(c);
    }

    /// `Π_s s^(E_s)` for exponents that are all multiples of `ℓ`.
    pub fn substitute(&self, ring: &R, exps: &Exponents, ell: u64) -> Result<R::Elem, Fault<R::Split>> {
        let mut acc = ring.one();
        for (slot, &e) in exps.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            PURITY_CHECKS.fetch_add(1, Ordering::Relaxed);
            if e % ell as i64 != 0 {
                PURITY_VIOLATIONS.fetch_add(1, Ordering::Relaxed);
                return Err(Fault::Fail(IsogenyError::ImpureExponent { slot, exponent: e }));
            }
            let c = self
                .get(slot)
                .ok_or_else(|| IsogenyError::Degenerate(format!("no relation for slot {slot}")))?;
            acc = ring.mul(&acc, &ring.pow_signed(c, e / ell as i64)?);
        }
        Ok(acc)
    }
}

/// `num_ν / den_ν` for the first `ν` (starting at 0) with `den_ν` invertible,
/// after checking `num_ν·den_μ = num_μ·den_ν` for all `μ`.
fn consistent_ratio<R: Ring>(ring: &R, num: &[R::Elem], den: &[R::Elem]) -> Result<R::Elem, Fault<R::Split>> {
    let mut split = None;
    for nu in 0..den.len() {
        match ring.try_inv(&den[nu]) {
            Ok(inv) => {
                let consistent = (0..den.len()).all(|mu| ring.mul(&num[mu], &den[nu]) == ring.mul(&num[nu], &den[mu]));
                if !consistent {
                    return Err(Fault::Fail(IsogenyError::InconsistentNormalization));
                }
                return Ok(ring.mul(&num[nu], &inv));
            }
            Err(InvFailure::Split(s)) => {
                split.get_or_insert(s);
            }
            Err(InvFailure::Zero) => {}
        }
    }
    Err(match split {
        Some(s) => Fault::Split(s),
        None => Fault::Fail(IsogenyError::Degenerate(
            "no invertible coordinate to normalize with".into(),
        )),
    })
}

/// `λ^ℓ` for a formal kernel point carrying `λ` with exponent one:
/// `((ℓ'+1)·η)_ν·λ^ℓ = (ℓ'·η)_{−ν}`, `ℓ = 2ℓ' + 1`.
pub fn normalize_kernel_point<R: Ring>(
    null: &ThetaNullPoint,
    ring: &R,
    ell: u64,
    eta: &AffineThetaPoint<R>,
) -> Result<R::Elem, Fault<R::Split>> {
    let half = (ell - 1) / 2;
    let a = null.multiply(ring, half, eta)?;
    let b = null.multiply(ring, half + 1, eta)?;
    debug_assert_eq!(
        Exponents::combine(&[(1, &b.exps), (-1, &a.exps)]),
        Exponents::combine(&[(ell as i64, &eta.exps)])
    );
    let group = null.group();
    let a_neg: Vec<R::Elem> = (0..a.coords.len()).map(|nu| a.coords[group.neg(nu)].clone()).collect();
    consistent_ratio(ring, &a_neg, &b.coords)
}

/// `μ^ℓ` for a lift `eta` of `P + η_K` carrying `μ` (in `slot`) with
/// exponent one, from `ℓ·η_K + (P + η_K) − η_K` computed by a ladder:
/// with every formal scalar substituted the ladder returns `P̃` exactly.
#[allow(clippy::too_many_arguments)]
pub fn normalize_sum<R: Ring>(
    null: &ThetaNullPoint,
    ring: &R,
    ell: u64,
    eta: &AffineThetaPoint<R>,
    slot: usize,
    eta_k: &AffineThetaPoint<R>,
    p: &AffineThetaPoint<R>,
    relations: &Relations<R>,
) -> Result<R::Elem, Fault<R::Split>> {
    let raw = null.ladder(ring, ell, eta, eta_k, p)?;
    let mut rest = raw.exps;
    if rest.0[slot] != ell as i64 {
        return Err(Fault::Fail(IsogenyError::Degenerate(
            "unexpected exponent in normalization".into(),
        )));
    }
    rest.0[slot] = 0;
    let known = relations.substitute(ring, &rest, ell)?;
    let den: Vec<R::Elem> = raw.coords.iter().map(|c| ring.mul(c, &known)).collect();
    consistent_ratio(ring, &p.coords, &den)
}

/// Options for [`compute_isogeny`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsogenyOptions {
    pub force_r: Option<usize>,
    /// With two tensor legs, normalise the first leg once over `K` and
    /// transport the result to the second leg.
    pub three_way: bool,
}

/// Bookkeeping for one evaluation of the Koizumi sums.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalStats {
    pub components: usize,
    pub splits: usize,
    pub strata: Vec<String>,
}

impl EvalStats {
    fn absorb(&mut self, other: EvalStats) {
        self.components += other.components;
        self.splits += other.splits;
        self.strata.extend(other.strata);
    }
}

/// What each tensor leg contributes to a stratum: the formal kernel point
/// or the zero point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum LegKind {
    Formal,
    Zero,
}

/// A formal kernel leg, optionally with its normalization already known.
#[derive(Clone, Debug)]
struct LegInput<R: Ring> {
    /// Raw lift carrying `λ_i` with exponent one.
    point: AffineThetaPoint<R>,
    lambda: Option<R::Elem>,
    /// Raw lift of `P + I` carrying `μ_i`, with `μ_i^ℓ`.
    shifted: Option<(AffineThetaPoint<R>, R::Elem)>,
}

const LAMBDA: [usize; 2] = [param::LAMBDA1, param::LAMBDA2];
const MU: [usize; 2] = [param::MU1, param::MU2];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Dim {
    Point,
    Leg(usize),
}

/// Shared data for one isogeny evaluation.
struct Setup<'a> {
    null: &'a ThetaNullPoint,
    kd: &'a KernelDescriptor,
    dec: &'a SquareDecomposition,
    ell: u64,
    x: Vec<i64>,
    basis: Vec<Vec<u64>>,
    point: Option<Vec<FieldElement>>,
    three_way: bool,
}

/// The Koizumi factors of one stratum, with the substitution factor for
/// their formal scalars.
struct Assembled<R: Ring> {
    factors: Vec<AffineThetaPoint<R>>,
    subst: R::Elem,
}

impl<'a> Setup<'a> {
    fn field(&self) -> &PrimeField {
        self.null.field()
    }

    /// `j_m = k·M[m][0]·ℓ⁻¹ mod n`, componentwise on `(Z/nZ)^g`.
    fn j_index(&self, k: usize, m: usize) -> usize {
        let group = self.null.group();
        let s = self.dec.m_inv_n[0][m] as i64;
        let digits: Vec<i64> = group.digits(k).iter().map(|&d| d as i64 * s).collect();
        group.index(&digits)
    }

    fn value<R: Ring>(&self, ring: &R, asm: &Assembled<R>, k: usize) -> R::Elem {
        asm.factors.iter().enumerate().fold(asm.subst.clone(), |acc, (m, f)| {
            ring.mul(&acc, &f.coords[self.j_index(k, m)])
        })
    }

    /// Builds the lattice lifts and the factor points for the given legs.
    fn assemble<R: Ring>(&self, ring: &R, legs: &[Option<LegInput<R>>]) -> Result<Assembled<R>, Fault<R::Split>> {
        let null = self.null;
        let ell = self.ell;
        let zero = null.lift(ring);
        let mut rel = Relations::<R>::default();
        let mut dims = Vec::new();
        let mut basis_pts: Vec<AffineThetaPoint<R>> = Vec::new();
        if let Some(p) = &self.point {
            dims.push(Dim::Point);
            basis_pts.push(AffineThetaPoint::constant(ring, p));
        }
        for (i, leg) in legs.iter().enumerate() {
            let Some(leg) = leg else { continue };
            let lambda = match &leg.lambda {
                Some(c) => c.clone(),
                None => normalize_kernel_point(null, ring, ell, &leg.point)?,
            };
            rel.set(LAMBDA[i], lambda);
            dims.push(Dim::Leg(i));
            basis_pts.push(leg.point.clone());
        }
        let dcount = dims.len();
        let mut table: Vec<Option<AffineThetaPoint<R>>> = vec![None; 1 << dcount];
        table[0] = Some(zero.clone());
        for (d, e) in basis_pts.iter().enumerate() {
            table[1 << d] = Some(e.clone());
        }
        for d1 in 0..dcount {
            for d2 in d1 + 1..dcount {
                let sum = match (dims[d1], dims[d2]) {
                    (Dim::Point, Dim::Leg(i)) => {
                        let leg = legs[i].as_ref().expect("present");
                        let (eta, mu) = match &leg.shifted {
                            Some((eta, mu)) => (eta.clone(), mu.clone()),
                            None => {
                                let eta = null
                                    .normal_add(ring, &basis_pts[d1], &leg.point)?
                                    .with_exps(Exponents::unit(MU[i]));
                                let mu = normalize_sum(null, ring, ell, &eta, MU[i], &leg.point, &basis_pts[d1], &rel)?;
                                (eta, mu)
                            }
                        };
                        rel.set(MU[i], mu);
                        eta
                    }
                    (Dim::Leg(_), Dim::Leg(_)) => {
                        let eta = null
                            .normal_add(ring, &basis_pts[d1], &basis_pts[d2])?
                            .with_exps(Exponents::unit(param::LAMBDA12));
                        let c = normalize_kernel_point(null, ring, ell, &eta)?;
                        rel.set(param::LAMBDA12, c);
                        eta
                    }
                    _ => unreachable!("the point dimension comes first"),
                };
                table[(1 << d1) | (1 << d2)] = Some(sum);
            }
        }
        if dcount == 3 {
            let t = |m: usize| table[m].as_ref().expect("filled");
            let triple = null.three_way_add(ring, t(3), t(5), t(6), t(1), t(2), t(4))?;
            table[7] = Some(triple);
        }
        let table: Vec<AffineThetaPoint<R>> = table.into_iter().map(|t| t.expect("filled")).collect();

        let mut factors = Vec::with_capacity(self.dec.r);
        for m in 0..self.dec.r {
            let mut coeffs: Vec<i64> = dims
                .iter()
                .map(|d| match d {
                    Dim::Point => self.x[m],
                    Dim::Leg(i) => self.basis[*i][m] as i64,
                })
                .collect();
            let flip = self.point.is_some() && self.x[m] < 0;
            if flip {
                for (c, d) in coeffs.iter_mut().zip(&dims) {
                    *c = match d {
                        Dim::Point => -*c,
                        Dim::Leg(_) => (ell as i64 - *c) % ell as i64,
                    };
                }
            }
            let pt = lattice_point(null, ring, &table, &coeffs)?;
            factors.push(if flip { null.neg(&pt) } else { pt });
        }
        let total = factors
            .iter()
            .fold(Exponents::ZERO, |acc, f| Exponents::combine(&[(1, &acc), (1, &f.exps)]));
        let subst = rel.substitute(ring, &total, ell)?;
        Ok(Assembled { factors, subst })
    }
}

/// `Σ_d c_d·e_d` from the lifts of all subset sums of the `e_d`, one
/// dimension at a time: `ladder(c_d, T(S ∪ {d}), e_d, T(S))`.
fn lattice_point<R: Ring>(
    null: &ThetaNullPoint,
    ring: &R,
    table: &[AffineThetaPoint<R>],
    coeffs: &[i64],
) -> Result<AffineThetaPoint<R>, Fault<R::Split>> {
    let mut cur = table.to_vec();
    for (d, &c) in coeffs.iter().enumerate() {
        let bit = 1usize << d;
        let base = &table[bit];
        let mut next = cur.clone();
        for mask in (0..cur.len()).filter(|m| m & ((bit << 1) - 1) == 0) {
            next[mask] = null.ladder(ring, c as u64, &cur[mask | bit], base, &cur[mask])?;
        }
        cur = next;
    }
    Ok(cur.swap_remove(0))
}

fn k_fault(f: &PrimeField, e: Fault<KSplit>) -> Refine<IsogenyError> {
    match e {
        Fault::Split(QuotientSplit::Modulus(g)) => Refine::Split(Polynomial::new(g).monic(f).expect("nonzero")),
        Fault::Split(QuotientSplit::Base(never)) => match never {},
        Fault::Fail(e) => Refine::Fail(e),
    }
}

fn base_fault(e: Fault<NoSplit>) -> IsogenyError {
    match e {
        Fault::Split(never) => match never {},
        Fault::Fail(e) => e,
    }
}

fn leg_slot(i: usize) -> usize {
    LAMBDA[i]
}

/// Coordinates of the formal kernel point in the second tensor variable.
fn second_leg(kd: &KernelDescriptor, kring: &KRing, bring: &BRing) -> Vec<Vec<Vec<FieldElement>>> {
    kd.coords()
        .iter()
        .map(|c| {
            let lifted: Vec<Vec<FieldElement>> = c.coeffs().iter().map(|&x| kring.embed(x)).collect();
            bring.reduce(&lifted)
        })
        .collect()
}

/// Chinese remaindering of residues modulo pairwise coprime moduli.
fn crt(f: &PrimeField, parts: &[(Polynomial, Polynomial)]) -> Polynomial {
    let mut iter = parts.iter();
    let (m0, r0) = iter.next().expect("at least one component");
    let (mut modulus, mut acc) = (m0.clone(), r0.clone());
    for (m, r) in iter {
        // acc + modulus·((r − acc)·modulus⁻¹ mod m)
        let (_, u, _) = modulus.xgcd(m, f).expect("nonzero");
        let t = r.sub(&acc, f).mul(&u, f).rem(m, f).expect("nonzero");
        acc = acc.add(&modulus.mul(&t, f), f);
        modulus = modulus.mul(m, f);
        acc = acc.rem(&modulus, f).expect("nonzero");
    }
    acc
}

/// `λ^ℓ` and, with a point, the raw lift of `P + I` with `μ^ℓ`, over one
/// component of `Q`.
type LegNormalization = (Vec<FieldElement>, Option<(Vec<Vec<FieldElement>>, Vec<FieldElement>)>);

/// First-leg normalisation computed over `K` and recombined modulo `Q`.
struct Transported {
    lambda: Polynomial,
    shifted: Option<(Vec<Polynomial>, Polynomial)>,
}

impl<'a> Setup<'a> {
    fn formal_leg(&self, m: &Polynomial, i: usize) -> (KRing, LegInput<KRing>) {
        let (ring, eta) = formal_point(self.field(), self.kd, m, leg_slot(i));
        (
            ring,
            LegInput {
                point: eta,
                lambda: None,
                shifted: None,
            },
        )
    }

    /// The stratum with every leg at the zero point.
    fn run_base(&self, t: usize) -> Result<Vec<FieldElement>, IsogenyError> {
        let f = *self.field();
        let legs: Vec<Option<LegInput<PrimeField>>> = vec![None; t];
        let asm = self.assemble(&f, &legs).map_err(base_fault)?;
        Ok((0..self.null.size()).map(|k| self.value(&f, &asm, k)).collect())
    }

    /// One formal leg over `K`, the others at zero; traced and summed over
    /// the CRT components of `Q`.
    fn run_k(&self, kinds: &[LegKind]) -> Result<(Vec<FieldElement>, EvalStats), IsogenyError> {
        let f = *self.field();
        let i = kinds
            .iter()
            .position(|&k| k == LegKind::Formal)
            .expect("one formal leg");
        let (parts, splits) = refine_components(&f, self.kd.q(), |m| {
            let (ring, leg) = self.formal_leg(m, i);
            let legs: Vec<Option<LegInput<KRing>>> = kinds
                .iter()
                .map(|&k| (k == LegKind::Formal).then(|| leg.clone()))
                .collect();
            let asm = self.assemble(&ring, &legs).map_err(|e| k_fault(&f, e))?;
            Ok((0..self.null.size())
                .into_par_iter()
                .map(|k| trace_k(&ring, &self.value(&ring, &asm, k)))
                .collect::<Vec<_>>())
        })?;
        let mut total = vec![f.zero(); self.null.size()];
        for (_, v) in &parts {
            for (t, x) in total.iter_mut().zip(v) {
                *t = f.add(*t, *x);
            }
        }
        let stats = EvalStats {
            components: parts.len(),
            splits,
            strata: Vec::new(),
        };
        Ok((total, stats))
    }

    /// The first leg's normalisation over each component of `Q`, recombined.
    fn transport(&self) -> Result<(Transported, usize), IsogenyError> {
        let f = *self.field();
        let (parts, splits) = refine_components(&f, self.kd.q(), |m| {
            let (ring, leg) = self.formal_leg(m, 0);
            let fault = |e| k_fault(&f, e);
            let lambda = normalize_kernel_point(self.null, &ring, self.ell, &leg.point).map_err(fault)?;
            let shifted = match &self.point {
                None => None,
                Some(p) => {
                    let p = AffineThetaPoint::constant(&ring, p);
                    let eta = self
                        .null
                        .normal_add(&ring, &p, &leg.point)
                        .map_err(|e| fault(e.into()))?
                        .with_exps(Exponents::unit(MU[0]));
                    let mut rel = Relations::default();
                    rel.set(LAMBDA[0], lambda.clone());
                    let mu =
                        normalize_sum(self.null, &ring, self.ell, &eta, MU[0], &leg.point, &p, &rel).map_err(fault)?;
                    Some((eta.coords, mu))
                }
            };
            Ok((lambda, shifted))
        })?;
        let poly_parts = |sel: &dyn Fn(&LegNormalization) -> Vec<FieldElement>| {
            let v: Vec<(Polynomial, Polynomial)> = parts
                .iter()
                .map(|(m, t)| (m.clone(), Polynomial::new(sel(t))))
                .collect();
            crt(&f, &v)
        };
        let lambda = poly_parts(&|t| t.0.clone());
        let shifted = self.point.as_ref().map(|_| {
            let coords = (0..self.null.size())
                .map(|nu| poly_parts(&|t| t.1.as_ref().expect("shifted").0[nu].clone()))
                .collect();
            (coords, poly_parts(&|t| t.1.as_ref().expect("shifted").1.clone()))
        });
        Ok((Transported { lambda, shifted }, splits))
    }

    /// Both legs formal over the tensor square; components are pairs
    /// `(q, m)` with `q | Q` over `F_p` and `m | Q(V)` over `F_p[U]/(q)`.
    fn run_b(&self) -> Result<(Vec<FieldElement>, EvalStats), IsogenyError> {
        let f = *self.field();
        let mut splits = 0;
        let transported = if self.three_way {
            let (t, s) = self.transport()?;
            splits += s;
            Some(t)
        } else {
            None
        };
        let q = self.kd.q().clone();
        let lift = |c: &FieldElement| vec![*c];
        let mut stack: Vec<(Polynomial, Vec<Vec<FieldElement>>)> =
            vec![(q.clone(), q.coeffs().iter().map(lift).collect())];
        let mut total = vec![f.zero(); self.null.size()];
        let mut components = 0;
        while let Some((qi, mv)) = stack.pop() {
            let kring: KRing = Quotient::new(f, qi.coeffs().to_vec());
            let mv: Vec<Vec<FieldElement>> = mv.iter().map(|c| kring.reduce(c)).collect();
            let bring: BRing = Quotient::new(kring.clone(), mv.clone());
            match self.run_b_component(&kring, &bring, transported.as_ref()) {
                Ok(v) => {
                    components += 1;
                    for (t, x) in total.iter_mut().zip(v) {
                        *t = f.add(*t, x);
                    }
                }
                Err(Fault::Fail(e)) => return Err(e),
                Err(Fault::Split(QuotientSplit::Base(QuotientSplit::Base(never)))) => match never {},
                Err(Fault::Split(QuotientSplit::Base(QuotientSplit::Modulus(g)))) => {
                    splits += 1;
                    let g = Polynomial::new(g).monic(&f).expect("nonzero");
                    let (h, r) = qi.divmod(&g, &f).expect("nonzero");
                    assert!(r.is_zero() && g.degree() < qi.degree(), "split must be a proper factor");
                    for part in [h.monic(&f).expect("nonzero"), g] {
                        let sub: Vec<Vec<FieldElement>> = mv
                            .iter()
                            .map(|c| {
                                Polynomial::new(c.clone())
                                    .rem(&part, &f)
                                    .expect("nonzero")
                                    .into_coeffs()
                            })
                            .collect();
                        stack.push((part, sub));
                    }
                }
                Err(Fault::Split(QuotientSplit::Modulus(g))) => {
                    splits += 1;
                    let (h, r) =
                        poly::divmod(&kring, &mv, &g).map_err(|_| IsogenyError::Degenerate("bad factor".into()))?;
                    assert!(r.is_empty() && g.len() < mv.len(), "split must be a proper factor");
                    stack.push((qi.clone(), h));
                    stack.push((qi, g));
                }
            }
        }
        Ok((
            total,
            EvalStats {
                components,
                splits,
                strata: Vec::new(),
            },
        ))
    }

    fn run_b_component(
        &self,
        kring: &KRing,
        bring: &BRing,
        transported: Option<&Transported>,
    ) -> Result<Vec<FieldElement>, Fault<BSplit>> {
        let first = |c: &Polynomial| bring.embed(kring.reduce(c.coeffs()));
        let second = |c: &Polynomial| {
            let lifted: Vec<Vec<FieldElement>> = c.coeffs().iter().map(|&x| kring.embed(x)).collect();
            bring.reduce(&lifted)
        };
        let leg1 = AffineThetaPoint::new(self.kd.coords().iter().map(first).collect(), Exponents::unit(LAMBDA[0]));
        let leg2 = AffineThetaPoint::new(second_leg(self.kd, kring, bring), Exponents::unit(LAMBDA[1]));
        let mut legs = [
            LegInput {
                point: leg1,
                lambda: None,
                shifted: None,
            },
            LegInput {
                point: leg2,
                lambda: None,
                shifted: None,
            },
        ];
        if let Some(tr) = transported {
            legs[0].lambda = Some(first(&tr.lambda));
            legs[1].lambda = Some(second(&tr.lambda));
            if let Some((coords, mu)) = &tr.shifted {
                legs[0].shifted = Some((
                    AffineThetaPoint::new(coords.iter().map(first).collect(), Exponents::unit(MU[0])),
                    first(mu),
                ));
                legs[1].shifted = Some((
                    AffineThetaPoint::new(coords.iter().map(second).collect(), Exponents::unit(MU[1])),
                    second(mu),
                ));
            }
        }
        let legs: Vec<Option<LegInput<BRing>>> = legs.into_iter().map(Some).collect();
        let asm = self.assemble(bring, &legs)?;
        Ok((0..self.null.size())
            .into_par_iter()
            .map(|k| trace_b(bring, &self.value(bring, &asm, k)))
            .collect())
    }

    /// `N · θ_k^B(Y_1)…θ_0^B(Y_r)` summed over all strata of the kernel.
    fn evaluate(&self) -> Result<(Vec<FieldElement>, EvalStats), IsogenyError> {
        let f = *self.field();
        let size = self.null.size();
        let conv = self.kd.convention();
        let mut stats = EvalStats::default();
        let mut total = vec![f.zero(); size];
        let add = |total: &mut Vec<FieldElement>, v: &[FieldElement], w: u64| {
            for (t, x) in total.iter_mut().zip(v) {
                *t = f.add(*t, f.mul(f.elem(w), *x));
            }
        };
        match self.dec.t {
            1 => {
                let (main, s) = self.run_k(&[LegKind::Formal])?;
                stats.absorb(s);
                match conv {
                    Convention::Full => {
                        stats.strata.push("formal".into());
                        add(&mut total, &main, 1);
                    }
                    Convention::Punctured => {
                        stats.strata.extend(["formal".into(), "zero".into()]);
                        add(&mut total, &main, 1);
                        add(&mut total, &self.run_base(1)?, 1);
                    }
                    Convention::KummerHalf => {
                        stats.strata.extend(["formal_doubled".into(), "zero".into()]);
                        add(&mut total, &main, 2);
                        add(&mut total, &self.run_base(1)?, 1);
                    }
                }
            }
            _ => {
                let (main, s) = self.run_b()?;
                stats.absorb(s);
                stats.strata.push("formal_pair".into());
                add(&mut total, &main, 1);
                match conv {
                    Convention::Full => {}
                    Convention::Punctured => {
                        for kinds in [[LegKind::Zero, LegKind::Formal], [LegKind::Formal, LegKind::Zero]] {
                            let (v, s) = self.run_k(&kinds)?;
                            stats.absorb(s);
                            add(&mut total, &v, 1);
                        }
                        add(&mut total, &self.run_base(2)?, 1);
                        stats
                            .strata
                            .extend(["first_zero".into(), "second_zero".into(), "both_zero".into()]);
                    }
                    Convention::KummerHalf => {
                        return Err(IsogenyError::UnsupportedConvention {
                            r: self.dec.r,
                            convention: conv,
                        })
                    }
                }
            }
        }
        let n_inv = f
            .inv(f.elem(self.dec.cardinal(self.null.group().g())))
            .map_err(|_| IsogenyError::Degenerate("N is divisible by p".into()))?;
        Ok((total.into_iter().map(|x| f.mul(x, n_inv)).collect(), stats))
    }
}

fn check_inputs(null: &ThetaNullPoint, kd: &KernelDescriptor, dec: &SquareDecomposition) -> Result<(), IsogenyError> {
    if dec.ell != kd.ell() {
        return Err(IsogenyError::Degenerate(format!(
            "decomposition is for ell = {}, kernel has {}",
            dec.ell,
            kd.ell()
        )));
    }
    let n = null.group().n();
    if dec.r == 4 && !n.is_multiple_of(4) {
        return Err(IsogenyError::UnsupportedLevel(n));
    }
    if dec.t == 2 && kd.convention() == Convention::KummerHalf {
        return Err(IsogenyError::UnsupportedConvention {
            r: dec.r,
            convention: kd.convention(),
        });
    }
    Ok(())
}

fn setup<'a>(
    null: &'a ThetaNullPoint,
    kd: &'a KernelDescriptor,
    dec: &'a SquareDecomposition,
    point: Option<Vec<FieldElement>>,
    three_way: bool,
) -> Result<Setup<'a>, IsogenyError> {
    check_inputs(null, kd, dec)?;
    Ok(Setup {
        null,
        kd,
        dec,
        ell: kd.ell(),
        x: dec.point_coefficients(),
        basis: dec.kernel_basis()?,
        point,
        three_way,
    })
}

/// Unnormalised codomain values `θ_k^B(0)·θ_0^B(0)^(r−1)` for every `k`.
pub fn codomain_null_raw(
    null: &ThetaNullPoint,
    kd: &KernelDescriptor,
    dec: &SquareDecomposition,
    three_way: bool,
) -> Result<(Vec<FieldElement>, EvalStats), IsogenyError> {
    setup(null, kd, dec, None, three_way)?.evaluate()
}

/// The theta null point of the codomain, projectively normalised.
pub fn codomain_null(
    null: &ThetaNullPoint,
    kd: &KernelDescriptor,
    dec: &SquareDecomposition,
) -> Result<Vec<FieldElement>, IsogenyError> {
    let (raw, _) = codomain_null_raw(null, kd, dec, false)?;
    normalize_projective(null.field(), &raw).ok_or(IsogenyError::ZeroOutput)
}

/// Unnormalised image values `θ_k^B(ℓ·z_P)·θ_0^B(0)^(r−1)` for every `k`.
pub fn image_point_raw(
    null: &ThetaNullPoint,
    kd: &KernelDescriptor,
    dec: &SquareDecomposition,
    point: &[FieldElement],
    three_way: bool,
) -> Result<(Vec<FieldElement>, EvalStats), IsogenyError> {
    let n = null.group().n();
    if !n.is_multiple_of(4) {
        return Err(IsogenyError::UnsupportedLevel(n));
    }
    if point.len() != null.size() {
        return Err(IsogenyError::PointLength {
            expected: null.size(),
            got: point.len(),
        });
    }
    if point.iter().all(|c| c.is_zero()) {
        return Err(IsogenyError::ZeroPoint);
    }
    if kd.convention() == Convention::KummerHalf {
        return Err(IsogenyError::UnsupportedConvention {
            r: dec.r,
            convention: kd.convention(),
        });
    }
    setup(null, kd, dec, Some(point.to_vec()), three_way)?.evaluate()
}

/// `f(P)` as a projectively normalised point of the codomain.
pub fn image_point(
    null: &ThetaNullPoint,
    kd: &KernelDescriptor,
    dec: &SquareDecomposition,
    point: &[FieldElement],
) -> Result<Vec<FieldElement>, IsogenyError> {
    let (raw, _) = image_point_raw(null, kd, dec, point, false)?;
    normalize_projective(null.field(), &raw).ok_or(IsogenyError::ZeroOutput)
}

/// Codomain and images with the diagnostics of every run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IsogenyResult {
    pub codomain_null: Vec<FieldElement>,
    pub images: Vec<Vec<FieldElement>>,
    pub diagnostics: IsogenyDiagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsogenyDiagnostics {
    pub decomposition: SquareDecomposition,
    #[serde(rename = "N")]
    pub cardinal: u64,
    pub codomain: EvalStats,
    pub images: Vec<EvalStats>,
    /// Unnormalised codomain values.
    pub raw_codomain_null: Vec<u64>,
    pub raw_images: Vec<Vec<u64>>,
    pub timings_ms: BTreeMap<String, f64>,
}

impl Eq for IsogenyDiagnostics {}

/// Runs decomposition, codomain and images.
pub fn compute_isogeny(
    null: &ThetaNullPoint,
    kd: &KernelDescriptor,
    points: &[Vec<FieldElement>],
    opts: &IsogenyOptions,
) -> Result<IsogenyResult, IsogenyError> {
    let mut timings = BTreeMap::new();
    let ms = |t: Instant| t.elapsed().as_secs_f64() * 1e3;
    let t0 = Instant::now();
    let dec = pipeline_decomposition(kd.ell(), null.group().n(), opts.force_r)?;
    timings.insert("decompose".to_string(), ms(t0));
    let t1 = Instant::now();
    let (raw, stats) = codomain_null_raw(null, kd, &dec, opts.three_way)?;
    let codomain = normalize_projective(null.field(), &raw).ok_or(IsogenyError::ZeroOutput)?;
    timings.insert("codomain_null".to_string(), ms(t1));
    let t2 = Instant::now();
    let mut images = Vec::new();
    let mut raw_images = Vec::new();
    let mut image_stats = Vec::new();
    for p in points {
        let (r, s) = image_point_raw(null, kd, &dec, p, opts.three_way)?;
        images.push(normalize_projective(null.field(), &r).ok_or(IsogenyError::ZeroOutput)?);
        raw_images.push(r.iter().map(|c| c.value()).collect());
        image_stats.push(s);
    }
    timings.insert("images".to_string(), ms(t2));
    let cardinal = dec.cardinal(null.group().g());
    Ok(IsogenyResult {
        codomain_null: codomain,
        images,
        diagnostics: IsogenyDiagnostics {
            decomposition: dec,
            cardinal,
            codomain: stats,
            images: image_stats,
            raw_codomain_null: raw.iter().map(|c| c.value()).collect(),
            raw_images,
            timings_ms: timings,
        },
    })
}

#[cfg(test)]
mod tests;
