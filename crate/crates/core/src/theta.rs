//! Theta-coordinate arithmetic over any coefficient ring.
//!
//! Points are affine lifts: `n^g` coordinates indexed by `(Z/nZ)^g` in
//! mixed-radix little-endian order. Every operation comes from a Riemann
//! relation
//!
//! `S_χ(x+y, x−y; i, j) · S_χ(0, 0; k, l) = S_χ(x, x; i, k) · S_χ(y, y; j, l)`
//!
//! where `i, j, k, l ∈ (Z/2nZ)^g` share their parity and
//! `S_χ(A, B; i, k) = Σ_η χ(η) A[(i+k)/2 + ηn/2] B[(i−k)/2 + ηn/2]`.
//!
//! Affine lifts carry an [`Exponents`] vector: the true point is
//! `Π param_s^{e_s} ⋆ coords` for formal scalars that are never materialised.

use std::collections::HashMap;

use thiserror::Error;

use crate::ff::{FieldElement, PrimeField};
use crate::ring::{InvFailure, Ring};

/// Number of formal scalar slots tracked on every affine point.
pub const NUM_PARAMS: usize = 5;

/// Named formal scalar slots.
pub mod param {
    /// Scalar of the first kernel generator.
    pub const LAMBDA1: usize = 0;
    /// Scalar of the second kernel generator (tensor computations).
    pub const LAMBDA2: usize = 1;
    /// Scalar of the sum of the two kernel generators.
    pub const LAMBDA12: usize = 2;
    /// Scalar of the first point-plus-kernel sum.
    pub const MU1: usize = 3;
    /// Scalar of the second point-plus-kernel sum.
    pub const MU2: usize = 4;
}

/// Exponents of the formal scalars in front of an affine lift.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Exponents(pub [i64; NUM_PARAMS]);

impl Exponents {
    pub const ZERO: Exponents = Exponents([0; NUM_PARAMS]);

    pub fn unit(slot: usize) -> Self {
        let mut e = [0; NUM_PARAMS];
        e[slot] = 1;
        Exponents(e)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0)
    }

    /// `Σ c_i · e_i`.
    pub fn combine(terms: &[(i64, &Exponents)]) -> Self {
        let mut out = [0; NUM_PARAMS];
        for (c, e) in terms {
            for (o, v) in out.iter_mut().zip(e.0) {
                *o += c * v;
            }
        }
        Exponents(out)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ThetaError<S> {
    #[error("level {0} must be even and at least 2")]
    BadLevel(u32),
    #[error("dimension must be at least 1 and n^g at most 4096")]
    BadDimension,
    #[error("expected {expected} coordinates, got {got}")]
    Length { expected: usize, got: usize },
    #[error("theta null point is not symmetric")]
    NotSymmetric,
    #[error("theta null point is zero")]
    ZeroNull,
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("operation needs 4 | n, got n = {0}")]
    UnsupportedLevel(u32),
    #[error("inversion revealed a factor of a modulus")]
    Split(S),
}

impl<S> ThetaError<S> {
    /// Re-types an error that carries no split payload.
    pub fn cast<T>(self) -> ThetaError<T> {
        match self {
            ThetaError::BadLevel(n) => ThetaError::BadLevel(n),
            ThetaError::BadDimension => ThetaError::BadDimension,
            ThetaError::Length { expected, got } => ThetaError::Length { expected, got },
            ThetaError::NotSymmetric => ThetaError::NotSymmetric,
            ThetaError::ZeroNull => ThetaError::ZeroNull,
            ThetaError::Degenerate(s) => ThetaError::Degenerate(s),
            ThetaError::UnsupportedLevel(n) => ThetaError::UnsupportedLevel(n),
            ThetaError::Split(_) => ThetaError::Degenerate("unexpected split"),
        }
    }
}

/// `(Z/nZ)^g` with mixed-radix little-endian enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct IndexGroup {
    g: usize,
    n: u32,
}

impl IndexGroup {
    pub fn new<S>(g: usize, n: u32) -> Result<Self, ThetaError<S>> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(ThetaError::BadLevel(n));
        }
        if g == 0 || (n as u64).checked_pow(g as u32).is_none_or(|s| s > 4096) {
            return Err(ThetaError::BadDimension);
        }
        Ok(IndexGroup { g, n })
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn size(&self) -> usize {
        (self.n as usize).pow(self.g as u32)
    }

    pub fn digits(&self, idx: usize) -> Vec<u32> {
        digits(idx, self.n, self.g)
    }

    /// Index of a vector, reducing entries modulo `n`.
    pub fn index(&self, v: &[i64]) -> usize {
        v.iter().rev().fold(0, |acc, &c| {
            acc * self.n as usize + c.rem_euclid(self.n as i64) as usize
        })
    }

    pub fn neg(&self, idx: usize) -> usize {
        let v: Vec<i64> = self.digits(idx).iter().map(|&c| -(c as i64)).collect();
        self.index(&v)
    }

    pub fn add(&self, a: usize, b: usize) -> usize {
        let (x, y) = (self.digits(a), self.digits(b));
        let v: Vec<i64> = x.iter().zip(&y).map(|(&p, &q)| p as i64 + q as i64).collect();
        self.index(&v)
    }

    pub fn sub(&self, a: usize, b: usize) -> usize {
        self.add(a, self.neg(b))
    }
}

fn digits(mut idx: usize, n: u32, g: usize) -> Vec<u32> {
    (0..g)
        .map(|_| {
            let d = (idx % n as usize) as u32;
            idx /= n as usize;
            d
        })
        .collect()
}

/// One product term `±A[u]·B[v]` of a Riemann sum.
#[derive(Clone, Copy, Debug)]
struct Term {
    neg: bool,
    u: usize,
    v: usize,
}

/// `Σ_η χ(η) A[(i+k)/2 + ηn/2] B[(i−k)/2 + ηn/2]` as a list of terms.
fn s_terms(group: &IndexGroup, chi: usize, i: &[u32], k: &[u32]) -> Vec<Term> {
    let (n, g) = (group.n as i64, group.g);
    let two_n = 2 * n;
    (0..1usize << g)
        .map(|eta| {
            let mut u = Vec::with_capacity(g);
            let mut v = Vec::with_capacity(g);
            for c in 0..g {
                let shift = if eta >> c & 1 == 1 { n / 2 } else { 0 };
                let s = (i[c] as i64 + k[c] as i64).rem_euclid(two_n);
                let d = (i[c] as i64 - k[c] as i64).rem_euclid(two_n);
                u.push(s / 2 + shift);
                v.push(d / 2 + shift);
            }
            Term {
                neg: (chi & eta).count_ones() % 2 == 1,
                u: group.index(&u),
                v: group.index(&v),
            }
        })
        .collect()
}

/// Terms of one character in the sum giving `θ_a(x+y)·θ_b(x−y)`.
#[derive(Clone, Debug)]
struct ChiPlan {
    dinv: FieldElement,
    x: Vec<Term>,
    y: Vec<Term>,
}

/// `(i, j)` in `(Z/2nZ)^g` with `(i+j)/2 = a`, `(i−j)/2 = b`.
fn ij(group: &IndexGroup, a: usize, b: usize) -> (Vec<u32>, Vec<u32>) {
    let two_n = 2 * group.n;
    let (av, bv) = (group.digits(a), group.digits(b));
    let i = av.iter().zip(&bv).map(|(&p, &q)| (p + q) % two_n).collect();
    let j = av.iter().zip(&bv).map(|(&p, &q)| (p + two_n - q) % two_n).collect();
    (i, j)
}

fn parity_class(v: &[u32]) -> usize {
    v.iter()
        .enumerate()
        .fold(0, |acc, (c, &x)| acc | ((x as usize & 1) << c))
}

/// All vectors of `(Z/2nZ)^g` in a parity class, in enumeration order.
fn class_members(group: &IndexGroup, class: usize) -> Vec<Vec<u32>> {
    let two_n = 2 * group.n;
    (0..(two_n as usize).pow(group.g as u32))
        .map(|idx| digits(idx, two_n, group.g))
        .filter(|v| parity_class(v) == class)
        .collect()
}

/// A level-`n` theta null point with precomputed Riemann-relation plans.
#[derive(Clone, Debug)]
pub struct ThetaNullPoint {
    field: PrimeField,
    group: IndexGroup,
    coords: Vec<FieldElement>,
    inv_two_g: FieldElement,
    /// `plans[a * size + b]`: how to get `θ_a(x+y)·θ_b(x−y)`, if possible.
    plans: Vec<Option<Vec<ChiPlan>>>,
}

impl ThetaNullPoint {
    pub fn new(
        field: PrimeField,
        g: usize,
        n: u32,
        coords: Vec<FieldElement>,
    ) -> Result<Self, ThetaError<std::convert::Infallible>> {
        let group = IndexGroup::new(g, n)?;
        let size = group.size();
        if coords.len() != size {
            return Err(ThetaError::Length {
                expected: size,
                got: coords.len(),
            });
        }
        if coords.iter().all(|c| c.is_zero()) {
            return Err(ThetaError::ZeroNull);
        }
        if (0..size).any(|i| coords[i] != coords[group.neg(i)]) {
            return Err(ThetaError::NotSymmetric);
        }
        let nchi = 1usize << g;
        let inv_two_g = field.inv(field.elem(1 << g)).expect("p odd");
        let mut null = ThetaNullPoint {
            field,
            group,
            coords,
            inv_two_g,
            plans: Vec::new(),
        };

        // For each parity class and character, the first (k, l) with a
        // nonzero dual constant.
        let mut duals: HashMap<(usize, usize), Option<(Vec<u32>, Vec<u32>, FieldElement)>> = HashMap::new();
        for class in 0..nchi {
            let members = class_members(&group, class);
            for chi in 0..nchi {
                let found = members.iter().find_map(|k| {
                    members.iter().find_map(|l| {
                        let d = null.dual_constant(chi, k, l);
                        field.inv(d).ok().map(|inv| (k.clone(), l.clone(), inv))
                    })
                });
                duals.insert((class, chi), found);
            }
        }
        let mut plans = Vec::with_capacity(size * size);
        for a in 0..size {
            for b in 0..size {
                let (i, j) = ij(&group, a, b);
                let class = parity_class(&i);
                let plan: Option<Vec<ChiPlan>> = (0..nchi)
                    .map(|chi| {
                        duals[&(class, chi)].as_ref().map(|(k, l, dinv)| ChiPlan {
                            dinv: *dinv,
                            x: s_terms(&group, chi, &i, k),
                            y: s_terms(&group, chi, &j, l),
                        })
                    })
                    .collect();
                plans.push(plan);
            }
        }
        null.plans = plans;
        if (0..size).any(|a| (0..size).all(|b| null.plans[a * size + b].is_none())) {
            return Err(ThetaError::Degenerate("too many vanishing dual constants"));
        }
        Ok(null)
    }

    pub fn field(&self) -> &PrimeField {
        &self.field
    }

    pub fn group(&self) -> &IndexGroup {
        &self.group
    }

    pub fn coords(&self) -> &[FieldElement] {
        &self.coords
    }

    pub fn size(&self) -> usize {
        self.group.size()
    }

    /// `Σ_η χ(η) θ_{(k+l)/2+ηn/2}(0) θ_{(k−l)/2+ηn/2}(0)` for `k, l` in
    /// `(Z/2nZ)^g` of equal parity.
    pub fn dual_constant(&self, chi: usize, k: &[u32], l: &[u32]) -> FieldElement {
        let f = &self.field;
        s_terms(&self.group, chi, k, l).iter().fold(f.zero(), |acc, t| {
            let p = f.mul(self.coords[t.u], self.coords[t.v]);
            if t.neg {
                f.sub(acc, p)
            } else {
                f.add(acc, p)
            }
        })
    }

    /// The null point as an affine point over `ring`.
    pub fn lift<R: Ring>(&self, ring: &R) -> AffineThetaPoint<R> {
        AffineThetaPoint::constant(ring, &self.coords)
    }

    fn plan(&self, a: usize, b: usize) -> Option<&Vec<ChiPlan>> {
        self.plans[a * self.size() + b].as_ref()
    }

    /// Candidate divisor indices for output `a`: 0, then `a`, then the rest.
    fn divisor_order(&self, a: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(0)
            .chain((a != 0).then_some(a))
            .chain((1..self.size()).filter(move |&b| b != a))
    }

    /// Point negation: `ν ↦ −ν`.
    pub fn neg<R: Ring>(&self, x: &AffineThetaPoint<R>) -> AffineThetaPoint<R> {
        AffineThetaPoint {
            coords: (0..self.size()).map(|i| x.coords[self.group.neg(i)].clone()).collect(),
            exps: x.exps,
        }
    }

    /// Differential addition: a lift of `x+y` from lifts of `x`, `y`, `x−y`.
    /// The exponent law is `2e(x) + 2e(y) − e(x−y)`.
    pub fn diff_add<R: Ring>(
        &self,
        ring: &R,
        x: &AffineThetaPoint<R>,
        y: &AffineThetaPoint<R>,
        x_minus_y: &AffineThetaPoint<R>,
    ) -> Result<AffineThetaPoint<R>, ThetaError<R::Split>> {
        let mut d = Prepared::new(x_minus_y.clone());
        self.diff_add_prepared(ring, x, y, &mut d)
    }

    /// [`Self::diff_add`] with a reusable inverse cache for the difference.
    pub fn diff_add_prepared<R: Ring>(
        &self,
        ring: &R,
        x: &AffineThetaPoint<R>,
        y: &AffineThetaPoint<R>,
        d: &mut Prepared<R>,
    ) -> Result<AffineThetaPoint<R>, ThetaError<R::Split>> {
        let size = self.size();
        let same = std::ptr::eq(x, y) || x == y;
        let mut px = Products::new(size);
        let mut py = Products::new(size);
        let mut coords = Vec::with_capacity(size);
        for a in 0..size {
            let mut split = None;
            let mut chosen = None;
            for b in self.divisor_order(a) {
                let Some(plan) = self.plan(a, b) else { continue };
                match d.inv(ring, b) {
                    Ok(inv) => {
                        chosen = Some((plan, inv.clone()));
                        break;
                    }
                    Err(InvFailure::Split(s)) => {
                        split.get_or_insert(s);
                    }
                    Err(InvFailure::Zero) => {}
                }
            }
            let Some((plan, inv)) = chosen else {
                return Err(match split {
                    Some(s) => ThetaError::Split(s),
                    None => ThetaError::Degenerate("no invertible divisor for differential addition"),
                });
            };
            let mut acc = ring.zero();
            for cp in plan {
                let sx = px.sum(ring, &cp.x, &x.coords, &x.coords);
                let sy = if same {
                    px.sum(ring, &cp.y, &x.coords, &x.coords)
                } else {
                    py.sum(ring, &cp.y, &y.coords, &y.coords)
                };
                acc = ring.add(&acc, &ring.scale(&ring.mul(&sx, &sy), cp.dinv));
            }
            coords.push(ring.mul(&ring.scale(&acc, self.inv_two_g), &inv));
        }
        let exps = Exponents::combine(&[(2, &x.exps), (2, &y.exps), (-1, &d.point.exps)]);
        Ok(AffineThetaPoint { coords, exps })
    }

    /// `m·base` by a Montgomery ladder; the exponent is `m²·e(base)`.
    pub fn multiply<R: Ring>(
        &self,
        ring: &R,
        m: u64,
        base: &AffineThetaPoint<R>,
    ) -> Result<AffineThetaPoint<R>, ThetaError<R::Split>> {
        let zero = self.lift(ring);
        if m == 0 {
            return Ok(zero);
        }
        let mut d_zero = Prepared::new(zero.clone());
        let mut d_base = Prepared::new(base.clone());
        let (mut a0, mut a1) = (zero, base.clone());
        for bit in (0..64 - m.leading_zeros()).rev() {
            if m >> bit & 1 == 0 {
                let n1 = self.diff_add_prepared(ring, &a1, &a0, &mut d_base)?;
                a0 = self.diff_add_prepared(ring, &a0, &a0, &mut d_zero)?;
                a1 = n1;
            } else {
                let n0 = self.diff_add_prepared(ring, &a1, &a0, &mut d_base)?;
                a1 = self.diff_add_prepared(ring, &a1, &a1, &mut d_zero)?;
                a0 = n0;
            }
        }
        Ok(a0)
    }

    /// `offset + m·base` from lifts of `base + offset`, `base` and `offset`.
    pub fn ladder<R: Ring>(
        &self,
        ring: &R,
        m: u64,
        sum: &AffineThetaPoint<R>,
        base: &AffineThetaPoint<R>,
        offset: &AffineThetaPoint<R>,
    ) -> Result<AffineThetaPoint<R>, ThetaError<R::Split>> {
        match m {
            0 => return Ok(offset.clone()),
            1 => return Ok(sum.clone()),
            _ => {}
        }
        let zero = self.lift(ring);
        let mut d_zero = Prepared::new(zero.clone());
        let mut d_base = Prepared::new(base.clone());
        let mut d_offset = Prepared::new(offset.clone());
        let mut d_sum = Prepared::new(sum.clone());
        let (mut a0, mut a1) = (zero, base.clone());
        let (mut b0, mut b1) = (offset.clone(), sum.clone());
        for bit in (0..64 - m.leading_zeros()).rev() {
            if m >> bit & 1 == 0 {
                let nb1 = self.diff_add_prepared(ring, &b1, &a0, &mut d_sum)?;
                b0 = self.diff_add_prepared(ring, &b0, &a0, &mut d_offset)?;
                b1 = nb1;
                let na1 = self.diff_add_prepared(ring, &a1, &a0, &mut d_base)?;
                a0 = self.diff_add_prepared(ring, &a0, &a0, &mut d_zero)?;
                a1 = na1;
            } else {
                let nb0 = self.diff_add_prepared(ring, &b1, &a0, &mut d_sum)?;
                b1 = self.diff_add_prepared(ring, &b1, &a1, &mut d_offset)?;
                b0 = nb0;
                let na0 = self.diff_add_prepared(ring, &a1, &a0, &mut d_base)?;
                a1 = self.diff_add_prepared(ring, &a1, &a1, &mut d_zero)?;
                a0 = na0;
            }
        }
        Ok(b0)
    }

    /// Projective `x + y` without a difference; needs `4 | n`. The result
    /// carries no formal exponents.
    pub fn normal_add<R: Ring>(
        &self,
        ring: &R,
        x: &AffineThetaPoint<R>,
        y: &AffineThetaPoint<R>,
    ) -> Result<AffineThetaPoint<R>, ThetaError<R::Split>> {
        if !self.group.n.is_multiple_of(4) {
            return Err(ThetaError::UnsupportedLevel(self.group.n));
        }
        let size = self.size();
        let mut px = Products::new(size);
        let mut py = Products::new(size);
        let mut split = None;
        for j0 in 0..size {
            if (0..size).any(|a| self.plan(a, j0).is_none()) {
                continue;
            }
            let coords: Vec<R::Elem> = (0..size)
                .map(|a| {
                    let plan = self.plan(a, j0).expect("checked");
                    plan.iter().fold(ring.zero(), |acc, cp| {
                        let sx = px.sum(ring, &cp.x, &x.coords, &x.coords);
                        let sy = py.sum(ring, &cp.y, &y.coords, &y.coords);
                        ring.add(&acc, &ring.scale(&ring.mul(&sx, &sy), cp.dinv))
                    })
                })
                .collect();
            for c in &coords {
                match ring.try_inv(c) {
                    Ok(_) => {
                        return Ok(AffineThetaPoint {
                            coords,
                            exps: Exponents::ZERO,
                        })
                    }
                    Err(InvFailure::Split(s)) => {
                        split.get_or_insert(s);
                    }
                    Err(InvFailure::Zero) => {}
                }
            }
        }
        Err(match split {
            Some(s) => ThetaError::Split(s),
            None => ThetaError::Degenerate("normal addition degenerate for every j0"),
        })
    }

    /// A lift of `x+y+z` from lifts of the pairwise sums and the three
    /// points. The exponent law is
    /// `e(xy) + e(xz) + e(yz) − e(x) − e(y) − e(z)`.
    #[allow(clippy::too_many_arguments)]
    pub fn three_way_add<R: Ring>(
        &self,
        ring: &R,
        xy: &AffineThetaPoint<R>,
        xz: &AffineThetaPoint<R>,
        yz: &AffineThetaPoint<R>,
        x: &AffineThetaPoint<R>,
        y: &AffineThetaPoint<R>,
        z: &AffineThetaPoint<R>,
    ) -> Result<AffineThetaPoint<R>, ThetaError<R::Split>> {
        let size = self.size();
        let g = self.group.g;
        let nchi = 1usize << g;
        let neg_x = self.neg(x);
        let null = self.lift(ring);
        let mut p_yz_xz = Products::new(size);
        let mut p_xy_0 = Products::new(size);
        let mut p_y_negx = Products::new(size);
        // (class, χ) -> (k, l, E^{-1}) or the failure seen while scanning.
        let mut e_cache: HashMap<(usize, usize), Result<(Vec<u32>, Vec<u32>, R::Elem), Option<R::Split>>> =
            HashMap::new();
        let mut z_split = None;
        let mut d_z = Prepared::new(z.clone());
        'divisor: for b in (0..size).collect::<Vec<_>>() {
            let zinv = match d_z.inv(ring, b) {
                Ok(v) => v.clone(),
                Err(InvFailure::Split(s)) => {
                    z_split.get_or_insert(s);
                    continue;
                }
                Err(InvFailure::Zero) => continue,
            };
            let mut coords = Vec::with_capacity(size);
            for a in 0..size {
                let (i, j) = ij(&self.group, a, b);
                let class = parity_class(&i);
                let mut acc = ring.zero();
                for chi in 0..nchi {
                    let entry = e_cache.entry((class, chi)).or_insert_with(|| {
                        let members = class_members(&self.group, class);
                        let mut split = None;
                        for k in &members {
                            for l in &members {
                                let terms = s_terms(&self.group, chi, k, l);
                                let e = p_y_negx.sum(ring, &terms, &y.coords, &neg_x.coords);
                                match ring.try_inv(&e) {
                                    Ok(inv) => return Ok((k.clone(), l.clone(), inv)),
                                    Err(InvFailure::Split(s)) => {
                                        split.get_or_insert(s);
                                    }
                                    Err(InvFailure::Zero) => {}
                                }
                            }
                        }
                        Err(split)
                    });
                    let (k, l, einv) = match entry {
                        Ok(v) => v.clone(),
                        Err(Some(s)) => {
                            z_split.get_or_insert(s.clone());
                            continue 'divisor;
                        }
                        Err(None) => continue 'divisor,
                    };
                    let s1 = p_yz_xz.sum(ring, &s_terms(&self.group, chi, &i, &k), &yz.coords, &xz.coords);
                    let s2 = p_xy_0.sum(ring, &s_terms(&self.group, chi, &j, &l), &xy.coords, &null.coords);
                    acc = ring.add(&acc, &ring.mul(&ring.mul(&s1, &s2), &einv));
                }
                coords.push(ring.mul(&ring.scale(&acc, self.inv_two_g), &zinv));
            }
            let exps = Exponents::combine(&[
                (1, &xy.exps),
                (1, &xz.exps),
                (1, &yz.exps),
                (-1, &x.exps),
                (-1, &y.exps),
                (-1, &z.exps),
            ]);
            return Ok(AffineThetaPoint { coords, exps });
        }
        Err(match z_split {
            Some(s) => ThetaError::Split(s),
            None => ThetaError::Degenerate("no usable three-way addition relation"),
        })
    }
}

/// Cache of `A[u]·B[v]` products for one pair of points.
struct Products<E> {
    size: usize,
    cache: Vec<Option<E>>,
}

impl<E: Clone> Products<E> {
    fn new(size: usize) -> Self {
        Products {
            size,
            cache: vec![None; size * size],
        }
    }

    fn sum<R: Ring<Elem = E>>(&mut self, ring: &R, terms: &[Term], a: &[E], b: &[E]) -> E {
        let mut acc = ring.zero();
        for t in terms {
            let slot = &mut self.cache[t.u * self.size + t.v];
            let p = slot.get_or_insert_with(|| ring.mul(&a[t.u], &b[t.v]));
            acc = if t.neg { ring.sub(&acc, p) } else { ring.add(&acc, p) };
        }
        acc
    }
}

/// A difference point with lazily computed coordinate inverses.
#[derive(Clone, Debug)]
pub struct Prepared<R: Ring> {
    pub point: AffineThetaPoint<R>,
    inv: Vec<Option<Result<R::Elem, InvFailure<R::Split>>>>,
}

impl<R: Ring> Prepared<R> {
    pub fn new(point: AffineThetaPoint<R>) -> Self {
        let n = point.coords.len();
        Prepared {
            point,
            inv: vec![None; n],
        }
    }

    fn inv(&mut self, ring: &R, b: usize) -> Result<&R::Elem, InvFailure<R::Split>> {
        let coords = &self.point.coords;
        self.inv[b]
            .get_or_insert_with(|| ring.try_inv(&coords[b]))
            .as_ref()
            .map_err(|e| e.clone())
    }
}

/// An affine lift: coordinates over a ring plus formal scalar exponents.
#[derive(Clone, Debug)]
pub struct AffineThetaPoint<R: Ring> {
    pub coords: Vec<R::Elem>,
    pub exps: Exponents,
}

impl<R: Ring> PartialEq for AffineThetaPoint<R> {
    fn eq(&self, other: &Self) -> bool {
        self.coords == other.coords && self.exps == other.exps
    }
}

impl<R: Ring> AffineThetaPoint<R> {
    pub fn new(coords: Vec<R::Elem>, exps: Exponents) -> Self {
        AffineThetaPoint { coords, exps }
    }

    /// Field coordinates embedded as constants, with no formal scalars.
    pub fn constant(ring: &R, coords: &[FieldElement]) -> Self {
        AffineThetaPoint {
            coords: coords.iter().map(|&c| ring.from_fe(c)).collect(),
            exps: Exponents::ZERO,
        }
    }

    /// `c ⋆ x`; the formal exponents are unchanged.
    pub fn scale(&self, ring: &R, c: &R::Elem) -> Self {
        AffineThetaPoint {
            coords: self.coords.iter().map(|x| ring.mul(x, c)).collect(),
            exps: self.exps,
        }
    }

    /// Applies a coefficient map, e.g. an embedding into a larger ring.
    pub fn map<S: Ring>(&self, f: impl Fn(&R::Elem) -> S::Elem) -> AffineThetaPoint<S> {
        AffineThetaPoint {
            coords: self.coords.iter().map(f).collect(),
            exps: self.exps,
        }
    }

    pub fn with_exps(mut self, exps: Exponents) -> Self {
        self.exps = exps;
        self
    }

    pub fn is_zero(&self, ring: &R) -> bool {
        self.coords.iter().all(|c| ring.is_zero(c))
    }
}

/// Projective equality: equal exponents and `x_i y_j = x_j y_i` for all
/// `i, j`. A point with all coordinates zero equals nothing.
pub fn proj_equal<R: Ring>(ring: &R, x: &AffineThetaPoint<R>, y: &AffineThetaPoint<R>) -> bool {
    if x.exps != y.exps || x.coords.len() != y.coords.len() || x.is_zero(ring) || y.is_zero(ring) {
        return false;
    }
    let n = x.coords.len();
    (0..n).all(|i| (i + 1..n).all(|j| ring.mul(&x.coords[i], &y.coords[j]) == ring.mul(&x.coords[j], &y.coords[i])))
}

/// Scales a projective field point so its first nonzero coordinate is 1.
pub fn normalize_projective(f: &PrimeField, coords: &[FieldElement]) -> Option<Vec<FieldElement>> {
    let first = coords.iter().find(|c| !c.is_zero())?;
    let inv = f.inv(*first).ok()?;
    Some(coords.iter().map(|&c| f.mul(c, inv)).collect())
}
