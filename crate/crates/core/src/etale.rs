//! Étale algebras `k[U]/(Q)` and `k[U]/(Q1) ⊗ k[V]/(Q2)`.
//!
//! [`Quotient`] is the working ring: `R[X]/(m)` for a monic `m` over any
//! [`Ring`] `R`. Stacking it twice gives the components of the tensor square.
//! Inversion runs the extended Euclidean algorithm; when the gcd with the
//! modulus is nontrivial the factor is returned instead of an inverse.
//!
//! [`EtaleAlgebra`] and [`AlgebraElement`] are the public CRT view: a list of
//! coprime squarefree moduli and per-component residues.

use std::sync::Arc;

use thiserror::Error;

use crate::ff::{FieldElement, PrimeField};
use crate::poly::{self, Polynomial};
use crate::ring::{InvFailure, Ring};

const NEWTON_THRESHOLD: usize = 48;

/// A proper factor discovered by a failed inversion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum QuotientSplit<S, E> {
    /// The failure happened in the coefficient ring.
    Base(S),
    /// A monic proper factor of the modulus, with coefficients in the base ring.
    Modulus(Vec<E>),
}

/// `R[X]/(m)` with `m` monic of degree `d >= 1`. Elements are coefficient
/// vectors of length exactly `d`.
#[derive(Clone, Debug)]
pub struct Quotient<R: Ring> {
    base: R,
    modulus: Arc<Vec<R::Elem>>,
    /// Inverse of the reversed modulus modulo `X^d`, for Newton division.
    rev_inv: Option<Arc<Vec<R::Elem>>>,
}

pub type KRing = Quotient<PrimeField>;
pub type BRing = Quotient<Quotient<PrimeField>>;
pub type KSplit = QuotientSplit<crate::ring::NoSplit, FieldElement>;
pub type BSplit = QuotientSplit<KSplit, Vec<FieldElement>>;

impl<R: Ring> Quotient<R> {
    /// `modulus` must be monic of degree at least one.
    pub fn new(base: R, mut modulus: Vec<R::Elem>) -> Self {
        poly::trim(&base, &mut modulus);
        assert!(modulus.len() >= 2, "modulus must be nonconstant");
        assert!(modulus.last() == Some(&base.one()), "modulus must be monic");
        let d = modulus.len() - 1;
        let rev_inv = (d >= NEWTON_THRESHOLD).then(|| {
            let rev: Vec<R::Elem> = modulus.iter().rev().cloned().collect();
            Arc::new(series_inverse(&base, &rev, d))
        });
        Quotient {
            base,
            modulus: Arc::new(modulus),
            rev_inv,
        }
    }

    pub fn base(&self) -> &R {
        &self.base
    }

    pub fn modulus(&self) -> &[R::Elem] {
        &self.modulus
    }

    pub fn degree(&self) -> usize {
        self.modulus.len() - 1
    }

    /// The class of `X`.
    pub fn generator(&self) -> Vec<R::Elem> {
        self.reduce(&[self.base.zero(), self.base.one()])
    }

    /// Embeds a base-ring element as a constant.
    pub fn embed(&self, c: R::Elem) -> Vec<R::Elem> {
        let mut v = vec![self.base.zero(); self.degree()];
        v[0] = c;
        v
    }

    /// Reduces an arbitrary polynomial modulo `m`.
    pub fn reduce(&self, a: &[R::Elem]) -> Vec<R::Elem> {
        let d = self.degree();
        if a.len() <= d {
            let mut v = a.to_vec();
            v.resize(d, self.base.zero());
            return v;
        }
        let mut r = if self.rev_inv.is_some() && a.len() <= 2 * d {
            self.divmod_newton(a).1
        } else {
            poly::divmod_monic(&self.base, a, &self.modulus).1
        };
        r.resize(d, self.base.zero());
        r
    }

    /// Quotient and remainder by `m`.
    pub fn divmod(&self, a: &[R::Elem]) -> (Vec<R::Elem>, Vec<R::Elem>) {
        if self.rev_inv.is_some() && a.len() <= 2 * self.degree() && a.len() > self.degree() {
            self.divmod_newton(a)
        } else {
            poly::divmod_monic(&self.base, a, &self.modulus)
        }
    }

    fn divmod_newton(&self, a: &[R::Elem]) -> (Vec<R::Elem>, Vec<R::Elem>) {
        let b = &self.base;
        let d = self.degree();
        let ql = a.len() - d;
        let inv = self.rev_inv.as_ref().expect("newton data");
        let rev_a: Vec<R::Elem> = a.iter().rev().take(ql).cloned().collect();
        let mut rq = b.mul_poly(&rev_a, &inv[..ql.min(inv.len())]);
        rq.truncate(ql);
        rq.resize(ql, b.zero());
        let mut q: Vec<R::Elem> = rq.into_iter().rev().collect();
        let qm = b.mul_poly(&q, &self.modulus);
        let mut r: Vec<R::Elem> = (0..d)
            .map(|i| match qm.get(i) {
                Some(c) => b.sub(&a[i], c),
                None => a[i].clone(),
            })
            .collect();
        poly::trim(b, &mut r);
        poly::trim(b, &mut q);
        (q, r)
    }

    /// True if the element is a constant of the base ring.
    pub fn is_constant(&self, a: &[R::Elem]) -> bool {
        a.iter().skip(1).all(|c| self.base.is_zero(c))
    }
}

/// Inverse of a power series with unit constant term 1, modulo `X^prec`.
fn series_inverse<R: Ring>(r: &R, f: &[R::Elem], prec: usize) -> Vec<R::Elem> {
    let mut g = vec![r.one()];
    let mut k = 1;
    while k < prec {
        k = (2 * k).min(prec);
        let fk: Vec<R::Elem> = f.iter().take(k).cloned().collect();
        let mut e = r.mul_poly(&fk, &g);
        e.truncate(k);
        // g <- g * (2 - f g)
        let mut two_minus: Vec<R::Elem> = e.iter().map(|c| r.neg(c)).collect();
        two_minus.resize(k, r.zero());
        two_minus[0] = r.add(&two_minus[0], &r.from_fe(r.field().elem(2)));
        let mut ng = r.mul_poly(&g, &two_minus);
        ng.truncate(k);
        ng.resize(k, r.zero());
        g = ng;
    }
    g.truncate(prec);
    g
}

impl<R: Ring> Ring for Quotient<R> {
    type Elem = Vec<R::Elem>;
    type Split = QuotientSplit<R::Split, R::Elem>;

    fn field(&self) -> &PrimeField {
        self.base.field()
    }

    fn zero(&self) -> Self::Elem {
        vec![self.base.zero(); self.degree()]
    }

    fn one(&self) -> Self::Elem {
        self.embed(self.base.one())
    }

    fn from_fe(&self, c: FieldElement) -> Self::Elem {
        self.embed(self.base.from_fe(c))
    }

    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        a.iter().zip(b).map(|(x, y)| self.base.add(x, y)).collect()
    }

    fn sub(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        a.iter().zip(b).map(|(x, y)| self.base.sub(x, y)).collect()
    }

    fn neg(&self, a: &Self::Elem) -> Self::Elem {
        a.iter().map(|x| self.base.neg(x)).collect()
    }

    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        if self.is_constant(a) {
            return b.iter().map(|y| self.base.mul(&a[0], y)).collect();
        }
        if self.is_constant(b) {
            return a.iter().map(|x| self.base.mul(x, &b[0])).collect();
        }
        self.reduce(&self.base.mul_poly(a, b))
    }

    fn scale(&self, a: &Self::Elem, c: FieldElement) -> Self::Elem {
        a.iter().map(|x| self.base.scale(x, c)).collect()
    }

    fn is_zero(&self, a: &Self::Elem) -> bool {
        a.iter().all(|x| self.base.is_zero(x))
    }

    fn try_inv(&self, a: &Self::Elem) -> Result<Self::Elem, InvFailure<Self::Split>> {
        let b = &self.base;
        let wrap = |e: InvFailure<R::Split>| match e {
            InvFailure::Zero => InvFailure::Zero,
            InvFailure::Split(s) => InvFailure::Split(QuotientSplit::Base(s)),
        };
        if self.is_constant(a) {
            if b.is_zero(&a[0]) {
                return Err(InvFailure::Zero);
            }
            return Ok(self.embed(b.try_inv(&a[0]).map_err(wrap)?));
        }
        // Euclid on (m, a), tracking the cofactor of a.
        let mut r0: Vec<R::Elem> = self.modulus.to_vec();
        let mut r1 = a.clone();
        poly::trim(b, &mut r1);
        let mut t0: Vec<R::Elem> = Vec::new();
        let mut t1 = vec![b.one()];
        while !r1.is_empty() {
            let (q, rem) = poly::divmod(b, &r0, &r1).map_err(wrap)?;
            r0 = std::mem::replace(&mut r1, rem);
            let nt = poly::sub(b, &t0, &poly::mul(b, &q, &t1));
            t0 = std::mem::replace(&mut t1, nt);
        }
        let dg = r0.len() - 1;
        let lc_inv = b.try_inv(&r0[dg]).map_err(wrap)?;
        if dg == 0 {
            let inv = poly::scale(b, &t0, &lc_inv);
            return Ok(self.reduce(&inv));
        }
        if dg == self.degree() {
            return Err(InvFailure::Zero);
        }
        let g = poly::scale(b, &r0, &lc_inv);
        Err(InvFailure::Split(QuotientSplit::Modulus(g)))
    }

    fn mul_poly(&self, a: &[Self::Elem], b: &[Self::Elem]) -> Vec<Self::Elem> {
        if a.is_empty() || b.is_empty() {
            return Vec::new();
        }
        // Kronecker substitution X^i U^j -> Y^(i*s + j), s = 2d - 1.
        let d = self.degree();
        let s = 2 * d - 1;
        let pack = |v: &[Self::Elem]| -> Vec<R::Elem> {
            let mut out = vec![self.base.zero(); (v.len() - 1) * s + d];
            for (i, c) in v.iter().enumerate() {
                for (j, x) in c.iter().enumerate() {
                    out[i * s + j] = x.clone();
                }
            }
            out
        };
        let prod = self.base.mul_poly(&pack(a), &pack(b));
        (0..a.len() + b.len() - 1)
            .map(|k| {
                let lo = k * s;
                let hi = (lo + s).min(prod.len());
                if lo >= hi {
                    self.zero()
                } else {
                    self.reduce(&prod[lo..hi])
                }
            })
            .collect()
    }
}

/// Σ over the roots of `m` of `w`, as an element of the base ring, by the
/// trace lemma: the constant term of the quotient of `X·w·m'` by `m`.
pub fn trace_down<R: Ring>(ring: &Quotient<R>, w: &[R::Elem]) -> R::Elem {
    let b = ring.base();
    let dm = poly::derivative(b, ring.modulus());
    let mut xw = vec![b.zero()];
    xw.extend_from_slice(w);
    let num = b.mul_poly(&xw, &dm);
    let (q, _) = ring.divmod(&num);
    q.into_iter().next().unwrap_or_else(|| b.zero())
}

/// Σ of `w` over all geometric points of `Spec K`.
pub fn trace_k(ring: &KRing, w: &[FieldElement]) -> FieldElement {
    trace_down(ring, w)
}

/// Σ of `w` over all geometric points of a tensor component.
pub fn trace_b(ring: &BRing, w: &[Vec<FieldElement>]) -> FieldElement {
    let inner = trace_down(ring, w);
    trace_down(ring.base(), &inner)
}

/// Outcome of one attempt on a CRT component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Refine<E> {
    /// A monic proper factor of the component's modulus.
    Split(Polynomial),
    Fail(E),
}

/// Runs `run` on every CRT component of `q`, replacing a component by its
/// two cofactors whenever `run` reports a proper factor. Returns the final
/// components with their results, in ascending order of discovery, and the
/// number of splits.
pub fn refine_components<T, E>(
    field: &PrimeField,
    q: &Polynomial,
    mut run: impl FnMut(&Polynomial) -> Result<T, Refine<E>>,
) -> Result<(Vec<(Polynomial, T)>, usize), E> {
    let mut stack = vec![q.clone()];
    let mut done = Vec::new();
    let mut splits = 0;
    while let Some(m) = stack.pop() {
        match run(&m) {
            Ok(t) => done.push((m, t)),
            Err(Refine::Fail(e)) => return Err(e),
            Err(Refine::Split(g)) => {
                let dg = g.degree().unwrap_or(0);
                assert!(dg >= 1 && Some(dg) < m.degree(), "split must be a proper factor");
                let (h, r) = m.divmod(&g, field).expect("nonzero factor");
                assert!(r.is_zero(), "split must divide the modulus");
                splits += 1;
                stack.push(h.monic(field).expect("nonzero"));
                stack.push(g);
            }
        }
    }
    Ok((done, splits))
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("modulus {0} is not monic and nonconstant")]
    BadModulus(usize),
    #[error("modulus {0} is not squarefree")]
    NotSquarefree(usize),
    #[error("moduli {0} and {1} are not coprime")]
    NotCoprime(usize, usize),
    #[error("element is zero in component {0}")]
    ZeroDivisor(usize),
    #[error("operation needs arity {expected}, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("value is not a root of any modulus")]
    NotARoot,
    #[error("element does not belong to this algebra")]
    Mismatch,
}

/// Result of [`EtaleAlgebra::inv_or_split`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InvOrSplit {
    Inverse(AlgebraElement),
    /// `factor` properly divides the modulus `moduli[modulus_index]`.
    Split {
        factor: Polynomial,
        modulus_index: usize,
    },
}

/// A product of `k[U]/(Q_i)` (arity 1) or of all `k[U]/(Q_i) ⊗ k[V]/(Q_j)`
/// (arity 2, components in row-major order of `(i, j)`).
#[derive(Clone, Debug)]
pub struct EtaleAlgebra {
    field: PrimeField,
    moduli: Vec<Polynomial>,
    arity: usize,
}

/// Per-component residues. Arity 1: a coefficient vector per modulus.
/// Arity 2: `residue[b][a]` is the coefficient of `U^a V^b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlgebraElement {
    arity: usize,
    residues: Vec<Vec<Vec<FieldElement>>>,
}

impl AlgebraElement {
    /// The residue in an arity-1 component, constant term first.
    pub fn residue(&self, component: usize) -> Polynomial {
        Polynomial::new(self.residues[component][0].clone())
    }

    /// Coefficient of `U^a V^b` in an arity-2 component.
    pub fn coefficient(&self, component: usize, a: usize, b: usize) -> FieldElement {
        self.residues[component][b][a]
    }
}

impl EtaleAlgebra {
    pub fn new(field: PrimeField, moduli: Vec<Polynomial>, arity: usize) -> Result<Self, AlgebraError> {
        if arity != 1 && arity != 2 {
            return Err(AlgebraError::Arity {
                expected: 1,
                got: arity,
            });
        }
        for (i, m) in moduli.iter().enumerate() {
            if m.degree().unwrap_or(0) == 0 || !m.is_monic() {
                return Err(AlgebraError::BadModulus(i));
            }
            let g = m
                .gcd(&m.derivative(&field), &field)
                .map_err(|_| AlgebraError::BadModulus(i))?;
            if g.degree() != Some(0) {
                return Err(AlgebraError::NotSquarefree(i));
            }
            for (j, m2) in moduli.iter().enumerate().take(i) {
                let g = m.gcd(m2, &field).map_err(|_| AlgebraError::BadModulus(i))?;
                if g.degree() != Some(0) {
                    return Err(AlgebraError::NotCoprime(j, i));
                }
            }
        }
        if moduli.is_empty() {
            return Err(AlgebraError::BadModulus(0));
        }
        Ok(EtaleAlgebra { field, moduli, arity })
    }

    pub fn field(&self) -> &PrimeField {
        &self.field
    }

    pub fn moduli(&self) -> &[Polynomial] {
        &self.moduli
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn num_components(&self) -> usize {
        self.moduli.len().pow(self.arity as u32)
    }

    fn k_ring(&self, i: usize) -> KRing {
        Quotient::new(self.field, self.moduli[i].coeffs().to_vec())
    }

    fn b_ring(&self, c: usize) -> BRing {
        let n = self.moduli.len();
        let (i, j) = (c / n, c % n);
        let k = self.k_ring(i);
        let m: Vec<Vec<FieldElement>> = self.moduli[j].coeffs().iter().map(|&x| k.from_fe(x)).collect();
        Quotient::new(k, m)
    }

    /// The image of a polynomial in `U` (arity 1).
    pub fn element(&self, f: &Polynomial) -> AlgebraElement {
        assert_eq!(self.arity, 1);
        let residues = (0..self.moduli.len())
            .map(|i| vec![self.k_ring(i).reduce(f.coeffs())])
            .collect();
        AlgebraElement { arity: 1, residues }
    }

    /// The image of `Σ coeffs[b][a] U^a V^b` (arity 2).
    pub fn element2(&self, coeffs: &[Vec<FieldElement>]) -> AlgebraElement {
        assert_eq!(self.arity, 2);
        let residues = (0..self.num_components())
            .map(|c| {
                let r = self.b_ring(c);
                let k = r.base();
                let rows: Vec<Vec<FieldElement>> = coeffs.iter().map(|row| k.reduce(row)).collect();
                r.reduce(&rows)
            })
            .collect();
        AlgebraElement { arity: 2, residues }
    }

    /// The pure tensor `f(U)·g(V)`.
    pub fn tensor(&self, f: &Polynomial, g: &Polynomial) -> AlgebraElement {
        let rows: Vec<Vec<FieldElement>> = g
            .coeffs()
            .iter()
            .map(|&c| f.scale(c, &self.field).coeffs().to_vec())
            .collect();
        self.element2(&rows)
    }

    fn check(&self, x: &AlgebraElement) -> Result<(), AlgebraError> {
        if x.arity != self.arity || x.residues.len() != self.num_components() {
            return Err(AlgebraError::Mismatch);
        }
        Ok(())
    }

    pub fn mul(&self, x: &AlgebraElement, y: &AlgebraElement) -> Result<AlgebraElement, AlgebraError> {
        self.check(x)?;
        self.check(y)?;
        let residues = (0..self.num_components())
            .map(|c| match self.arity {
                1 => vec![self.k_ring(c).mul(&x.residues[c][0], &y.residues[c][0])],
                _ => self.b_ring(c).mul(&x.residues[c], &y.residues[c]),
            })
            .collect();
        Ok(AlgebraElement {
            arity: self.arity,
            residues,
        })
    }

    pub fn add(&self, x: &AlgebraElement, y: &AlgebraElement) -> Result<AlgebraElement, AlgebraError> {
        self.check(x)?;
        self.check(y)?;
        let residues = (0..self.num_components())
            .map(|c| match self.arity {
                1 => vec![self.k_ring(c).add(&x.residues[c][0], &y.residues[c][0])],
                _ => self.b_ring(c).add(&x.residues[c], &y.residues[c]),
            })
            .collect();
        Ok(AlgebraElement {
            arity: self.arity,
            residues,
        })
    }

    pub fn scale(&self, x: &AlgebraElement, c: FieldElement) -> AlgebraElement {
        let f = self.field;
        AlgebraElement {
            arity: x.arity,
            residues: x
                .residues
                .iter()
                .map(|r| r.iter().map(|row| row.iter().map(|&v| f.mul(v, c)).collect()).collect())
                .collect(),
        }
    }

    /// The inverse, or a proper factor of one modulus when `x` is a zero
    /// divisor. For arity 2 a split is reported on the modulus of the
    /// variable in which it was found.
    pub fn inv_or_split(&self, x: &AlgebraElement) -> Result<InvOrSplit, AlgebraError> {
        self.check(x)?;
        let n = self.moduli.len();
        let mut residues = Vec::with_capacity(self.num_components());
        for c in 0..self.num_components() {
            let res = match self.arity {
                1 => self
                    .k_ring(c)
                    .try_inv(&x.residues[c][0])
                    .map(|v| vec![v])
                    .map_err(|e| match e {
                        InvFailure::Zero => Err(AlgebraError::ZeroDivisor(c)),
                        InvFailure::Split(QuotientSplit::Modulus(g)) => Ok((Polynomial::new(g), c)),
                        InvFailure::Split(QuotientSplit::Base(never)) => match never {},
                    }),
                _ => self.b_ring(c).try_inv(&x.residues[c]).map_err(|e| match e {
                    InvFailure::Zero => Err(AlgebraError::ZeroDivisor(c)),
                    InvFailure::Split(QuotientSplit::Base(QuotientSplit::Modulus(g))) => {
                        Ok((Polynomial::new(g), c / n))
                    }
                    InvFailure::Split(QuotientSplit::Base(QuotientSplit::Base(never))) => match never {},
                    InvFailure::Split(QuotientSplit::Modulus(g)) => {
                        // A factor over k[U]/(Q_i); its norm-free image in V is
                        // found by specialising the constant coefficients.
                        Ok((self.factor_in_v(&g), c % n))
                    }
                }),
            };
            match res {
                Ok(v) => residues.push(v),
                Err(Err(e)) => return Err(e),
                Err(Ok((factor, modulus_index))) => return Ok(InvOrSplit::Split { factor, modulus_index }),
            }
        }
        Ok(InvOrSplit::Inverse(AlgebraElement {
            arity: self.arity,
            residues,
        }))
    }

    fn factor_in_v(&self, g: &[Vec<FieldElement>]) -> Polynomial {
        // Components are products of Q_i(U) and Q_j(V) with coefficients in
        // k, so a factor found over k[U]/(Q_i) whose coefficients are all
        // constants is a factor of Q_j over k.
        Polynomial::new(g.iter().map(|c| c[0]).collect())
    }

    /// Σ of `x` over all roots of all moduli (arity 1).
    pub fn trace_sum(&self, x: &AlgebraElement) -> Result<FieldElement, AlgebraError> {
        self.check(x)?;
        if self.arity != 1 {
            return Err(AlgebraError::Arity {
                expected: 1,
                got: self.arity,
            });
        }
        let f = self.field;
        Ok((0..self.moduli.len())
            .map(|c| trace_k(&self.k_ring(c), &x.residues[c][0]))
            .fold(f.zero(), |a, b| f.add(a, b)))
    }

    /// Σ of `x` over all pairs of roots (arity 2).
    pub fn tensor_trace_sum(&self, x: &AlgebraElement) -> Result<FieldElement, AlgebraError> {
        self.check(x)?;
        if self.arity != 2 {
            return Err(AlgebraError::Arity {
                expected: 2,
                got: self.arity,
            });
        }
        let f = self.field;
        Ok((0..self.num_components())
            .map(|c| trace_b(&self.b_ring(c), &x.residues[c]))
            .fold(f.zero(), |a, b| f.add(a, b)))
    }

    /// Value of an arity-1 element at a root of one of the moduli.
    pub fn specialize(&self, x: &AlgebraElement, root: FieldElement) -> Result<FieldElement, AlgebraError> {
        self.check(x)?;
        if self.arity != 1 {
            return Err(AlgebraError::Arity {
                expected: 1,
                got: self.arity,
            });
        }
        let f = self.field;
        let c = self
            .moduli
            .iter()
            .position(|m| m.eval(root, &f).is_zero())
            .ok_or(AlgebraError::NotARoot)?;
        Ok(poly::eval(&f, &x.residues[c][0], &root))
    }

    /// Substitutes a root for variable 0 (`U`) or 1 (`V`) of an arity-2
    /// element; the result lives in the arity-1 algebra on the same moduli.
    pub fn specialize2(
        &self,
        x: &AlgebraElement,
        variable: usize,
        root: FieldElement,
    ) -> Result<(EtaleAlgebra, AlgebraElement), AlgebraError> {
        self.check(x)?;
        if self.arity != 2 {
            return Err(AlgebraError::Arity {
                expected: 2,
                got: self.arity,
            });
        }
        let f = self.field;
        let n = self.moduli.len();
        let i0 = self
            .moduli
            .iter()
            .position(|m| m.eval(root, &f).is_zero())
            .ok_or(AlgebraError::NotARoot)?;
        let one = EtaleAlgebra {
            field: f,
            moduli: self.moduli.clone(),
            arity: 1,
        };
        let residues = (0..n)
            .map(|j| {
                let c = if variable == 0 { i0 * n + j } else { j * n + i0 };
                let rows = &x.residues[c];
                let v: Vec<FieldElement> = if variable == 0 {
                    rows.iter().map(|row| poly::eval(&f, row, &root)).collect()
                } else {
                    let du = rows[0].len();
                    (0..du)
                        .map(|a| {
                            let col: Vec<FieldElement> = rows.iter().map(|row| row[a]).collect();
                            poly::eval(&f, &col, &root)
                        })
                        .collect()
                };
                let k = one.k_ring(j);
                vec![k.reduce(&v)]
            })
            .collect();
        Ok((one, AlgebraElement { arity: 1, residues }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f() -> PrimeField {
        PrimeField::new(1009).unwrap()
    }

    fn q7(f: &PrimeField) -> Polynomial {
        Polynomial::from_u64s(f, &[353, 746, 1])
    }

    #[test]
    fn worked_example_inverse_and_traces() {
        let f = f();
        let alg = EtaleAlgebra::new(f, vec![q7(&f)], 1).unwrap();
        let e = |c: &[u64]| alg.element(&Polynomial::from_u64s(&f, c));
        let x = e(&[437, 861]);
        let InvOrSplit::Inverse(xi) = alg.inv_or_split(&x).unwrap() else {
            panic!()
        };
        let lam5 = alg.mul(&e(&[906, 980]), &xi).unwrap();
        assert_eq!(lam5, e(&[129, 126]));
        assert_eq!(alg.mul(&x, &lam5).unwrap(), e(&[906, 980]));
        let w1 = alg.mul(&e(&[129, 126]), &e(&[906, 980])).unwrap();
        assert_eq!(alg.trace_sum(&w1).unwrap(), f.elem(380));
        let w2 = alg.mul(&e(&[129, 126]), &e(&[7, 103])).unwrap();
        assert_eq!(alg.trace_sum(&w2).unwrap(), f.elem(529));
        assert_eq!(alg.trace_sum(&e(&[1])).unwrap(), f.elem(2));
        let InvOrSplit::Inverse(one) = alg.inv_or_split(&e(&[1])).unwrap() else {
            panic!()
        };
        assert_eq!(one, e(&[1]));
    }

    #[test]
    fn zero_divisor_splits() {
        let f = f();
        let alg = EtaleAlgebra::new(f, vec![Polynomial::from_i64s(&f, &[-1, 0, 1])], 1).unwrap();
        let x = alg.element(&Polynomial::from_i64s(&f, &[-1, 1]));
        assert_eq!(
            alg.inv_or_split(&x).unwrap(),
            InvOrSplit::Split {
                factor: Polynomial::from_i64s(&f, &[-1, 1]),
                modulus_index: 0
            }
        );
        let z = alg.element(&Polynomial::zero());
        assert_eq!(alg.inv_or_split(&z), Err(AlgebraError::ZeroDivisor(0)));
    }

    #[test]
    fn tensor_examples() {
        let f = f();
        let m = Polynomial::from_roots(&f, &[f.elem(2), f.elem(3)]);
        let alg = EtaleAlgebra::new(f, vec![m.clone()], 2).unwrap();
        let uv = alg.tensor(&Polynomial::x(), &Polynomial::x());
        assert_eq!(alg.tensor_trace_sum(&uv).unwrap(), f.elem(25));
        let one = alg.tensor(&Polynomial::constant(f.one()), &Polynomial::constant(f.one()));
        assert_eq!(alg.tensor_trace_sum(&one).unwrap(), f.elem(4));
        let (a1, s) = alg.specialize2(&uv, 0, f.elem(2)).unwrap();
        assert_eq!(a1.specialize(&s, f.elem(3)).unwrap(), f.elem(6));
    }

    #[test]
    fn specialize_examples() {
        let f = f();
        let alg = EtaleAlgebra::new(f, vec![Polynomial::from_roots(&f, &[f.elem(2), f.elem(3)])], 1).unwrap();
        let x2 = alg.element(&Polynomial::from_u64s(&f, &[0, 0, 1]));
        assert_eq!(alg.specialize(&x2, f.elem(2)).unwrap(), f.elem(4));
        let c = alg.element(&Polynomial::constant(f.elem(7)));
        assert_eq!(alg.specialize(&c, f.elem(3)).unwrap(), f.elem(7));
        assert_eq!(alg.specialize(&c, f.elem(5)), Err(AlgebraError::NotARoot));
        let lin = Polynomial::from_u64s(&f, &[268, 1]);
        let alg2 = EtaleAlgebra::new(f, vec![lin.clone(), q7(&f)], 1).unwrap();
        assert_eq!(alg2.specialize(&alg2.element(&lin), f.elem(741)).unwrap(), f.zero());
    }

    #[test]
    fn construction_checks() {
        let f = f();
        let sq = Polynomial::from_roots(&f, &[f.elem(2), f.elem(2)]);
        assert_eq!(
            EtaleAlgebra::new(f, vec![sq], 1).unwrap_err(),
            AlgebraError::NotSquarefree(0)
        );
        let a = Polynomial::from_roots(&f, &[f.elem(2), f.elem(3)]);
        let b = Polynomial::from_roots(&f, &[f.elem(3), f.elem(4)]);
        assert_eq!(
            EtaleAlgebra::new(f, vec![a, b], 1).unwrap_err(),
            AlgebraError::NotCoprime(0, 1)
        );
    }

    #[test]
    fn worklist_splits_until_success() {
        let f = f();
        let roots: Vec<FieldElement> = (2..6).map(|v| f.elem(v)).collect();
        let q = Polynomial::from_roots(&f, &roots);
        // Fails with the factor (U - 2) until it is isolated.
        let (parts, splits) = refine_components::<usize, ()>(&f, &q, |m| {
            if m.degree() > Some(1) && m.eval(f.elem(2), &f).is_zero() {
                Err(Refine::Split(Polynomial::from_roots(&f, &[f.elem(2)])))
            } else {
                Ok(m.degree().unwrap())
            }
        })
        .unwrap();
        assert_eq!(splits, 1);
        assert_eq!(parts.iter().map(|p| p.1).sum::<usize>(), 4);
    }

    #[test]
    fn newton_division_matches_long_division() {
        let f = PrimeField::new(65537).unwrap();
        let m: Vec<FieldElement> = (0..100u64).map(|i| f.elem(i * i + 3)).chain([f.one()]).collect();
        let k = Quotient::new(f, m.clone());
        let a: Vec<FieldElement> = (0..200u64).map(|i| f.elem(i * 7919 + 1)).collect();
        let (q1, r1) = k.divmod(&a);
        let (q2, r2) = poly::divmod_monic(&f, &a, &m);
        assert_eq!((q1, r1), (q2, r2));
    }

    fn distinct_roots(f: &PrimeField, raw: &[u64]) -> Vec<FieldElement> {
        let mut roots: Vec<FieldElement> = raw.iter().map(|&r| f.elem(r)).collect();
        roots.sort();
        roots.dedup();
        roots
    }

    proptest::proptest! {
        #[test]
        fn trace_is_the_sum_over_roots(
            raw in proptest::collection::vec(0u64..1009, 1..9),
            w in proptest::collection::vec(0u64..1009, 0..9),
        ) {
            let f = f();
            let roots = distinct_roots(&f, &raw);
            let q = Polynomial::from_roots(&f, &roots);
            let ring: KRing = Quotient::new(f, q.coeffs().to_vec());
            let w = Polynomial::from_u64s(&f, &w);
            let literal = roots.iter().fold(f.zero(), |acc, &u| f.add(acc, w.eval(u, &f)));
            proptest::prop_assert_eq!(trace_k(&ring, &ring.reduce(w.coeffs())), literal);
        }

        #[test]
        fn tensor_trace_is_the_sum_over_root_pairs(
            raw in proptest::collection::vec(0u64..1009, 1..6),
            w in proptest::collection::vec(proptest::collection::vec(0u64..1009, 0..6), 0..6),
        ) {
            let f = f();
            let roots = distinct_roots(&f, &raw);
            let q = Polynomial::from_roots(&f, &roots);
            let kring: KRing = Quotient::new(f, q.coeffs().to_vec());
            let lifted: Vec<Vec<FieldElement>> = q.coeffs().iter().map(|&c| kring.embed(c)).collect();
            let bring: BRing = Quotient::new(kring.clone(), lifted);
            // w = Σ_j w_j(U)·V^j
            let w: Vec<Polynomial> = w.iter().map(|c| Polynomial::from_u64s(&f, c)).collect();
            let elem: Vec<Vec<FieldElement>> = w.iter().map(|c| kring.reduce(c.coeffs())).collect();
            let mut literal = f.zero();
            for &u in &roots {
                let in_v = Polynomial::new(w.iter().map(|c| c.eval(u, &f)).collect());
                for &v in &roots {
                    literal = f.add(literal, in_v.eval(v, &f));
                }
            }
            proptest::prop_assert_eq!(trace_b(&bring, &bring.reduce(&elem)), literal);
        }
    }
}
