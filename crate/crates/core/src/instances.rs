//! Random genus-one test instances with a rational `ℓ`-kernel.
//!
//! Level 2 uses the Legendre model of [`crate::velu`]; group orders come from
//! character sums, and kernel points may lie on the curve or on its twist
//! (both give rational Kummer points).
//!
//! Level 4 uses the model cut out by the Riemann relations for a null point
//! `(a : b : c : b)` with `ac(a² + c²) = 2b⁴`:
//! `x0² + x2² = K·x1·x3` and `x1² + x3² = K·x0·x2`, `K = 2b²/(ac)`.
//! Group orders come from enumerating the points of this model.

use rand::Rng;

use crate::ff::{random_prime, FieldElement, PrimeField};
use crate::kernel::{Convention, KernelDescriptor};
use crate::poly::Polynomial;
use crate::theta::{normalize_projective, proj_equal, AffineThetaPoint, ThetaNullPoint};
use crate::velu::{theta_null_to_curve, x_to_theta, WeierstrassCurve};

/// A level-2, genus-one instance with a `kummer_half` kernel.
#[derive(Clone, Debug)]
pub struct Level2Instance {
    pub field: PrimeField,
    pub null: ThetaNullPoint,
    pub curve: WeierstrassCurve,
    pub ell: u64,
    /// A Kummer point of order `ℓ`, normalised to `(1 : u)`.
    pub generator: Vec<FieldElement>,
    pub kernel: KernelDescriptor,
}

fn point(f: &PrimeField, c: &[FieldElement]) -> AffineThetaPoint<PrimeField> {
    AffineThetaPoint::constant(f, c)
}

fn is_zero_point(null: &ThetaNullPoint, x: &AffineThetaPoint<PrimeField>) -> bool {
    proj_equal(null.field(), x, &null.lift(null.field()))
}

/// `m·x` over the base field, projectively normalised; `None` on degenerate
/// input (a zero coordinate where a divisor is needed).
pub fn multiply_point(null: &ThetaNullPoint, m: u64, x: &[FieldElement]) -> Option<Vec<FieldElement>> {
    let f = null.field();
    let r = null.multiply(f, m, &point(f, x)).ok()?;
    normalize_projective(f, &r.coords)
}

/// A point of exact order `ℓ` in the subgroup reached by the cofactor
/// `order / ℓ^v`, starting from `x`.
fn order_ell_point(null: &ThetaNullPoint, ell: u64, order: u64, x: &[FieldElement]) -> Option<Vec<FieldElement>> {
    let f = null.field();
    let mut cof = order;
    while cof.is_multiple_of(ell) {
        cof /= ell;
    }
    let mut t = multiply_point(null, cof, x)?;
    if is_zero_point(null, &point(f, &t)) {
        return None;
    }
    loop {
        let next = multiply_point(null, ell, &t)?;
        if is_zero_point(null, &point(f, &next)) {
            return Some(t);
        }
        t = next;
    }
}

/// `#E(F_p)` for `y² = x(x − 1)(x − λ)`.
pub fn legendre_order(f: &PrimeField, lambda: FieldElement) -> u64 {
    let mut s: i64 = 0;
    for x in 0..f.modulus() {
        let x = f.elem(x);
        let v = f.mul(x, f.mul(f.sub(x, f.one()), f.sub(x, lambda)));
        s += f.legendre(v) as i64;
    }
    (f.modulus() as i64 + 1 + s) as u64
}

/// Samples level-2 instances over primes in `[p_lo, p_hi)` until one has a
/// rational Kummer point of order `ℓ`.
pub fn level2_instance<G: Rng + ?Sized>(rng: &mut G, ell: u64, p_lo: u64, p_hi: u64) -> Level2Instance {
    loop {
        let p = random_prime(rng, p_lo, p_hi, |p| p % ell != 0);
        let f = PrimeField::new(p).expect("prime");
        let (a, b) = (f.one(), f.random_nonzero(rng));
        let Ok(null) = ThetaNullPoint::new(f, 1, 2, vec![a, b]) else {
            continue;
        };
        let Ok(curve) = theta_null_to_curve(&f, null.coords()) else {
            continue;
        };
        let lambda = curve.a4;
        let order = legendre_order(&f, lambda);
        let twist = 2 * p + 2 - order;
        if !order.is_multiple_of(ell) && !twist.is_multiple_of(ell) {
            continue;
        }
        if let Some(inst) = level2_from_curve(rng, &null, &curve, ell, order, twist) {
            return inst;
        }
    }
}

fn level2_from_curve<G: Rng + ?Sized>(
    rng: &mut G,
    null: &ThetaNullPoint,
    curve: &WeierstrassCurve,
    ell: u64,
    order: u64,
    twist: u64,
) -> Option<Level2Instance> {
    let f = *null.field();
    for _ in 0..20 {
        let x = f.random(rng);
        let on_curve = f.legendre(curve.rhs(x)) >= 0;
        let n = if on_curve { order } else { twist };
        if n % ell != 0 {
            continue;
        }
        let r = x_to_theta(&f, null.coords(), x).ok()?;
        let Some(t) = order_ell_point(null, ell, n, &r) else {
            continue;
        };
        if t[0].is_zero() {
            continue;
        }
        let mut roots = Vec::new();
        for k in 1..=(ell - 1) / 2 {
            let pk = multiply_point(null, k, &t)?;
            roots.push(pk[1]);
        }
        let q = Polynomial::from_roots(&f, &roots);
        let coords = vec![Polynomial::constant(f.one()), Polynomial::x()];
        let kernel = KernelDescriptor::new(null, ell, Convention::KummerHalf, q, coords).ok()?;
        return Some(Level2Instance {
            field: f,
            null: null.clone(),
            curve: *curve,
            ell,
            generator: t,
            kernel,
        });
    }
    None
}

/// A level-4, genus-one curve in theta coordinates.
#[derive(Clone, Debug)]
pub struct Level4Curve {
    pub field: PrimeField,
    pub null: ThetaNullPoint,
    /// `K` in the defining equations.
    pub k: FieldElement,
    /// Number of rational points.
    pub order: u64,
}

impl Level4Curve {
    /// Samples a null point over a prime `p ≡ 1 (mod 4)` in `[p_lo, p_hi)`
    /// whose curve passes `accept(order)`.
    pub fn sample<G: Rng + ?Sized>(rng: &mut G, p_lo: u64, p_hi: u64, accept: impl Fn(u64) -> bool) -> Self {
        loop {
            let p = random_prime(rng, p_lo, p_hi, |p| p % 4 == 1);
            let f = PrimeField::new(p).expect("prime");
            for _ in 0..8 {
                let Some(c) = Self::sample_over(rng, &f) else { continue };
                if accept(c.order) {
                    return c;
                }
            }
        }
    }

    /// One random null point over `f`, if the fourth root exists.
    pub fn sample_over<G: Rng + ?Sized>(rng: &mut G, f: &PrimeField) -> Option<Self> {
        let (a, c) = (f.random_nonzero(rng), f.random_nonzero(rng));
        let t = f
            .div(f.mul(f.mul(a, c), f.add(f.mul(a, a), f.mul(c, c))), f.elem(2))
            .ok()?;
        if t.is_zero() {
            return None;
        }
        let s = f.sqrt(t)?;
        let b = [s, f.neg(s)].into_iter().find_map(|s| f.sqrt(s))?;
        let null = ThetaNullPoint::new(*f, 1, 4, vec![a, b, c, b]).ok()?;
        let k = f.div(f.mul(f.elem(2), f.mul(b, b)), f.mul(a, c)).ok()?;
        let mut curve = Level4Curve {
            field: *f,
            null,
            k,
            order: 0,
        };
        curve.order = curve.count_points();
        Some(curve)
    }

    /// The curve of a level-4 null point `(a : b : c : b)`.
    pub fn from_null(null: ThetaNullPoint) -> Option<Self> {
        let f = *null.field();
        let [a, b, c, d] = <[FieldElement; 4]>::try_from(null.coords().to_vec()).ok()?;
        if b != d {
            return None;
        }
        let k = f.div(f.mul(f.elem(2), f.mul(b, b)), f.mul(a, c)).ok()?;
        let mut curve = Level4Curve {
            field: f,
            null,
            k,
            order: 0,
        };
        curve.order = curve.count_points();
        Some(curve)
    }

    fn roots_count(&self, v: FieldElement) -> u64 {
        (1 + self.field.legendre(v)) as u64
    }

    /// Counts the projective points of the model.
    pub fn count_points(&self) -> u64 {
        let f = &self.field;
        let kinv = f.inv(self.k).expect("K nonzero");
        let mut total = 0;
        for x2 in 0..f.modulus() {
            let x2 = f.elem(x2);
            let s = f.mul(f.add(f.one(), f.mul(x2, x2)), kinv);
            let t = f.mul(self.k, x2);
            let two_s = f.add(s, s);
            total += self.roots_count(f.add(t, two_s)) * self.roots_count(f.sub(t, two_s));
        }
        // x0 = 0: x1 = 1, x3 = ±i, x2² = K·x3.
        let i = f.sqrt(f.neg(f.one())).expect("p = 1 mod 4");
        for x3 in [i, f.neg(i)] {
            total += self.roots_count(f.mul(self.k, x3));
        }
        total
    }

    pub fn contains(&self, x: &[FieldElement]) -> bool {
        let f = &self.field;
        let e1 = f.sub(
            f.add(f.mul(x[0], x[0]), f.mul(x[2], x[2])),
            f.mul(self.k, f.mul(x[1], x[3])),
        );
        let e2 = f.sub(
            f.add(f.mul(x[1], x[1]), f.mul(x[3], x[3])),
            f.mul(self.k, f.mul(x[0], x[2])),
        );
        e1.is_zero() && e2.is_zero() && x.iter().any(|c| !c.is_zero())
    }

    /// A uniformly chosen affine-chart point `(1 : x1 : x2 : x3)`.
    pub fn random_point<G: Rng + ?Sized>(&self, rng: &mut G) -> Vec<FieldElement> {
        let f = &self.field;
        let kinv = f.inv(self.k).expect("K nonzero");
        loop {
            let x2 = f.random(rng);
            let s = f.mul(f.add(f.one(), f.mul(x2, x2)), kinv);
            let t = f.mul(self.k, x2);
            let two_s = f.add(s, s);
            let (Some(a), Some(b)) = (f.sqrt(f.add(t, two_s)), f.sqrt(f.sub(t, two_s))) else {
                continue;
            };
            let a = if rng.gen() { a } else { f.neg(a) };
            let b = if rng.gen() { b } else { f.neg(b) };
            let half = f.inv(f.elem(2)).expect("p odd");
            let x1 = f.mul(f.add(a, b), half);
            let x3 = f.mul(f.sub(a, b), half);
            return vec![f.one(), x1, x2, x3];
        }
    }

    /// Projective sum by normal addition.
    pub fn add(&self, x: &[FieldElement], y: &[FieldElement]) -> Vec<FieldElement> {
        let f = &self.field;
        let s = self
            .null
            .normal_add(f, &point(f, x), &point(f, y))
            .expect("normal addition on the curve");
        normalize_projective(f, &s.coords).expect("nonzero")
    }

    pub fn multiply(&self, m: u64, x: &[FieldElement]) -> Option<Vec<FieldElement>> {
        multiply_point(&self.null, m, x)
    }

    pub fn is_zero(&self, x: &[FieldElement]) -> bool {
        is_zero_point(&self.null, &point(&self.field, x))
    }

    /// A point of exact order `ℓ`, for `ℓ | order`.
    pub fn order_ell_point<G: Rng + ?Sized>(&self, rng: &mut G, ell: u64) -> Vec<FieldElement> {
        loop {
            let r = self.random_point(rng);
            if let Some(t) = order_ell_point(&self.null, ell, self.order, &r) {
                return t;
            }
        }
    }

    /// The kernel generated by `t` as a `full` or `punctured` descriptor,
    /// with `U` a random linear form in the affine chart `x0 = 1`.
    pub fn kernel<G: Rng + ?Sized>(
        &self,
        rng: &mut G,
        ell: u64,
        t: &[FieldElement],
        convention: Convention,
    ) -> Option<KernelDescriptor> {
        let f = &self.field;
        let start = match convention {
            Convention::Full => 0,
            Convention::Punctured => 1,
            Convention::KummerHalf => return None,
        };
        let mut pts = Vec::new();
        for m in start..ell {
            let pm = self.multiply(m, t)?;
            if pm[0].is_zero() {
                return None;
            }
            pts.push(pm);
        }
        for _ in 0..16 {
            let r: Vec<FieldElement> = (0..4).map(|_| f.random(rng)).collect();
            let us: Vec<FieldElement> = pts
                .iter()
                .map(|x| (1..4).fold(f.zero(), |acc, i| f.add(acc, f.mul(r[i], x[i]))))
                .collect();
            let mut sorted = us.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != us.len() {
                continue;
            }
            let q = Polynomial::from_roots(f, &us);
            let coords = (0..4)
                .map(|nu| {
                    let vals: Vec<FieldElement> = pts.iter().map(|x| x[nu]).collect();
                    interpolate(f, &us, &vals)
                })
                .collect();
            return KernelDescriptor::new(&self.null, ell, convention, q, coords).ok();
        }
        None
    }
}

/// The polynomial of degree `< xs.len()` through the given points.
pub fn interpolate(f: &PrimeField, xs: &[FieldElement], ys: &[FieldElement]) -> Polynomial {
    let all = Polynomial::from_roots(f, xs);
    let dall = all.derivative(f);
    let mut acc = Polynomial::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        if y.is_zero() {
            continue;
        }
        let (basis, _) = all
            .divmod(&Polynomial::new(vec![f.neg(x), f.one()]), f)
            .expect("nonzero");
        let w = f.div(y, dall.eval(x, f)).expect("distinct nodes");
        acc = acc.add(&basis.scale(w, f), f);
    }
    acc
}

/// A level-4 instance: curve, order-`ℓ` point and kernel descriptor.
#[derive(Clone, Debug)]
pub struct Level4Instance {
    pub curve: Level4Curve,
    pub ell: u64,
    pub generator: Vec<FieldElement>,
    pub kernel: KernelDescriptor,
}

/// Samples level-4 instances over primes in `[p_lo, p_hi)` until one has a
/// rational point of order `ℓ`.
pub fn level4_instance<G: Rng + ?Sized>(
    rng: &mut G,
    ell: u64,
    p_lo: u64,
    p_hi: u64,
    convention: Convention,
) -> Level4Instance {
    loop {
        let curve = Level4Curve::sample(rng, p_lo, p_hi, |n| n % ell == 0);
        let t = curve.order_ell_point(rng, ell);
        if let Some(kernel) = curve.kernel(rng, ell, &t, convention) {
            return Level4Instance {
                curve,
                ell,
                generator: t,
                kernel,
            };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::validate_kernel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn level2_instance_is_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inst = level2_instance(&mut rng, 5, 1000, 4000);
        validate_kernel(&inst.kernel, &inst.null).unwrap();
    }

    #[test]
    fn level4_group_law_and_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let curve = Level4Curve::sample(&mut rng, 200, 800, |_| true);
        let zero = curve.null.coords().to_vec();
        assert!(curve.contains(&zero));
        for _ in 0..5 {
            let x = curve.random_point(&mut rng);
            let y = curve.random_point(&mut rng);
            assert!(curve.contains(&x));
            let s = curve.add(&x, &y);
            assert!(curve.contains(&s));
            assert!(curve.is_zero(&curve.multiply(curve.order, &x).unwrap()));
            assert_eq!(curve.add(&x, &zero), normalize_projective(&curve.field, &x).unwrap());
            let two = curve.multiply(2, &x).unwrap();
            assert_eq!(curve.add(&x, &x), two);
        }
    }

    #[test]
    fn level4_three_way_addition() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let curve = Level4Curve::sample(&mut rng, 200, 800, |_| true);
        let f = curve.field;
        for _ in 0..5 {
            let [x, y, z] = [0; 3].map(|_| curve.random_point(&mut rng));
            let (xy, xz, yz) = (curve.add(&x, &y), curve.add(&x, &z), curve.add(&y, &z));
            let pts = [&xy, &xz, &yz, &x, &y, &z].map(|c| point(&f, c));
            let s = curve
                .null
                .three_way_add(&f, &pts[0], &pts[1], &pts[2], &pts[3], &pts[4], &pts[5])
                .unwrap();
            assert_eq!(normalize_projective(&f, &s.coords).unwrap(), curve.add(&xy, &z));
        }
    }

    #[test]
    fn level4_kernels_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for conv in [Convention::Full, Convention::Punctured] {
            let inst = level4_instance(&mut rng, 5, 200, 2000, conv);
            validate_kernel(&inst.kernel, &inst.curve.null).unwrap();
        }
    }
}
