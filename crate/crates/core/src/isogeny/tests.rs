use super::*;
use crate::ff::PrimeField;
use crate::kernel::{formal_point, point_at, Convention, KernelDescriptor};

fn example() -> (PrimeField, ThetaNullPoint, KernelDescriptor) {
    let f = PrimeField::new(1009).unwrap();
    let null = ThetaNullPoint::new(f, 1, 2, vec![f.elem(971), f.elem(94)]).unwrap();
    let q = Polynomial::from_u64s(&f, &[353, 746, 1]);
    let coords = vec![Polynomial::constant(f.one()), Polynomial::x()];
    let kd = KernelDescriptor::new(&null, 5, Convention::KummerHalf, q, coords).unwrap();
    (f, null, kd)
}

#[test]
fn worked_example_lambda() {
    let (f, null, kd) = example();
    let (ring, eta) = formal_point(&f, &kd, kd.q(), param::LAMBDA1);
    let c = normalize_kernel_point(&null, &ring, 5, &eta).unwrap();
    assert_eq!(c, ring.reduce(&[f.elem(129), f.elem(126)]));
}

#[test]
fn worked_example_codomain() {
    let (f, null, kd) = example();
    let dec = decompose(5, 2).unwrap();
    let (raw, stats) = codomain_null_raw(&null, &kd, &dec, false).unwrap();
    assert_eq!(raw, vec![f.elem(186), f.elem(513)]);
    assert_eq!(stats.components, 1);
    let proj = codomain_null(&null, &kd, &dec).unwrap();
    assert_eq!(proj, vec![f.one(), f.mul(f.elem(513), f.inv(f.elem(186)).unwrap())]);
}

#[test]
fn raw_quintic_gives_the_same_codomain() {
    let (f, null, kd) = example();
    let raw = Polynomial::from_u64s(&f, &[339, 660, 447, 546, 751, 1]);
    let coords = vec![Polynomial::constant(f.one()), Polynomial::x()];
    let stripped = KernelDescriptor::from_raw(&null, 5, &raw, coords).unwrap();
    let dec = decompose(5, 2).unwrap();
    assert_eq!(
        codomain_null(&null, &stripped, &dec).unwrap(),
        codomain_null(&null, &kd, &dec).unwrap()
    );
}

#[test]
fn image_needs_level_four() {
    let (f, null, kd) = example();
    let dec = decompose(5, 2).unwrap();
    let err = image_point(&null, &kd, &dec, &[f.one(), f.elem(7)]).unwrap_err();
    assert_eq!(err, IsogenyError::UnsupportedLevel(2));
}

#[test]
fn zero_point_normalizes_to_one() {
    let (f, null, _) = example();
    let zero = null.lift(&f).with_exps(Exponents::unit(param::LAMBDA1));
    assert_eq!(normalize_kernel_point(&null, &f, 5, &zero).unwrap(), f.one());
}

#[test]
fn level2_codomains_match_velu() {
    use crate::instances::level2_instance;
    use crate::velu::{kernel_x_poly, theta_null_to_curve, velu_isogeny};
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    for ell in [5, 9, 13, 17, 25, 29, 37] {
        let inst = level2_instance(&mut rng, ell, 1000, 5000);
        let f = inst.field;
        let dec = decompose(ell, 2).unwrap();
        let b = codomain_null(&inst.null, &inst.kernel, &dec).unwrap();
        let psi = kernel_x_poly(&f, inst.null.coords(), inst.kernel.q(), &inst.kernel.coords()[1]).unwrap();
        let expected = velu_isogeny(&inst.curve, &psi).unwrap().j_invariant();
        assert_eq!(
            theta_null_to_curve(&f, &b).unwrap().j_invariant(),
            expected,
            "ell = {ell}, r = {}",
            dec.r
        );
    }
}

mod level4 {
    use super::*;
    use crate::instances::{level4_instance, Level4Curve, Level4Instance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn instance(seed: u64, ell: u64, conv: Convention) -> (ChaCha8Rng, Level4Instance) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = level4_instance(&mut rng, ell, 200, 2000, conv);
        (rng, inst)
    }

    fn codomain(inst: &Level4Instance, r: usize) -> Vec<FieldElement> {
        let dec = pipeline_decomposition(inst.ell, 4, Some(r)).unwrap();
        codomain_null(&inst.curve.null, &inst.kernel, &dec).unwrap()
    }

    #[test]
    fn codomain_independent_of_decomposition() {
        for (ell, rs) in [(5, [2, 4]), (9, [1, 4])] {
            let (_, inst) = instance(ell, ell, Convention::Full);
            assert_eq!(codomain(&inst, rs[0]), codomain(&inst, rs[1]), "ell = {ell}");
        }
    }

    #[test]
    fn conventions_agree() {
        for (seed, ell, r) in [(1, 5, 2), (2, 5, 4), (3, 9, 1), (4, 3, 4)] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let full = level4_instance(&mut rng, ell, 200, 2000, Convention::Full);
            let punctured = full
                .curve
                .kernel(&mut rng, ell, &full.generator, Convention::Punctured)
                .unwrap();
            let dec = pipeline_decomposition(ell, 4, Some(r)).unwrap();
            let null = &full.curve.null;
            let a = codomain_null(null, &full.kernel, &dec).unwrap();
            assert_eq!(
                a,
                codomain_null(null, &punctured, &dec).unwrap(),
                "ell = {ell}, r = {r}"
            );
            let x = full.curve.random_point(&mut rng);
            assert_eq!(
                image_point(null, &full.kernel, &dec, &x).unwrap(),
                image_point(null, &punctured, &dec, &x).unwrap()
            );
        }
    }

    #[test]
    fn three_way_matches_direct() {
        let (mut rng, inst) = instance(8, 5, Convention::Punctured);
        let null = &inst.curve.null;
        let x = inst.curve.random_point(&mut rng);
        let opts = |three_way| IsogenyOptions {
            force_r: Some(4),
            three_way,
        };
        let a = compute_isogeny(null, &inst.kernel, std::slice::from_ref(&x), &opts(false)).unwrap();
        let b = compute_isogeny(null, &inst.kernel, &[x], &opts(true)).unwrap();
        assert_eq!(a.codomain_null, b.codomain_null);
        assert_eq!(a.images, b.images);
    }

    /// Sums the assembled products over every tuple of geometric kernel
    /// points, each normalised on its own.
    fn literal_sum(setup: &Setup, roots: &[FieldElement]) -> Vec<FieldElement> {
        let f = *setup.field();
        let leg = |i: usize, u: FieldElement| LegInput::<PrimeField> {
            point: AffineThetaPoint::new(point_at(setup.kd, &f, u), Exponents::unit(LAMBDA[i])),
            lambda: None,
            shifted: None,
        };
        let tuples: Vec<Vec<FieldElement>> = match setup.dec.t {
            1 => roots.iter().map(|&u| vec![u]).collect(),
            _ => roots
                .iter()
                .flat_map(|&u| roots.iter().map(move |&v| vec![u, v]))
                .collect(),
        };
        let mut total = vec![f.zero(); setup.null.size()];
        for tuple in tuples {
            let legs: Vec<_> = tuple.iter().enumerate().map(|(i, &u)| Some(leg(i, u))).collect();
            let asm = setup.assemble(&f, &legs).unwrap_or_else(|e| panic!("{e:?}"));
            for (k, t) in total.iter_mut().enumerate() {
                *t = f.add(*t, setup.value(&f, &asm, k));
            }
        }
        let n_inv = f.inv(f.elem(setup.dec.cardinal(1))).unwrap();
        total.into_iter().map(|x| f.mul(x, n_inv)).collect()
    }

    #[test]
    fn traces_match_pointwise_sums() {
        for (seed, ell, r) in [(31, 3, 4), (32, 5, 2), (33, 5, 4)] {
            let (mut rng, inst) = instance(seed, ell, Convention::Full);
            let null = &inst.curve.null;
            let roots = inst.kernel.q().roots(&inst.curve.field, &mut rng);
            assert_eq!(roots.len(), ell as usize);
            let dec = pipeline_decomposition(ell, 4, Some(r)).unwrap();
            let x = inst.curve.random_point(&mut rng);
            for point in [None, Some(x)] {
                let setup = setup(null, &inst.kernel, &dec, point.clone(), false).unwrap();
                let (traced, _) = setup.evaluate().unwrap();
                assert_eq!(
                    traced,
                    literal_sum(&setup, &roots),
                    "ell = {ell}, r = {r}, image = {}",
                    point.is_some()
                );
            }
        }
    }

    #[test]
    fn normalized_sum_round_trips() {
        let (mut rng, inst) = instance(41, 5, Convention::Full);
        let f = inst.curve.field;
        let null = &inst.curve.null;
        let p = AffineThetaPoint::constant(&f, &inst.curve.random_point(&mut rng));
        let t = AffineThetaPoint::new(inst.generator.clone(), Exponents::unit(param::LAMBDA1));
        let mut rel = Relations::<PrimeField>::default();
        rel.set(param::LAMBDA1, normalize_kernel_point(null, &f, 5, &t).unwrap());
        let eta = null
            .normal_add(&f, &p, &t)
            .unwrap()
            .with_exps(Exponents::unit(param::MU1));
        let mu = normalize_sum(null, &f, 5, &eta, param::MU1, &t, &p, &rel).unwrap();
        rel.set(param::MU1, mu);
        let back = null.ladder(&f, 5, &eta, &t, &p).unwrap();
        let subst = rel.substitute(&f, &back.exps, 5).unwrap();
        assert_eq!(back.scale(&f, &subst).coords, p.coords);

        // With P = 0 the sum is the kernel point itself.
        let zero = null.lift(&f);
        let eta = t.clone().with_exps(Exponents::unit(param::MU1));
        let mu = normalize_sum(null, &f, 5, &eta, param::MU1, &t, &zero, &rel).unwrap();
        assert_eq!(Some(&mu), rel.get(param::LAMBDA1));
    }

    #[test]
    fn images_respect_group_law() {
        let (mut rng, inst) = instance(21, 5, Convention::Full);
        let curve = &inst.curve;
        let f = curve.field;
        for r in [2, 4] {
            let dec = pipeline_decomposition(5, 4, Some(r)).unwrap();
            let b = codomain_null(&curve.null, &inst.kernel, &dec).unwrap();
            let bnull = ThetaNullPoint::new(f, 1, 4, b.clone()).unwrap();
            let bcurve = Level4Curve::from_null(bnull).unwrap();
            let img = |x: &[FieldElement]| image_point(&curve.null, &inst.kernel, &dec, x).unwrap();
            assert_eq!(img(&inst.generator), b, "kernel maps to zero, r = {r}");
            let x = curve.random_point(&mut rng);
            let y = curve.random_point(&mut rng);
            let (fx, fy) = (img(&x), img(&y));
            assert!(bcurve.contains(&fx));
            assert_eq!(img(&curve.add(&x, &y)), bcurve.add(&fx, &fy), "r = {r}");
            assert_eq!(
                img(&curve.add(&x, &inst.generator)),
                fx,
                "translation by the kernel, r = {r}"
            );
        }
    }
}

#[test]
fn substitution_exponents_stay_pure() {
    let (_, null, kd) = example();
    codomain_null(&null, &kd, &decompose(5, 2).unwrap()).unwrap();
    let (checks, violations) = purity_counters();
    assert!(checks > 0);
    assert_eq!(violations, 0);
}
