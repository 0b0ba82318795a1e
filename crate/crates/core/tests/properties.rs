use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sl2kit::analyze::{analysis_field, random_conjugator, signature, GenImages};
use sl2kit::catalog::{build_borel_pair, build_sigma, instances, Family, Label, SHARP_LABELS};
use sl2kit::field::FieldCtx;
use sl2kit::linalg::FqMat;
use sl2kit::verify::{borel_star, psi_eval};

fn field() -> impl Strategy<Value = FieldCtx> {
    prop_oneof![Just((2u32, 1u32)), Just((2, 3)), Just((3, 2)), Just((5, 1)), Just((5, 2)), Just((7, 1)), Just((31, 1)),]
        .prop_map(|(p, m)| FieldCtx::new(p, m).unwrap())
}

fn mat(ctx: &FieldCtx, n: usize, seed: u64) -> FqMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FqMat::from_fn(ctx, n, n, |_, _| ctx.random(&mut rng))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn field_axioms(ctx in field(), x in any::<u32>(), y in any::<u32>(), z in any::<u32>()) {
        let q = ctx.q();
        let (x, y, z) = (ctx.from_code(x % q).unwrap(), ctx.from_code(y % q).unwrap(), ctx.from_code(z % q).unwrap());
        prop_assert_eq!(ctx.mul(x, ctx.add(y, z)), ctx.add(ctx.mul(x, y), ctx.mul(x, z)));
        prop_assert_eq!(ctx.mul(ctx.mul(x, y), z), ctx.mul(x, ctx.mul(y, z)));
        prop_assert_eq!(ctx.sub(ctx.add(x, y), y), x);
        if !x.is_zero() {
            prop_assert_eq!(ctx.mul(x, ctx.inv(x).unwrap()), ctx.one());
        }
        prop_assert_eq!(ctx.pow_u(x, q as u64), x);
    }

    #[test]
    fn frobenius_is_a_ring_map(ctx in field(), seed in any::<u64>(), e in 0u32..4) {
        let (a, b) = (mat(&ctx, 3, seed), mat(&ctx, 3, seed ^ 1));
        prop_assert_eq!(a.mul(&b).unwrap().frobenius(e), a.frobenius(e).mul(&b.frobenius(e)).unwrap());
        prop_assert_eq!(a.add(&b).unwrap().frobenius(e), a.frobenius(e).add(&b.frobenius(e)).unwrap());
    }

    #[test]
    fn rank_plus_nullity(ctx in field(), seed in any::<u64>(), n in 1usize..6) {
        let a = mat(&ctx, n, seed);
        prop_assert_eq!(a.rank() + a.nullity(), n);
        for v in a.nullspace() {
            prop_assert!(a.apply(&v).iter().all(|x| x.is_zero()));
        }
    }

    #[test]
    fn inverse_and_conjugation(ctx in field(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = FqMat::random_invertible(&ctx, 4, &mut rng);
        let r = FqMat::random_invertible(&ctx, 4, &mut rng);
        let a = mat(&ctx, 4, seed ^ 7);
        prop_assert!(p.mul(&p.inverse().unwrap()).unwrap().is_identity());
        // Inn_P Inn_R = Inn_{RP}
        prop_assert_eq!(a.inn(&r).unwrap().inn(&p).unwrap(), a.inn(&r.mul(&p).unwrap()).unwrap());
        prop_assert_eq!(a.inn(&p).unwrap().det().unwrap(), a.det().unwrap());
    }

    #[test]
    fn tau_is_an_anti_involution(ctx in field(), seed in any::<u64>()) {
        let (a, b) = (mat(&ctx, 4, seed), mat(&ctx, 4, seed ^ 3));
        prop_assert_eq!(a.tau().unwrap().tau().unwrap(), a.clone());
        prop_assert_eq!(a.mul(&b).unwrap().tau().unwrap(), b.tau().unwrap().mul(&a.tau().unwrap()).unwrap());
    }

    #[test]
    fn mixed_product(ctx in field(), seed in any::<u64>()) {
        let (a, b, c, d) = (mat(&ctx, 2, seed), mat(&ctx, 2, seed ^ 1), mat(&ctx, 2, seed ^ 2), mat(&ctx, 2, seed ^ 3));
        prop_assert_eq!(
            a.kron(&b).unwrap().mul(&c.kron(&d).unwrap()).unwrap(),
            a.mul(&c).unwrap().kron(&b.mul(&d).unwrap()).unwrap()
        );
    }

    #[test]
    fn sl2_group_law(ctx in field(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = (ctx.random_sl2(&mut rng), ctx.random_sl2(&mut rng));
        prop_assert_eq!(ctx.sl2_det(&x), ctx.one());
        prop_assert_eq!(ctx.sl2_det(&ctx.sl2_mul(&x, &y)), ctx.one());
        let id = ctx.sl2_mul(&x, &ctx.sl2_inv(&x));
        prop_assert_eq!(id, [ctx.one(), ctx.zero(), ctx.zero(), ctx.one()]);
    }
}

fn borel_specs() -> Vec<sl2kit::catalog::FormSpec> {
    [2u32, 3, 5, 7].iter().flat_map(|&p| Label::ALL.iter().flat_map(move |&l| instances(Family::Borel(l), p, 1))).collect()
}

fn sharp_specs() -> Vec<sl2kit::catalog::FormSpec> {
    [2u32, 3, 5].iter().flat_map(|&p| SHARP_LABELS.iter().flat_map(move |&l| instances(Family::Sharp(l), p, 1))).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn borel_star_is_an_involution(idx in any::<prop::sample::Index>(), seed in any::<u64>()) {
        let specs = borel_specs();
        let spec = &specs[idx.index(specs.len())];
        let d = build_borel_pair(spec).unwrap();
        let ctx = FieldCtx::new(spec.p, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (t, u) = (ctx.random(&mut rng), ctx.random_nonzero(&mut rng));
        let twice = borel_star(&ctx, borel_star(&ctx, |t, u| psi_eval(&d, &ctx, t, u)));
        prop_assert_eq!(twice(t, u), psi_eval(&d, &ctx, t, u));
    }

    #[test]
    fn borel_entries_have_the_forced_degree(idx in any::<prop::sample::Index>()) {
        let specs = borel_specs();
        let spec = &specs[idx.index(specs.len())];
        let d = build_borel_pair(spec).unwrap();
        for i in 0..d.n() {
            for j in 0..d.n() {
                if i != j {
                    for (e, _) in d.phi_plus.get(i, j).terms() {
                        prop_assert_eq!(2 * e[0] as i64, d.weights[i] - d.weights[j]);
                    }
                }
            }
        }
    }

    #[test]
    fn signature_is_conjugation_invariant(idx in any::<prop::sample::Index>(), seed in any::<u64>()) {
        let specs = sharp_specs();
        let spec = &specs[idx.index(specs.len())];
        let ctx = analysis_field(spec.p).unwrap();
        let g = GenImages::of_closed(&build_sigma(spec).unwrap(), &ctx).unwrap();
        let h = g.conjugate(&random_conjugator(&ctx, 4, seed)).unwrap();
        prop_assert_eq!(signature(&g).unwrap(), signature(&h).unwrap());
    }

    #[test]
    fn closed_forms_twist_multiplicatively(idx in any::<prop::sample::Index>(), seed in any::<u64>(), e in 0u32..3) {
        let specs = sharp_specs();
        let spec = &specs[idx.index(specs.len())];
        let rep = build_sigma(spec).unwrap().frobenius(e).unwrap();
        let ctx = FieldCtx::new(spec.p, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = (ctx.random_sl2(&mut rng), ctx.random_sl2(&mut rng));
        prop_assert_eq!(rep.eval(&ctx, &ctx.sl2_mul(&x, &y)), rep.eval(&ctx, &x).mul(&rep.eval(&ctx, &y)).unwrap());
        prop_assert_eq!(&rep.tau_conjugate().unwrap().tau_conjugate().unwrap(), &rep);
    }
}
