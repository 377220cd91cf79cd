//! Randomized algebraic laws.

use dieudonne::hodge::{self, EndFrobenius, StableMode};
use dieudonne::instances;
use dieudonne::io;
use dieudonne::isocrystal::{end_decompose, expand_slopes, slope_split, FIsocrystal, Q};
use dieudonne::lattice::Lattice;
use dieudonne::matrix::{self, Mat};
use dieudonne::series::TruncatedSeries;
use dieudonne::WittContext;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn contexts() -> impl Strategy<Value = WittContext> {
    prop_oneof![Just((2u64, 3usize, 16u32)), Just((3, 2, 12)), Just((5, 1, 10)), Just((7, 2, 8))]
        .prop_map(|(p, n, t)| WittContext::new(p, n, t).unwrap())
}

fn ctx_and_rng() -> impl Strategy<Value = (WittContext, ChaCha8Rng)> {
    (contexts(), any::<u64>()).prop_map(|(c, s)| (c, ChaCha8Rng::seed_from_u64(s)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ring_laws((ctx, mut rng) in ctx_and_rng()) {
        let (a, b, c) = (ctx.random(&mut rng), ctx.random(&mut rng), ctx.random(&mut rng));
        prop_assert_eq!(ctx.mul(ctx.mul(a, b), c), ctx.mul(a, ctx.mul(b, c)));
        prop_assert_eq!(ctx.mul(a, ctx.add(b, c)), ctx.add(ctx.mul(a, b), ctx.mul(a, c)));
        prop_assert_eq!(ctx.mul(a, b), ctx.mul(b, a));
        prop_assert_eq!(ctx.add(a, ctx.neg(a)), ctx.zero());
        let u = ctx.random_unit(&mut rng);
        prop_assert_eq!(ctx.mul(u, ctx.inv(u).unwrap()), ctx.one());
    }

    #[test]
    fn frobenius_laws((ctx, mut rng) in ctx_and_rng()) {
        let (a, b) = (ctx.random(&mut rng), ctx.random(&mut rng));
        let n = ctx.degree() as i64;
        prop_assert_eq!(ctx.frobenius(ctx.mul(a, b), 1), ctx.mul(ctx.frobenius(a, 1), ctx.frobenius(b, 1)));
        prop_assert_eq!(ctx.frobenius(ctx.add(a, b), 1), ctx.add(ctx.frobenius(a, 1), ctx.frobenius(b, 1)));
        prop_assert_eq!(ctx.frobenius(a, n), a);
        prop_assert_eq!(ctx.frobenius(ctx.frobenius(a, 2), -2), a);
        // σ(a) ≡ a^p mod p
        let ap = ctx.pow(a, ctx.p() as u128);
        prop_assert_eq!(ctx.residue(ctx.frobenius(a, 1)), ctx.residue(ap));
    }

    #[test]
    fn teichmuller_laws((ctx, mut rng) in ctx_and_rng()) {
        let (x, y) = (ctx.random_residue(&mut rng), ctx.random_residue(&mut rng));
        let (tx, ty) = (ctx.teichmuller(x), ctx.teichmuller(y));
        prop_assert_eq!(ctx.teichmuller(ctx.residue(ctx.mul(x, y))), ctx.mul(tx, ty));
        prop_assert_eq!(ctx.residue(tx), ctx.residue(x));
        prop_assert_eq!(ctx.pow(tx, ctx.residue_size()), tx);
    }

    #[test]
    fn valuation_of_products((ctx, mut rng) in ctx_and_rng(), i in 0u32..3, j in 0u32..3) {
        let a = ctx.mul_p_pow(ctx.random_unit(&mut rng), i);
        let b = ctx.mul_p_pow(ctx.random_unit(&mut rng), j);
        prop_assert_eq!(ctx.valuation(ctx.mul(a, b)), i + j);
        prop_assert_eq!(ctx.valuation(ctx.div_p_pow(a, i)), 0);
        prop_assert_eq!(ctx.mul_p_pow(ctx.div_p_pow(a, i), i), a);
    }

    #[test]
    fn modular_law((ctx, mut rng) in ctx_and_rng(), k in 1usize..4, s in 0u32..3) {
        let lat = |rng: &mut ChaCha8Rng, cols: usize, sh: u32| {
            Lattice::from_basis(&ctx, Mat::random(&ctx, 4, cols, rng).mul_p_pow(&ctx, sh)).unwrap()
        };
        let c = lat(&mut rng, 4, s);
        let a = lat(&mut rng, k, 0).intersect(&ctx, &c).unwrap();
        let b = lat(&mut rng, 3, 1);
        prop_assert!(a.is_sublattice_of(&ctx, &c).unwrap());
        let lhs = a.sum(&ctx, &b.intersect(&ctx, &c).unwrap()).unwrap();
        let rhs = a.sum(&ctx, &b).unwrap().intersect(&ctx, &c).unwrap();
        let t = ctx.precision() - ctx.loss_budget().min(lhs.loss(&ctx).max(rhs.loss(&ctx)));
        prop_assert!(lhs.equals_mod(&ctx, &rhs, t));
    }

    #[test]
    fn sum_and_intersection_bounds((ctx, mut rng) in ctx_and_rng()) {
        let a = Lattice::from_basis(&ctx, Mat::random(&ctx, 3, 2, &mut rng)).unwrap();
        let b = Lattice::from_basis(&ctx, Mat::random(&ctx, 3, 3, &mut rng)).unwrap();
        let s = a.sum(&ctx, &b).unwrap();
        let i = a.intersect(&ctx, &b).unwrap();
        prop_assert!(a.is_sublattice_of(&ctx, &s).unwrap() && b.is_sublattice_of(&ctx, &s).unwrap());
        prop_assert!(i.is_sublattice_of(&ctx, &a).unwrap() && i.is_sublattice_of(&ctx, &b).unwrap());
        let full = Lattice::full(&ctx, 3);
        let sat = a.saturate(&ctx, &full).unwrap();
        prop_assert!(sat.saturate(&ctx, &full).unwrap().equals(&ctx, &sat));
        prop_assert!(a.is_sublattice_of(&ctx, &sat).unwrap());
    }

    #[test]
    fn unimodular_inverse((ctx, mut rng) in ctx_and_rng(), n in 1usize..6) {
        let u = Mat::random_unimodular(&ctx, n, &mut rng);
        let v = matrix::inverse_unimodular(&ctx, &u).unwrap();
        prop_assert!(u.mul(&ctx, &v).eq_mod(&ctx, &Mat::identity(&ctx, n), ctx.precision()));
    }

    #[test]
    fn series_ring_laws((ctx, mut rng) in ctx_and_rng(), d in 2u32..6) {
        let rand_series = |rng: &mut ChaCha8Rng| {
            let mut s = TruncatedSeries::zero(2, d);
            for a in 0..=d {
                for b in 0..=d - a {
                    s = s.add(&ctx, &TruncatedSeries::monomial(2, d, vec![a, b], ctx.random(rng)));
                }
            }
            s
        };
        let (f, g, h) = (rand_series(&mut rng), rand_series(&mut rng), rand_series(&mut rng));
        prop_assert_eq!(f.mul(&ctx, &g).mul(&ctx, &h), f.mul(&ctx, &g.mul(&ctx, &h)));
        prop_assert_eq!(f.mul(&ctx, &g.add(&ctx, &h)), f.mul(&ctx, &g).add(&ctx, &f.mul(&ctx, &h)));
        // Leibniz rule, below the degree where truncation of f·g interferes
        let lhs = f.mul(&ctx, &g).derivative(&ctx, 0);
        let rhs = f.derivative(&ctx, 0).mul(&ctx, &g).add(&ctx, &f.mul(&ctx, &g.derivative(&ctx, 0)));
        for a in 0..d {
            for b in 0..d - a {
                prop_assert_eq!(lhs.coeff(&[a, b]), rhs.coeff(&[a, b]));
            }
        }
    }

    #[test]
    fn spec_round_trip(seed in any::<u64>(), r in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let rows: Vec<String> = (0..r)
            .map(|_| format!("[{}]", (0..r).map(|_| rng.gen_range(-9i64..10).to_string()).collect::<Vec<_>>().join(", ")))
            .collect();
        let text = format!(
            r#"{{"name": "rt", "p": 3, "n": 1, "precision": 10, "rank": {r}, "phi": [{}]}}"#,
            rows.join(", ")
        );
        let spec = io::parse_str(&text).unwrap();
        let again = io::parse_str(&io::emit_spec(&spec)).unwrap();
        prop_assert_eq!(io::fingerprint(&spec), io::fingerprint(&again));
        prop_assert_eq!(spec, again);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn random_instances_have_requested_slopes(seed in any::<u64>(), p in prop_oneof![Just(2u64), Just(3), Just(5)]) {
        let ctx = WittContext::new(p, 1, 20).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let choices = [Q::new(0, 1), Q::new(1, 3), Q::new(1, 2), Q::new(2, 3), Q::new(1, 1)];
        let (a, slopes) = instances::random_split_instance(&ctx, &mut rng, &choices, 7);
        let x = FIsocrystal::new(&ctx, a).unwrap();
        let got = expand_slopes(&x.newton_slopes(&ctx).unwrap());
        let want: Vec<Q> = slopes.iter().flat_map(|&s| std::iter::repeat(s).take(*s.denom() as usize)).collect();
        prop_assert_eq!(got, want);
        // the largest stable sublattice is fixed by a second pass
        let fr = EndFrobenius::new(&ctx, &x).unwrap();
        let split = slope_split(&ctx, &x).unwrap();
        let dec = end_decompose(&ctx, &x, &split).unwrap();
        let o = hodge::largest_sub_dieudonne(&ctx, &fr, &dec.v_minus, StableMode::Minus).unwrap();
        let again = hodge::largest_sub_dieudonne(&ctx, &fr, &o, StableMode::Minus).unwrap();
        prop_assert!(again.equals(&ctx, &o));
    }
}
