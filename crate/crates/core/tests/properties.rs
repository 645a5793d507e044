use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use proptest::prelude::*;

use tridiv::checks::{self, Context, RunConfig};
use tridiv::exact_eval::{partial_sum, phase_residue, Freq, RationalPoint, TrigPoly};
use tridiv::mixing::{dilate, MeasurableSetHandle};
use tridiv::regions::{rat, Ball, FreqRegion, Rhombus};
use tridiv::tree::{
    chain, depth, find_rearrangement, parent, random_tree_system, verify_prefix_bound, SearchConfig,
};

fn freq() -> impl Strategy<Value = Freq> {
    (
        -(1i128 << 100)..(1i128 << 100),
        -(1i128 << 100)..(1i128 << 100),
    )
        .prop_map(|(p, q)| Freq::new(p, q).unwrap())
}

fn point() -> impl Strategy<Value = RationalPoint> {
    (1u128..(1 << 70))
        .prop_flat_map(|n| (0..n, 0..n, Just(n)))
        .prop_map(|(ax, ay, n)| RationalPoint { ax, ay, n })
}

fn small_poly() -> impl Strategy<Value = TrigPoly> {
    prop::collection::vec(
        ((-20i128..20, -20i128..20), (-1.0f64..1.0, -1.0f64..1.0)),
        0..12,
    )
    .prop_map(|terms| {
        TrigPoly::from_terms(
            terms
                .into_iter()
                .map(|((p, q), (re, im))| (Freq::new(p, q).unwrap(), Complex64::new(re, im))),
        )
    })
}

proptest! {
    #[test]
    fn phase_residue_matches_bigint(f in freq(), pt in point()) {
        let s = BigInt::from(f.p) * BigInt::from(pt.ax) + BigInt::from(f.q) * BigInt::from(pt.ay);
        let want = s.mod_floor(&BigInt::from(pt.n));
        prop_assert_eq!(BigInt::from(phase_residue(f, pt)), want);
    }

    #[test]
    fn phase_is_unchanged_by_refinement(f in freq(), pt in point(), k in 1u128..1000) {
        let fine = pt.refine(k).unwrap();
        prop_assert_eq!(phase_residue(f, fine), phase_residue(f, pt) * k);
    }

    #[test]
    fn filtering_is_linear(a in small_poly(), b in small_poly(), c in -3.0f64..3.0, ax in 0u128..97, ay in 0u128..97) {
        let region = Rhombus::new(rat(1, 7), rat(1, 11)).unwrap();
        let pt = RationalPoint::new(ax, ay, 97).unwrap();
        let combo = a.scale(Complex64::new(c, 0.0)).add(&b);
        let lhs = partial_sum(&combo, &region, pt);
        let rhs = partial_sum(&a, &region, pt) * c + partial_sum(&b, &region, pt);
        prop_assert!((lhs - rhs).norm() < 1e-9);
        let kept = combo.filter(|f| region.contains_freq(f));
        prop_assert!((kept.eval(pt) - lhs).norm() < 1e-9);
    }

    #[test]
    fn value_never_exceeds_coefficient_sum(t in small_poly(), ax in 0u128..1009, ay in 0u128..1009) {
        let v = t.eval(RationalPoint::new(ax, ay, 1009).unwrap());
        prop_assert!(v.norm() <= t.coeff_norm() + 1e-12);
    }

    #[test]
    fn rhombus_is_symmetric_and_rho_scale_free(a in 1i128..500, b in 1i128..500, d in 1i128..50, p in -400i128..400, q in -400i128..400, k in 1u128..50) {
        let r = Rhombus::new(rat(a, d), rat(b, d)).unwrap();
        let f = |p, q| Freq::new(p, q).unwrap();
        let inside = r.contains_freq(f(p, q));
        prop_assert_eq!(inside, r.contains_freq(f(-p, q)));
        prop_assert_eq!(inside, r.contains_freq(f(p, -q)));
        let swapped = Rhombus::new(rat(b, d), rat(a, d)).unwrap();
        prop_assert_eq!(inside, swapped.contains_freq(f(q, p)));
        prop_assert_eq!(r.rho(), swapped.rho());
        prop_assert_eq!(r.scale(k).rho(), r.rho());
        prop_assert!(r.is_subset_of(&r.scale(k)));
    }

    #[test]
    fn tau_is_scale_free(x in -300i128..300, y in -300i128..300, r in 1i128..300, k in 1u128..1000) {
        let ball = Ball::new(rat(x, 1), rat(y, 1), rat(r * r, 1)).unwrap();
        prop_assert_eq!(ball.scale(k).tau_sq(), ball.tau_sq());
        prop_assert!(ball.scale(k).is_subset_of(&ball.scale(k + 1)) || ball.tau() >= 1.0);
    }

    #[test]
    fn children_share_their_parent(n in 2usize..(1 << 40)) {
        prop_assert_eq!(parent(2 * n - 1).unwrap(), n);
        prop_assert_eq!(parent(2 * n).unwrap(), n);
        prop_assert_eq!(depth(2 * n), depth(n) + 1);
        let c = chain(2 * n);
        prop_assert_eq!(c[0], 2);
        prop_assert_eq!(c.len() as u32, depth(2 * n) + 1);
    }

    #[test]
    fn dilation_preserves_measure_and_membership(n in 1u128..10_000, ax in 0u128..4096, ay in 0u128..4096) {
        let e = MeasurableSetHandle::rectangle(rat(1, 8), rat(5, 8), rat(0, 1), rat(1, 4)).unwrap();
        let d = dilate(&e, n).unwrap();
        prop_assert_eq!(&d.exact_fraction, &e.exact_fraction);
        let pt = RationalPoint::new(ax, ay, 4096).unwrap();
        prop_assert_eq!(d.contains(pt), e.contains(pt.dilate(n)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn found_order_dominates_random_tree_systems(seed in any::<u64>()) {
        let sigma = find_rearrangement(2, SearchConfig { trials: 10, side: 16, seed: 1 }).unwrap();
        let f = random_tree_system(2, 32, seed).unwrap();
        prop_assert!(verify_prefix_bound(&sigma, &f).unwrap() >= -1e-12);
    }

    #[test]
    fn same_config_gives_identical_reports(seed in any::<u64>(), limit in 2usize..5000) {
        let mut cfg = RunConfig::default();
        cfg.seed = seed;
        cfg.parent_limit = limit;
        let line = || {
            let r = checks::run_check("tree-parent", &Context::new(cfg.clone())).unwrap();
            r.report.stable_line()
        };
        prop_assert_eq!(line(), line());
    }
}
