//! Builder outputs against independently computed values.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use tridiv::builder::ladder::RhombusLadder;
use tridiv::builder::manifest::Manifest;
use tridiv::builder::martingale::{interval_integral, martingale_value};
use tridiv::builder::schedule::FreqSchedule;
use tridiv::builder::sets::{SetRule, TreeSets};
use tridiv::builder::smoothing::smooth_square_union;
use tridiv::builder::tsystem::TSystem;
use tridiv::builder::{ConstructedSystem, SectorFamily, SystemParams};
use tridiv::exact_eval::{Freq, RationalPoint};
use tridiv::mixing::{dilate, measure, mixing_curve, MeasurableSetHandle, TORUS};
use tridiv::regions::rat;
use tridiv::tree::{chain, find_rearrangement, parent, sign, SearchConfig};

/// m = 3 schedule whose squares all live on `Q_64`.
fn q64() -> FreqSchedule {
    let f = |p, q| Freq::new(p, q).unwrap();
    FreqSchedule::from_freqs(
        3,
        vec![
            f(1, 1),
            f(8, 1),
            f(-8, 3),
            f(32, 1),
            f(32, -3),
            f(-32, 5),
            f(64, 1),
        ],
        64,
    )
    .unwrap()
}

/// Whether `s·cos(2πt/p) > 0` for every `t ∈ [lo, hi]`.
fn signed_cos_positive_on(s: i32, lo: i128, hi: i128, p: i128) -> bool {
    let z0 = lo.div_euclid(p);
    (z0 - 1..=z0 + 1).any(|z| {
        let (a, b) = (4 * (lo - z * p), 4 * (hi - z * p));
        if s > 0 {
            -p < a && b < p
        } else {
            p < a && b < 3 * p
        }
    })
}

/// `pt ∈ F_n` straight from the definition: each square of `Q_{p_k}` on
/// the chain down to `n` has `s_k·cos φ_{k̄} > 0` on its closure.
fn in_set(sched: &FreqSchedule, n: usize, pt: RationalPoint) -> bool {
    chain(n).into_iter().filter(|&k| k >= 3).all(|k| {
        let p = sched.abs_p(k) as i128;
        let c = pt.n as i128 / p;
        let (i, j) = (pt.ax as i128 / c, pt.ay as i128 / c);
        let f = sched.freq(parent(k).unwrap());
        let corners =
            [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)].map(|(a, b)| f.p * a + f.q * b);
        let lo = *corners.iter().min().unwrap();
        let hi = *corners.iter().max().unwrap();
        signed_cos_positive_on(sign(k), lo, hi, p)
    })
}

#[test]
fn q64_membership_matches_definition_everywhere() {
    let sched = Arc::new(q64());
    let sets = TreeSets::new(sched.clone(), SetRule::B).unwrap();
    let n = 128;
    let mut members = [0usize; 9];
    for ax in 0..n {
        for ay in 0..n {
            let pt = RationalPoint::new(ax, ay, n).unwrap();
            for node in 2..=8 {
                let want = in_set(&sched, node, pt);
                assert_eq!(
                    sets.membership(node, pt).unwrap(),
                    want,
                    "node {node} at ({ax}, {ay})/{n}"
                );
                members[node] += usize::from(want);
                let v = sets.eval(node, pt).unwrap();
                let f = sched.freq(node);
                let phi = TAU * (f.p * ax as i128 + f.q * ay as i128) as f64 / n as f64;
                let direct = if want {
                    Complex64::from_polar(1.0 / 3f64.sqrt(), phi)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                assert!((v - direct).norm() < 1e-12);
            }
        }
    }
    // children split their parent and every level is populated
    assert_eq!(members[2], (n * n) as usize);
    for node in 3..=8 {
        assert!(members[node] > 0, "node {node} is empty");
    }
    assert!(members[3] + members[4] <= members[2]);
}

#[test]
fn martingale_differences_average_to_zero() {
    let sets = TreeSets::new(Arc::new(q64()), SetRule::B).unwrap();
    for ax in (0..128).step_by(3) {
        for ay in (0..128).step_by(5) {
            let pt = RationalPoint::new(ax, ay, 128).unwrap();
            for n in 2..=8 {
                assert!(
                    interval_integral(&sets, n, pt).unwrap().norm() < 1e-12,
                    "n = {n}"
                );
            }
        }
    }
}

#[test]
fn martingale_value_is_the_interval_average() {
    let sched = q64();
    let sets = TreeSets::new(Arc::new(sched.clone()), SetRule::B).unwrap();
    // midpoint rule over each x-interval of length 2π/p_{n+1}
    let fine = 2048u128;
    let den = 128 * fine;
    for (ax, ay) in [(3u128, 7u128), (40, 90), (101, 17), (127, 127)] {
        for n in 2..=8 {
            let next = sched.abs_p(n + 1);
            let cell = den / next;
            let start = (ax * fine) / cell * cell;
            let steps = 512u128;
            let mut acc = Complex64::new(0.0, 0.0);
            for t in 0..steps {
                let x = start + (2 * t + 1) * cell / (2 * steps);
                acc += sets
                    .eval(n, RationalPoint::new(x, ay * fine, den).unwrap())
                    .unwrap();
            }
            let want = acc / steps as f64;
            let got = martingale_value(
                &sets,
                n,
                RationalPoint::new(ax * fine, ay * fine, den).unwrap(),
            )
            .unwrap();
            assert!((got - want).norm() < 1e-4, "n = {n}: {got} vs {want}");
        }
    }
}

/// `|{x ∈ [0, π) : nx mod 2π ∈ [0, π)}|`.
fn half_line_overlap(n: u128) -> f64 {
    let h = PI / n as f64;
    (0..n)
        .map(|k| ((2 * k + 1) as f64 * h).min(PI) - (2 * k) as f64 * h)
        .filter(|l| *l > 0.0)
        .sum()
}

#[test]
fn mixing_matches_exact_overlap() {
    let half =
        || MeasurableSetHandle::rectangle(rat(0, 1), rat(1, 2), rat(0, 1), rat(1, 2)).unwrap();
    let a = half();
    let ns = [1u128, 2, 3, 4, 5, 7, 10, 33];
    let curve = mixing_curve(&a, &half(), &ns, 200_000, 11).unwrap();
    for (n, est) in curve {
        let exact = half_line_overlap(n).powi(2);
        assert!(
            (est.value - exact).abs() <= 4.0 * est.stderr,
            "n = {n}: {} vs {exact}",
            est.value
        );
        let single = measure(
            &a.intersect(&dilate(&half(), n).unwrap()).unwrap(),
            100_000,
            5,
        )
        .unwrap();
        assert!((single.value - exact).abs() <= 4.0 * single.stderr);
    }
    // odd n: the limit π²/4 = |A||B|/4π² is not reached exactly
    assert!((half_line_overlap(3).powi(2) - PI * PI / 4.0).abs() > 0.1);
    assert!((half_line_overlap(4).powi(2) - PI * PI / 4.0).abs() < 1e-12);
    assert!(
        (measure(&MeasurableSetHandle::torus(), 10_000, 1)
            .unwrap()
            .value
            - TORUS)
            .abs()
            < 1e-9
    );
}

#[test]
fn smoothed_square_union_at_resolution_8() {
    let squares = [(1u128, 2u128), (5, 6)];
    let (margin, tol) = (0.2, 0.05);
    let (poly, degree) = smooth_square_union(&squares, 8, margin, 2.0, tol, 64, 600).unwrap();
    assert!(degree > 0);
    // the mean is that of the padded squares, the kernel having mean one
    let w = TAU / 8.0 + margin;
    let mean = 2.0 * 2.0 * (w / TAU).powi(2);
    assert!((poly.coeff(Freq::new(0, 0).unwrap()).re - mean).abs() < 1e-12);
    // off the checking grid: square centres and far-away cells
    let at = |x: u128, y: u128| poly.eval(RationalPoint::new(x, y, 160).unwrap());
    for (i, j) in squares {
        let v = at(20 * i + 10, 20 * j + 10);
        assert!((v.re - 2.0).abs() <= 2.0 * tol && v.im.abs() < 1e-9, "{v}");
    }
    for (i, j) in [(3u128, 4u128), (7, 0), (0, 5)] {
        let v = at(20 * i + 10, 20 * j + 10);
        assert!(v.re.abs() <= 2.0 * tol, "{v}");
    }
}

fn small_system() -> ConstructedSystem {
    let sigma = find_rearrangement(
        2,
        SearchConfig {
            trials: 10,
            side: 16,
            seed: 3,
        },
    )
    .unwrap();
    ConstructedSystem::build(
        SystemParams::desk(2),
        SectorFamily::Rhombus { delta: rat(1, 10) },
        sigma,
    )
    .unwrap()
}

#[test]
fn manifest_round_trips_and_reverifies() {
    let sys = small_system();
    let tsys = TSystem::build(&sys, 4.0).unwrap();
    let ladder = RhombusLadder::build(&sys, &tsys, 1, 0).unwrap();
    let man = Manifest::from_system(&sys, Some(4.0), &ladder.as_regions());
    man.verify().unwrap();
    let back = Manifest::parse(&man.to_text()).unwrap();
    assert_eq!(back, man);
    assert_eq!(back.to_text(), man.to_text());
    assert_eq!(back.rhombus_delta(), Some(rat(1, 10)));
    back.verify().unwrap();

    let mut bad = man.clone();
    let last = bad.freqs.len() - 1;
    bad.freqs[last] = Freq::new(bad.freqs[last].p + 1, bad.freqs[last].q).unwrap();
    assert!(bad.verify().is_err());
    let mut bad = man.clone();
    bad.sigma[0] = bad.sigma[1];
    assert!(bad.verify().is_err());
    assert!(Manifest::parse("m = 2\nwat = 1\n").is_err());
}
