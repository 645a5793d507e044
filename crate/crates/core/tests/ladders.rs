//! Ladder and theorem assembly on small systems.

use num_rational::BigRational;
use num_traits::{One, Zero};
use tridiv::builder::ladder::{tangent_ball, BallLadder, RhombusLadder};
use tridiv::builder::theorem::{assemble_theorem, TheoremConfig};
use tridiv::builder::tsystem::TSystem;
use tridiv::builder::{ConstructedSystem, SectorFamily, SystemParams};
use tridiv::regions::{rat, rat_int, LadderKind};
use tridiv::tree::{find_rearrangement, SearchConfig};

fn system(family: SectorFamily) -> ConstructedSystem {
    let sigma = find_rearrangement(
        2,
        SearchConfig {
            trials: 10,
            side: 16,
            seed: 3,
        },
    )
    .unwrap();
    ConstructedSystem::build(SystemParams::desk(2), family, sigma).unwrap()
}

#[test]
fn t_polynomials_stay_in_their_sectors() {
    let sys = system(SectorFamily::Rhombus { delta: rat(1, 10) });
    let t = TSystem::build(&sys, 4.0).unwrap();
    assert!(t.term_count() > 0);
    assert_eq!(t.placement_exceptions(&sys), 0);
    assert_eq!(t.sum().len(), t.term_count());
}

#[test]
fn rhombus_ladder_certifies_at_m2() {
    let sys = system(SectorFamily::Rhombus { delta: rat(1, 10) });
    let t = TSystem::build(&sys, 4.0).unwrap();
    let ladder = RhombusLadder::build(&sys, &t, 1, 0).unwrap();
    let c = ladder.certify();
    assert!(c.passed(), "{c:?}");
    assert!(c.rho_max < rat(11, 10));
    assert_eq!(ladder.regions.len(), sys.nu());
}

#[test]
fn ball_ladder_certifies_at_m2() {
    let sys = system(SectorFamily::Ball { eps: 0.36 });
    let t = TSystem::build(&sys, 4.0).unwrap();
    let ladder = BallLadder::build(&sys, &t, 1, 1, 126).unwrap();
    let c = ladder.certify(0.1, &t).unwrap();
    assert!(c.passed(), "{c:?}");
    assert!(c.tau_max < 0.1);
}

#[test]
fn tangent_ball_passes_through_its_anchor() {
    let b = tangent_ball(1000, &rat(1, 3)).unwrap();
    // open ball with (R, 0) on the boundary
    assert!(!b.contains_point(&rat_int(1000), &BigRational::zero()));
    assert!(b.contains_point(&rat_int(999), &BigRational::zero()));
    // tangent direction (−u, 1) leaves the ball only to second order
    assert!(!b.contains_point(&rat_int(999), &rat_int(3)));
    assert!(b.tau_sq() < BigRational::one());
}

#[test]
fn one_block_theorem_at_m2() {
    let mut cfg = TheoremConfig::desk(LadderKind::Rhombus, 1, 2);
    cfg.samples = 20_000;
    cfg.weak_samples = 10_000;
    cfg.cross_check_points = 16;
    let run = assemble_theorem(&cfg).unwrap();
    assert!(run.nesting_ok);
    assert_eq!(run.excluded_terms, 0);
    assert_eq!(run.blocks.len(), 1);
    assert!(run.coeff_sum <= run.sup_cap);
    assert!(run.cross_check_dev < 1e-9);
    assert!(run.passed());
}
