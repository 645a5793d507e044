//! Finite multi-block versions of the divergent functions: blocks of ladder
//! polynomials, dilated apart so that each block's partial-sum jumps land on
//! a large set.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use num_rational::BigRational;
use rayon::prelude::*;
use serde::Serialize;

use super::ladder::{BallLadder, RhombusLadder};
use super::martingale::{estimate_weak_constant, log_grid};
use super::tsystem::TSystem;
use super::{ConstructedSystem, SectorFamily, SystemParams};
use crate::exact_eval::{character, Freq, LadderPlan, RationalPoint, TrigPoly};
use crate::mixing::{
    block_cover_schedule, count_hits, sample_lattice, sample_points, DilationSchedule,
    MeasurableSetHandle, MeasureEstimate, ScanBudget,
};
use crate::regions::{rat_int, LadderKind, Region, RegionLadder, Rhombus};
use crate::tree::{find_rearrangement, Rearrangement, SearchConfig};
use crate::{Error, Result};

/// Which real polynomial stands in for `Q_j` in a block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Part {
    Re,
    Im,
    /// The complex `Q_j` itself (ball ladders).
    Full,
}

impl Part {
    fn apply(self, z: Complex64) -> Complex64 {
        match self {
            Part::Re => Complex64::new(z.re, 0.0),
            Part::Im => Complex64::new(z.im, 0.0),
            Part::Full => z,
        }
    }

    fn poly(self, q: &TrigPoly) -> TrigPoly {
        match self {
            Part::Re => q.real_part(),
            Part::Im => q.imag_part(),
            Part::Full => q.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TheoremConfig {
    pub kind: LadderKind,
    /// Level count of each block.
    pub block_m: Vec<u32>,
    pub delta: BigRational,
    pub eps: f64,
    /// Base square of the first rhombus block.
    pub s: u128,
    /// Inner radius of the first ball block.
    pub r: u128,
    pub c2: f64,
    pub samples: usize,
    pub weak_samples: usize,
    pub cross_check_points: usize,
    pub seed: u64,
    pub n0: u128,
    pub budget: ScanBudget,
    pub search: SearchConfig,
}

impl TheoremConfig {
    pub fn desk(kind: LadderKind, blocks: usize, m: u32) -> Self {
        TheoremConfig {
            kind,
            block_m: vec![m; blocks],
            delta: crate::regions::rat(1, 10),
            eps: 0.36,
            s: 1,
            r: 1,
            c2: 1.0 / 240.0,
            samples: 100_000,
            weak_samples: 20_000,
            cross_check_points: 64,
            seed: 1,
            n0: 1,
            budget: ScanBudget::default(),
            search: SearchConfig {
                trials: 20,
                side: 16,
                seed: 1,
            },
        }
    }

    fn family(&self) -> SectorFamily {
        match self.kind {
            LadderKind::Rhombus => SectorFamily::Rhombus {
                delta: self.delta.clone(),
            },
            LadderKind::Ball => SectorFamily::Ball { eps: self.eps },
        }
    }
}

enum BlockLadder {
    Rhombus(RhombusLadder),
    Ball(BallLadder),
}

impl BlockLadder {
    fn q_polys(&self) -> &[TrigPoly] {
        match self {
            BlockLadder::Rhombus(l) => &l.q_polys,
            BlockLadder::Ball(l) => &l.q_polys,
        }
    }

    fn shift(&self) -> u128 {
        match self {
            BlockLadder::Rhombus(l) => l.l,
            BlockLadder::Ball(l) => l.r_big,
        }
    }

    fn regions(&self) -> Vec<Region> {
        match self {
            BlockLadder::Rhombus(l) => l.as_regions(),
            BlockLadder::Ball(l) => l.as_regions(),
        }
    }

    fn certified(&self, tsys: &TSystem, tau_bound: f64) -> Result<bool> {
        Ok(match self {
            BlockLadder::Rhombus(l) => l.certify().passed(),
            BlockLadder::Ball(l) => l.certify(tau_bound, tsys)?.passed(),
        })
    }
}

/// Per-block results.
#[derive(Clone, Debug, Serialize)]
pub struct BlockReport {
    pub k: usize,
    pub m: u32,
    pub c_est: f64,
    pub gamma: f64,
    /// `γ + 2 + 0.1`.
    pub c1: f64,
    /// `Σ_n |f_n| ≤ sup_bound` everywhere, hence `|Σ_j g_j| ≤ sup_bound`.
    pub sup_bound: f64,
    /// `c2·√m/2`, the level of the block sums.
    pub threshold: f64,
    pub part: Part,
    /// Level-set measure of the chosen part and of the other candidate.
    pub level: MeasureEstimate,
    pub level_other: Option<MeasureEstimate>,
    /// Frequency shift `l` (rhombi) or `R` (balls).
    pub shift: u128,
    /// Base region half-diagonal `s` (rhombi) or inner radius (balls).
    pub base: u128,
    pub dilation: u128,
    pub ladder_ok: bool,
    /// Measure of `{max_n |S_n(f) − S_base(f)| > threshold/k²}`.
    pub jump: MeasureEstimate,
    pub terms: usize,
}

/// The assembled function and its certificates.
pub struct TheoremRun {
    pub kind: LadderKind,
    pub sigma: BTreeMap<u32, Rearrangement>,
    pub blocks: Vec<BlockReport>,
    pub f_trunc: TrigPoly,
    pub ladder: RegionLadder,
    /// Index of each block's base region in `ladder`.
    pub block_bases: Vec<usize>,
    pub nesting_ok: bool,
    pub excluded_terms: usize,
    pub sup_bound: f64,
    /// `Σ_k c1_k / k²`.
    pub sup_cap: f64,
    /// `Σ |coefficients|` of `f_trunc`, for comparison.
    pub coeff_sum: f64,
    pub schedule: DilationSchedule,
    /// Largest gap between explicit and factored block jumps.
    pub cross_check_dev: f64,
    pub cross_check_points: usize,
}

impl TheoremRun {
    pub fn passed(&self) -> bool {
        self.nesting_ok
            && self.excluded_terms == 0
            && self.sup_bound <= self.sup_cap
            && self.cross_check_dev <= 1e-9
            && self
                .blocks
                .iter()
                .all(|b| b.ladder_ok && b.level.lower() > 0.5 && b.jump.lower() > 0.5)
    }
}

struct BlockBuild {
    sys: Arc<ConstructedSystem>,
    tsys: TSystem,
    ladder: BlockLadder,
    c_est: f64,
    gamma: f64,
}

/// Max over prefixes of `|Σ_{j≤n} part(e^{i·shift·x} T_j)|` from the factored forms.
fn block_max(sys: &ConstructedSystem, shift: u128, part: Part, pt: RationalPoint) -> f64 {
    let e = character(
        Freq {
            p: shift as i128,
            q: 0,
        },
        pt,
    );
    let mut acc = Complex64::new(0.0, 0.0);
    let mut best = 0.0f64;
    for l in 2..=sys.nu() {
        acc += part.apply(e * TSystem::eval_factored(sys, l, pt));
        best = best.max(acc.norm());
    }
    best
}

/// `γ = c_est + 2` from the weak-type curve of the uncapped system.
pub fn two_phase_gamma(sys: &ConstructedSystem, samples: usize, seed: u64) -> Result<(f64, f64)> {
    let b = sys.b_sets()?;
    let pts = sample_points(sys.lattice()?, samples, seed);
    let grid = log_grid(0.05, (sys.m() as f64).sqrt(), 24);
    let curve = estimate_weak_constant(&b, &pts, &grid, seed)?;
    Ok((curve.c_est, curve.c_est + 2.0))
}

pub fn assemble_theorem(cfg: &TheoremConfig) -> Result<TheoremRun> {
    if cfg.block_m.is_empty() {
        return Err(Error::Usage("at least one block is required".into()));
    }
    let family = cfg.family();
    let mut sigma = BTreeMap::new();
    for &m in &cfg.block_m {
        if let std::collections::btree_map::Entry::Vacant(v) = sigma.entry(m) {
            v.insert(find_rearrangement(m, cfg.search)?);
        }
    }
    let tau_bound = crate::regions::rat_to_f64(&cfg.delta);

    // ladders first: the shifts fix the sets E_k, which fix the dilations
    let mut builds: Vec<BlockBuild> = Vec::new();
    for (k, &m) in cfg.block_m.iter().enumerate() {
        let sys = Arc::new(ConstructedSystem::build(
            SystemParams::desk(m),
            family.clone(),
            sigma[&m].clone(),
        )?);
        let (c_est, gamma) =
            two_phase_gamma(&sys, cfg.weak_samples, cfg.seed.wrapping_add(k as u64))?;
        let tsys = TSystem::build(&sys, gamma)?;
        let ladder = match (cfg.kind, builds.last()) {
            (LadderKind::Rhombus, None) => {
                BlockLadder::Rhombus(RhombusLadder::build(&sys, &tsys, cfg.s, 0)?)
            }
            (LadderKind::Rhombus, Some(prev)) => {
                let lk = prev.ladder.shift();
                BlockLadder::Rhombus(RhombusLadder::build(&sys, &tsys, lk + 1, lk + 2)?)
            }
            (LadderKind::Ball, prev) => {
                let inner = match prev {
                    None => cfg.r,
                    Some(BlockBuild {
                        ladder: BlockLadder::Ball(b),
                        ..
                    }) => b.outer + 1,
                    Some(_) => unreachable!("blocks share the ladder kind"),
                };
                BlockLadder::Ball(BallLadder::build(&sys, &tsys, inner, 1, 126)?)
            }
        };
        builds.push(BlockBuild {
            sys,
            tsys,
            ladder,
            c_est,
            gamma,
        });
    }

    // part choice and level sets
    let mut parts = Vec::new();
    let mut levels = Vec::new();
    let mut handles = Vec::new();
    for (k, b) in builds.iter().enumerate() {
        let h = cfg.c2 * (b.sys.m() as f64).sqrt() / 2.0;
        let pts = sample_points(
            sample_lattice(1),
            cfg.samples,
            cfg.seed.wrapping_add(100 + k as u64),
        );
        let measure = |part: Part| {
            let hits = count_hits(&pts, |pt| block_max(&b.sys, b.ladder.shift(), part, pt) > h);
            MeasureEstimate::from_counts(hits, cfg.samples, cfg.seed)
        };
        let (part, level, other) = match cfg.kind {
            LadderKind::Rhombus => {
                let (re, im) = (measure(Part::Re), measure(Part::Im));
                if im.lower() > re.lower() {
                    (Part::Im, im, Some(re))
                } else {
                    (Part::Re, re, Some(im))
                }
            }
            LadderKind::Ball => (Part::Full, measure(Part::Full), None),
        };
        let (sys, shift) = (b.sys.clone(), b.ladder.shift());
        handles.push(MeasurableSetHandle::new(
            format!("E_{}", k + 1),
            1,
            None,
            move |pt| block_max(&sys, shift, part, pt) > h,
        ));
        parts.push(part);
        levels.push((level, other, h));
    }

    let alpha = 0.9
        * levels
            .iter()
            .map(|(l, _, _)| l.lower())
            .fold(f64::INFINITY, f64::min)
        / crate::mixing::TORUS;
    if !(alpha > 0.0) {
        return Err(Error::Certificate(
            "a block level set has no measurable mass".into(),
        ));
    }
    let schedule = block_cover_schedule(
        &handles,
        alpha.min(0.99),
        cfg.n0,
        cfg.samples,
        cfg.seed,
        cfg.budget,
    )?;
    let dil = schedule.n.clone();

    // cross-block base regions
    for k in 1..builds.len() {
        if let BlockLadder::Rhombus(prev) = &builds[k - 1].ladder {
            let s = (dil[k - 1] * prev.l).div_ceil(dil[k]);
            if let BlockLadder::Rhombus(cur) = &mut builds[k].ladder {
                cur.s = s;
                cur.regions[0] = Rhombus::from_intercepts(rat_int(s as i128), rat_int(s as i128))?;
            }
        }
    }

    // global function and ladder
    let mut f_trunc = TrigPoly::zero();
    let mut regions = Vec::new();
    let mut block_bases = Vec::new();
    let mut reports = Vec::new();
    let mut sup_bound = 0.0;
    let mut sup_cap = 0.0;
    for (idx, b) in builds.iter().enumerate() {
        let k = idx + 1;
        let w = 1.0 / (k * k) as f64;
        let n = dil[idx];
        let mut block = TrigPoly::zero();
        for q in b.ladder.q_polys() {
            block = block.add(&parts[idx].poly(q));
        }
        let terms = block.len();
        f_trunc = f_trunc.add(&block.dilate(n as i128)?.scale(Complex64::new(w, 0.0)));
        block_bases.push(regions.len());
        for r in b.ladder.regions() {
            regions.push(r.scale(n)?);
        }
        let bound = b.sys.smoothing.abs_sum_bound();
        let c1 = b.gamma + 2.1;
        sup_bound += w * bound;
        sup_cap += w * c1;
        let (level, level_other, h) = levels[idx];
        reports.push(BlockReport {
            k,
            m: b.sys.m(),
            c_est: b.c_est,
            gamma: b.gamma,
            c1,
            sup_bound: bound,
            threshold: h,
            part: parts[idx],
            level,
            level_other,
            shift: b.ladder.shift(),
            base: match &b.ladder {
                BlockLadder::Rhombus(l) => l.s,
                BlockLadder::Ball(l) => l.inner,
            },
            dilation: n,
            ladder_ok: b.ladder.certified(&b.tsys, tau_bound)?,
            jump: MeasureEstimate::from_counts(0, 0, cfg.seed),
            terms,
        });
    }
    let kind = cfg.kind;
    let ladder = RegionLadder { regions, kind };
    let spectrum: Vec<Freq> = f_trunc.spectrum().collect();
    let nesting_ok = ladder.verify_nested(&spectrum).is_ok();

    // jumps: factored on every sample, explicit on a subset
    let lattice = sample_lattice(1);
    let pts = sample_points(lattice, cfg.samples, cfg.seed.wrapping_add(1000));
    for (idx, b) in builds.iter().enumerate() {
        let w = reports[idx].threshold;
        let n = dil[idx];
        let hits = count_hits(&pts, |pt| {
            block_max(&b.sys, b.ladder.shift(), parts[idx], pt.dilate(n)) > w
        });
        reports[idx].jump =
            MeasureEstimate::from_counts(hits, cfg.samples, cfg.seed.wrapping_add(1000));
    }
    let plan = LadderPlan::new(&f_trunc, &ladder.regions, nesting_ok, lattice)?;
    let excluded_terms = plan.excluded();
    let cross = &pts[..cfg.cross_check_points.min(pts.len())];
    let ends: Vec<usize> = block_bases
        .iter()
        .skip(1)
        .copied()
        .chain([ladder.regions.len()])
        .collect();
    let cross_check_dev = cross
        .par_iter()
        .map(|&pt| {
            let sums = plan.prefix_sums(pt);
            let mut dev = 0.0f64;
            for (idx, b) in builds.iter().enumerate() {
                let w = 1.0 / ((idx + 1) * (idx + 1)) as f64;
                let base = sums[block_bases[idx]];
                let explicit = sums[block_bases[idx]..ends[idx]]
                    .iter()
                    .map(|s| (s - base).norm())
                    .fold(0.0, f64::max);
                let factored =
                    w * block_max(&b.sys, b.ladder.shift(), parts[idx], pt.dilate(dil[idx]));
                dev = dev.max((explicit - factored).abs());
            }
            dev
        })
        .reduce(|| 0.0, f64::max);

    Ok(TheoremRun {
        kind,
        sigma,
        blocks: reports,
        coeff_sum: f_trunc.coeff_norm(),
        f_trunc,
        ladder,
        block_bases,
        nesting_ok,
        excluded_terms,
        sup_bound,
        sup_cap,
        schedule,
        cross_check_dev,
        cross_check_points: cross.len(),
    })
}
