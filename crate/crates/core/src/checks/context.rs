//! Artifacts shared between checks, each built at most once per run.

use std::sync::{Arc, OnceLock};

use super::config::RunConfig;
use crate::builder::ladder::{BallLadder, RhombusLadder};
use crate::builder::martingale::{estimate_weak_constant, log_grid, WeakCurve};
use crate::builder::theorem::{assemble_theorem, TheoremConfig, TheoremRun};
use crate::builder::tsystem::TSystem;
use crate::builder::{ConstructedSystem, SectorFamily, SystemParams};
use crate::exact_eval::RationalPoint;
use crate::mixing::{sample_points, ScanBudget};
use crate::regions::LadderKind;
use crate::tree::{find_rearrangement, Rearrangement, SearchConfig};
use crate::Result;

type Slot<T> = OnceLock<Result<Arc<T>>>;

fn get<T>(slot: &Slot<T>, build: impl FnOnce() -> Result<T>) -> Result<Arc<T>> {
    slot.get_or_init(|| build().map(Arc::new)).clone()
}

/// One system together with its weak-type constant and `T` polynomials.
pub struct SystemBundle {
    pub sys: ConstructedSystem,
    pub curve: WeakCurve,
    pub gamma: f64,
    pub tsys: OnceLock<Result<Arc<TSystem>>>,
}

impl SystemBundle {
    pub fn c1(&self) -> f64 {
        self.gamma + 2.1
    }

    pub fn tsys(&self) -> Result<Arc<TSystem>> {
        get(&self.tsys, || TSystem::build(&self.sys, self.gamma))
    }
}

pub struct Context {
    pub cfg: RunConfig,
    sigma: Slot<Rearrangement>,
    rhombus: Slot<SystemBundle>,
    ball: Slot<SystemBundle>,
    rhombus_ladder: Slot<RhombusLadder>,
    ball_ladder: Slot<BallLadder>,
    theorem: Slot<TheoremRun>,
}

impl Context {
    pub fn new(cfg: RunConfig) -> Self {
        Context {
            cfg,
            sigma: OnceLock::new(),
            rhombus: OnceLock::new(),
            ball: OnceLock::new(),
            rhombus_ladder: OnceLock::new(),
            ball_ladder: OnceLock::new(),
            theorem: OnceLock::new(),
        }
    }

    pub fn search(&self) -> SearchConfig {
        SearchConfig {
            trials: self.cfg.search_trials,
            side: self.cfg.search_side,
            seed: self.cfg.seed,
        }
    }

    pub fn sigma(&self) -> Result<Arc<Rearrangement>> {
        get(&self.sigma, || {
            find_rearrangement(self.cfg.m, self.search())
        })
    }

    fn bundle(&self, family: SectorFamily) -> Result<SystemBundle> {
        let sigma = (*self.sigma()?).clone();
        let sys = ConstructedSystem::build(SystemParams::desk(self.cfg.m), family, sigma)?;
        let b = sys.b_sets()?;
        let pts = sample_points(sys.lattice()?, self.cfg.weak_samples, self.cfg.seed);
        let grid = log_grid(0.05, (self.cfg.m as f64).sqrt(), 24);
        let curve = estimate_weak_constant(&b, &pts, &grid, self.cfg.seed)?;
        let gamma = curve.c_est + 2.0;
        Ok(SystemBundle {
            sys,
            curve,
            gamma,
            tsys: OnceLock::new(),
        })
    }

    /// The system placed in the rhombus sectors; also the default for the
    /// checks that do not depend on the sector family.
    pub fn rhombus(&self) -> Result<Arc<SystemBundle>> {
        get(&self.rhombus, || {
            self.bundle(SectorFamily::Rhombus {
                delta: self.cfg.delta.clone(),
            })
        })
    }

    pub fn ball(&self) -> Result<Arc<SystemBundle>> {
        get(&self.ball, || {
            self.bundle(SectorFamily::Ball { eps: self.cfg.eps })
        })
    }

    pub fn rhombus_ladder(&self) -> Result<Arc<RhombusLadder>> {
        get(&self.rhombus_ladder, || {
            let b = self.rhombus()?;
            RhombusLadder::build(&b.sys, &*b.tsys()?, self.cfg.s, 0)
        })
    }

    pub fn ball_ladder(&self) -> Result<Arc<BallLadder>> {
        get(&self.ball_ladder, || {
            let b = self.ball()?;
            BallLadder::build(&b.sys, &*b.tsys()?, self.cfg.r, 1, 126)
        })
    }

    pub fn theorem_config(&self, kind: LadderKind) -> TheoremConfig {
        let c = &self.cfg;
        let mut t = TheoremConfig::desk(kind, c.blocks, c.m);
        t.delta = c.delta.clone();
        t.eps = c.eps;
        t.s = c.s;
        t.r = c.r;
        t.c2 = c.c2_f64();
        t.samples = c.samples;
        t.weak_samples = c.weak_samples;
        t.cross_check_points = c.cross_check_points;
        t.seed = c.seed;
        t.n0 = c.n0;
        t.budget = ScanBudget {
            linear: c.scan_linear,
            max_steps: c.scan_steps,
        };
        t.search = self.search();
        t
    }

    pub fn theorem(&self) -> Result<Arc<TheoremRun>> {
        get(&self.theorem, || {
            assemble_theorem(&self.theorem_config(self.cfg.kind))
        })
    }

    /// Uniform points on the lattice resolving every square of `sys`;
    /// `salt` separates the point sets of different checks.
    pub fn points(
        &self,
        sys: &ConstructedSystem,
        count: usize,
        salt: u64,
    ) -> Result<Vec<RationalPoint>> {
        Ok(sample_points(
            sys.lattice()?,
            count,
            self.cfg.seed.wrapping_mul(1_000_003).wrapping_add(salt),
        ))
    }
}
