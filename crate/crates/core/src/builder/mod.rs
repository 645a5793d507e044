//! The inductive construction: frequencies, lazy sets, smoothing
//! polynomials, sector polynomials `T_n`, region ladders and the
//! assembled multi-block functions.

pub mod ladder;
pub mod manifest;
pub mod martingale;
pub mod schedule;
pub mod sets;
pub mod smoothing;
pub mod theorem;
pub mod tsystem;

use std::sync::Arc;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::exact_eval::Freq;
use crate::mixing::sample_lattice;
use crate::regions::{rat_approx, rat_int, Direction, Sector};
use crate::tree::{nu, Rearrangement};
use crate::{Error, Result};

pub use schedule::{Divisibility, FreqSchedule, ScheduleParams};
pub use sets::{SetRule, TreeSets};
pub use smoothing::SmoothingPlan;

/// Construction parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SystemParams {
    pub m: u32,
    /// `|p_n| > growth·(|p_{n̄}| + |q_{n̄}|)`; at least `20ν`.
    pub growth: u128,
    pub mode: Divisibility,
    /// Sign margin of the smoothed system.
    pub kappa: f64,
    /// Fraction of `κ` reserved for the drift of a phase across a square.
    pub eta: f64,
    pub width_cap_bits: u32,
    pub max_degree: u32,
}

impl SystemParams {
    pub fn desk(m: u32) -> Self {
        SystemParams {
            m,
            growth: 20 * nu(m) as u128,
            mode: Divisibility::Chain,
            kappa: 0.2,
            eta: 0.05,
            width_cap_bits: 120,
            max_degree: 1024,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=6).contains(&self.m) {
            return Err(Error::Config(format!(
                "m must be between 2 and 6, got {}",
                self.m
            )));
        }
        if self.growth < 20 * nu(self.m) as u128 {
            return Err(Error::Config(format!(
                "growth margin must be at least 20ν = {}",
                20 * nu(self.m)
            )));
        }
        Ok(())
    }
}

/// The sector family the spectra of `T_n` are placed in.
#[derive(Clone, Debug, PartialEq)]
pub enum SectorFamily {
    /// Slopes `t_n = 1 − ε'/n` with `ε' = 9δ/(10(1+δ))`, so that the
    /// rhombi `Δ(1/l, 1/(l t_n))` have `ρ = 1/t_n < 1+δ`. Sector `n` is
    /// `{p < 0, t_{n−1} < q/|p| ≤ t_n}`.
    Rhombus { delta: BigRational },
    /// Slopes `u_k ≈ tan(ε/k)`; sector `n` is `{u_{2n+1} ≤ |p|/q < u_{2n}}`.
    Ball { eps: f64 },
}

impl SectorFamily {
    /// `t_0, …, t_ν` for the rhombus family.
    pub fn rhombus_slopes(delta: &BigRational, nu: usize) -> Vec<BigRational> {
        let one = rat_int(1);
        let eps = delta * rat_int(9) / (rat_int(10) * (&one + delta));
        (0..=nu)
            .map(|n| {
                if n == 0 {
                    rat_int(0)
                } else {
                    &one - &eps / rat_int(n as i128)
                }
            })
            .collect()
    }

    /// `u_0 = 0`-padded slopes `u_1, …, u_count`, rational at `2^-48`.
    pub fn ball_slopes(eps: f64, count: usize) -> Vec<BigRational> {
        (0..=count)
            .map(|k| {
                if k == 0 {
                    rat_int(0)
                } else {
                    rat_approx((eps / k as f64).tan(), 48)
                }
            })
            .collect()
    }

    /// Sectors `S_2, …, S_ν`.
    pub fn sectors(&self, m: u32) -> Result<Vec<Sector>> {
        let nu = nu(m);
        match self {
            SectorFamily::Rhombus { delta } => {
                if *delta <= rat_int(0) {
                    return Err(Error::Config("δ must be positive".into()));
                }
                let t = Self::rhombus_slopes(delta, nu);
                (2..=nu)
                    .map(|n| {
                        Sector::new(
                            Direction::new(rat_int(-1), t[n].clone())?,
                            Some(Direction::new(rat_int(-1), t[n - 1].clone())?),
                            Freq::ZERO,
                        )
                    })
                    .collect()
            }
            SectorFamily::Ball { eps } => {
                if !(*eps > 0.0 && *eps < 1.0) {
                    return Err(Error::Config(format!("ε must lie in (0, 1), got {eps}")));
                }
                let u = Self::ball_slopes(*eps, 2 * nu + 2);
                (2..=nu)
                    .map(|n| {
                        Sector::new(
                            Direction::new(-u[2 * n + 1].clone(), rat_int(1))?,
                            Some(Direction::new(-u[2 * n].clone(), rat_int(1))?),
                            Freq::ZERO,
                        )
                    })
                    .collect()
            }
        }
    }
}

/// Frequencies, sectors, permutation and smoothing data of one system.
///
/// The three set systems (uncapped `F_n`, capped `E_n`, and the margin
/// version used for smoothing) share these frequencies.
#[derive(Clone, Debug)]
pub struct ConstructedSystem {
    pub params: SystemParams,
    pub family: SectorFamily,
    pub sigma: Rearrangement,
    pub sectors: Vec<Sector>,
    pub smoothing: SmoothingPlan,
    pub schedule: Arc<FreqSchedule>,
}

impl ConstructedSystem {
    pub fn build(params: SystemParams, family: SectorFamily, sigma: Rearrangement) -> Result<Self> {
        params.validate()?;
        if sigma.m != params.m {
            return Err(Error::Config(
                "permutation level count differs from m".into(),
            ));
        }
        sigma.check_bijective()?;
        let sectors = family.sectors(params.m)?;
        let smoothing = SmoothingPlan::new(params.m, params.kappa, params.eta, params.max_degree)?;
        let sp = ScheduleParams {
            m: params.m,
            mode: params.mode,
            growth: params.growth,
            osc_ratio: smoothing.osc_ratio(),
            width_cap_bits: params.width_cap_bits,
        };
        let schedule = schedule::schedule_frequencies(&sp, &sectors, &sigma, &smoothing.degrees())?;
        Ok(ConstructedSystem {
            params,
            family,
            sigma,
            sectors,
            smoothing,
            schedule: Arc::new(schedule),
        })
    }

    pub fn m(&self) -> u32 {
        self.params.m
    }

    pub fn nu(&self) -> usize {
        nu(self.params.m)
    }

    /// The uncapped system `F_n`, `b_n`.
    pub fn b_sets(&self) -> Result<TreeSets> {
        TreeSets::new(self.schedule.clone(), SetRule::B)
    }

    /// The capped system `E_n`, `a_n`.
    pub fn a_sets(&self, gamma: f64) -> Result<TreeSets> {
        TreeSets::new(self.schedule.clone(), SetRule::capped(gamma))
    }

    /// The margin system the smoothing polynomials approximate.
    pub fn margin_sets(&self, gamma: f64) -> Result<TreeSets> {
        TreeSets::new(
            self.schedule.clone(),
            SetRule::shrunk(self.params.kappa, Some(gamma)),
        )
    }

    /// Sampling denominator resolving every square of every level.
    pub fn lattice(&self) -> Result<u128> {
        Ok(sample_lattice(self.schedule.lattice_base()?))
    }
}
