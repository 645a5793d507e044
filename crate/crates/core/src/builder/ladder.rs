//! Shifting the sector polynomials into nested rhombi or eccentric balls.

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use super::tsystem::TSystem;
use super::{ConstructedSystem, SectorFamily};
use crate::exact_eval::{Freq, TrigPoly};
use crate::regions::{
    rat_int, symmetrize_triangle, Ball, Direction, FreqRegion, Region, Rhombus, Sector,
};
use crate::{Error, Result};

/// Largest `|p|` and `|q|` over all spectra.
fn extent(polys: &[TrigPoly]) -> (u128, u128) {
    polys
        .iter()
        .map(|t| t.extent())
        .fold((0, 0), |a, b| (a.0.max(b.0), a.1.max(b.1)))
}

/// `Q_n = T_n·e^{ilx}` and the rhombi `Δ_1 = Δ(1/s, 1/s)`,
/// `Δ_n = Δ(1/l, 1/(l t_n))`.
#[derive(Clone, Debug)]
pub struct RhombusLadder {
    pub delta: BigRational,
    /// `t_0, …, t_ν`.
    pub slopes: Vec<BigRational>,
    pub s: u128,
    pub l: u128,
    /// `Δ_1, …, Δ_ν`.
    pub regions: Vec<Rhombus>,
    /// `Q_2, …, Q_ν`.
    pub q_polys: Vec<TrigPoly>,
}

/// Exact certificates of a rhombus ladder.
#[derive(Clone, Debug)]
pub struct RhombusCertificate {
    pub rho_max: BigRational,
    pub rho_bound: BigRational,
    pub rho_decreasing: bool,
    pub nested: bool,
    /// Terms of some `Q_n` outside `(Δ_n \ Δ_{n−1}) ∩ (0,∞)²`.
    pub slot_exceptions: usize,
    pub terms: usize,
}

impl RhombusCertificate {
    pub fn passed(&self) -> bool {
        self.rho_max < self.rho_bound
            && self.rho_decreasing
            && self.nested
            && self.slot_exceptions == 0
    }
}

impl RhombusLadder {
    /// `l > max |p|` keeps every shifted term off the `y` axis.
    /// `s ≥ 1` is the half-diagonal of the base square; `min_l` forces a
    /// larger vertex, as needed when stacking blocks.
    pub fn build(sys: &ConstructedSystem, tsys: &TSystem, s: u128, min_l: u128) -> Result<Self> {
        let delta = match &sys.family {
            SectorFamily::Rhombus { delta } => delta.clone(),
            _ => {
                return Err(Error::Config(
                    "rhombus ladder needs the rhombus sector family".into(),
                ))
            }
        };
        if s == 0 {
            return Err(Error::Config("base square size s must be positive".into()));
        }
        let nu = sys.nu();
        let slopes = SectorFamily::rhombus_slopes(&delta, nu);
        let (px, _) = extent(&tsys.t_polys);
        let mut l = (px + 1).max(s + 1).max(min_l);
        // Δ_1 ⊂ Δ_2 and spec Q_2 ∩ Δ_1 = ∅ both follow from l·t_1 ≥ s
        let need = (rat_int(s as i128) / &slopes[1])
            .ceil()
            .to_integer()
            .to_u128()
            .ok_or_else(|| Error::Overflow("vertex l".into()))?;
        l = l.max(need);
        let li = i128::try_from(l).map_err(|_| Error::Overflow("vertex l".into()))?;
        let mut regions = vec![Rhombus::from_intercepts(
            rat_int(s as i128),
            rat_int(s as i128),
        )?];
        for t in &slopes[2..] {
            let theta = Sector::new(
                Direction::new(rat_int(-1), t.clone())?,
                Some(Direction::new(rat_int(-1), rat_int(0))?),
                Freq::new(li, 0)?,
            )?;
            regions.push(symmetrize_triangle(&theta)?);
        }
        let shift = Freq::new(li, 0)?;
        let q_polys = tsys
            .t_polys
            .iter()
            .map(|t| t.shift(shift))
            .collect::<Result<_>>()?;
        Ok(RhombusLadder {
            delta,
            slopes,
            s,
            l,
            regions,
            q_polys,
        })
    }

    pub fn certify(&self) -> RhombusCertificate {
        let one = BigRational::one();
        let rho: Vec<BigRational> = self.regions.iter().map(|r| r.rho()).collect();
        let rho_max = rho
            .iter()
            .cloned()
            .fold(one.clone(), |a, b| if b > a { b } else { a });
        let rho_decreasing = rho[1..].windows(2).all(|w| w[1] < w[0]);
        let nested = self.regions.windows(2).all(|w| w[0].is_subset_of(&w[1]));
        let slot_exceptions = self
            .q_polys
            .par_iter()
            .enumerate()
            .map(|(k, q)| {
                let (inner, outer) = (&self.regions[k], &self.regions[k + 1]);
                q.spectrum()
                    .filter(|f| {
                        !(f.p > 0 && f.q > 0 && outer.contains_freq(*f) && !inner.contains_freq(*f))
                    })
                    .count()
            })
            .sum();
        RhombusCertificate {
            rho_max,
            rho_bound: one + &self.delta,
            rho_decreasing,
            nested,
            slot_exceptions,
            terms: self.q_polys.iter().map(|q| q.len()).sum(),
        }
    }

    pub fn as_regions(&self) -> Vec<Region> {
        self.regions.iter().cloned().map(Region::Rhombus).collect()
    }
}

/// `B(0, −R u, R√(1+u²))`: the ball through `(R, 0)` tangent there to the
/// line of direction `(−u, 1)`.
pub fn tangent_ball(r_big: u128, u: &BigRational) -> Result<Ball> {
    let r = rat_int(r_big as i128);
    let y0 = -(&r * u);
    let r2 = &r * &r * (BigRational::one() + u * u);
    Ball::new(BigRational::zero(), y0, r2)
}

/// `Q_n = T_n·e^{iRx}` and the balls `U_n = B_{2n+2}`, `n = 1..ν`.
#[derive(Clone, Debug)]
pub struct BallLadder {
    pub eps: f64,
    /// `u_0 = 0, u_1, …, u_{2ν+2}`.
    pub slopes: Vec<BigRational>,
    pub r_big: u128,
    /// `B(0,0,inner) ⊂ U_n` for every `n`.
    pub inner: u128,
    /// Smallest integer with `U_n ⊂ B(0,0,outer)` for every `n`.
    pub outer: u128,
    /// `U_1, …, U_ν`.
    pub regions: Vec<Ball>,
    pub q_polys: Vec<TrigPoly>,
}

/// Exact certificates of a ball ladder.
#[derive(Clone, Debug)]
pub struct BallCertificate {
    pub tau_max: f64,
    pub tau_bound: f64,
    pub tau_exact_ok: bool,
    pub inner_ok: bool,
    pub outer_ok: bool,
    /// `(n, k)` pairs with a term of `Q_n` on the wrong side of `U_k`.
    pub slot_exceptions: usize,
    pub corner_exceptions: usize,
    pub terms: usize,
}

impl BallCertificate {
    pub fn passed(&self) -> bool {
        self.tau_exact_ok
            && self.inner_ok
            && self.outer_ok
            && self.slot_exceptions == 0
            && self.corner_exceptions == 0
    }
}

fn spectrum_exceptions(q_polys: &[TrigPoly], regions: &[Ball]) -> usize {
    q_polys
        .par_iter()
        .enumerate()
        .map(|(idx, q)| {
            let n = idx + 2;
            q.spectrum()
                .map(|f| {
                    (1..=regions.len())
                        .filter(|&k| regions[k - 1].contains_freq(f) != (k >= n))
                        .count()
                })
                .sum::<usize>()
        })
        .sum()
}

/// Corners of the part of `(R,0) + S_n` between the lowest and highest
/// rows of `spec T_n` must lie strictly inside `U_k` for every `k ≥ n`.
fn corner_exceptions(
    tsys: &TSystem,
    slopes: &[BigRational],
    regions: &[Ball],
    r_big: u128,
) -> usize {
    let r = rat_int(r_big as i128);
    let mut bad = 0;
    for (idx, t) in tsys.t_polys.iter().enumerate() {
        let n = idx + 2;
        let (lo, hi) = t
            .spectrum()
            .fold((i128::MAX, i128::MIN), |a, f| (a.0.min(f.q), a.1.max(f.q)));
        if lo > hi {
            continue;
        }
        for y in [lo, hi] {
            let y = rat_int(y);
            for u in [&slopes[2 * n + 1], &slopes[2 * n]] {
                let x = &r - u * &y;
                bad += (n..=regions.len())
                    .filter(|&k| !regions[k - 1].contains_point(&x, &y))
                    .count();
            }
        }
    }
    bad
}

fn ball_sup_norm(b: &Ball) -> f64 {
    // |centre| + radius, rounded up by a relative 1e-12
    let c = crate::regions::rat_to_f64(&b.y0).abs();
    let r = crate::regions::rat_to_f64(&b.r2).sqrt();
    (c + r) * (1.0 + 1e-12)
}

impl BallLadder {
    /// Doubles `R` from `2^start_bits` until every certificate holds.
    pub fn build(
        sys: &ConstructedSystem,
        tsys: &TSystem,
        inner: u128,
        start_bits: u32,
        max_bits: u32,
    ) -> Result<Self> {
        let eps = match &sys.family {
            SectorFamily::Ball { eps } => *eps,
            _ => {
                return Err(Error::Config(
                    "ball ladder needs the ball sector family".into(),
                ))
            }
        };
        let nu = sys.nu();
        let slopes = SectorFamily::ball_slopes(eps, 2 * nu + 2);
        let (px, py) = extent(&tsys.t_polys);
        let mut bits = start_bits.max(128 - px.max(py).max(inner).leading_zeros());
        loop {
            if bits > max_bits {
                return Err(Error::Budget(format!("no admissible R below 2^{max_bits}")));
            }
            let r_big = 1u128 << bits;
            let regions: Vec<Ball> = (1..=nu)
                .map(|n| tangent_ball(r_big, &slopes[2 * n + 2]))
                .collect::<Result<_>>()?;
            let inner_ball = Ball::new(
                BigRational::zero(),
                BigRational::zero(),
                rat_int(inner as i128).pow(2),
            )?;
            let shift = Freq::new(r_big as i128, 0)?;
            let q_polys: Vec<TrigPoly> = tsys
                .t_polys
                .iter()
                .map(|t| t.shift(shift))
                .collect::<Result<_>>()?;
            let ok = regions.iter().all(|u| inner_ball.is_subset_of(u))
                && corner_exceptions(tsys, &slopes, &regions, r_big) == 0
                && spectrum_exceptions(&q_polys, &regions) == 0;
            if ok {
                let outer = minimal_enclosing(&regions)?;
                return Ok(BallLadder {
                    eps,
                    slopes,
                    r_big,
                    inner,
                    outer,
                    regions,
                    q_polys,
                });
            }
            bits += 1;
        }
    }

    pub fn certify(&self, tau_bound: f64, tsys: &TSystem) -> Result<BallCertificate> {
        let tau_max = self.regions.iter().map(|b| b.tau()).fold(0.0, f64::max);
        let bound = crate::regions::rat_approx(tau_bound, 52);
        let tau_exact_ok = self.regions.iter().all(|b| b.tau_sq() < &bound * &bound);
        let inner_ball = Ball::new(
            BigRational::zero(),
            BigRational::zero(),
            rat_int(self.inner as i128).pow(2),
        )?;
        let outer_ball = Ball::new(
            BigRational::zero(),
            BigRational::zero(),
            rat_int(self.outer as i128).pow(2),
        )?;
        Ok(BallCertificate {
            tau_max,
            tau_bound,
            tau_exact_ok,
            inner_ok: self.regions.iter().all(|u| inner_ball.is_subset_of(u)),
            outer_ok: self.regions.iter().all(|u| u.is_subset_of(&outer_ball)),
            slot_exceptions: spectrum_exceptions(&self.q_polys, &self.regions),
            corner_exceptions: corner_exceptions(tsys, &self.slopes, &self.regions, self.r_big),
            terms: self.q_polys.iter().map(|q| q.len()).sum(),
        })
    }

    pub fn as_regions(&self) -> Vec<Region> {
        self.regions.iter().cloned().map(Region::Ball).collect()
    }
}

/// Smallest integer `r` with every ball inside `B(0,0,r)`.
fn minimal_enclosing(balls: &[Ball]) -> Result<u128> {
    let est = balls.iter().map(ball_sup_norm).fold(0.0, f64::max).ceil();
    let fits = |r: u128| -> Result<bool> {
        let outer = Ball::new(
            BigRational::zero(),
            BigRational::zero(),
            rat_int(r as i128).pow(2),
        )?;
        Ok(balls.iter().all(|b| b.is_subset_of(&outer)))
    };
    let mut r = est.to_u128().unwrap_or(u128::MAX >> 2).max(1);
    while !fits(r)? {
        r += 1;
    }
    while r > 1 && fits(r - 1)? {
        r -= 1;
    }
    Ok(r)
}
