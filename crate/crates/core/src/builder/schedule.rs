//! Choice of the frequencies `(p_n, q_n)`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::exact_eval::{lcm_u128, Freq};
use crate::regions::{rat_to_f64, FreqRegion, Sector};
use crate::tree::{chain, nu, parent, Rearrangement};
use crate::{Error, Result};

/// Which divisibility chain the scheduler enforces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Divisibility {
    /// `2·p_{n̄} | p_n` only.
    TreeAncestor,
    /// Additionally `p_{n-1} | p_n` and `|p_n| ≥ √m·|p_{n-1}|`, which the
    /// martingale argument needs.
    Chain,
}

/// Scheduling constraints.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub m: u32,
    pub mode: Divisibility,
    /// `|p_n| > growth·(|p_{n̄}| + |q_{n̄}|)`.
    pub growth: u128,
    /// Lower bound on `|p_n| / (2π(|p_{n̄}|+|q_{n̄}|))`, so that the phase of
    /// the parent frequency moves by less than `1/osc_ratio` over a square.
    pub osc_ratio: f64,
    pub width_cap_bits: u32,
}

/// The scheduled frequencies of one system, `n = 2..=ν`, plus `|p_{ν+1}|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreqSchedule {
    pub m: u32,
    pub mode: Divisibility,
    pub growth: u128,
    freqs: Vec<Freq>,
    pub p_next: u128,
}

fn ceil_div(a: u128, b: u128) -> u128 {
    a.div_ceil(b)
}

fn abs(x: i128) -> u128 {
    x.unsigned_abs()
}

impl FreqSchedule {
    /// A schedule from explicit frequencies; only the structural
    /// requirements (`|p_n| ≥ 1`, `2p_{n̄} | p_n`) are checked, so small
    /// hand-made instances are possible.
    pub fn from_freqs(m: u32, freqs: Vec<Freq>, p_next: u128) -> Result<Self> {
        if freqs.len() != nu(m) - 1 {
            return Err(Error::Config(format!(
                "expected {} frequencies for m={m}, got {}",
                nu(m) - 1,
                freqs.len()
            )));
        }
        let s = FreqSchedule {
            m,
            mode: Divisibility::TreeAncestor,
            growth: 0,
            freqs,
            p_next,
        };
        for n in 2..=s.nu() {
            if s.freq(n).p == 0 {
                return Err(Error::Config(format!("p_{n} must be nonzero")));
            }
            if n >= 3 && !s.abs_p(n).is_multiple_of(2 * s.abs_p(parent(n)?)) {
                return Err(Error::Config(format!(
                    "2·p_{} does not divide p_{n}",
                    parent(n)?
                )));
            }
        }
        if p_next == 0 || !p_next.is_multiple_of(s.abs_p(s.nu())) {
            return Err(Error::Config(
                "p_{ν+1} must be a positive multiple of p_ν".into(),
            ));
        }
        Ok(s)
    }

    pub fn nu(&self) -> usize {
        nu(self.m)
    }

    pub fn freq(&self, n: usize) -> Freq {
        self.freqs[n - 2]
    }

    pub fn freqs(&self) -> &[Freq] {
        &self.freqs
    }

    /// `|p_n|`, with `n = ν+1` giving the extra martingale resolution.
    pub fn abs_p(&self, n: usize) -> u128 {
        if n == self.nu() + 1 {
            self.p_next
        } else {
            abs(self.freq(n).p)
        }
    }

    /// Smallest denominator on which every square of every `Q_{p_n}`,
    /// `n ≤ ν+1`, is resolved.
    pub fn lattice_base(&self) -> Result<u128> {
        (2..=self.nu() + 1).try_fold(1u128, |acc, n| lcm_u128(acc, self.abs_p(n)))
    }

    pub fn max_bits(&self) -> u32 {
        self.freqs
            .iter()
            .map(|f| f.bits())
            .max()
            .unwrap_or(0)
            .max(128 - self.p_next.leading_zeros())
    }

    /// Re-checks the growth and divisibility invariants exactly.
    pub fn validate(&self) -> Result<()> {
        let nu = self.nu();
        for n in 3..=nu {
            let pb = parent(n)?;
            let (p, par) = (self.abs_p(n), self.freq(pb));
            if p % (2 * abs(par.p)) != 0 {
                return Err(Error::Certificate(format!(
                    "2·p_{pb} does not divide p_{n}"
                )));
            }
            let l1 = par.l1();
            if p <= self.growth * l1 {
                return Err(Error::Certificate(format!(
                    "|p_{n}| = {p} is not above {}·{l1}",
                    self.growth
                )));
            }
            // 4π < 12.5664, so this integer inequality implies 4π(|p|+|q|)/p_n < 1/ν.
            if 125_664 * nu as u128 * l1 >= 10_000 * p {
                return Err(Error::Certificate(format!(
                    "oscillation bound fails at n={n}"
                )));
            }
            if self.mode == Divisibility::Chain {
                let prev = self.abs_p(n - 1);
                if p % prev != 0 || p * p < self.m as u128 * prev * prev {
                    return Err(Error::Certificate(format!(
                        "chain condition fails between {} and {n}",
                        n - 1
                    )));
                }
            }
        }
        let last = self.abs_p(nu);
        if !self.p_next.is_multiple_of(last)
            || self.p_next * self.p_next <= self.m as u128 * last * last
        {
            return Err(Error::Certificate(
                "p_{ν+1} is not an admissible multiple of p_ν".into(),
            ));
        }
        Ok(())
    }
}

/// Half-widths of the spectrum box of `f_n`, given for every factor of
/// `f_n` the node whose frequency it is built from and its degree.
pub fn spectrum_box(freqs: &[Freq], factors: &[(usize, u32)]) -> Result<(u128, u128)> {
    let mut bx = 0u128;
    let mut by = 0u128;
    for &(base, deg) in factors {
        let f = freqs[base - 2];
        bx = abs(f.p)
            .checked_mul(deg as u128)
            .and_then(|v| v.checked_add(bx))
            .ok_or_else(|| Error::Overflow("spectrum box".into()))?;
        by = abs(f.q)
            .checked_mul(deg as u128)
            .and_then(|v| v.checked_add(by))
            .ok_or_else(|| Error::Overflow("spectrum box".into()))?;
    }
    Ok((bx, by))
}

fn unit(dx: f64, dy: f64) -> (f64, f64) {
    let h = dx.hypot(dy);
    (dx / h, dy / h)
}

/// Geometry of one sector in floating point, used to pick candidates
/// before the exact test.
struct SectorShape {
    mid: (f64, f64),
    /// Inward unit normals of the two boundary rays.
    normals: [(f64, f64); 2],
    sin_half: f64,
}

impl SectorShape {
    fn new(s: &Sector) -> Result<Self> {
        let beta = s
            .beta
            .as_ref()
            .ok_or_else(|| Error::Config("scheduler sectors must have bounded aperture".into()))?;
        let a = unit(rat_to_f64(&s.alpha.dx), rat_to_f64(&s.alpha.dy));
        let b = unit(rat_to_f64(&beta.dx), rat_to_f64(&beta.dy));
        let mid = unit(a.0 + b.0, a.1 + b.1);
        if mid.0 >= 0.0 {
            return Err(Error::Config(
                "scheduler sectors must point into the half-plane p < 0".into(),
            ));
        }
        // inward normal of α is α rotated by +90°, of β rotated by −90°
        let normals = [(-a.1, a.0), (b.1, -b.0)];
        let sin_half = mid.0 * normals[0].0 + mid.1 * normals[0].1;
        Ok(SectorShape {
            mid,
            normals,
            sin_half,
        })
    }

    /// A lower bound for the smallest `P` at which a box of half-widths
    /// `(bx, by)` centred on the middle ray at `x = -P` fits.
    fn fit_estimate(&self, bx: u128, by: u128) -> f64 {
        let need = self
            .normals
            .iter()
            .map(|n| bx as f64 * n.0.abs() + by as f64 * n.1.abs() - 1.0)
            .fold(0.0, f64::max);
        need / self.sin_half * self.mid.0.abs()
    }

    fn centre(&self, p: u128) -> Result<Freq> {
        let q = (p as f64 * self.mid.1 / self.mid.0.abs()).round();
        if !q.is_finite() || q.abs() >= 2f64.powi(126) {
            return Err(Error::Overflow("frequency centre".into()));
        }
        Freq::new(-(p as i128), q as i128)
    }

    fn float_fits(&self, c: Freq, bx: u128, by: u128) -> bool {
        let (cx, cy) = (c.p as f64, c.q as f64);
        self.normals.iter().all(|n| {
            let d = cx * n.0 + cy * n.1;
            d - (bx as f64 * n.0.abs() + by as f64 * n.1.abs()) > -1e-9 * d.abs().max(1.0)
        })
    }
}

/// Exact test that the box `c + [-bx, bx]×[-by, by]` lies in `s`.
pub fn box_in_sector(s: &Sector, c: Freq, bx: u128, by: u128) -> Result<bool> {
    let (bx, by) = (bx as i128, by as i128);
    for (dx, dy) in [(-bx, -by), (-bx, by), (bx, -by), (bx, by)] {
        if !s.contains_freq(c.checked_add(Freq::new(dx, dy)?)?) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Chooses `(p_n, q_n)` for `n = 2..=ν` in index order.
///
/// `sectors[l-2]` is the sector `S_l`; node `n` goes to `S_{σ⁻¹(n)}`.
/// `factors[n-2]` lists the factors of `f_n` as `(base node, degree)`.
/// At each step the smallest admissible multiple is taken, with `q_n`
/// the nearest integer to the middle ray.
pub fn schedule_frequencies(
    params: &ScheduleParams,
    sectors: &[Sector],
    sigma: &Rearrangement,
    factors: &[Vec<(usize, u32)>],
) -> Result<FreqSchedule> {
    let m = params.m;
    let nu = nu(m);
    if sectors.len() != nu - 1 || factors.len() != nu - 1 || sigma.m != m {
        return Err(Error::Config(
            "sector, factor and permutation sizes must match ν-1".into(),
        ));
    }
    if params.growth < 20 * nu as u128 {
        return Err(Error::Config(format!(
            "growth margin {} is below 20ν = {}",
            params.growth,
            20 * nu
        )));
    }
    let cap = 1u128 << params.width_cap_bits.min(126);
    let mut freqs: Vec<Freq> = Vec::with_capacity(nu - 1);
    for n in 2..=nu {
        let sector = &sectors[sigma.inverse(n) - 2];
        let shape = SectorShape::new(sector)?;
        let (bx, by) = spectrum_box(&freqs, &factors[n - 2])?;
        let mut step = 1u128;
        let mut lower = 1u128;
        if n >= 3 {
            let par = freqs[parent(n)? - 2];
            let pp = abs(par.p);
            step = 2 * pp;
            let l1 = par.l1();
            lower = lower.max(
                params
                    .growth
                    .checked_mul(l1)
                    .ok_or_else(|| Error::Overflow("growth bound".into()))?
                    + 1,
            );
            if params.osc_ratio > 0.0 {
                lower = lower.max((params.osc_ratio * TAU * l1 as f64).ceil() as u128);
            }
            if params.mode == Divisibility::Chain {
                let prev = abs(freqs[n - 3].p);
                step = lcm_u128(step, prev)?;
                lower = lower.max(prev + 1);
                let root = ((m as f64).sqrt() * prev as f64).floor() as u128;
                lower = lower.max(root.saturating_sub(1));
            }
        }
        let est = shape.fit_estimate(bx, by);
        let start = lower.max((est * (1.0 - 1e-9)).max(0.0) as u128);
        let mut p = ceil_div(start.max(1), step) * step;
        let chosen = loop {
            if p >= cap {
                return Err(Error::Overflow(format!(
                    "p_{n} would exceed 2^{}; reduce m or the degree budget",
                    params.width_cap_bits
                )));
            }
            let chain_ok = params.mode != Divisibility::Chain || n == 2 || {
                let prev = abs(freqs[n - 3].p);
                p * p >= m as u128 * prev * prev
            };
            if chain_ok && p >= lower {
                let c = shape.centre(p)?;
                if shape.float_fits(c, bx, by) && box_in_sector(sector, c, bx, by)? {
                    break c;
                }
            }
            p += step;
        };
        freqs.push(chosen);
    }
    let last = abs(freqs[nu - 2].p);
    let mut k = 2u128;
    while k * k <= m as u128 {
        k += 1;
    }
    let p_next = last
        .checked_mul(k)
        .ok_or_else(|| Error::Overflow("p_{ν+1}".into()))?;
    let s = FreqSchedule {
        m,
        mode: params.mode,
        growth: params.growth,
        freqs,
        p_next,
    };
    s.validate()?;
    Ok(s)
}

/// Nodes whose frequencies enter `f_n`: every `k ∈ chain(n)`, `k ≥ 3`,
/// contributes a factor in the phase of `k̄`.
pub fn factor_nodes(n: usize) -> Vec<(usize, usize)> {
    chain(n)
        .into_iter()
        .filter(|&k| k >= 3)
        .map(|k| (k, parent(k).expect("k ≥ 3")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regions::{rat, Direction};

    fn second_quadrant(m: u32) -> Vec<Sector> {
        // slopes 1 - 1/(4l) between consecutive sectors
        let t = |l: usize| {
            if l == 0 {
                rat(0, 1)
            } else {
                rat(4 * l as i128 - 1, 4 * l as i128)
            }
        };
        (2..=nu(m))
            .map(|l| {
                Sector::new(
                    Direction::new(rat(-1, 1), t(l)).unwrap(),
                    Some(Direction::new(rat(-1, 1), t(l - 1)).unwrap()),
                    Freq::ZERO,
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn chain_schedule_is_valid() {
        let m = 2;
        let params = ScheduleParams {
            m,
            mode: Divisibility::Chain,
            growth: 80,
            osc_ratio: 0.0,
            width_cap_bits: 120,
        };
        let factors: Vec<Vec<(usize, u32)>> = (2..=nu(m))
            .map(|n| factor_nodes(n).into_iter().map(|(_, b)| (b, 3)).collect())
            .collect();
        let sectors = second_quadrant(m);
        let s =
            schedule_frequencies(&params, &sectors, &Rearrangement::identity(m), &factors).unwrap();
        s.validate().unwrap();
        for n in 2..=nu(m) {
            let (bx, by) = spectrum_box(s.freqs(), &factors[n - 2]).unwrap();
            assert!(box_in_sector(&sectors[n - 2], s.freq(n), bx, by).unwrap());
        }
        assert_eq!(s.abs_p(3) % (2 * s.abs_p(2)), 0);
        assert_eq!(s.abs_p(4) % s.abs_p(3), 0);
    }

    #[test]
    fn explicit_frequencies_checked() {
        let f = |p, q| Freq::new(p, q).unwrap();
        assert!(FreqSchedule::from_freqs(2, vec![f(-4, 1), f(-16, 3), f(-16, 5)], 32).is_ok());
        assert!(FreqSchedule::from_freqs(2, vec![f(-4, 1), f(-12, 3), f(-16, 5)], 32).is_err());
    }
}
