//! Conditional averages of `b_n` along `x` and the weak-type constant of
//! the maximal partial sums of the `b`-system.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::sets::{max_prefix_index_order, TreeSets};
use crate::exact_eval::{character, Freq, RationalPoint};
use crate::mixing::{MeasureEstimate, TORUS};
use crate::{Error, Result};

/// `f_n = E(b_n | x-intervals of length 2π/p_{n+1})` at `pt`.
///
/// On such an interval `1_{F_n}` is constant (`p_n | p_{n+1}`), so the
/// average is the exact integral of the character:
/// `1_F·e^{iq_n y}·e^{ip_n x_0}(e^{ip_n h} − 1)/(i p_n h)/√m` with `h = 2π/p_{n+1}`.
pub fn martingale_value(sets: &TreeSets, n: usize, pt: RationalPoint) -> Result<Complex64> {
    let sched = sets.schedule();
    let next = sched.abs_p(n + 1);
    if !pt.n.is_multiple_of(next) {
        return Err(Error::Config(format!(
            "lattice {} does not resolve p_{} = {next}",
            pt.n,
            n + 1
        )));
    }
    if !sets.membership(n, pt)? {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let f = sched.freq(n);
    let i = pt.ax / (pt.n / next);
    let ey = character(Freq::new(0, f.q)?, pt);
    let ex0 = character(Freq::new(f.p, 0)?, RationalPoint::new(i, 0, next)?);
    let eh = character(Freq::new(f.p, 0)?, RationalPoint::new(1, 0, next)?);
    let ph = TAU * f.p as f64 / next as f64;
    let avg = (eh - 1.0) / Complex64::new(0.0, ph);
    Ok(ey * ex0 * avg / (sets.m() as f64).sqrt())
}

/// Sum of `f_n` over the consecutive `x`-intervals of length `2π/p_{n+1}`
/// that make up the `x`-interval of length `2π/p_n` at `pt`, times the
/// interval length; vanishes for a martingale difference.
pub fn interval_integral(sets: &TreeSets, n: usize, pt: RationalPoint) -> Result<Complex64> {
    let sched = sets.schedule();
    let (pn, next) = (sched.abs_p(n), sched.abs_p(n + 1));
    let cells = next / pn;
    if cells > 1 << 22 {
        return Err(Error::Budget(format!(
            "{cells} subintervals is too many to sum"
        )));
    }
    let step = pt.n / next;
    let start = (pt.ax / (pt.n / pn)) * (pt.n / pn);
    let mut acc = Complex64::new(0.0, 0.0);
    for c in 0..cells {
        let q = RationalPoint::new(start + c * step, pt.ay, pt.n)?;
        acc += martingale_value(sets, n, q)?;
    }
    Ok(acc * (TAU / next as f64))
}

/// The weak-type curve `λ ↦ λ·|{max_n |Σ_{k≤n} b_k| > λ}|`.
#[derive(Clone, Debug, Serialize)]
pub struct WeakCurve {
    pub lambdas: Vec<f64>,
    pub level_sets: Vec<MeasureEstimate>,
    /// `λ·(value + 2·stderr)` per grid point.
    pub products: Vec<f64>,
    pub c_est: f64,
    /// Same curve for the martingale surrogate.
    pub surrogate_products: Vec<f64>,
}

/// Log-spaced grid of `count` values in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![hi];
    }
    (0..count)
        .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
        .collect()
}

/// Estimates `c = sup_λ λ·|{max_n |Σ_{k≤n} b_k| > λ}|` on a grid, with the
/// conservative `+2·stderr` inflation.
pub fn estimate_weak_constant(
    sets: &TreeSets,
    pts: &[RationalPoint],
    grid: &[f64],
    seed: u64,
) -> Result<WeakCurve> {
    if sets.rule().gamma.is_some() || sets.rule().kappa != 0.0 {
        return Err(Error::Config(
            "the weak-type estimate needs the uncapped b-system".into(),
        ));
    }
    let nu = sets.nu();
    let maxima: Vec<(f64, f64)> = pts
        .par_iter()
        .map(|&pt| {
            let vals = sets.values(pt)?;
            let direct = max_prefix_index_order(&vals);
            let mut acc = Complex64::new(0.0, 0.0);
            let mut sur = 0.0f64;
            for n in 2..=nu {
                acc += martingale_value(sets, n, pt)?;
                sur = sur.max(acc.norm());
            }
            Ok((direct, sur))
        })
        .collect::<Result<_>>()?;
    let mut level_sets = Vec::with_capacity(grid.len());
    let mut products = Vec::with_capacity(grid.len());
    let mut surrogate_products = Vec::with_capacity(grid.len());
    for &lam in grid {
        let hits = maxima.iter().filter(|(d, _)| *d > lam).count();
        let est = MeasureEstimate::from_counts(hits, pts.len(), seed);
        products.push(lam * (est.value + 2.0 * est.stderr));
        level_sets.push(est);
        let shits = maxima.iter().filter(|(_, s)| *s > lam).count();
        surrogate_products.push(lam * shits as f64 / pts.len() as f64 * TORUS);
    }
    let c_est = products.iter().copied().fold(0.0, f64::max);
    Ok(WeakCurve {
        lambdas: grid.to_vec(),
        level_sets,
        products,
        c_est,
        surrogate_products,
    })
}
