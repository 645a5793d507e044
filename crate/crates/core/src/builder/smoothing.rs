//! Smooth approximations of the set indicators by trigonometric polynomials.
//!
//! For the margin system (`κ > 0`) the indicator of `E_n` is sandwiched
//! between pointwise conditions on the ancestor phases: `pt ∈ E_n` forces
//! `s_k cos φ_{k̄} > κ(1 + d(n) − d(k))` for every `k` on the chain, while
//! `pt ∉ E_{n̄}` forces `s_k cos φ_{k̄} ≤ κ(d(n) − d(k)) + κη` for some `k`
//! on the chain of `n̄` (the extra `κη` bounds the drift of `φ_{k̄}` across a
//! square). Each condition is smoothed in one variable by a Jackson kernel,
//! and `f_n` is `1/√m` times the product of the smoothed steps.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::schedule::{factor_nodes, FreqSchedule};
use crate::exact_eval::{phase, Freq, RationalPoint, TrigPoly};
use crate::tree::{depth, nu, sign};
use crate::{Error, Result};

/// Coefficients of the Jackson kernel `c·(sin(Dt/2)/sin(t/2))^4`,
/// normalised to mean one; index `k` holds the `k`-th coefficient, `k ≥ 0`.
pub fn jackson_coefficients(d: u32) -> Vec<f64> {
    let d = d.max(1) as i64;
    let fejer = |k: i64| {
        if k.abs() < d {
            1.0 - k.abs() as f64 / d as f64
        } else {
            0.0
        }
    };
    let deg = 2 * (d - 1);
    let norm: f64 = (-(d - 1)..d).map(|l| fejer(l) * fejer(l)).sum();
    (0..=deg)
        .map(|k| (-(d - 1)..d).map(|l| fejer(l) * fejer(k - l)).sum::<f64>() / norm)
        .collect()
}

/// A smoothed step `t ↦ 1{s·cos t > c}` with a guaranteed transition band.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SmoothStep {
    pub sign: i32,
    /// Below this `s·cos t` the step must be at most `tol`.
    pub c_lo: f64,
    /// At or above this `s·cos t` the step must be at least `1 - tol`.
    pub c_hi: f64,
    pub tol: f64,
    /// Real cosine coefficients: `Ψ(t) = a_0 + 2 Σ_{k≥1} a_k cos(k t)`.
    pub coeffs: Vec<f64>,
}

impl SmoothStep {
    /// Doubles the kernel parameter until the rigorous grid check passes.
    pub fn build(sign: i32, c_lo: f64, c_hi: f64, tol: f64, max_degree: u32) -> Result<Self> {
        if !(-1.0 < c_lo && c_lo < c_hi && c_hi < 1.0) || !(tol > 0.0 && tol < 0.5) {
            return Err(Error::Config(format!(
                "bad step thresholds c_lo={c_lo}, c_hi={c_hi}, tol={tol}"
            )));
        }
        let w = 0.5 * (c_lo.acos() + c_hi.acos());
        let mut d = 4u32;
        loop {
            if 2 * (d - 1) > max_degree {
                return Err(Error::Budget(format!(
                    "smoothing degree budget {max_degree} exhausted for band [{c_lo:.4}, {c_hi:.4}] at tolerance {tol:.4}"
                )));
            }
            let jk = jackson_coefficients(d);
            let coeffs: Vec<f64> = jk
                .iter()
                .enumerate()
                .map(|(k, j)| {
                    let arc = if k == 0 {
                        w / PI
                    } else {
                        (k as f64 * w).sin() / (PI * k as f64)
                    };
                    // centred at π for the negative sign: e^{-ikπ} = (-1)^k
                    let rot = if sign < 0 && k % 2 == 1 { -1.0 } else { 1.0 };
                    arc * rot * j
                })
                .collect();
            let step = SmoothStep {
                sign,
                c_lo,
                c_hi,
                tol,
                coeffs,
            };
            if step.verify() {
                return Ok(step);
            }
            d *= 2;
        }
    }

    pub fn degree(&self) -> u32 {
        (self.coeffs.len() - 1) as u32
    }

    pub fn eval(&self, t: f64) -> f64 {
        let z = Complex64::new(t.cos(), t.sin());
        self.eval_unit(z)
    }

    /// Value at `t` given `z = e^{it}`.
    pub fn eval_unit(&self, z: Complex64) -> f64 {
        let mut zk = Complex64::new(1.0, 0.0);
        let mut acc = self.coeffs[0];
        for a in &self.coeffs[1..] {
            zk *= z;
            acc += 2.0 * a * zk.re;
        }
        acc
    }

    /// `sup |Ψ'|` bound `2 Σ k|a_k|`.
    pub fn lipschitz(&self) -> f64 {
        2.0 * self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| k as f64 * a.abs())
            .sum::<f64>()
    }

    /// Grid check with Lipschitz padding: every grid cell that may meet the
    /// inner region has `Ψ ≥ 1 − tol` and every cell that may meet the outer
    /// region has `Ψ ≤ tol`.
    pub fn verify(&self) -> bool {
        let cells = (256 * self.coeffs.len()).max(4096);
        let h = PI / cells as f64;
        let pad = self.lipschitz() * h + 1e-12;
        let s = self.sign as f64;
        (0..cells).all(|g| {
            let t = (g as f64 + 0.5) * TAU / cells as f64;
            let v = self.eval(t);
            let sc = s * t.cos();
            let inner_ok = sc + h < self.c_hi || v - pad >= 1.0 - self.tol;
            let outer_ok = sc - h > self.c_lo || v + pad <= self.tol;
            inner_ok && outer_ok
        })
    }

    /// `Ψ(px + qy)` as a polynomial in two variables.
    pub fn along(&self, f: Freq) -> Result<TrigPoly> {
        let mut terms = Vec::with_capacity(2 * self.coeffs.len());
        for (k, a) in self.coeffs.iter().enumerate() {
            let c = Complex64::new(*a, 0.0);
            let g = f.checked_scale(k as i128)?;
            terms.push((g, c));
            if k > 0 {
                terms.push((g.neg(), c));
            }
        }
        Ok(TrigPoly::from_terms(terms))
    }
}

/// `sup_t |a(t)| + |b(t)|` from above: grid maximum plus Lipschitz padding.
pub fn pair_sup(a: &SmoothStep, b: &SmoothStep) -> f64 {
    let cells = 256 * a.coeffs.len().max(b.coeffs.len()).max(16);
    let h = TAU / cells as f64;
    let grid = (0..cells)
        .map(|g| {
            let t = g as f64 * h;
            a.eval(t).abs() + b.eval(t).abs()
        })
        .fold(0.0, f64::max);
    grid + 0.5 * h * (a.lipschitz() + b.lipschitz()) + 1e-12
}

/// One factor of `f_n`: the step for node `k`'s condition, in the phase of
/// its parent `base`.
#[derive(Clone, Debug)]
pub struct Factor {
    pub node: usize,
    pub base: usize,
    pub step: Arc<SmoothStep>,
}

/// Smoothing data of all `f_n`, independent of the frequencies.
#[derive(Clone, Debug)]
pub struct SmoothingPlan {
    pub m: u32,
    pub kappa: f64,
    pub eta: f64,
    /// `factors[n-2]` are the factors of `f_n`.
    pub factors: Vec<Vec<Factor>>,
}

impl SmoothingPlan {
    /// Steps with thresholds `c_lo = κΔ + κη`, `c_hi = κ(Δ+1)` where `Δ` is
    /// the depth gap, and tolerance `0.9·√m/(ν·F)` with `F` factors, so
    /// that `|f_n − 1_{E_n}/√m| ≤ 0.9/ν` where it matters.
    pub fn new(m: u32, kappa: f64, eta: f64, max_degree: u32) -> Result<Self> {
        if !(kappa > 0.0) || kappa * (m.max(2) - 1) as f64 >= 1.0 || !(eta > 0.0 && eta < 1.0) {
            return Err(Error::Config(format!(
                "smoothing needs 0 < κ(m-1) < 1 and 0 < η < 1 (κ={kappa}, η={eta})"
            )));
        }
        let nu = nu(m);
        let mut cache: HashMap<(i32, u32, usize), Arc<SmoothStep>> = HashMap::new();
        let mut factors = Vec::with_capacity(nu - 1);
        for n in 2..=nu {
            let nodes = factor_nodes(n);
            let count = nodes.len();
            let mut fs = Vec::with_capacity(count);
            for (k, base) in nodes {
                let gap = depth(n) - depth(k);
                let key = (sign(k), gap, count);
                let step = match cache.get(&key) {
                    Some(s) => s.clone(),
                    None => {
                        let tol = 0.9 * (m as f64).sqrt() / (nu as f64 * count as f64);
                        let c_lo = kappa * gap as f64 + kappa * eta;
                        let c_hi = kappa * (gap + 1) as f64;
                        let s = Arc::new(SmoothStep::build(
                            sign(k),
                            c_lo,
                            c_hi,
                            tol.min(0.25),
                            max_degree,
                        )?);
                        cache.insert(key, s.clone());
                        s
                    }
                };
                fs.push(Factor {
                    node: k,
                    base,
                    step,
                });
            }
            factors.push(fs);
        }
        Ok(SmoothingPlan {
            m,
            kappa,
            eta,
            factors,
        })
    }

    /// `(base node, degree)` per factor, as the scheduler needs them.
    pub fn degrees(&self) -> Vec<Vec<(usize, u32)>> {
        self.factors
            .iter()
            .map(|fs| fs.iter().map(|f| (f.base, f.step.degree())).collect())
            .collect()
    }

    /// The drift bound the scheduler must guarantee: `|p_n| ≥ osc_ratio·2π(|p_{n̄}|+|q_{n̄}|)`.
    pub fn osc_ratio(&self) -> f64 {
        1.0 / (self.kappa * self.eta)
    }

    /// Upper bound for `Σ_n |f_n|` at every point.
    ///
    /// In generation `g` every `f_n` carries one factor per ancestor depth,
    /// and the two children of a node carry steps of opposite sign in the
    /// same phase. Summing the deepest level first gives
    /// `Σ_{d(n)=g} |f_n| ≤ Π_gap sup(|Ψ_+| + |Ψ_−|) / √m`.
    pub fn abs_sum_bound(&self) -> f64 {
        let mut total = 0.0;
        for g in 0..self.m {
            let first = (1usize << g) + 1;
            let last = 1usize << (g + 1);
            let (plus, minus) = if g == 0 {
                (&self.factors[0], &self.factors[0])
            } else {
                (&self.factors[first - 2], &self.factors[last - 2])
            };
            let prod: f64 = plus
                .iter()
                .zip(minus)
                .map(|(a, b)| pair_sup(&a.step, &b.step))
                .product();
            total += prod;
        }
        total / (self.m as f64).sqrt()
    }

    /// `f_n(pt)` from the factored form.
    pub fn eval(&self, sched: &FreqSchedule, n: usize, pt: RationalPoint) -> f64 {
        let v: f64 = self.factors[n - 2]
            .iter()
            .map(|f| f.step.eval(phase(sched.freq(f.base), pt)))
            .product();
        v / (self.m as f64).sqrt()
    }

    /// `f_n` as an explicit polynomial.
    pub fn poly(&self, sched: &FreqSchedule, n: usize) -> Result<TrigPoly> {
        let mut acc = TrigPoly::constant(Complex64::new(1.0 / (self.m as f64).sqrt(), 0.0));
        for f in &self.factors[n - 2] {
            acc = acc.mul(&f.step.along(sched.freq(f.base))?)?;
        }
        Ok(acc)
    }
}

/// Smooth approximation of `scale·1_E` for a union of squares of `Q_p`
/// given by indices `(i, j)`.
///
/// The indicator of the squares enlarged by `margin/2` on every side is
/// convolved with a product Jackson kernel; the result is within
/// `tol·scale` of `scale` on `E` and of `0` at sup-distance `≥ margin`
/// from `E`, checked on a `grid × grid` lattice. Returns the polynomial and
/// the kernel degree.
pub fn smooth_square_union(
    squares: &[(u128, u128)],
    p: u128,
    margin: f64,
    scale: f64,
    tol: f64,
    grid: u128,
    max_degree: u32,
) -> Result<(TrigPoly, u32)> {
    if squares.iter().any(|&(i, j)| i >= p || j >= p) {
        return Err(Error::Config("square index outside Q_p".into()));
    }
    if !(margin > 0.0 && margin < PI / p as f64) {
        return Err(Error::Config(
            "margin must be positive and below half a square side".into(),
        ));
    }
    if squares.is_empty() {
        return Ok((TrigPoly::zero(), 0));
    }
    let side = TAU / p as f64;
    let inside = |x: f64, y: f64, pad: f64| {
        squares.iter().any(|&(i, j)| {
            let (x0, y0) = (i as f64 * side - pad, j as f64 * side - pad);
            let dx = (x - x0).rem_euclid(TAU);
            let dy = (y - y0).rem_euclid(TAU);
            dx <= side + 2.0 * pad && dy <= side + 2.0 * pad
        })
    };
    // interval [a, b] coefficient (1/2π)∫ e^{-ikt}
    let interval = |k: i64, a: f64, b: f64| {
        if k == 0 {
            Complex64::new((b - a) / TAU, 0.0)
        } else {
            let kf = k as f64;
            (Complex64::from_polar(1.0, -kf * a) - Complex64::from_polar(1.0, -kf * b))
                / Complex64::new(0.0, TAU * kf)
        }
    };
    let mut d = 4u32;
    loop {
        let deg = 2 * (d - 1);
        if deg > max_degree {
            return Err(Error::Budget(format!(
                "square smoothing exceeded degree {max_degree}"
            )));
        }
        let jk = jackson_coefficients(d);
        let mut terms = Vec::new();
        let deg = deg as i64;
        for kx in -deg..=deg {
            for ky in -deg..=deg {
                let mut c = Complex64::new(0.0, 0.0);
                for &(i, j) in squares {
                    let (x0, y0) = (
                        i as f64 * side - margin / 2.0,
                        j as f64 * side - margin / 2.0,
                    );
                    let w = side + margin;
                    c += interval(kx, x0, x0 + w) * interval(ky, y0, y0 + w);
                }
                let c = c * jk[kx.unsigned_abs() as usize] * jk[ky.unsigned_abs() as usize] * scale;
                if c.norm() > 0.0 {
                    terms.push((Freq::new(kx as i128, ky as i128)?, c));
                }
            }
        }
        let poly = TrigPoly::from_terms(terms);
        let prepared = poly.prepare(grid);
        let ok = (0..grid).all(|a| {
            (0..grid).all(|b| {
                let pt = RationalPoint {
                    ax: a,
                    ay: b,
                    n: grid,
                };
                let (x, y) = pt.coords();
                let v = prepared.eval(pt).re;
                if inside(x, y, 0.0) {
                    (v - scale).abs() <= tol * scale
                } else if !inside(x, y, margin) {
                    v.abs() <= tol * scale
                } else {
                    (-tol * scale..=scale * (1.0 + tol)).contains(&v)
                }
            })
        });
        if ok {
            return Ok((poly, deg as u32));
        }
        d *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jackson_mean_one_and_nonnegative() {
        let c = jackson_coefficients(6);
        assert!((c[0] - 1.0).abs() < 1e-15);
        assert_eq!(c.len(), 11);
        for g in 0..200 {
            let t = g as f64 * TAU / 200.0;
            let v = c[0]
                + 2.0
                    * c[1..]
                        .iter()
                        .enumerate()
                        .map(|(k, a)| a * ((k + 1) as f64 * t).cos())
                        .sum::<f64>();
            assert!(v > -1e-12);
        }
    }

    #[test]
    fn step_separates_band() {
        let s = SmoothStep::build(-1, 0.2, 0.4, 0.05, 2048).unwrap();
        assert!(s.eval(PI) > 0.95);
        assert!(s.eval(0.0) < 0.05);
        assert!(s.eval(PI / 2.0) < 0.05);
    }

    #[test]
    fn root_function_is_constant() {
        let plan = SmoothingPlan::new(3, 0.2, 0.05, 1024).unwrap();
        assert!(plan.factors[0].is_empty());
        assert_eq!(plan.factors[5].len(), 2);
        let f = |p| Freq::new(p, 1).unwrap();
        let sched = FreqSchedule::from_freqs(
            3,
            vec![f(-1), f(-4), f(-4), f(-16), f(-16), f(-16), f(-16)],
            32,
        )
        .unwrap();
        let p = plan.poly(&sched, 2).unwrap();
        assert_eq!(p.len(), 1);
        let pt = RationalPoint::new(3, 7, 32).unwrap();
        let direct = plan.poly(&sched, 6).unwrap().eval(pt).re;
        assert!((direct - plan.eval(&sched, 6, pt)).abs() < 1e-12);
    }
}
