//! Lazy membership in the sets `E_n`, `U_n`, `V_n` and the functions `a_n`.
//!
//! Every set is a union of squares of `Q_P` (side `2π/P`). Membership at a
//! rational point is decided by walking down the tree from the root: the
//! only child that can contain the point is the one whose sign matches
//! `cos φ_n` there, and its square is accepted or rejected by exact
//! phase-interval tests on the closed square.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{Signed, ToPrimitive};
use rayon::prelude::*;

use super::schedule::FreqSchedule;
use crate::exact_eval::{character, phase_residue, Freq, RationalPoint};
use crate::tree::{chain, depth, parent, sign};
use crate::{Error, Result};

/// Which of the three set systems is meant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SetRule {
    /// Extra margin: node `n` requires `s_k·cos φ_{k̄} > κ(1 + d(n) − d(k))`
    /// on its square for every `k` on its chain. `κ = 0` is the plain rule.
    pub kappa: f64,
    /// Cap on `|Σ_{k≤n̄} a_k + e^{iφ_n}/√m|` over the square; `None` is `+∞`.
    pub gamma: Option<f64>,
}

impl SetRule {
    /// The `F_n`, `b_n` system (no cap).
    pub const B: SetRule = SetRule {
        kappa: 0.0,
        gamma: None,
    };

    pub fn capped(gamma: f64) -> SetRule {
        SetRule {
            kappa: 0.0,
            gamma: Some(gamma),
        }
    }

    pub fn shrunk(kappa: f64, gamma: Option<f64>) -> SetRule {
        SetRule { kappa, gamma }
    }
}

/// Square `(i, j)` of `Q_p` containing `pt`.
pub fn square_index(pt: RationalPoint, p: u128) -> Result<(u128, u128)> {
    if p == 0 || !pt.n.is_multiple_of(p) {
        return Err(Error::Config(format!(
            "lattice denominator {} is not divisible by {p}",
            pt.n
        )));
    }
    let c = pt.n / p;
    Ok((pt.ax / c, pt.ay / c))
}

/// Phase of `f` over the closed square `(i, j)` of `Q_p`, in units of
/// `2π/p`: the interval `[r, r + w]` with `r` reduced mod `p`.
pub fn square_phase(f: Freq, i: u128, j: u128, p: u128) -> (u128, u128) {
    let w = f.l1();
    let lo = |x: i128| if x < 0 { x } else { 0 };
    let fast = (|| {
        let a = f.p.checked_mul(i128::try_from(i).ok()?)?;
        let b = f.q.checked_mul(i128::try_from(j).ok()?)?;
        a.checked_add(b)?.checked_add(lo(f.p))?.checked_add(lo(f.q))
    })();
    let r = match (fast, i128::try_from(p)) {
        (Some(k), Ok(pi)) => k.rem_euclid(pi) as u128,
        _ => {
            let k = BigInt::from(f.p) * BigInt::from(i)
                + BigInt::from(f.q) * BigInt::from(j)
                + lo(f.p)
                + lo(f.q);
            let pb = BigInt::from(p);
            let r = ((k % &pb) + &pb) % &pb;
            r.abs().to_u128().expect("residue below modulus")
        }
    };
    (r, w)
}

/// `cos > 0` on the whole phase interval `[r, r+w]` (units `2π/p`).
fn all_pos(r: u128, w: u128, p: u128) -> bool {
    4 * (r + w) < p || (4 * r > 3 * p && 4 * (r + w) < 5 * p)
}

fn all_neg(r: u128, w: u128, p: u128) -> bool {
    4 * r > p && 4 * (r + w) < 3 * p
}

fn all_nonpos(r: u128, w: u128, p: u128) -> bool {
    4 * r >= p && 4 * (r + w) <= 3 * p
}

fn all_nonneg(r: u128, w: u128, p: u128) -> bool {
    4 * (r + w) <= p || (4 * r >= 3 * p && 4 * (r + w) <= 5 * p)
}

/// `s·cos > 0` everywhere on the interval.
pub fn signed_cos_positive(s: i32, r: u128, w: u128, p: u128) -> bool {
    if s > 0 {
        all_pos(r, w, p)
    } else {
        all_neg(r, w, p)
    }
}

/// `s·cos ≤ 0` everywhere on the interval.
pub fn signed_cos_nonpositive(s: i32, r: u128, w: u128, p: u128) -> bool {
    if s > 0 {
        all_nonpos(r, w, p)
    } else {
        all_nonneg(r, w, p)
    }
}

/// Rounding slack, in turns, for floating-point threshold decisions.
const SLACK: f64 = 1e-12;

/// `s·cos > c` on the interval, for `0 < c < 1`. `None` when the answer is
/// within rounding slack of the boundary.
pub fn signed_cos_above(s: i32, c: f64, r: u128, w: u128, p: u128) -> Option<bool> {
    let mut u0 = r as f64 / p as f64;
    if s < 0 {
        u0 += 0.5;
    }
    u0 = u0.rem_euclid(1.0);
    let width = w as f64 / p as f64;
    let a = c.acos() / TAU;
    let lo = if u0 < 0.5 { u0 } else { u0 - 1.0 };
    let hi = lo + width;
    let margin = (lo + a).min(a - hi);
    if margin > SLACK {
        Some(true)
    } else if margin < -SLACK {
        Some(false)
    } else {
        None
    }
}

/// Sign class of `cos` at an exact phase residue `r/n`.
fn cos_class(r: u128, n: u128) -> i32 {
    let (r4, n3) = (4 * r, 3 * n);
    if r4 < n || r4 > n3 {
        1
    } else if r4 > n && r4 < n3 {
        -1
    } else {
        0
    }
}

/// Membership oracle for one set system over a fixed schedule.
#[derive(Clone, Debug)]
pub struct TreeSets {
    sched: Arc<FreqSchedule>,
    rule: SetRule,
    inv_sqrt_m: f64,
}

impl TreeSets {
    pub fn new(sched: Arc<FreqSchedule>, rule: SetRule) -> Result<Self> {
        if !(0.0..1.0).contains(&rule.kappa) || rule.kappa * (sched.m.max(2) - 1) as f64 >= 1.0 {
            return Err(Error::Config(format!(
                "margin κ={} must satisfy κ(m-1) < 1",
                rule.kappa
            )));
        }
        if let Some(g) = rule.gamma {
            if !(g > 0.0) {
                return Err(Error::Config(format!("γ must be positive, got {g}")));
            }
        }
        let inv_sqrt_m = 1.0 / (sched.m as f64).sqrt();
        Ok(TreeSets {
            sched,
            rule,
            inv_sqrt_m,
        })
    }

    pub fn schedule(&self) -> &Arc<FreqSchedule> {
        &self.sched
    }

    pub fn rule(&self) -> SetRule {
        self.rule
    }

    pub fn m(&self) -> u32 {
        self.sched.m
    }

    pub fn nu(&self) -> usize {
        self.sched.nu()
    }

    fn check_lattice(&self, pt: RationalPoint) -> Result<()> {
        if pt.n >= 1 << 124 {
            return Err(Error::Config(
                "membership needs denominators below 2^124".into(),
            ));
        }
        Ok(())
    }

    /// Whether the cap of the second defining condition can bind at node `n`:
    /// the sum there has at most `d(n)+1` unit terms of size `1/√m`.
    pub fn cap_vacuous(&self, n: usize) -> bool {
        match self.rule.gamma {
            None => true,
            Some(g) => g >= (depth(n) + 1) as f64 * self.inv_sqrt_m,
        }
    }

    /// Own conditions of square `(i, j)` of `Q_{p_n}`, assuming its parent
    /// square lies in `E_{n̄}`.
    pub fn square_in(&self, n: usize, i: u128, j: u128) -> Result<bool> {
        let p = self.sched.abs_p(n);
        let dn = depth(n);
        let kappa = self.rule.kappa;
        for k in chain(n).into_iter().filter(|&k| k >= 3) {
            if kappa == 0.0 && k != n {
                // already implied by the parent square
                continue;
            }
            let base = self.sched.freq(parent(k)?);
            let (r, w) = square_phase(base, i, j, p);
            if 2 * w >= p {
                return Err(Error::Indeterminate {
                    n,
                    i,
                    j,
                    reason: "phase interval wider than half a turn".into(),
                });
            }
            let ok = if kappa == 0.0 {
                signed_cos_positive(sign(k), r, w, p)
            } else {
                let c = kappa * (1 + dn - depth(k)) as f64;
                signed_cos_above(sign(k), c, r, w, p).ok_or_else(|| Error::Indeterminate {
                    n,
                    i,
                    j,
                    reason: format!("sign margin {c} for node {k} within rounding"),
                })?
            };
            if !ok {
                return Ok(false);
            }
        }
        if !self.cap_vacuous(n) {
            return self.cap_holds(n, i, j);
        }
        Ok(true)
    }

    /// Decides `sup_δ |Σ_{k ∈ chain(n̄)} a_k + e^{iφ_n}/√m| ≤ γ`.
    ///
    /// Over the square the phase `φ_n` sweeps a full turn along `x`, so the
    /// supremum lies within `osc` of `|B(c)| + 1/√m`, where `B` is the chain
    /// sum and `c` the centre.
    fn cap_holds(&self, n: usize, i: u128, j: u128) -> Result<bool> {
        let gamma = self.rule.gamma.expect("finite cap");
        let p = self.sched.abs_p(n);
        let centre = RationalPoint::new(2 * i + 1, 2 * j + 1, 2 * p)?;
        let mut b = Complex64::new(0.0, 0.0);
        let mut osc = 0.0;
        for k in chain(parent(n)?) {
            let f = self.sched.freq(k);
            b += character(f, centre);
            osc += std::f64::consts::PI * f.l1() as f64 / p as f64;
        }
        let mid = (b.norm() + 1.0) * self.inv_sqrt_m;
        let osc = osc * self.inv_sqrt_m + 1e-12;
        if mid + osc <= gamma {
            Ok(true)
        } else if mid - osc > gamma {
            Ok(false)
        } else {
            Err(Error::Indeterminate {
                n,
                i,
                j,
                reason: format!("cap γ={gamma} within {osc:.3e} of the square supremum"),
            })
        }
    }

    /// Deepest node whose set contains `pt` (2 if none below the root).
    pub fn path_end(&self, pt: RationalPoint) -> Result<usize> {
        self.check_lattice(pt)?;
        let m = self.sched.m;
        let mut n = 2;
        loop {
            if depth(n) + 1 >= m {
                return Ok(n);
            }
            let r = phase_residue(self.sched.freq(n), pt);
            let child = match cos_class(r, pt.n) {
                1 => 2 * n - 1,
                -1 => 2 * n,
                _ => return Ok(n),
            };
            let (i, j) = square_index(pt, self.sched.abs_p(child))?;
            if self.square_in(child, i, j)? {
                n = child;
            } else {
                return Ok(n);
            }
        }
    }

    /// Nodes whose sets contain `pt`, root first.
    pub fn path(&self, pt: RationalPoint) -> Result<Vec<usize>> {
        Ok(chain(self.path_end(pt)?))
    }

    pub fn membership(&self, n: usize, pt: RationalPoint) -> Result<bool> {
        if n < 2 {
            return Err(Error::Config(format!("node index {n} below 2")));
        }
        if n > self.nu() {
            return Ok(false);
        }
        if n == 2 {
            return Ok(true);
        }
        let end = self.path_end(pt)?;
        Ok(end >= n && chain(end).contains(&n))
    }

    /// `(pt ∈ U_n, pt ∈ V_n)`: the square of `Q_{p_n}` at `pt` lies in
    /// `E_{n̄}`, and `s(n)·cos φ_{n̄}` is positive on all of its closure
    /// (`U`) or somewhere on it (`V`).
    pub fn membership_uv(&self, n: usize, pt: RationalPoint) -> Result<(bool, bool)> {
        if n == 2 {
            return Ok((true, true));
        }
        if n > self.nu() {
            return Ok((false, false));
        }
        let pb = parent(n)?;
        if !self.membership(pb, pt)? {
            return Ok((false, false));
        }
        let p = self.sched.abs_p(n);
        let (i, j) = square_index(pt, p)?;
        let (r, w) = square_phase(self.sched.freq(pb), i, j, p);
        let s = sign(n);
        Ok((
            signed_cos_positive(s, r, w, p),
            !signed_cos_nonpositive(s, r, w, p),
        ))
    }

    /// `a_n(pt) = 1_{E_n}(pt)·e^{iφ_n(pt)}/√m`.
    pub fn eval(&self, n: usize, pt: RationalPoint) -> Result<Complex64> {
        if self.membership(n, pt)? {
            Ok(character(self.sched.freq(n), pt) * self.inv_sqrt_m)
        } else {
            Ok(Complex64::new(0.0, 0.0))
        }
    }

    /// Nonzero values `(n, a_n(pt))` along the path, root first.
    pub fn values(&self, pt: RationalPoint) -> Result<Vec<(usize, Complex64)>> {
        Ok(self
            .path(pt)?
            .into_iter()
            .map(|n| (n, character(self.sched.freq(n), pt) * self.inv_sqrt_m))
            .collect())
    }

    /// Path ends for many points, in parallel.
    pub fn path_ends(&self, pts: &[RationalPoint]) -> Result<Vec<usize>> {
        pts.par_iter().map(|&pt| self.path_end(pt)).collect()
    }
}

/// `max_l |Σ_{j≤l} v_{order[j]}|` where `values` holds the nonzero
/// entries `(n, v_n)`; `order` lists nodes in summation order.
pub fn max_prefix_in_order(values: &[(usize, Complex64)], order: &[usize]) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut best = 0.0f64;
    for &n in order {
        if let Some((_, v)) = values.iter().find(|(k, _)| *k == n) {
            acc += v;
            best = best.max(acc.norm());
        }
    }
    best
}

/// Same as [`max_prefix_in_order`] for the index order `2, 3, …`.
pub fn max_prefix_index_order(values: &[(usize, Complex64)]) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut best = 0.0f64;
    let mut sorted: Vec<_> = values.to_vec();
    sorted.sort_by_key(|(n, _)| *n);
    for (_, v) in sorted {
        acc += v;
        best = best.max(acc.norm());
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_tests() {
        // p = 16, interval [1, 2] is inside (-4, 4)
        assert!(all_pos(1, 1, 16));
        assert!(!all_pos(3, 1, 16));
        assert!(all_pos(13, 2, 16));
        assert!(all_neg(5, 2, 16));
        assert!(!all_neg(4, 1, 16));
        assert!(all_nonpos(4, 8, 16));
        assert!(all_nonneg(12, 8, 16));
        assert_eq!(signed_cos_above(1, 0.5, 0, 1, 16), Some(true));
        assert_eq!(signed_cos_above(1, 0.9, 1, 1, 16), Some(false));
        assert_eq!(signed_cos_above(-1, 0.5, 8, 1, 16), Some(true));
    }

    #[test]
    fn square_phase_handles_signs() {
        let f = Freq::new(-3, 2).unwrap();
        // φ/(2π/p) over [i, i+1]×[j, j+1] ranges over [-3(i+1) + 2j, -3i + 2(j+1)]
        let (r, w) = square_phase(f, 1, 1, 16);
        assert_eq!(w, 5);
        assert_eq!(r, (-6i128 + 2).rem_euclid(16) as u128);
    }

    #[test]
    fn small_tree_membership() {
        let f = |p, q| Freq::new(p, q).unwrap();
        let sched = Arc::new(
            FreqSchedule::from_freqs(2, vec![f(-1, 0), f(-64, 1), f(-64, 3)], 128).unwrap(),
        );
        let sets = TreeSets::new(sched, SetRule::B).unwrap();
        // cos(-x) > 0 near x = 0, so node 3 owns the square there
        let pt = RationalPoint::new(1, 5, 256).unwrap();
        assert_eq!(sets.path(pt).unwrap(), vec![2, 3]);
        let pt = RationalPoint::new(128, 5, 256).unwrap();
        assert_eq!(sets.path(pt).unwrap(), vec![2, 4]);
        assert!(!sets.membership(5, pt).unwrap());
    }
}
