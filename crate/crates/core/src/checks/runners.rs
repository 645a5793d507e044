//! One function per registered check. Each returns a signed margin that is
//! non-negative exactly when the inequality holds; sampled margins already
//! include the `2·stderr` allowance in the conservative direction.

use std::f64::consts::{FRAC_2_PI, PI, TAU};
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;

use super::context::{Context, SystemBundle};
use crate::builder::martingale::{interval_integral, martingale_value};
use crate::builder::sets::{max_prefix_in_order, TreeSets};
use crate::builder::tsystem::{max_prefix, TSystem};
use crate::exact_eval::{character, RationalPoint, TrigPoly};
use crate::mixing::{
    mixing_curve, scan_list, select_dilations, shard_seed, MeasurableSetHandle, MeasureEstimate,
    ScanBudget, TORUS,
};
use crate::regions::{rat, rat_to_f64};
use crate::tree::{chain, depth, parent, random_tree_system, verify_prefix_bound};
use crate::{Error, Result};

/// What a check measured.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub margin: f64,
    pub estimate: Option<f64>,
    pub stderr: Option<f64>,
    pub samples: Option<usize>,
    pub detail: String,
    /// `(file name, contents)` written next to the report.
    pub files: Vec<(String, String)>,
}

impl Outcome {
    fn exact(margin: f64, detail: String) -> Self {
        Outcome {
            margin,
            detail,
            ..Default::default()
        }
    }

    fn sampled(margin: f64, est: &MeasureEstimate, detail: String) -> Self {
        Outcome {
            margin,
            estimate: Some(est.value),
            stderr: Some(est.stderr),
            samples: Some(est.samples),
            detail,
            files: Vec::new(),
        }
    }

    fn with_file(mut self, name: &str, contents: String) -> Self {
        self.files.push((name.to_string(), contents));
        self
    }
}

/// Evaluates `f` at every point in parallel; the first error in point
/// order wins, so failures are reported deterministically.
fn per_point<T: Send>(
    pts: &[RationalPoint],
    f: impl Fn(RationalPoint) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let out: Vec<Result<T>> = pts.par_iter().map(|&p| f(p)).collect();
    out.into_iter().collect()
}

/// `4π²·mean` of a sampled integrand, with its standard error.
fn integral(vals: &[f64], seed: u64) -> MeasureEstimate {
    let n = vals.len();
    let mean = vals.iter().sum::<f64>() / n as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
    MeasureEstimate {
        value: TORUS * mean,
        stderr: TORUS * (var / n as f64).sqrt(),
        samples: n,
        hits: 0,
        seed,
    }
}

fn hits(flags: &[bool], seed: u64) -> MeasureEstimate {
    MeasureEstimate::from_counts(flags.iter().filter(|b| **b).count(), flags.len(), seed)
}

/// `0` for no violations, minus their count otherwise.
fn count_margin(bad: usize) -> f64 {
    if bad == 0 {
        0.0
    } else {
        -(bad as f64)
    }
}

fn sqrt_m(ctx: &Context) -> f64 {
    (ctx.cfg.m as f64).sqrt()
}

// ---------------------------------------------------------------- tree

pub fn tree_parent(ctx: &Context) -> Result<Outcome> {
    let limit = ctx.cfg.parent_limit;
    let bad = (2..=limit)
        .into_par_iter()
        .filter(|&n| parent(2 * n - 1).ok() != Some(n) || parent(2 * n).ok() != Some(n))
        .count();
    Ok(Outcome::exact(
        count_margin(bad),
        format!("n = 2..={limit}: {bad} violations"),
    ))
}

pub fn rearrangement_prefix(ctx: &Context) -> Result<Outcome> {
    let sigma = ctx.sigma()?;
    let (m, side, trials) = (ctx.cfg.m, ctx.cfg.tree_side, ctx.cfg.fresh_trials);
    // seeds disjoint from the search, which uses small offsets of `seed`
    let margins: Vec<Result<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let fam = random_tree_system(m, side, shard_seed(ctx.cfg.seed ^ 0x5EED_F4E5, t))?;
            verify_prefix_bound(&sigma, &fam)
        })
        .collect();
    let margins: Vec<f64> = margins.into_iter().collect::<Result<_>>()?;
    let worst = margins.iter().copied().fold(f64::INFINITY, f64::min);
    let violations = margins.iter().filter(|v| **v < 0.0).count();
    Ok(Outcome::exact(
        worst,
        format!(
            "σ = {:?} ({:?}); {trials} fresh systems × {} points; {violations} with a violation; \
             worst normalized margin {worst:.6}",
            sigma.order,
            sigma.provenance,
            side as usize * side as usize
        ),
    ))
}

pub fn level_set_bound(ctx: &Context) -> Result<Outcome> {
    let b = ctx.rhombus()?;
    let sets = b.sys.a_sets(b.gamma)?;
    let pts = ctx.points(&b.sys, ctx.cfg.samples, 3)?;
    let vals = per_point(&pts, |pt| {
        Ok(sets
            .values(pt)?
            .iter()
            .map(|(_, v)| v.re.abs())
            .sum::<f64>())
    })?;
    let c = crate::tree::level_set_bound(&vals, sqrt_m(ctx), ctx.cfg.seed)?;
    Ok(Outcome::sampled(
        c.margin,
        &c.level_set,
        format!(
            "f = Σ|Re a_n|, ‖f‖₁ = {:.4} ± {:.4}, sup cap √m, bound {:.4}",
            c.l1, c.l1_stderr, c.rhs
        ),
    ))
}

// ---------------------------------------------------------------- mixing

pub fn mixing_limit(ctx: &Context) -> Result<Outcome> {
    let half = rat(1, 2);
    let a = MeasurableSetHandle::rectangle(rat(0, 1), half.clone(), rat(0, 1), half)?;
    let ns = scan_list(ctx.cfg.mixing_linear, ctx.cfg.mixing_max);
    let curve = mixing_curve(&a, &a, &ns, ctx.cfg.mixing_samples, ctx.cfg.seed)?;
    let expect = PI * PI / 4.0;
    let tail = &curve[curve.len().saturating_sub(3)..];
    let worst = tail
        .iter()
        .map(|(_, e)| (e.value - expect).abs() / expect)
        .fold(0.0, f64::max);
    let mut csv = String::from("n,measure,stderr\n");
    for (n, e) in &curve {
        let _ = writeln!(csv, "{n},{},{}", e.value, e.stderr);
    }
    let last = tail.last().expect("non-empty scan").1;
    Ok(Outcome::sampled(
        0.05 - worst,
        &last,
        format!(
            "A = B = [0,π]², |A||B|/4π² = {expect:.6}; last n = {:?}; worst relative deviation {worst:.4}",
            tail.iter().map(|(n, _)| *n).collect::<Vec<_>>()
        ),
    )
    .with_file("mixing_curve.csv", csv))
}

pub fn greedy_dilations(ctx: &Context) -> Result<Outcome> {
    // four rectangles of measure 1.2π² ≥ π²
    let r = |x0, x1, y0, y1| {
        MeasurableSetHandle::rectangle(rat(x0, 20), rat(x1, 20), rat(y0, 20), rat(y1, 20))
    };
    let sets = vec![
        r(0, 12, 0, 10)?,
        r(5, 15, 3, 15)?,
        r(8, 20, 10, 20)?,
        r(2, 14, 6, 16)?,
    ];
    let alpha = 0.25;
    let budget = ScanBudget {
        linear: ctx.cfg.scan_linear,
        max_steps: ctx.cfg.scan_steps,
    };
    let sched = select_dilations(
        &sets,
        alpha,
        ctx.cfg.n0,
        ctx.cfg.samples,
        ctx.cfg.seed,
        budget,
    )?;
    let target = TORUS * (1.0 - (1.0 - alpha).powi(sets.len() as i32));
    let got = *sched.coverage.last().expect("four sets");
    Ok(Outcome::sampled(
        got.lower() - target,
        &got,
        format!(
            "α = 1/4, n = {:?}, target 4π²(1−(3/4)^4) = {target:.4}",
            sched.n
        ),
    ))
}

// ---------------------------------------------------------------- b-system

pub fn pointwise_abs_sum(ctx: &Context) -> Result<Outcome> {
    let b = ctx.rhombus()?;
    let sets = b.sys.b_sets()?;
    let pts = ctx.points(&b.sys, ctx.cfg.samples, 6)?;
    // |b_n| = 1/√m on F_n, so Σ|b_n| = (path length)/√m
    let lens = per_point(&pts, |pt| Ok(sets.path(pt)?.len()))?;
    let kmax = lens.iter().copied().max().unwrap_or(0);
    let m = ctx.cfg.m as usize;
    let bad = lens.iter().filter(|&&k| k > m).count();
    let est = MeasureEstimate::from_counts(bad, pts.len(), ctx.cfg.seed);
    let margin = (m as f64 - kmax as f64) / sqrt_m(ctx);
    Ok(Outcome::sampled(
        margin,
        &est,
        format!(
            "max Σ|b_n| = {kmax}/√m over {} points; {bad} violations",
            pts.len()
        ),
    ))
}

pub fn weak_type_curve(ctx: &Context) -> Result<Outcome> {
    let b = ctx.rhombus()?;
    let c = &b.curve;
    let trivial = TORUS * sqrt_m(ctx);
    let mut csv = String::from("lambda,level_set,stderr,product,surrogate_product\n");
    for i in 0..c.lambdas.len() {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            c.lambdas[i],
            c.level_sets[i].value,
            c.level_sets[i].stderr,
            c.products[i],
            c.surrogate_products[i]
        );
    }
    let margin = if c.c_est.is_finite() {
        trivial - c.c_est
    } else {
        -1.0
    };
    Ok(Outcome {
        margin,
        estimate: Some(c.c_est),
        samples: Some(ctx.cfg.weak_samples),
        detail: format!(
            "c_est = {:.4} (λ·(|level set| + 2·stderr) maximised over {} levels), γ = c_est + 2 = {:.4}; \
             trivial bound 4π²√m = {trivial:.4}",
            c.c_est,
            c.lambdas.len(),
            b.gamma
        ),
        ..Default::default()
    }
    .with_file("weak_curve.csv", csv))
}

pub fn martingale_zero_mean(ctx: &Context) -> Result<Outcome> {
    let b = ctx.rhombus()?;
    let sets = b.sys.b_sets()?;
    let pts = ctx.points(&b.sys, ctx.cfg.interval_points, 8)?;
    let nu = b.sys.nu();
    let sched = sets.schedule().clone();
    let worst = per_point(&pts, |pt| {
        let mut w = 0.0f64;
        for n in 2..=nu {
            let scale = TAU / sched.abs_p(n) as f64 / sqrt_m(ctx);
            w = w.max(interval_integral(&sets, n, pt)?.norm() / scale);
        }
        Ok(w)
    })?
    .into_iter()
    .fold(0.0, f64::max);
    Ok(Outcome::exact(
        1e-9 - worst,
        format!(
            "largest |∫ f_n| over an x-interval of length 2π/p_n, relative to its length/√m: {worst:.3e} \
             ({} points, tolerance 1e-9)",
            pts.len()
        ),
    ))
}

pub fn martingale_closeness(ctx: &Context) -> Result<Outcome> {
    let b = ctx.rhombus()?;
    let sets = b.sys.b_sets()?;
    let pts = ctx.points(&b.sys, ctx.cfg.samples, 9)?;
    let nu = b.sys.nu();
    let worst = per_point(&pts, |pt| {
        let mut w = 0.0f64;
        for n in 2..=nu {
            w = w.max((martingale_value(&sets, n, pt)? - sets.eval(n, pt)?).norm());
        }
        Ok(w)
    })?
    .into_iter()
    .fold(0.0, f64::max);
    let bound = TAU / ctx.cfg.m as f64;
    Ok(Outcome::exact(
        bound - worst,
        format!(
            "max |f_n − b_n| = {worst:.3e} ≤ 2π/m = {bound:.4}, {} points",
            pts.len()
        ),
    ))
}

pub fn martingale_support(ctx: &Context) -> Result<Outcome> {
    let b = ctx.rhombus()?;
    let sets = b.sys.b_sets()?;
    let pts = ctx.points(&b.sys, ctx.cfg.samples, 10)?;
    let nu = b.sys.nu();
    // supp f_n ⊂ F_n, and f_n vanishes nowhere on F_n
    let bad: usize = per_point(&pts, |pt| {
        let mut bad = 0;
        for n in 2..=nu {
            let inside = sets.membership(n, pt)?;
            let nonzero = martingale_value(&sets, n, pt)?.norm() > 0.0;
            bad += usize::from(inside != nonzero);
        }
        Ok(bad)
    })?
    .into_iter()
    .sum();
    Ok(Outcome::exact(
        count_margin(bad),
        format!(
            "{bad} points where supp f_n and F_n disagree, {} points",
            pts.len()
        ),
    ))
}

pub fn martingale_maximal_l2(ctx: &Context) -> Result<Outcome> {
    let b = ctx.rhombus()?;
    let sets = b.sys.b_sets()?;
    let pts = ctx.points(&b.sys, ctx.cfg.samples, 11)?;
    let nu = b.sys.nu();
    let vals = per_point(&pts, |pt| {
        let mut acc = Complex64::new(0.0, 0.0);
        let (mut best, mut sq) = (0.0f64, 0.0);
        for n in 2..=nu {
            let f = martingale_value(&sets, n, pt)?;
            acc += f;
            sq += f.norm_sqr();
            best = best.max(acc.norm());
        }
        Ok((best * best, sq))
    })?;
    let lhs = integral(&vals.iter().map(|v| v.0).collect::<Vec<_>>(), ctx.cfg.seed);
    let rhs = integral(&vals.iter().map(|v| v.1).collect::<Vec<_>>(), ctx.cfg.seed);
    // Doob: ‖max_n |Σ_{k≤n} f_k|‖₂² ≤ 4 Σ ‖f_k‖₂²
    let margin = 4.0 * rhs.lower() - lhs.upper();
    Ok(Outcome::sampled(
        margin,
        &lhs,
        format!(
            "‖max partial sum‖₂² = {:.4} ± {:.4}; 4Σ‖f_n‖₂² = {:.4}",
            lhs.value,
            lhs.stderr,
            4.0 * rhs.value
        ),
    ))
}

// ---------------------------------------------------------------- a-system

fn a_system(ctx: &Context) -> Result<(std::sync::Arc<SystemBundle>, TreeSets)> {
    let b = ctx.rhombus()?;
    let sets = b.sys.a_sets(b.gamma)?;
    Ok((b, sets))
}

pub fn real_part_integral(ctx: &Context) -> Result<Outcome> {
    let (b, sets) = a_system(ctx)?;
    let pts = ctx.points(&b.sys, ctx.cfg.samples, 12)?;
    let vals = per_point(&pts, |pt| {
        Ok(sets
            .values(pt)?
            .iter()
            .map(|(_, v)| v.re.abs())
            .sum::<f64>())
    })?;
    let est = integral(&vals, ctx.cfg.seed);
    let bound = 2.0 * sqrt_m(ctx);
    Ok(Outcome::sampled(
        est.lower() - bound,
        &est,
        format!("Σ_n ∫|Re a_n| vs 2√m = {bound:.4}, γ = {:.4}", b.gamma),
    ))
}

pub fn top_generation_union(ctx: &Context) -> Result<Outcome> {
    let (b, sets) = a_system(ctx)?;
    let pts = ctx.points(&b.sys, ctx.cfg.samples, 13)?;
    let m = ctx.cfg.m;
    let flags = per_point(&pts, |pt| Ok(depth(sets.path_end(pt)?) + 1 == m))?;
    let est = hits(&flags, ctx.cfg.seed);
    Ok(Outcome::sampled(
        est.lower() - 10.0,
        &est,
        "measure of the union of the deepest generation vs 10".into(),
    ))
}

pub fn uv_inclusions(ctx: &Context) -> Result<Outcome> {
    let (b, sets) = a_system(ctx)?;
    let pts = ctx.points(&b.sys, ctx.cfg.samples, 14)?;
    let nu = b.sys.nu();
    let bad: usize = per_point(&pts, |pt| {
        let mut bad = 0;
        for n in 3..=nu {
            let e = sets.membership(n, pt)?;
            let (u, v) = sets.membership_uv(n, pt)?;
            let parent_in = sets.membership(parent(n)?, pt)?;
            bad += usize::from((e && !u) || (u && !(parent_in && v)));
        }
        Ok(bad)
    })?
    .into_iter()
    .sum();
    Ok(Outcome::exact(
        count_margin(bad),
        format!(
            "{bad} violations of E_n ⊂ U_n ⊂ E_parent ∩ V_n, {} points",
            pts.len()
        ),
    ))
}

pub fn uv_gap(ctx: &Context) -> Result<Outcome> {
    let (b, sets) = a_system(ctx)?;
    let pts = ctx.points(&b.sys, ctx.cfg.samples, 15)?;
    let nu = b.sys.nu();
    let flags = per_point(&pts, |pt| {
        (3..=nu)
            .map(|n| {
                let (u, v) = sets.membership_uv(n, pt)?;
                Ok(v && !u)
            })
            .collect::<Result<Vec<bool>>>()
    })?;
    let mut worst: Option<(usize, MeasureEstimate)> = None;
    let mut detail = String::from("|V_n \\ U_n|:");
    for n in 3..=nu {
        let col: Vec<bool> = flags.iter().map(|f| f[n - 3]).collect();
        let est = hits(&col, ctx.cfg.seed);
        let _ = write!(detail, " {n}:{:.4}", est.value);
        if worst.is_none_or(|(_, w)| est.upper() > w.upper()) {
            worst = Some((n, est));
        }
    }
    let (n, est) = worst.ok_or_else(|| Error::Config("m = 2 has no U_n with a parent".into()))?;
    let bound = 1.0 / nu as f64;
    let _ = write!(detail, "; worst n = {n}, bound 1/ν = {bound:.4}");
    Ok(Outcome::sampled(bound - est.upper(), &est, detail))
}

pub fn children_cover(ctx: &Context) -> Result<Outcome> {
    let (b, sets) = a_system(ctx)?;
    let pts = ctx.points(&b.sys, ctx.cfg.samples, 16)?;
    let nu = b.sys.nu();
    let bad: usize = per_point(&pts, |pt| {
        let mut bad = 0;
        for n in (2..=nu).filter(|n| 2 * n <= nu) {
            if sets.membership(n, pt)? {
                let v1 = sets.membership_uv(2 * n - 1, pt)?.1;
                let v2 = sets.membership_uv(2 * n, pt)?.1;
                bad += usize::from(!(v1 || v2));
            }
        }
        Ok(bad)
    })?
    .into_iter()
    .sum();
    Ok(Outcome::exact(
        count_margin(bad),
        format!(
            "{bad} points of E_n outside both children's V, {} points",
            pts.len()
        ),
    ))
}

pub fn cap_exceptions(ctx: &Context) -> Result<Outcome> {
    let (b, sets) = a_system(ctx)?;
    let pts = ctx.points(&b.sys, ctx.cfg.samples, 17)?;
    let nu = b.sys.nu();
    let sched = sets.schedule().clone();
    let inv = 1.0 / sqrt_m(ctx);
    let res = per_point(&pts, |pt| {
        let (mut seen, mut bad) = (0usize, 0usize);
        for n in 3..=nu {
            let (u, _) = sets.membership_uv(n, pt)?;
            if u && !sets.membership(n, pt)? {
                seen += 1;
                let mut acc = Complex64::new(0.0, 0.0);
                let mut best = 0.0f64;
                for k in chain(parent(n)?) {
                    acc += character(sched.freq(k), pt) * inv;
                    best = best.max(acc.norm());
                }
                bad += usize::from(best <= b.gamma - 2.0);
            }
        }
        Ok((seen, bad))
    })?;
    let seen: usize = res.iter().map(|r| r.0).sum();
    let bad: usize = res.iter().map(|r| r.1).sum();
    let vacuous = (3..=nu).all(|n| sets.cap_vacuous(n));
    Ok(Outcome::exact(
        count_margin(bad),
        format!(
            "{seen} sampled points in U_n \\ E_n, {bad} of them with max partial sum ≤ γ − 2; cap {} at γ = {:.4}",
            if vacuous { "never binds" } else { "can bind" },
            b.gamma
        ),
    ))
}

pub fn level_measure_sum(ctx: &Context) -> Result<Outcome> {
    let (b, sets) = a_system(ctx)?;
    let pts = ctx.points(&b.sys, ctx.cfg.samples, 18)?;
    let lens = per_point(&pts, |pt| Ok(sets.path(pt)?.len() as f64))?;
    let est = integral(&lens, ctx.cfg.seed);
    let bound = 10.0 * ctx.cfg.m as f64;
    Ok(Outcome::sampled(
        est.lower() - bound,
        &est,
        format!("Σ|E_n| vs 10m = {bound}"),
    ))
}

pub fn abs_cos_integral(ctx: &Context) -> Result<Outcome> {
    let (b, sets) = a_system(ctx)?;
    let pts = ctx.points(&b.sys, ctx.cfg.samples, 19)?;
    let sched = sets.schedule().clone();
    // paired difference of ∫_{E_n}|cos φ_n| and (2/π)|E_n|, summed over n
    let diffs = per_point(&pts, |pt| {
        Ok(sets
            .path(pt)?
            .iter()
            .map(|&n| character(sched.freq(n), pt).re.abs() - FRAC_2_PI)
            .sum::<f64>())
    })?;
    let d = integral(&diffs, ctx.cfg.seed);
    let lens = per_point(&pts, |pt| Ok(sets.path(pt)?.len() as f64))?;
    let total = integral(&lens, ctx.cfg.seed);
    Ok(Outcome::sampled(
        2.0 * d.stderr - d.value.abs(),
        &d,
        format!(
            "Σ_n(∫_{{E_n}}|cos φ_n| − (2/π)|E_n|) = {:.4} ± {:.4}; a 1/π factor would leave {:.4}",
            d.value,
            d.stderr,
            total.value / PI
        ),
    ))
}

pub fn rearranged_prefix_level(ctx: &Context) -> Result<Outcome> {
    let (b, sets) = a_system(ctx)?;
    let pts = ctx.points(&b.sys, ctx.cfg.samples, 20)?;
    let order = &b.sys.sigma.order;
    let level = sqrt_m(ctx) / 120.0;
    let flags = per_point(&pts, |pt| {
        Ok(max_prefix_in_order(&sets.values(pt)?, order) > level)
    })?;
    let est = hits(&flags, ctx.cfg.seed);
    Ok(Outcome::sampled(
        est.lower() - 1.0,
        &est,
        format!("|{{max_l |Σ_{{j≤l}} a_σ(j)| > √m/120 = {level:.5}}}| vs 1"),
    ))
}

pub fn uniform_bound(ctx: &Context) -> Result<Outcome> {
    let (b, sets) = a_system(ctx)?;
    let pts = ctx.points(&b.sys, ctx.cfg.samples, 21)?;
    let worst = per_point(&pts, |pt| {
        Ok(sets
            .values(pt)?
            .iter()
            .map(|(_, v)| *v)
            .sum::<Complex64>()
            .norm())
    })?
    .into_iter()
    .fold(0.0, f64::max);
    Ok(Outcome::exact(
        b.gamma - worst,
        format!(
            "max |Σ a_n| = {worst:.4} vs γ = {:.4}, {} points",
            b.gamma,
            pts.len()
        ),
    ))
}

// ---------------------------------------------------------------- T-system

pub fn t_spectrum_placement(ctx: &Context) -> Result<Outcome> {
    let b = ctx.rhombus()?;
    let t = b.tsys()?;
    let exc = t.placement_exceptions(&b.sys);
    Ok(Outcome::exact(
        count_margin(exc),
        format!("{exc} of {} terms outside their sector", t.term_count()),
    ))
}

fn t_values(b: &SystemBundle, pts: &[RationalPoint]) -> Vec<Vec<Complex64>> {
    pts.par_iter()
        .map(|&pt| TSystem::values_factored(&b.sys, pt))
        .collect()
}

pub fn t_sup_bound(ctx: &Context) -> Result<Outcome> {
    let b = ctx.rhombus()?;
    let pts = ctx.points(&b.sys, ctx.cfg.samples, 22)?;
    let sampled = t_values(&b, &pts)
        .iter()
        .map(|v| v.iter().sum::<Complex64>().norm())
        .fold(0.0, f64::max);
    let bound = b.sys.smoothing.abs_sum_bound();
    let c1 = b.c1();
    Ok(Outcome::exact(
        (c1 - sampled).min(c1 - bound),
        format!(
            "sampled max |ΣT_n| = {sampled:.4}, certified Σ_n sup|f_n| ≤ {bound:.4}, c1 = γ + 2.1 = {c1:.4}, {} points",
            pts.len()
        ),
    ))
}

pub fn t_prefix_level(ctx: &Context) -> Result<Outcome> {
    let b = ctx.rhombus()?;
    let pts = ctx.points(&b.sys, ctx.cfg.samples, 23)?;
    let level = ctx.cfg.c2_f64() * sqrt_m(ctx);
    let flags: Vec<bool> = t_values(&b, &pts)
        .iter()
        .map(|v| max_prefix(v) > level)
        .collect();
    let est = hits(&flags, ctx.cfg.seed);
    Ok(Outcome::sampled(
        est.lower() - 1.0,
        &est,
        format!("|{{max_l |Σ_{{j≤l}} T_j| > c2·√m = {level:.5}}}| vs 1"),
    ))
}

pub fn smoothing_approximation(ctx: &Context) -> Result<Outcome> {
    let b = ctx.rhombus()?;
    let sets = b.sys.margin_sets(b.gamma)?;
    let pts = ctx.points(&b.sys, ctx.cfg.samples, 24)?;
    let nu = b.sys.nu();
    let inv = 1.0 / sqrt_m(ctx);
    let res = per_point(&pts, |pt| {
        let path = sets.path(pt)?;
        let (mut lo, mut hi, mut dev) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
        for n in 2..=nu {
            let f = b.sys.smoothing.eval(&b.sys.schedule, n, pt);
            lo = lo.min(f);
            hi = hi.max(f);
            let inside = path.contains(&n);
            let parent_in = n == 2 || path.contains(&parent(n)?);
            if inside || !parent_in {
                let target = if inside { inv } else { 0.0 };
                dev = dev.max((f - target).abs());
            }
        }
        Ok((lo, hi, dev))
    })?;
    let lo = res.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let hi = res.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let dev = res.iter().map(|r| r.2).fold(0.0, f64::max);
    // 1e-12 absorbs rounding in the evaluation of a nonnegative kernel
    let margin = (lo + 1e-12)
        .min(inv + 1e-12 - hi)
        .min(1.0 / nu as f64 - dev);
    Ok(Outcome::exact(
        margin,
        format!(
            "f_n ∈ [{lo:.3e}, {hi:.6}] vs [0, 1/√m = {inv:.6}]; max |f_n − 1_E/√m| on E_n ∪ E_parent^c = {dev:.3e} \
             vs 1/ν; margin sets κ = {}",
            b.sys.params.kappa
        ),
    ))
}

/// `a_n = 1_{E_n} e^{iφ_n}/√m` for the margin sets the smoothing follows,
/// listed in `σ` order.
fn margin_a_sigma(b: &SystemBundle, sets: &TreeSets, pt: RationalPoint) -> Result<Vec<Complex64>> {
    let vals = sets.values(pt)?;
    Ok((2..=b.sys.nu())
        .map(|l| {
            let n = b.sys.sigma.sigma(l);
            vals.iter()
                .find(|(k, _)| *k == n)
                .map_or(Complex64::new(0.0, 0.0), |(_, v)| *v)
        })
        .collect())
}

pub fn t_closeness(ctx: &Context) -> Result<Outcome> {
    let b = ctx.rhombus()?;
    let sets = b.sys.margin_sets(b.gamma)?;
    let pts = ctx.points(&b.sys, ctx.cfg.samples, 25)?;
    let worst = per_point(&pts, |pt| {
        let a = margin_a_sigma(&b, &sets, pt)?;
        let t = TSystem::values_factored(&b.sys, pt);
        Ok(t.iter().zip(&a).map(|(t, a)| (t - a).norm()).sum::<f64>())
    })?
    .into_iter()
    .fold(0.0, f64::max);
    Ok(Outcome::exact(
        2.0 - worst,
        format!(
            "max Σ_j |T_j − a_σ(j)| = {worst:.4} vs 2, {} points",
            pts.len()
        ),
    ))
}

pub fn t_prefix_transfer(ctx: &Context) -> Result<Outcome> {
    let b = ctx.rhombus()?;
    let sets = b.sys.margin_sets(b.gamma)?;
    let pts = ctx.points(&b.sys, ctx.cfg.samples, 26)?;
    let worst = per_point(&pts, |pt| {
        let a = margin_a_sigma(&b, &sets, pt)?;
        let t = TSystem::values_factored(&b.sys, pt);
        Ok(max_prefix(&t) - max_prefix(&a) + 2.0)
    })?
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    Ok(Outcome::exact(
        worst,
        format!(
            "min of max|ΣT| − max|Σa_σ| + 2 = {worst:.4}, {} points",
            pts.len()
        ),
    ))
}

// ---------------------------------------------------------------- ladders

pub fn rhombus_aspect(ctx: &Context) -> Result<Outcome> {
    let c = ctx.rhombus_ladder()?.certify();
    let margin = if c.rho_decreasing {
        rat_to_f64(&(&c.rho_bound - &c.rho_max))
    } else {
        -1.0
    };
    Ok(Outcome::exact(
        margin,
        format!(
            "max ρ(Δ_n) = {} < {} exactly; strictly decreasing: {}",
            c.rho_max, c.rho_bound, c.rho_decreasing
        ),
    ))
}

pub fn rhombus_nesting(ctx: &Context) -> Result<Outcome> {
    let l = ctx.rhombus_ladder()?;
    let c = l.certify();
    Ok(Outcome::exact(
        if c.nested { 0.0 } else { -1.0 },
        format!(
            "Δ_1 = Δ({0},{0}) ⊂ … ⊂ Δ_ν exactly: {1}; vertex l = {2}",
            l.s, c.nested, l.l
        ),
    ))
}

pub fn rhombus_slotting(ctx: &Context) -> Result<Outcome> {
    let c = ctx.rhombus_ladder()?.certify();
    Ok(Outcome::exact(
        count_margin(c.slot_exceptions),
        format!(
            "{} of {} terms outside (Δ_n \\ Δ_(n−1)) ∩ (0,∞)²",
            c.slot_exceptions, c.terms
        ),
    ))
}

/// Largest `||Σ_{j≤n} Q_j| − |Σ_{j≤n} T_j||` with both sides summed from
/// their explicit terms.
fn modulus_transfer(
    ctx: &Context,
    b: &SystemBundle,
    q_polys: &[TrigPoly],
    salt: u64,
) -> Result<Outcome> {
    let t = b.tsys()?;
    let pts = ctx.points(&b.sys, ctx.cfg.transfer_points, salt)?;
    let lattice = b.sys.lattice()?;
    let tp: Vec<_> = t.t_polys.iter().map(|p| p.prepare(lattice)).collect();
    let qp: Vec<_> = q_polys.iter().map(|p| p.prepare(lattice)).collect();
    let worst = pts
        .par_iter()
        .map(|&pt| {
            let (mut st, mut sq) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            let mut w = 0.0f64;
            for (a, c) in tp.iter().zip(&qp) {
                st += a.eval(pt);
                sq += c.eval(pt);
                w = w.max((st.norm() - sq.norm()).abs());
            }
            w
        })
        .reduce(|| 0.0, f64::max);
    Ok(Outcome::exact(
        1e-12 - worst,
        format!(
            "max ||ΣQ| − |ΣT|| = {worst:.3e} over {} points, {} terms each side",
            pts.len(),
            t.term_count()
        ),
    ))
}

pub fn rhombus_modulus_transfer(ctx: &Context) -> Result<Outcome> {
    let b = ctx.rhombus()?;
    let l = ctx.rhombus_ladder()?;
    modulus_transfer(ctx, &b, &l.q_polys, 27)
}

fn ball_certificate(ctx: &Context) -> Result<crate::builder::ladder::BallCertificate> {
    let b = ctx.ball()?;
    ctx.ball_ladder()?.certify(ctx.cfg.delta_f64(), &*b.tsys()?)
}

pub fn ball_eccentricity(ctx: &Context) -> Result<Outcome> {
    let c = ball_certificate(ctx)?;
    let margin = if c.tau_exact_ok {
        c.tau_bound - c.tau_max
    } else {
        -1.0
    };
    Ok(Outcome::exact(
        margin,
        format!(
            "max τ(U_n) = {:.6} < {} (exact square comparison: {})",
            c.tau_max, c.tau_bound, c.tau_exact_ok
        ),
    ))
}

pub fn ball_enclosure(ctx: &Context) -> Result<Outcome> {
    let l = ctx.ball_ladder()?;
    let c = ball_certificate(ctx)?;
    Ok(Outcome::exact(
        if c.inner_ok && c.outer_ok { 0.0 } else { -1.0 },
        format!(
            "B(0,0,{}) ⊂ U_n: {}; U_n ⊂ B(0,0,{}): {}; R = {}",
            l.inner, c.inner_ok, l.outer, c.outer_ok, l.r_big
        ),
    ))
}

pub fn ball_slotting(ctx: &Context) -> Result<Outcome> {
    let c = ball_certificate(ctx)?;
    let bad = c.slot_exceptions + c.corner_exceptions;
    Ok(Outcome::exact(
        count_margin(bad),
        format!(
            "{} (term, ball) pairs on the wrong side and {} sector corners outside, {} terms",
            c.slot_exceptions, c.corner_exceptions, c.terms
        ),
    ))
}

pub fn ball_modulus_transfer(ctx: &Context) -> Result<Outcome> {
    let b = ctx.ball()?;
    let l = ctx.ball_ladder()?;
    modulus_transfer(ctx, &b, &l.q_polys, 28)
}

// ---------------------------------------------------------------- theorem

pub fn block_sup_bound(ctx: &Context) -> Result<Outcome> {
    let run = ctx.theorem()?;
    let margin = run
        .blocks
        .iter()
        .map(|b| b.c1 - b.sup_bound)
        .fold(f64::INFINITY, f64::min);
    let detail = run
        .blocks
        .iter()
        .map(|b| format!("block {}: sup ≤ {:.4} < c1 = {:.4}", b.k, b.sup_bound, b.c1))
        .collect::<Vec<_>>()
        .join("; ");
    Ok(Outcome::exact(margin, detail))
}

pub fn block_real_part(ctx: &Context) -> Result<Outcome> {
    let run = ctx.theorem()?;
    let worst = run
        .blocks
        .iter()
        .min_by(|a, b| a.level.lower().total_cmp(&b.level.lower()))
        .ok_or_else(|| Error::Usage("no blocks".into()))?;
    let detail = run
        .blocks
        .iter()
        .map(|b| {
            format!(
                "block {}: {:?} part, level {:.5}, measure {:.4}",
                b.k, b.part, b.threshold, b.level.value
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    Ok(Outcome::sampled(
        worst.level.lower() - 0.5,
        &worst.level,
        detail,
    ))
}

pub fn assembled_sup_bound(ctx: &Context) -> Result<Outcome> {
    let run = ctx.theorem()?;
    let margin = run.sup_cap - run.sup_bound.max(run.coeff_sum);
    Ok(Outcome::exact(
        margin,
        format!(
            "‖f‖∞ ≤ {:.4} (factored) and ≤ {:.4} (coefficient sum) vs Σ c1/k² = {:.4}; {} terms",
            run.sup_bound,
            run.coeff_sum,
            run.sup_cap,
            run.f_trunc.len()
        ),
    ))
}

pub fn global_nesting(ctx: &Context) -> Result<Outcome> {
    let run = ctx.theorem()?;
    let ok = run.nesting_ok && run.excluded_terms == 0;
    Ok(Outcome::exact(
        if ok { 1e-9 - run.cross_check_dev } else { -1.0 },
        format!(
            "{} dilated regions nested: {}; terms outside the ladder: {}; explicit vs factored jumps differ by \
             {:.3e} on {} points",
            run.ladder.regions.len(),
            run.nesting_ok,
            run.excluded_terms,
            run.cross_check_dev,
            run.cross_check_points
        ),
    ))
}

pub fn dilation_coverage(ctx: &Context) -> Result<Outcome> {
    let run = ctx.theorem()?;
    let s = &run.schedule;
    let margin = s
        .groups
        .iter()
        .map(|g| g.margin())
        .fold(f64::INFINITY, f64::min);
    let last = *s
        .coverage
        .last()
        .ok_or_else(|| Error::Usage("no blocks".into()))?;
    Ok(Outcome::sampled(
        margin,
        &last,
        format!("n_k = {:?}, α = {:.4}", s.n, s.alpha),
    ))
}

pub fn block_jump(ctx: &Context) -> Result<Outcome> {
    let run = ctx.theorem()?;
    let worst = run
        .blocks
        .iter()
        .min_by(|a, b| a.jump.lower().total_cmp(&b.jump.lower()))
        .ok_or_else(|| Error::Usage("no blocks".into()))?;
    let detail = run
        .blocks
        .iter()
        .map(|b| {
            format!(
                "block {}: n_k = {}, measure {:.4}",
                b.k, b.dilation, b.jump.value
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    Ok(Outcome::sampled(
        worst.jump.lower() - 0.5,
        &worst.jump,
        detail,
    ))
}
