//! Monte Carlo measure estimation on the torus, dilations `E(n)`, and the
//! greedy choice of dilation factors that makes dilated copies of sets
//! cover most of the torus.

use std::f64::consts::PI;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact_eval::{lcm_u128, RationalPoint};
use crate::regions::rat_to_f64;

/// `4π²`, the measure of the torus.
pub const TORUS: f64 = 4.0 * PI * PI;

/// Samples per shard; shards are the unit of seeding and parallelism.
pub const SHARD: usize = 8192;

/// Smallest sample count accepted by [`measure`].
pub const MIN_SAMPLES: usize = 10_000;

type Predicate = dyn Fn(RationalPoint) -> bool + Send + Sync;

/// A subset of the torus given by a membership predicate on rational points.
///
/// `lattice_base` divides every denominator the predicate can decide
/// exactly; sample lattices are multiples of it.
#[derive(Clone)]
pub struct MeasurableSetHandle {
    membership: Arc<Predicate>,
    pub descriptor: String,
    /// Exact measure as a fraction of the torus, when known.
    pub exact_fraction: Option<BigRational>,
    pub lattice_base: u128,
}

impl std::fmt::Debug for MeasurableSetHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MeasurableSetHandle")
            .field("descriptor", &self.descriptor)
            .field("exact_fraction", &self.exact_fraction)
            .field("lattice_base", &self.lattice_base)
            .finish()
    }
}

impl MeasurableSetHandle {
    pub fn new<F>(
        descriptor: impl Into<String>,
        lattice_base: u128,
        exact_fraction: Option<BigRational>,
        f: F,
    ) -> Self
    where
        F: Fn(RationalPoint) -> bool + Send + Sync + 'static,
    {
        MeasurableSetHandle {
            membership: Arc::new(f),
            descriptor: descriptor.into(),
            exact_fraction,
            lattice_base: lattice_base.max(1),
        }
    }

    pub fn torus() -> Self {
        MeasurableSetHandle::new("T2", 1, Some(BigRational::one()), |_| true)
    }

    pub fn empty() -> Self {
        MeasurableSetHandle::new("empty", 1, Some(BigRational::zero()), |_| false)
    }

    /// The half-open rectangle `[2πx0, 2πx1) × [2πy0, 2πy1)`, corners given
    /// as fractions of the period in `[0, 1]`.
    pub fn rectangle(
        x0: BigRational,
        x1: BigRational,
        y0: BigRational,
        y1: BigRational,
    ) -> Result<Self> {
        for (lo, hi) in [(&x0, &x1), (&y0, &y1)] {
            if *lo < BigRational::zero() || hi > &BigRational::one() || lo > hi {
                return Err(Error::Config(format!(
                    "rectangle sides must satisfy 0 ≤ lo ≤ hi ≤ 1, got [{lo}, {hi})"
                )));
            }
        }
        let fraction = (&x1 - &x0) * (&y1 - &y0);
        let mut base = 1u128;
        for r in [&x0, &x1, &y0, &y1] {
            let d = r
                .denom()
                .to_u128()
                .ok_or_else(|| Error::Overflow("rectangle denominator".into()))?;
            base = lcm_u128(base, d)?;
        }
        let descriptor = format!("rect[{x0},{x1})x[{y0},{y1})");
        let sides = [Side::new(&x0, &x1)?, Side::new(&y0, &y1)?];
        Ok(MeasurableSetHandle::new(
            descriptor,
            base,
            Some(fraction),
            move |pt| sides[0].contains(pt.ax, pt.n) && sides[1].contains(pt.ay, pt.n),
        ))
    }

    pub fn contains(&self, pt: RationalPoint) -> bool {
        (self.membership)(pt)
    }

    pub fn exact_measure(&self) -> Option<f64> {
        self.exact_fraction.as_ref().map(|f| TORUS * rat_to_f64(f))
    }

    pub fn intersect(&self, other: &MeasurableSetHandle) -> Result<Self> {
        let (a, b) = (self.clone(), other.clone());
        Ok(MeasurableSetHandle::new(
            format!("({})&({})", self.descriptor, other.descriptor),
            lcm_u128(self.lattice_base, other.lattice_base)?,
            None,
            move |pt| a.contains(pt) && b.contains(pt),
        ))
    }

    pub fn union(&self, other: &MeasurableSetHandle) -> Result<Self> {
        let (a, b) = (self.clone(), other.clone());
        Ok(MeasurableSetHandle::new(
            format!("({})|({})", self.descriptor, other.descriptor),
            lcm_u128(self.lattice_base, other.lattice_base)?,
            None,
            move |pt| a.contains(pt) || b.contains(pt),
        ))
    }

    pub fn complement(&self) -> Self {
        let a = self.clone();
        MeasurableSetHandle::new(
            format!("~({})", self.descriptor),
            self.lattice_base,
            self.exact_fraction.as_ref().map(|f| BigRational::one() - f),
            move |pt| !a.contains(pt),
        )
    }
}

/// Half-open interval `[lo, hi)` of `[0, 1]` with small denominators.
#[derive(Clone, Copy)]
struct Side {
    lo: (u128, u128),
    hi: (u128, u128),
}

impl Side {
    fn new(lo: &BigRational, hi: &BigRational) -> Result<Self> {
        let part = |r: &BigRational| -> Result<(u128, u128)> {
            match (r.numer().to_u128(), r.denom().to_u128()) {
                (Some(n), Some(d)) if d < 1 << 60 => Ok((n, d)),
                _ => Err(Error::Overflow(format!(
                    "rectangle side {r} needs a denominator below 2^60"
                ))),
            }
        };
        Ok(Side {
            lo: part(lo)?,
            hi: part(hi)?,
        })
    }

    /// `lo ≤ a/n < hi`, exact; `a/n` is compared by cross-multiplication.
    fn contains(&self, a: u128, n: u128) -> bool {
        let le = |(num, den): (u128, u128)| match (num.checked_mul(n), a.checked_mul(den)) {
            (Some(l), Some(r)) => l <= r,
            _ => BigInt::from(num) * BigInt::from(n) <= BigInt::from(a) * BigInt::from(den),
        };
        le(self.lo) && !le(self.hi)
    }
}

/// `E(n) = {(x, y) : (nx, ny) ∈ E}`. Its measure equals that of `E`.
pub fn dilate(e: &MeasurableSetHandle, n: u128) -> Result<MeasurableSetHandle> {
    if n == 0 {
        return Err(Error::Config("dilation factor must be positive".into()));
    }
    if n == 1 {
        return Ok(e.clone());
    }
    let inner = e.clone();
    Ok(MeasurableSetHandle::new(
        format!("({})({n})", e.descriptor),
        e.lattice_base,
        e.exact_fraction.clone(),
        move |pt| inner.contains(pt.dilate(n)),
    ))
}

/// A sampled measure with its binomial standard error, both in units of
/// area on `[0, 2π)²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeasureEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
    pub hits: usize,
    pub seed: u64,
}

impl MeasureEstimate {
    pub fn from_counts(hits: usize, samples: usize, seed: u64) -> Self {
        let n = samples.max(1) as f64;
        let p = hits as f64 / n;
        MeasureEstimate {
            value: TORUS * p,
            stderr: TORUS * (p * (1.0 - p) / n).sqrt(),
            samples,
            hits,
            seed,
        }
    }

    /// Conservative lower end, `value − 2·stderr`.
    pub fn lower(&self) -> f64 {
        self.value - 2.0 * self.stderr
    }

    /// Conservative upper end, `value + 2·stderr`.
    pub fn upper(&self) -> f64 {
        self.value + 2.0 * self.stderr
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-shard seed derived from the run seed.
pub fn shard_seed(seed: u64, shard: usize) -> u64 {
    splitmix(splitmix(seed) ^ (shard as u64).wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// `base·2^J` with the largest `J` keeping the result below `2^62`, or
/// `base` itself when it is already that large.
pub fn sample_lattice(base: u128) -> u128 {
    let limit = 1u128 << 62;
    let mut n = base.max(1);
    while n * 2 < limit {
        n *= 2;
    }
    n
}

/// Uniform random points of the lattice with denominator `n`.
///
/// A uniform point of a fine lattice is the same as a uniform coarse cell
/// plus uniform jitter inside it. Deterministic for fixed `(n, samples, seed)`.
pub fn sample_points(n: u128, samples: usize, seed: u64) -> Vec<RationalPoint> {
    let shards = samples.div_ceil(SHARD);
    (0..shards)
        .into_par_iter()
        .flat_map_iter(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(shard_seed(seed, s));
            let len = SHARD.min(samples - s * SHARD);
            (0..len)
                .map(move |_| RationalPoint {
                    ax: rng.gen_range(0..n),
                    ay: rng.gen_range(0..n),
                    n,
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Number of points satisfying `pred`; parallel over shards.
pub fn count_hits<F: Fn(RationalPoint) -> bool + Sync>(points: &[RationalPoint], pred: F) -> usize {
    points
        .par_chunks(SHARD)
        .map(|c| c.iter().filter(|p| pred(**p)).count())
        .sum()
}

/// Monte Carlo measure of `e`, self-checked against the exact measure when known.
pub fn measure(e: &MeasurableSetHandle, samples: usize, seed: u64) -> Result<MeasureEstimate> {
    if samples < MIN_SAMPLES {
        return Err(Error::Config(format!(
            "at least {MIN_SAMPLES} samples required, got {samples}"
        )));
    }
    let pts = sample_points(sample_lattice(e.lattice_base), samples, seed);
    let est = MeasureEstimate::from_counts(count_hits(&pts, |p| e.contains(p)), samples, seed);
    self_check(e, &est)?;
    Ok(est)
}

fn self_check(e: &MeasurableSetHandle, est: &MeasureEstimate) -> Result<()> {
    if let Some(exact) = e.exact_measure() {
        let tol = 4.0 * est.stderr.max(TORUS / est.samples as f64);
        if (est.value - exact).abs() > tol {
            return Err(Error::Sampling(format!(
                "{}: estimate {:.6} differs from exact {:.6} by more than {:.3e}",
                e.descriptor, est.value, exact, tol
            )));
        }
    }
    Ok(())
}

/// `|A ∩ B(n)|` for each `n`, using one shared point set.
pub fn mixing_curve(
    a: &MeasurableSetHandle,
    b: &MeasurableSetHandle,
    n_list: &[u128],
    samples: usize,
    seed: u64,
) -> Result<Vec<(u128, MeasureEstimate)>> {
    let base = lcm_u128(a.lattice_base, b.lattice_base)?;
    let pts = sample_points(sample_lattice(base), samples, seed);
    let in_a: Vec<bool> = pts.par_iter().map(|p| a.contains(*p)).collect();
    n_list
        .iter()
        .map(|&n| {
            if n == 0 {
                return Err(Error::Config("dilation factor must be positive".into()));
            }
            let hits = pts
                .par_iter()
                .zip(in_a.par_iter())
                .filter(|(p, ia)| **ia && b.contains(p.dilate(n)))
                .count();
            Ok((n, MeasureEstimate::from_counts(hits, samples, seed)))
        })
        .collect()
}

/// `1, 2, …, linear` and then `n ← ⌈1.5 n⌉` up to `max`.
pub fn scan_list(linear: u128, max: u128) -> Vec<u128> {
    let mut out: Vec<u128> = (1..=linear.min(max)).collect();
    let mut n = linear.max(1);
    loop {
        n = (3 * n).div_ceil(2);
        if n > max {
            break;
        }
        out.push(n);
    }
    out
}

/// Dilation factors together with the coverage they achieve.
#[derive(Clone, Debug, Serialize)]
pub struct DilationSchedule {
    pub n: Vec<u128>,
    pub alpha: f64,
    /// Measured union of the first `k+1` dilated sets.
    pub coverage: Vec<MeasureEstimate>,
    pub groups: Vec<GroupCoverage>,
}

/// One group of a block cover: indices `start..end` into the schedule.
#[derive(Clone, Debug, Serialize)]
pub struct GroupCoverage {
    pub start: usize,
    pub end: usize,
    /// `4π²(1 − (1−α)^size)`.
    pub target: f64,
    pub achieved: MeasureEstimate,
}

impl GroupCoverage {
    /// `achieved − 2·stderr` against the target; pass iff non-negative.
    pub fn margin(&self) -> f64 {
        self.achieved.lower() - self.target
    }
}

/// Scan limits for the greedy search.
#[derive(Clone, Copy, Debug)]
pub struct ScanBudget {
    pub linear: u128,
    pub max_steps: usize,
}

impl Default for ScanBudget {
    fn default() -> Self {
        ScanBudget {
            linear: 32,
            max_steps: 200,
        }
    }
}

/// Greedy choice of `n0 < n_1 < … < n_l` so that `∪ E_k(n_k)` covers
/// about `4π²(1 − (1−α)^l)` of the torus.
///
/// Each `n_k` is the first scanned factor at which the measured complement
/// of the running union is within tolerance of the independence product
/// `|U^c|·|E_k^c| / 4π²`. The tolerance is half the gap between that
/// product and `4π²(1−α)^k`, so accepting it never loses the target.
pub fn select_dilations(
    sets: &[MeasurableSetHandle],
    alpha: f64,
    n0: u128,
    samples: usize,
    seed: u64,
    budget: ScanBudget,
) -> Result<DilationSchedule> {
    if sets.is_empty() {
        return Err(Error::Config("need at least one set".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!(
            "alpha must lie in (0,1), got {alpha}"
        )));
    }
    if samples < MIN_SAMPLES {
        return Err(Error::Config(format!(
            "at least {MIN_SAMPLES} samples required, got {samples}"
        )));
    }
    let mut base = 1u128;
    for e in sets {
        base = lcm_u128(base, e.lattice_base)?;
    }
    let pts = sample_points(sample_lattice(base), samples, seed);
    for e in sets {
        let est = MeasureEstimate::from_counts(count_hits(&pts, |p| e.contains(p)), samples, seed);
        self_check(e, &est)?;
        if est.lower() <= TORUS * alpha {
            return Err(Error::Config(format!(
                "{}: measure {:.4} − 2·stderr does not exceed 4π²α = {:.4}",
                e.descriptor,
                est.value,
                TORUS * alpha
            )));
        }
    }
    let mut covered = vec![false; pts.len()];
    let mut ns = Vec::with_capacity(sets.len());
    let mut coverage = Vec::with_capacity(sets.len());
    let mut last = n0;
    for (k, e) in sets.iter().enumerate() {
        let uncovered_before = covered.iter().filter(|c| !**c).count();
        let comp_e = samples - count_hits(&pts, |p| e.contains(p));
        let product = uncovered_before as f64 * comp_e as f64 / samples as f64;
        let ceiling = samples as f64 * (1.0 - alpha).powi(k as i32 + 1);
        let tol = 0.5 * (ceiling - product).max(0.0);

        let mut best: Option<(u128, usize)> = None;
        let mut chosen = None;
        let mut candidate = last + 1;
        for _ in 0..budget.max_steps {
            let n = candidate;
            let newly = pts
                .par_iter()
                .zip(covered.par_iter())
                .filter(|(p, c)| !**c && e.contains(p.dilate(n)))
                .count();
            let comp = uncovered_before - newly;
            if best.is_none_or(|(_, c)| comp < c) {
                best = Some((n, comp));
            }
            if comp as f64 <= product + tol {
                chosen = Some(n);
                break;
            }
            candidate = if n < last + budget.linear {
                n + 1
            } else {
                (3 * n).div_ceil(2)
            };
        }
        let n = match chosen {
            Some(n) => n,
            None => {
                let (bn, bc) = best.expect("at least one scan step");
                return Err(Error::Budget(format!(
                    "no dilation for set {} within {} steps; best n={bn} leaves complement {:.4} (target {:.4})",
                    k + 1,
                    budget.max_steps,
                    TORUS * bc as f64 / samples as f64,
                    TORUS * (product + tol) / samples as f64
                )));
            }
        };
        covered
            .par_iter_mut()
            .zip(pts.par_iter())
            .for_each(|(c, p)| *c = *c || e.contains(p.dilate(n)));
        let hits = covered.iter().filter(|c| **c).count();
        coverage.push(MeasureEstimate::from_counts(hits, samples, seed));
        ns.push(n);
        last = n;
    }
    let achieved = *coverage.last().expect("non-empty");
    let groups = vec![GroupCoverage {
        start: 0,
        end: sets.len(),
        target: TORUS * (1.0 - (1.0 - alpha).powi(sets.len() as i32)),
        achieved,
    }];
    Ok(DilationSchedule {
        n: ns,
        alpha,
        coverage,
        groups,
    })
}

/// Groups `k² < j ≤ (k+1)²` (1-based), the last one possibly truncated.
pub fn block_groups(count: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut k = 0usize;
    while k * k < count {
        out.push((k * k, ((k + 1) * (k + 1)).min(count)));
        k += 1;
    }
    out
}

/// Runs [`select_dilations`] on each group with strictly increasing factors
/// across groups; each group gets its own coverage target.
pub fn block_cover_schedule(
    sets: &[MeasurableSetHandle],
    alpha: f64,
    n0: u128,
    samples: usize,
    seed: u64,
    budget: ScanBudget,
) -> Result<DilationSchedule> {
    let mut n = Vec::new();
    let mut coverage = Vec::new();
    let mut groups = Vec::new();
    let mut last = n0;
    for (g, (start, end)) in block_groups(sets.len()).into_iter().enumerate() {
        let sub = select_dilations(
            &sets[start..end],
            alpha,
            last,
            samples,
            seed.wrapping_add(g as u64),
            budget,
        )?;
        last = *sub.n.last().expect("non-empty group");
        for mut gc in sub.groups {
            gc.start += start;
            gc.end += start;
            groups.push(gc);
        }
        n.extend(sub.n);
        coverage.extend(sub.coverage);
    }
    Ok(DilationSchedule {
        n,
        alpha,
        coverage,
        groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regions::rat;

    fn half() -> BigRational {
        rat(1, 2)
    }

    #[test]
    fn whole_torus_is_exact() {
        let est = measure(&MeasurableSetHandle::torus(), 20_000, 1).unwrap();
        assert_eq!(est.value, TORUS);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn square_measure_within_two_stderr() {
        let e = MeasurableSetHandle::rectangle(rat(0, 1), half(), rat(0, 1), half()).unwrap();
        let est = measure(&e, 100_000, 7).unwrap();
        assert!(
            (est.value - PI * PI).abs() <= 2.0 * est.stderr + 1e-12,
            "{est:?}"
        );
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(matches!(
            measure(&MeasurableSetHandle::torus(), 100, 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn broken_predicate_fails_self_check() {
        let lying = MeasurableSetHandle::new("liar", 1, Some(half()), |_| true);
        assert!(matches!(
            measure(&lying, 20_000, 3),
            Err(Error::Sampling(_))
        ));
    }

    #[test]
    fn dilation_of_half_torus_gives_stripes() {
        let e = MeasurableSetHandle::rectangle(rat(0, 1), half(), rat(0, 1), rat(1, 1)).unwrap();
        let e2 = dilate(&e, 2).unwrap();
        let n = 64u128;
        for ax in 0..n {
            let pt = RationalPoint::new(ax, 5, n).unwrap();
            let x = ax as f64 / n as f64;
            let expect = (0.0..0.25).contains(&x) || (0.5..0.75).contains(&x);
            assert_eq!(e2.contains(pt), expect, "ax={ax}");
        }
        assert_eq!(e2.exact_fraction, e.exact_fraction);
        let est = measure(&e2, 50_000, 11).unwrap();
        assert!((est.value - 2.0 * PI * PI).abs() <= 2.0 * est.stderr);
    }

    #[test]
    fn sampling_is_reproducible() {
        assert_eq!(
            sample_points(1 << 40, 20_000, 9),
            sample_points(1 << 40, 20_000, 9)
        );
        assert_ne!(
            sample_points(1 << 40, 100, 9),
            sample_points(1 << 40, 100, 10)
        );
    }

    #[test]
    fn groups_follow_squares() {
        assert_eq!(block_groups(1), vec![(0, 1)]);
        assert_eq!(block_groups(9), vec![(0, 1), (1, 4), (4, 9)]);
        assert_eq!(block_groups(6), vec![(0, 1), (1, 4), (4, 6)]);
    }

    #[test]
    fn single_set_schedule_meets_alpha() {
        let e = MeasurableSetHandle::rectangle(rat(0, 1), rat(3, 4), rat(0, 1), rat(1, 1)).unwrap();
        let s = select_dilations(&[e], 0.5, 10, 20_000, 5, ScanBudget::default()).unwrap();
        assert!(s.n[0] > 10);
        assert!(s.groups[0].margin() >= 0.0);
    }

    #[test]
    fn small_sets_fail_precheck() {
        let e = MeasurableSetHandle::rectangle(rat(0, 1), rat(1, 4), rat(0, 1), rat(1, 1)).unwrap();
        assert!(matches!(
            select_dilations(&[e], 0.5, 0, 20_000, 5, ScanBudget::default()),
            Err(Error::Config(_))
        ));
    }
}
