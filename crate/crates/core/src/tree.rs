//! Dyadic tree indexing, tree-systems, the prefix-sum rearrangement and the
//! level-set bound.
//!
//! Indices run over `2..=2^m`. Node `n = 2^k + j` with `1 ≤ j ≤ 2^k` has
//! parent `2^{k−1} + ⌊(j+1)/2⌋` and sign `(−1)^{j+1}`; its children are
//! `2n−1` (sign `+`) and `2n` (sign `−`). A family `f_n` is a tree-system
//! when `f_n ≠ 0` forces `s(n)·f_{parent(n)} > 0`, so at every point the
//! nonzero members lie on one root path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact_eval::RationalPoint;
use crate::mixing::{shard_seed, MeasureEstimate, TORUS};

/// Generation of `n ≥ 2`: the `k` with `2^k < n ≤ 2^{k+1}`.
pub fn depth(n: usize) -> u32 {
    debug_assert!(n >= 2);
    usize::BITS - (n - 1).leading_zeros() - 1
}

/// Parent of `n ≥ 3`.
pub fn parent(n: usize) -> Result<usize> {
    if n < 3 {
        return Err(Error::Config(format!(
            "parent is defined for n ≥ 3, got {n}"
        )));
    }
    let k = depth(n);
    let j = n - (1 << k);
    Ok((1 << (k - 1)) + j.div_ceil(2))
}

/// `s(n) = (−1)^{j+1}`, i.e. `+1` for odd `n`.
pub fn sign(n: usize) -> i32 {
    if n % 2 == 1 {
        1
    } else {
        -1
    }
}

/// `[2, …, parent(n), n]`.
pub fn chain(n: usize) -> Vec<usize> {
    let mut out = vec![n];
    let mut k = n;
    while k > 2 {
        k = parent(k).expect("k ≥ 3");
        out.push(k);
    }
    out.reverse();
    out
}

/// `ν = 2^m`.
pub fn nu(m: u32) -> usize {
    1usize << m
}

/// Real values of `f_2, …, f_ν` on a common point list.
#[derive(Clone, Debug)]
pub struct SampledFunctionFamily {
    pub m: u32,
    /// `values[n − 2][i]` is `f_n` at point `i`.
    pub values: Vec<Vec<f64>>,
    pub points: Vec<RationalPoint>,
}

impl SampledFunctionFamily {
    pub fn new(m: u32, values: Vec<Vec<f64>>, points: Vec<RationalPoint>) -> Result<Self> {
        if values.len() != nu(m) - 1 {
            return Err(Error::TreeSystem(format!(
                "expected {} functions for m={m}, got {}",
                nu(m) - 1,
                values.len()
            )));
        }
        if values.iter().any(|v| v.len() != points.len()) {
            return Err(Error::TreeSystem(
                "every function needs one value per point".into(),
            ));
        }
        Ok(SampledFunctionFamily { m, values, points })
    }

    pub fn len_points(&self) -> usize {
        self.points.len()
    }

    pub fn value(&self, n: usize, i: usize) -> f64 {
        self.values[n - 2][i]
    }
}

/// A sampled support violation: `f_n ≠ 0` at point `index` while
/// `s(n)·f_{parent(n)} ≤ 0` there.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeViolation {
    pub n: usize,
    pub index: usize,
    pub point: RationalPoint,
}

/// `Ok(None)` when the support condition holds at every point. Functions
/// vanishing at every sample are rejected outright.
pub fn is_tree_system(f: &SampledFunctionFamily) -> Result<Option<TreeViolation>> {
    for (k, v) in f.values.iter().enumerate() {
        if v.iter().all(|x| *x == 0.0) {
            return Err(Error::TreeSystem(format!(
                "f_{} vanishes at every sample",
                k + 2
            )));
        }
    }
    for n in 3..=nu(f.m) {
        let p = parent(n)?;
        let s = sign(n) as f64;
        for i in 0..f.len_points() {
            if f.value(n, i) != 0.0 && s * f.value(p, i) <= 0.0 {
                return Ok(Some(TreeViolation {
                    n,
                    index: i,
                    point: f.points[i],
                }));
            }
        }
    }
    Ok(None)
}

/// Where a rearrangement came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    FoundBySearch,
    Supplied,
}

/// A summation order of `2..=2^m`: `order[l]` is `σ(l + 2)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Rearrangement {
    pub m: u32,
    pub order: Vec<usize>,
    pub provenance: Provenance,
    /// Minimum of `(sup − Σ/3)/Σ` over the trial points.
    pub min_normalized_margin: f64,
}

impl Rearrangement {
    pub fn supplied(m: u32, order: Vec<usize>) -> Result<Self> {
        let r = Rearrangement {
            m,
            order,
            provenance: Provenance::Supplied,
            min_normalized_margin: f64::NAN,
        };
        r.check_bijective()?;
        Ok(r)
    }

    pub fn identity(m: u32) -> Self {
        Rearrangement {
            m,
            order: (2..=nu(m)).collect(),
            provenance: Provenance::Supplied,
            min_normalized_margin: f64::NAN,
        }
    }

    /// `σ(l)` for `2 ≤ l ≤ ν`.
    pub fn sigma(&self, l: usize) -> usize {
        self.order[l - 2]
    }

    /// `σ^{-1}(n)`.
    pub fn inverse(&self, n: usize) -> usize {
        self.order.iter().position(|&k| k == n).expect("bijective") + 2
    }

    pub fn check_bijective(&self) -> Result<()> {
        let v = nu(self.m);
        let mut seen = vec![false; v + 1];
        if self.order.len() != v - 1 {
            return Err(Error::Config(format!(
                "σ must list {} indices, got {}",
                v - 1,
                self.order.len()
            )));
        }
        for &k in &self.order {
            if !(2..=v).contains(&k) || seen[k] {
                return Err(Error::Config(format!("σ is not a permutation of 2..={v}")));
            }
            seen[k] = true;
        }
        Ok(())
    }
}

/// `(sup_l |Σ_{i≤l} f_{σ(i)}|, Σ |f_n|)` at one point.
#[inline]
fn prefix_stats(order: &[usize], f: &SampledFunctionFamily, i: usize) -> (f64, f64) {
    let mut acc = 0.0f64;
    let mut sup = 0.0f64;
    let mut total = 0.0f64;
    for &n in order {
        let v = f.value(n, i);
        acc += v;
        total += v.abs();
        sup = sup.max(acc.abs());
    }
    (sup, total)
}

/// Minimum over points of `sup_l |Σ_{i≤l} f_{σ(i)}| − (1/3)Σ|f_n|`; the
/// bound holds iff the result is non-negative.
pub fn verify_prefix_bound(sigma: &Rearrangement, f: &SampledFunctionFamily) -> Result<f64> {
    if sigma.m != f.m {
        return Err(Error::Config(format!(
            "σ is for m={}, family for m={}",
            sigma.m, f.m
        )));
    }
    if let Some(v) = is_tree_system(f)? {
        return Err(Error::TreeSystem(format!(
            "support condition fails for n={} at {:?}",
            v.n, v.point
        )));
    }
    Ok(min_prefix_margin(&sigma.order, f))
}

/// [`verify_prefix_bound`] without the tree-system validation.
pub fn min_prefix_margin(order: &[usize], f: &SampledFunctionFamily) -> f64 {
    (0..f.len_points())
        .into_par_iter()
        .map(|i| {
            let (sup, total) = prefix_stats(order, f, i);
            sup - total / 3.0
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// Minimum normalized margin, or `None` as soon as a point has `3·sup < Σ`.
fn normalized_margin(order: &[usize], f: &SampledFunctionFamily) -> Option<f64> {
    let mut worst = f64::INFINITY;
    for i in 0..f.len_points() {
        let (sup, total) = prefix_stats(order, f, i);
        if 3.0 * sup < total {
            return None;
        }
        if total > 0.0 {
            worst = worst.min((sup - total / 3.0) / total);
        }
    }
    Some(worst)
}

/// Random tree-system on a `side × side` lattice.
///
/// At each point the root gets a log-uniform magnitude in `[1/16, 16]` and a
/// random sign; the sign selects the child, which is nonzero with a
/// per-node probability drawn from `[1/2, 1]`, and so on down the tree.
pub fn random_tree_system(m: u32, side: u32, seed: u64) -> Result<SampledFunctionFamily> {
    let v = nu(m);
    let side = side as u128;
    let count = (side * side) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(shard_seed(seed, usize::MAX));
    let keep: Vec<f64> = (0..=v).map(|_| rng.gen_range(0.5..=1.0)).collect();
    let mut values = vec![vec![0.0; count]; v - 1];
    let (lo, hi) = (-(16f64.ln()), 16f64.ln());
    for i in 0..count {
        let mut n = 2;
        loop {
            let mag = rng.gen_range(lo..hi).exp();
            let positive = rng.gen_bool(0.5);
            values[n - 2][i] = if positive { mag } else { -mag };
            if depth(n) + 1 >= m {
                break;
            }
            let child = if positive { 2 * n - 1 } else { 2 * n };
            if !rng.gen_bool(keep[child]) {
                break;
            }
            n = child;
        }
    }
    let points = (0..count as u128)
        .map(|i| RationalPoint {
            ax: i % side,
            ay: i / side,
            n: side,
        })
        .collect();
    SampledFunctionFamily::new(m, values, points)
}

/// Every sign pattern and truncation along every root path, with magnitudes
/// from the grid `2^{i/2}`, `|i| ≤ 6`.
///
/// The prefix condition is scale invariant and piecewise linear in the
/// magnitudes, so a fine ratio grid exposes most failing orders.
pub fn adversarial_tree_system(m: u32) -> Result<SampledFunctionFamily> {
    let grid: Vec<f64> = (-6..=6).map(|i| 2f64.powf(i as f64 / 2.0)).collect();
    let grid: Vec<f64> = if m >= 4 {
        grid.into_iter().step_by(2).collect()
    } else {
        grid
    };
    let v = nu(m);
    let mut cols: Vec<Vec<(usize, f64)>> = Vec::new();
    // depth-first enumeration of (path, values) prefixes
    let mut stack: Vec<Vec<(usize, f64)>> = vec![vec![]];
    while let Some(path) = stack.pop() {
        let next = match path.last() {
            None => Some(2),
            Some(&(n, val)) => {
                if depth(n) + 1 >= m {
                    None
                } else {
                    Some(if val > 0.0 { 2 * n - 1 } else { 2 * n })
                }
            }
        };
        if !path.is_empty() {
            cols.push(path.clone());
        }
        if let Some(n) = next {
            for &g in &grid {
                for s in [1.0, -1.0] {
                    let mut p = path.clone();
                    p.push((n, s * g));
                    stack.push(p);
                }
            }
        }
    }
    let count = cols.len();
    let mut values = vec![vec![0.0; count]; v - 1];
    for (i, path) in cols.iter().enumerate() {
        for &(n, val) in path {
            values[n - 2][i] = val;
        }
    }
    let side = (count as f64).sqrt().ceil() as u128;
    let points = (0..count as u128)
        .map(|i| RationalPoint {
            ax: i % side,
            ay: i / side,
            n: side,
        })
        .collect();
    SampledFunctionFamily::new(m, values, points)
}

fn next_permutation(a: &mut [usize]) -> bool {
    if a.len() < 2 {
        return false;
    }
    let mut i = a.len() - 1;
    while i > 0 && a[i - 1] >= a[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = a.len() - 1;
    while a[j] <= a[i - 1] {
        j -= 1;
    }
    a.swap(i - 1, j);
    a[i..].reverse();
    true
}

/// Depth-first orders used as candidates when exhaustive search is too big.
pub fn candidate_orders(m: u32) -> Vec<Vec<usize>> {
    fn walk(n: usize, m: u32, mode: u8, out: &mut Vec<usize>) {
        let leaf = depth(n) + 1 >= m;
        let (a, b) = (2 * n - 1, 2 * n);
        match mode {
            // pre-order
            0 => {
                out.push(n);
                if !leaf {
                    walk(a, m, mode, out);
                    walk(b, m, mode, out);
                }
            }
            // post-order
            1 => {
                if !leaf {
                    walk(a, m, mode, out);
                    walk(b, m, mode, out);
                }
                out.push(n);
            }
            // in-order: positive child, node, negative child
            2 => {
                if !leaf {
                    walk(a, m, mode, out);
                }
                out.push(n);
                if !leaf {
                    walk(b, m, mode, out);
                }
            }
            // in-order mirrored
            _ => {
                if !leaf {
                    walk(b, m, mode, out);
                }
                out.push(n);
                if !leaf {
                    walk(a, m, mode, out);
                }
            }
        }
    }
    let mut out: Vec<Vec<usize>> = (0..4)
        .map(|mode| {
            let mut o = Vec::new();
            walk(2, m, mode, &mut o);
            o
        })
        .collect();
    // alternation: generations in order, nodes alternating from both ends
    let mut alt = Vec::new();
    for k in 0..m {
        let lo = (1usize << k) + 1;
        let hi = 1usize << (k + 1);
        let (mut a, mut b) = (lo, hi);
        while a <= b {
            alt.push(a);
            if a != b {
                alt.push(b);
            }
            a += 1;
            b -= 1;
        }
    }
    out.push(alt);
    out
}

/// Search parameters for [`find_rearrangement`].
#[derive(Clone, Copy, Debug)]
pub struct SearchConfig {
    /// Random trial families.
    pub trials: usize,
    /// Side of the lattice each random trial family lives on.
    pub side: u32,
    pub seed: u64,
}

/// A permutation of `2..=2^m` meeting the one-third prefix bound on every
/// trial family.
///
/// For `m ≤ 3` all `(2^m − 1)!` orders are tried in lexicographic order and
/// the one with the largest minimum normalized margin wins; for larger `m`
/// only [`candidate_orders`] are tried.
pub fn find_rearrangement(m: u32, cfg: SearchConfig) -> Result<Rearrangement> {
    if m == 0 {
        return Err(Error::Config("m must be at least 1".into()));
    }
    let mut families = vec![adversarial_tree_system(m)?];
    for t in 0..cfg.trials {
        families.push(random_tree_system(
            m,
            cfg.side,
            cfg.seed.wrapping_add(t as u64),
        )?);
    }
    let evaluate = |order: &[usize]| -> Option<f64> {
        let mut worst = f64::INFINITY;
        for f in &families {
            worst = worst.min(normalized_margin(order, f)?);
        }
        Some(worst)
    };
    let candidates: Vec<Vec<usize>> = if m <= 3 {
        let mut all = Vec::new();
        let mut perm: Vec<usize> = (2..=nu(m)).collect();
        loop {
            all.push(perm.clone());
            if !next_permutation(&mut perm) {
                break;
            }
        }
        all
    } else {
        candidate_orders(m)
    };
    let scored: Vec<(usize, Option<f64>)> = candidates
        .par_iter()
        .enumerate()
        .map(|(i, o)| (i, evaluate(o)))
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scored {
        if let Some(s) = s {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
    }
    match best {
        Some((i, margin)) => Ok(Rearrangement {
            m,
            order: candidates[i].clone(),
            provenance: Provenance::FoundBySearch,
            min_normalized_margin: margin,
        }),
        None => {
            // best margin over failing orders, for the diagnostic
            let best_margin = candidates
                .par_iter()
                .map(|o| {
                    families
                        .iter()
                        .flat_map(|f| {
                            (0..f.len_points()).map(move |i| {
                                let (sup, total) = prefix_stats(o, f, i);
                                if total > 0.0 {
                                    (sup - total / 3.0) / total
                                } else {
                                    f64::INFINITY
                                }
                            })
                        })
                        .fold(f64::INFINITY, f64::min)
                })
                .reduce(|| f64::NEG_INFINITY, f64::max);
            Err(Error::NotFound { best_margin })
        }
    }
}

/// Outcome of the level-set inequality
/// `|{|f| > ‖f‖₁/8π²}| ≥ 4π² / (8π²‖f‖∞/‖f‖₁ − 1)`.
#[derive(Clone, Debug, Serialize)]
pub struct LevelSetCheck {
    pub l1: f64,
    pub l1_stderr: f64,
    pub sup_cap: f64,
    pub level_set: MeasureEstimate,
    pub rhs: f64,
    /// `(level set − 2·stderr) − rhs`, evaluated with the `L¹` norm raised
    /// by two standard errors on both sides.
    pub margin: f64,
}

impl LevelSetCheck {
    pub fn passed(&self) -> bool {
        self.margin >= -1e-9 * TORUS
    }
}

/// Checks the level-set bound from `|f|` sampled at uniform random points.
pub fn level_set_bound(abs_values: &[f64], sup_cap: f64, seed: u64) -> Result<LevelSetCheck> {
    let n = abs_values.len();
    if n == 0 {
        return Err(Error::Config("no samples".into()));
    }
    let mean = abs_values.iter().sum::<f64>() / n as f64;
    let var = abs_values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
    let l1 = TORUS * mean;
    let l1_stderr = TORUS * (var / n as f64).sqrt();
    if l1 <= 0.0 {
        return Err(Error::Config("sampled L1 norm is not positive".into()));
    }
    if sup_cap <= 0.0 || TORUS * sup_cap < l1 * (1.0 - 1e-12) {
        return Err(Error::Config(format!(
            "sup cap {sup_cap} is below the sampled mean {mean}"
        )));
    }
    let l1_hi = l1 + 2.0 * l1_stderr;
    let threshold = l1_hi / (2.0 * TORUS);
    let hits = abs_values.iter().filter(|v| **v > threshold).count();
    let level_set = MeasureEstimate::from_counts(hits, n, seed);
    let denom = 2.0 * TORUS * sup_cap / l1_hi - 1.0;
    let rhs = TORUS / denom;
    Ok(LevelSetCheck {
        l1,
        l1_stderr,
        sup_cap,
        level_set,
        rhs,
        margin: level_set.lower() - rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parent_examples() {
        assert_eq!(parent(5).unwrap(), 3);
        assert_eq!(parent(6).unwrap(), 3);
        assert_eq!(parent(3).unwrap(), 2);
        assert_eq!(parent(4).unwrap(), 2);
        assert_eq!(parent(8).unwrap(), 4);
        assert!(parent(2).is_err());
        assert_eq!(chain(11), vec![2, 3, 6, 11]);
        assert_eq!(sign(11), 1);
        assert_eq!(sign(6), -1);
        assert_eq!(depth(2), 0);
        assert_eq!(depth(4), 1);
        assert_eq!(depth(5), 2);
    }

    fn haar(m: u32, side: u128) -> SampledFunctionFamily {
        let v = nu(m);
        let points: Vec<RationalPoint> = (0..side)
            .map(|i| RationalPoint {
                ax: i,
                ay: 0,
                n: side,
            })
            .collect();
        let mut values = vec![vec![0.0; side as usize]; v - 1];
        for n in 2..=v {
            // node n covers a dyadic interval: path bits from the chain
            let c = chain(n);
            let (mut lo, mut len) = (0u128, side);
            for w in c.windows(2) {
                len /= 2;
                if w[1] % 2 == 0 {
                    lo += len;
                }
            }
            for i in lo..lo + len {
                values[n - 2][i as usize] = if i < lo + len / 2 { 1.0 } else { -1.0 };
            }
        }
        SampledFunctionFamily::new(m, values, points).unwrap()
    }

    #[test]
    fn haar_family_is_a_tree_system() {
        assert_eq!(is_tree_system(&haar(3, 64)).unwrap(), None);
    }

    #[test]
    fn flipped_sign_is_reported() {
        let mut f = haar(3, 64);
        // index 0 lies in the positive half of f_2, so only f_3 may live there
        f.values[4 - 2][0] = 1.0;
        let v = is_tree_system(&f).unwrap().unwrap();
        assert_eq!((v.n, v.index), (4, 0));
    }

    #[test]
    fn all_zero_member_is_rejected() {
        let mut f = haar(2, 16);
        f.values[1] = vec![0.0; 16];
        assert!(matches!(is_tree_system(&f), Err(Error::TreeSystem(_))));
    }

    #[test]
    fn identity_fails_on_cancellation() {
        // path 2 → 3 → 6 with values 1, −2, 2: prefix sums 1, −1, 1
        let mut values = vec![vec![0.0]; 7];
        values[0][0] = 1.0;
        values[1][0] = -2.0;
        values[4][0] = 2.0;
        let f = SampledFunctionFamily::new(3, values, vec![RationalPoint::ORIGIN]).unwrap();
        // a single point leaves most members identically zero, so skip validation
        let margin = min_prefix_margin(&Rearrangement::identity(3).order, &f);
        assert!((margin - (1.0 - 5.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn single_function_margin() {
        let mut values = vec![vec![0.0; 2]; 3];
        values[0] = vec![3.0, -1.5];
        values[1] = vec![0.5, 0.0];
        values[2] = vec![0.0, 0.25];
        let f = SampledFunctionFamily::new(2, values, vec![RationalPoint::ORIGIN; 2]).unwrap();
        assert!(verify_prefix_bound(&Rearrangement::identity(2), &f).unwrap() >= 0.0);
    }

    #[test]
    fn m2_search_finds_an_order() {
        let r = find_rearrangement(
            2,
            SearchConfig {
                trials: 4,
                side: 32,
                seed: 1,
            },
        )
        .unwrap();
        r.check_bijective().unwrap();
        assert!(r.min_normalized_margin >= 0.0);
    }

    #[test]
    fn level_set_constant_is_tight() {
        let c = level_set_bound(&vec![2.0; 1000], 2.0, 0).unwrap();
        assert!((c.rhs - TORUS).abs() < 1e-9);
        assert!(c.passed());
    }

    #[test]
    fn level_set_half_indicator() {
        let vals: Vec<f64> = (0..100_000)
            .map(|i| if i % 2 == 0 { 1.0 } else { 0.0 })
            .collect();
        let c = level_set_bound(&vals, 1.0, 0).unwrap();
        assert!(c.passed(), "{c:?}");
        assert!((c.level_set.value - TORUS / 2.0).abs() < 1e-9);
    }

    #[test]
    fn level_set_rejects_zero() {
        assert!(level_set_bound(&[0.0; 10], 1.0, 0).is_err());
    }
}
