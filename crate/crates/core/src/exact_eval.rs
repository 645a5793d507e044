//! Exact-phase evaluation of sparse two-dimensional trigonometric polynomials.
//!
//! Every torus evaluation happens at a rational point `(2π a_x/N, 2π a_y/N)`.
//! The phase `p·x + q·y` is reduced modulo `2π` with integer arithmetic,
//! `(p·a_x + q·a_y) mod N`, and only the residue is converted to floating
//! point. Frequencies near `10^37` therefore evaluate as accurately as small
//! ones.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regions::FreqRegion;

/// Denominators up to this bound use native 128-bit residue arithmetic.
pub const NATIVE_DENOM_LIMIT: u128 = 1 << 63;

/// A lattice frequency `(p, q)`.
///
/// Ordered lexicographically by `(p, q)`; this is the canonical summation
/// order for every polynomial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Freq {
    pub p: i128,
    pub q: i128,
}

impl Freq {
    pub const ZERO: Freq = Freq { p: 0, q: 0 };

    /// Rejects `i128::MIN` components, whose magnitude is not representable.
    pub fn new(p: i128, q: i128) -> Result<Self> {
        if p == i128::MIN || q == i128::MIN {
            return Err(Error::Overflow(
                "frequency magnitude must be below 2^127".into(),
            ));
        }
        Ok(Freq { p, q })
    }

    pub fn checked_add(self, other: Freq) -> Result<Freq> {
        let p = self.p.checked_add(other.p);
        let q = self.q.checked_add(other.q);
        match (p, q) {
            (Some(p), Some(q)) => Freq::new(p, q),
            _ => Err(Error::Overflow(format!("{self:?} + {other:?}"))),
        }
    }

    pub fn checked_scale(self, k: i128) -> Result<Freq> {
        match (self.p.checked_mul(k), self.q.checked_mul(k)) {
            (Some(p), Some(q)) => Freq::new(p, q),
            _ => Err(Error::Overflow(format!("{self:?} * {k}"))),
        }
    }

    pub fn neg(self) -> Freq {
        Freq {
            p: -self.p,
            q: -self.q,
        }
    }

    /// `|p| + |q|`, saturating.
    pub fn l1(self) -> u128 {
        self.p.unsigned_abs().saturating_add(self.q.unsigned_abs())
    }

    /// Number of bits needed for the larger component magnitude.
    pub fn bits(self) -> u32 {
        let m = self.p.unsigned_abs().max(self.q.unsigned_abs());
        128 - m.leading_zeros()
    }
}

/// The torus point `(2π a_x/N, 2π a_y/N)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RationalPoint {
    pub ax: u128,
    pub ay: u128,
    pub n: u128,
}

impl RationalPoint {
    pub fn new(ax: u128, ay: u128, n: u128) -> Result<Self> {
        if n == 0 || ax >= n || ay >= n {
            return Err(Error::Config(format!(
                "rational point requires 0 <= a_x, a_y < N, got ({ax}, {ay}, {n})"
            )));
        }
        Ok(RationalPoint { ax, ay, n })
    }

    pub const ORIGIN: RationalPoint = RationalPoint { ax: 0, ay: 0, n: 1 };

    /// The same point on the lattice with denominator `N·M`.
    pub fn refine(self, m: u128) -> Result<Self> {
        match (
            self.ax.checked_mul(m),
            self.ay.checked_mul(m),
            self.n.checked_mul(m),
        ) {
            (Some(ax), Some(ay), Some(n)) if m > 0 => Ok(RationalPoint { ax, ay, n }),
            _ => Err(Error::Overflow(format!(
                "refining denominator {} by {m}",
                self.n
            ))),
        }
    }

    /// The dilated point `(k·x, k·y)` on the same lattice.
    pub fn dilate(self, k: u128) -> RationalPoint {
        RationalPoint {
            ax: mulmod(self.ax, k % self.n, self.n),
            ay: mulmod(self.ay, k % self.n, self.n),
            n: self.n,
        }
    }

    /// Floating-point coordinates in `[0, 2π)`.
    pub fn coords(self) -> (f64, f64) {
        (TAU * ratio(self.ax, self.n), TAU * ratio(self.ay, self.n))
    }
}

/// `a·b mod n` for `a, b < n`, with a big-integer path when the product can overflow.
pub fn mulmod(a: u128, b: u128, n: u128) -> u128 {
    if n <= NATIVE_DENOM_LIMIT {
        (a * b) % n
    } else {
        let r = (BigInt::from(a) * BigInt::from(b)) % BigInt::from(n);
        r.to_u128().expect("residue below modulus")
    }
}

fn ratio(r: u128, n: u128) -> f64 {
    let x = r as f64 / n as f64;
    // r < n, but the division can round up to exactly 1.0 for huge n.
    if x >= 1.0 {
        0.0
    } else {
        x
    }
}

/// Phase residue `(p·a_x + q·a_y) mod N`, exact.
pub fn phase_residue(f: Freq, pt: RationalPoint) -> u128 {
    let n = pt.n;
    if n <= NATIVE_DENOM_LIMIT {
        let ni = n as i128;
        let pr = f.p.rem_euclid(ni) as u128;
        let qr = f.q.rem_euclid(ni) as u128;
        // each product is below 2^126, the sum below 2^127
        (pr * pt.ax + qr * pt.ay) % n
    } else {
        let nb = BigInt::from(n);
        let s = BigInt::from(f.p) * BigInt::from(pt.ax) + BigInt::from(f.q) * BigInt::from(pt.ay);
        s.mod_floor(&nb).to_u128().expect("residue below modulus")
    }
}

/// Same as [`phase_residue`] but refuses denominators that need the
/// arbitrary-precision path.
pub fn phase_residue_native(f: Freq, pt: RationalPoint) -> Result<u128> {
    if pt.n > NATIVE_DENOM_LIMIT {
        return Err(Error::Config(format!(
            "denominator {} exceeds the native limit 2^63 and big-integer fallback is disabled",
            pt.n
        )));
    }
    Ok(phase_residue(f, pt))
}

/// The angle `p·x + q·y` reduced to `[0, 2π)`.
pub fn phase(f: Freq, pt: RationalPoint) -> f64 {
    TAU * ratio(phase_residue(f, pt), pt.n)
}

/// `e^{i(p x + q y)}` at a rational point.
pub fn character(f: Freq, pt: RationalPoint) -> Complex64 {
    let (s, c) = phase(f, pt).sin_cos();
    Complex64::new(c, s)
}

/// A sparse trigonometric polynomial `Σ c_{pq} e^{i(px+qy)}`.
///
/// Terms are kept sorted by frequency with no duplicates and no zero
/// coefficients.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrigPoly {
    terms: Vec<(Freq, Complex64)>,
}

impl TrigPoly {
    pub fn zero() -> Self {
        TrigPoly { terms: Vec::new() }
    }

    pub fn constant(c: Complex64) -> Self {
        TrigPoly::from_terms([(Freq::ZERO, c)])
    }

    pub fn monomial(f: Freq, c: Complex64) -> Self {
        TrigPoly::from_terms([(f, c)])
    }

    /// Duplicate frequencies are summed; exact zeros are pruned.
    pub fn from_terms<I: IntoIterator<Item = (Freq, Complex64)>>(terms: I) -> Self {
        let mut map: BTreeMap<Freq, Complex64> = BTreeMap::new();
        for (f, c) in terms {
            *map.entry(f).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        TrigPoly {
            terms: map
                .into_iter()
                .filter(|(_, c)| *c != Complex64::new(0.0, 0.0))
                .collect(),
        }
    }

    pub fn terms(&self) -> &[(Freq, Complex64)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn spectrum(&self) -> impl Iterator<Item = Freq> + '_ {
        self.terms.iter().map(|(f, _)| *f)
    }

    pub fn coeff(&self, f: Freq) -> Complex64 {
        match self.terms.binary_search_by(|(g, _)| g.cmp(&f)) {
            Ok(i) => self.terms[i].1,
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// `Σ|c|`, an upper bound for the sup norm.
    pub fn coeff_norm(&self) -> f64 {
        self.terms.iter().map(|(_, c)| c.norm()).sum()
    }

    /// Largest `|p|` and `|q|` over the spectrum.
    pub fn extent(&self) -> (u128, u128) {
        self.terms.iter().fold((0, 0), |(a, b), (f, _)| {
            (a.max(f.p.unsigned_abs()), b.max(f.q.unsigned_abs()))
        })
    }

    pub fn eval(&self, pt: RationalPoint) -> Complex64 {
        self.terms
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, (f, c)| {
                acc + c * character(*f, pt)
            })
    }

    pub fn scale(&self, k: Complex64) -> TrigPoly {
        TrigPoly::from_terms(self.terms.iter().map(|(f, c)| (*f, c * k)))
    }

    pub fn add(&self, other: &TrigPoly) -> TrigPoly {
        TrigPoly::from_terms(self.terms.iter().chain(other.terms.iter()).copied())
    }

    /// Multiplication by `e^{i(px+qy)}`.
    pub fn shift(&self, by: Freq) -> Result<TrigPoly> {
        let terms = self
            .terms
            .iter()
            .map(|(f, c)| Ok((f.checked_add(by)?, *c)))
            .collect::<Result<Vec<_>>>()?;
        Ok(TrigPoly { terms })
    }

    /// `T(kx, ky)`; `k` must be positive.
    pub fn dilate(&self, k: i128) -> Result<TrigPoly> {
        if k <= 0 {
            return Err(Error::Config(format!(
                "dilation factor must be positive, got {k}"
            )));
        }
        let terms = self
            .terms
            .iter()
            .map(|(f, c)| Ok((f.checked_scale(k)?, *c)))
            .collect::<Result<Vec<_>>>()?;
        Ok(TrigPoly { terms })
    }

    pub fn filter<F: Fn(Freq) -> bool>(&self, keep: F) -> TrigPoly {
        TrigPoly {
            terms: self
                .terms
                .iter()
                .filter(|(f, _)| keep(*f))
                .copied()
                .collect(),
        }
    }

    pub fn mul(&self, other: &TrigPoly) -> Result<TrigPoly> {
        let mut out = Vec::with_capacity(self.len() * other.len());
        for (f, a) in &self.terms {
            for (g, b) in &other.terms {
                out.push((f.checked_add(*g)?, a * b));
            }
        }
        Ok(TrigPoly::from_terms(out))
    }

    /// The polynomial whose values are the complex conjugates of `self`.
    pub fn conj(&self) -> TrigPoly {
        TrigPoly::from_terms(self.terms.iter().map(|(f, c)| (f.neg(), c.conj())))
    }

    /// `Re T` as a polynomial with Hermitian-symmetric coefficients.
    pub fn real_part(&self) -> TrigPoly {
        self.add(&self.conj()).scale(Complex64::new(0.5, 0.0))
    }

    /// `Im T`, likewise.
    pub fn imag_part(&self) -> TrigPoly {
        let diff = self.add(&self.conj().scale(Complex64::new(-1.0, 0.0)));
        diff.scale(Complex64::new(0.0, -0.5))
    }

    /// Precomputes residues for repeated evaluation on one lattice.
    pub fn prepare(&self, n: u128) -> PreparedPoly {
        PreparedPoly::new(self.terms.iter().copied(), n)
    }
}

/// Sum over the part of the spectrum inside `region`.
pub fn partial_sum<R: FreqRegion + ?Sized>(
    t: &TrigPoly,
    region: &R,
    pt: RationalPoint,
) -> Complex64 {
    t.terms
        .iter()
        .filter(|(f, _)| region.contains_freq(*f))
        .fold(Complex64::new(0.0, 0.0), |acc, (f, c)| {
            acc + c * character(*f, pt)
        })
}

/// A polynomial with frequency residues precomputed for a fixed denominator.
#[derive(Clone, Debug)]
pub struct PreparedPoly {
    n: u128,
    native: bool,
    residues: Vec<(u128, u128)>,
    freqs: Vec<Freq>,
    coeffs: Vec<Complex64>,
}

impl PreparedPoly {
    fn new<I: IntoIterator<Item = (Freq, Complex64)>>(terms: I, n: u128) -> Self {
        let native = n <= NATIVE_DENOM_LIMIT;
        let mut residues = Vec::new();
        let mut freqs = Vec::new();
        let mut coeffs = Vec::new();
        for (f, c) in terms {
            if native {
                let ni = n as i128;
                residues.push((f.p.rem_euclid(ni) as u128, f.q.rem_euclid(ni) as u128));
            }
            freqs.push(f);
            coeffs.push(c);
        }
        PreparedPoly {
            n,
            native,
            residues,
            freqs,
            coeffs,
        }
    }

    pub fn denominator(&self) -> u128 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    #[inline]
    fn term(&self, k: usize, pt: RationalPoint) -> Complex64 {
        let r = if self.native {
            let (pr, qr) = self.residues[k];
            (pr * pt.ax + qr * pt.ay) % self.n
        } else {
            phase_residue(self.freqs[k], pt)
        };
        let (s, c) = (TAU * ratio(r, self.n)).sin_cos();
        self.coeffs[k] * Complex64::new(c, s)
    }

    /// Evaluates in canonical order; panics if `pt` is on a different lattice.
    pub fn eval(&self, pt: RationalPoint) -> Complex64 {
        assert_eq!(
            pt.n, self.n,
            "point lattice does not match prepared denominator"
        );
        (0..self.len()).fold(Complex64::new(0.0, 0.0), |acc, k| acc + self.term(k, pt))
    }

    /// Sums of consecutive term ranges given by `bounds` (`bounds[g]..bounds[g+1]`).
    fn group_sums(&self, bounds: &[usize], pt: RationalPoint, out: &mut Vec<Complex64>) {
        assert_eq!(
            pt.n, self.n,
            "point lattice does not match prepared denominator"
        );
        out.clear();
        for w in bounds.windows(2) {
            let s = (w[0]..w[1]).fold(Complex64::new(0.0, 0.0), |acc, k| acc + self.term(k, pt));
            out.push(s);
        }
    }
}

/// Incremental partial sums of one polynomial along an ordered region list.
///
/// Each term is assigned to the first region that contains it and added
/// exactly once. This is only equal to region-by-region filtering when
/// membership is monotone along the list for every term of the spectrum,
/// which [`LadderPlan::new`] verifies on request.
#[derive(Clone, Debug)]
pub struct LadderPlan {
    prepared: PreparedPoly,
    bounds: Vec<usize>,
    excluded: usize,
}

impl LadderPlan {
    pub fn new<R: FreqRegion>(t: &TrigPoly, ladder: &[R], verify: bool, n: u128) -> Result<Self> {
        let mut buckets: Vec<Vec<(Freq, Complex64)>> = vec![Vec::new(); ladder.len()];
        let mut excluded = 0;
        for &(f, c) in t.terms() {
            match ladder.iter().position(|g| g.contains_freq(f)) {
                Some(k) => {
                    if verify {
                        if let Some(bad) =
                            (k + 1..ladder.len()).find(|&j| !ladder[j].contains_freq(f))
                        {
                            return Err(Error::Geometry(format!(
                                "ladder is not nested on the spectrum: {f:?} lies in region {k} but not in region {bad}"
                            )));
                        }
                    }
                    buckets[k].push((f, c));
                }
                None => excluded += 1,
            }
        }
        let mut bounds = vec![0];
        let mut flat = Vec::with_capacity(t.len());
        for b in buckets {
            flat.extend(b);
            bounds.push(flat.len());
        }
        Ok(LadderPlan {
            prepared: PreparedPoly::new(flat, n),
            bounds,
            excluded,
        })
    }

    /// Terms outside every region of the ladder.
    pub fn excluded(&self) -> usize {
        self.excluded
    }

    pub fn ladder_len(&self) -> usize {
        self.bounds.len() - 1
    }

    /// `S_{G_k}(T, pt)` for every `k`.
    pub fn prefix_sums(&self, pt: RationalPoint) -> Vec<Complex64> {
        let mut groups = Vec::with_capacity(self.ladder_len());
        self.prepared.group_sums(&self.bounds, pt, &mut groups);
        let mut acc = Complex64::new(0.0, 0.0);
        groups
            .into_iter()
            .map(|g| {
                acc += g;
                acc
            })
            .collect()
    }

    pub fn max_prefix(&self, pt: RationalPoint) -> f64 {
        self.prefix_sums(pt)
            .into_iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// `max_k |S_{G_k}(T, pt)|` along a ladder of regions.
pub fn max_prefix_partial_sums<R: FreqRegion>(
    t: &TrigPoly,
    ladder: &[R],
    pt: RationalPoint,
    verify: bool,
) -> Result<f64> {
    Ok(LadderPlan::new(t, ladder, verify, pt.n)?.max_prefix(pt))
}

/// Compares two complex sums in canonical order; used by determinism tests.
pub fn bitwise_eq(a: Complex64, b: Complex64) -> bool {
    a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()
}

/// Greatest common divisor of two unsigned values.
pub fn gcd_u128(a: u128, b: u128) -> u128 {
    a.gcd(&b)
}

/// Least common multiple, or an overflow error.
pub fn lcm_u128(a: u128, b: u128) -> Result<u128> {
    if a == 0 || b == 0 {
        return Ok(0);
    }
    (a / a.gcd(&b))
        .checked_mul(b)
        .ok_or_else(|| Error::Overflow(format!("lcm({a}, {b})")))
}

/// Exact `x mod n` for a signed big integer.
pub fn bigint_mod(x: &BigInt, n: u128) -> u128 {
    let nb = BigInt::from(n);
    let r = x.mod_floor(&nb);
    debug_assert!(!r.is_negative());
    if r.is_zero() {
        0
    } else {
        r.to_u128().expect("residue below modulus")
    }
}

impl PartialOrd for RationalPoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for RationalPoint {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.n, self.ax, self.ay).cmp(&(other.n, other.ax, other.ay))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn phase_examples() {
        let pt = RationalPoint::new(1, 0, 4).unwrap();
        assert!((phase(Freq { p: 1, q: 0 }, pt) - PI / 2.0).abs() < 1e-15);
        let pt = RationalPoint::new(5, 3, 11).unwrap();
        assert_eq!(phase(Freq::ZERO, pt), 0.0);
    }

    #[test]
    fn phase_huge_frequency_against_bigint_oracle() {
        let p: i128 = 10i128.pow(30);
        // oracle: 10^30 mod 7 by repeated squaring on BigInt
        let oracle = BigInt::from(10).modpow(&BigInt::from(30), &BigInt::from(7));
        assert_eq!(oracle, BigInt::from(1));
        let pt = RationalPoint::new(3, 0, 7).unwrap();
        assert_eq!(phase_residue(Freq { p, q: 0 }, pt), 3);
        assert!((phase(Freq { p, q: 0 }, pt) - TAU * 3.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn native_path_refuses_wide_denominators() {
        let pt = RationalPoint::new(1, 1, (1u128 << 100) + 7).unwrap();
        let f = Freq { p: 3, q: -5 };
        assert!(matches!(phase_residue_native(f, pt), Err(Error::Config(_))));
        // the fallback agrees with a direct big-integer computation
        let direct = (BigInt::from(3) - BigInt::from(5)).mod_floor(&BigInt::from(pt.n));
        assert_eq!(BigInt::from(phase_residue(f, pt)), direct);
    }

    #[test]
    fn eval_examples() {
        let t = TrigPoly::monomial(Freq { p: 1, q: 1 }, c(1.0));
        assert_eq!(t.eval(RationalPoint::ORIGIN), c(1.0));
        let t = TrigPoly::from_terms([
            (Freq { p: 1, q: 0 }, c(1.0)),
            (Freq { p: -1, q: 0 }, c(1.0)),
        ]);
        let v = t.eval(RationalPoint::new(1, 0, 4).unwrap());
        assert!(v.norm() < 1e-15);
        assert_eq!(TrigPoly::zero().eval(RationalPoint::ORIGIN), c(0.0));
    }

    #[test]
    fn duplicate_terms_merge_and_zeros_prune() {
        let f = Freq { p: 2, q: -1 };
        let t = TrigPoly::from_terms([(f, c(1.0)), (f, c(-1.0)), (Freq::ZERO, c(2.0))]);
        assert_eq!(t.len(), 1);
        assert_eq!(t.coeff(Freq::ZERO), c(2.0));
    }

    #[test]
    fn real_and_imag_parts_recombine() {
        let t = TrigPoly::from_terms([
            (Freq { p: 3, q: 1 }, Complex64::new(0.3, -0.7)),
            (Freq { p: -2, q: 5 }, Complex64::new(1.1, 0.2)),
        ]);
        let pt = RationalPoint::new(17, 5, 101).unwrap();
        let v = t.eval(pt);
        let re = t.real_part().eval(pt);
        let im = t.imag_part().eval(pt);
        assert!((re.re - v.re).abs() < 1e-14 && re.im.abs() < 1e-14);
        assert!((im.re - v.im).abs() < 1e-14 && im.im.abs() < 1e-14);
    }

    #[test]
    fn prepared_matches_direct() {
        let t = TrigPoly::from_terms([
            (
                Freq {
                    p: 10i128.pow(20),
                    q: 7,
                },
                Complex64::new(0.5, 0.25),
            ),
            (
                Freq {
                    p: -3,
                    q: 10i128.pow(18),
                },
                c(-1.0),
            ),
        ]);
        let n = 1_000_003u128 * 4096;
        let pt = RationalPoint::new(123_456_789, 987_654, n).unwrap();
        assert!(bitwise_eq(t.prepare(n).eval(pt), t.eval(pt)));
    }
}
