//! Spectral regions with exact rational containment tests.
//!
//! Rhombi are closed, balls are open, and sectors are half-open in angle,
//! `α ≤ θ < β`. All parameters are exact rationals.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::exact_eval::Freq;

/// Anything that can decide whether a lattice frequency belongs to it.
pub trait FreqRegion {
    fn contains_freq(&self, f: Freq) -> bool;
}

impl<R: FreqRegion + ?Sized> FreqRegion for &R {
    fn contains_freq(&self, f: Freq) -> bool {
        (**self).contains_freq(f)
    }
}

pub fn rat(n: i128, d: i128) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i128) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Nearest rational with denominator `2^bits`.
pub fn rat_approx(x: f64, bits: u32) -> BigRational {
    let scale = 2f64.powi(bits as i32);
    let num = BigInt::from((x * scale).round() as i128);
    BigRational::new(num, BigInt::one() << bits)
}

pub fn rat_to_f64(r: &BigRational) -> f64 {
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            // shift both into range before dividing
            let shift = r.numer().bits().max(r.denom().bits()).saturating_sub(1000) as usize;
            let n = (r.numer() >> shift).to_f64().unwrap_or(0.0);
            let d = (r.denom() >> shift).to_f64().unwrap_or(f64::INFINITY);
            n / d
        }
    }
}

/// Parses `-3`, `1/4` or a finite decimal such as `0.125`, exactly.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Config(format!("not a rational number: {s:?}"));
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let neg = int.starts_with('-');
        let int_digits = int.trim_start_matches(['-', '+']);
        let digits = format!(
            "{}{}",
            if int_digits.is_empty() {
                "0"
            } else {
                int_digits
            },
            frac
        );
        let n = BigInt::from_str(&digits).map_err(|_| bad())?;
        let d = num_traits::pow(BigInt::from(10), frac.len());
        let r = BigRational::new(n, d);
        return Ok(if neg { -r } else { r });
    }
    BigRational::from_str(s).map_err(|_| bad())
}

fn freq_coord(x: i128) -> BigRational {
    rat_int(x)
}

/// The closed rhombus `{a|x| + b|y| ≤ 1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rhombus {
    pub a: BigRational,
    pub b: BigRational,
}

impl Rhombus {
    pub fn new(a: BigRational, b: BigRational) -> Result<Self> {
        if !a.is_positive() || !b.is_positive() {
            return Err(Error::Geometry(format!(
                "rhombus parameters must be positive, got a={a}, b={b}"
            )));
        }
        Ok(Rhombus { a, b })
    }

    /// The rhombus with vertices `(±x, 0)` and `(0, ±y)`.
    pub fn from_intercepts(x: BigRational, y: BigRational) -> Result<Self> {
        if !x.is_positive() || !y.is_positive() {
            return Err(Error::Geometry(format!(
                "intercepts must be positive, got {x}, {y}"
            )));
        }
        Rhombus::new(x.recip(), y.recip())
    }

    /// `max(a,b)/min(a,b)`.
    pub fn rho(&self) -> BigRational {
        if self.a >= self.b {
            &self.a / &self.b
        } else {
            &self.b / &self.a
        }
    }

    pub fn intercepts(&self) -> (BigRational, BigRational) {
        (self.a.recip(), self.b.recip())
    }

    pub fn scale(&self, n: u128) -> Rhombus {
        let n = BigRational::from_integer(BigInt::from(n));
        Rhombus {
            a: &self.a / &n,
            b: &self.b / &n,
        }
    }

    /// Exact inclusion `self ⊆ other`.
    pub fn is_subset_of(&self, other: &Rhombus) -> bool {
        other.a <= self.a && other.b <= self.b
    }
}

impl FreqRegion for Rhombus {
    fn contains_freq(&self, f: Freq) -> bool {
        let s = &self.a * freq_coord(f.p.abs()) + &self.b * freq_coord(f.q.abs());
        s <= BigRational::one()
    }
}

/// The open ball `{(p−x0)² + (q−y0)² < r2}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Ball {
    pub x0: BigRational,
    pub y0: BigRational,
    pub r2: BigRational,
}

impl Ball {
    pub fn new(x0: BigRational, y0: BigRational, r2: BigRational) -> Result<Self> {
        if !r2.is_positive() {
            return Err(Error::Geometry(format!(
                "ball radius squared must be positive, got {r2}"
            )));
        }
        Ok(Ball { x0, y0, r2 })
    }

    /// `|center|² / r²`, exact.
    pub fn tau_sq(&self) -> BigRational {
        (&self.x0 * &self.x0 + &self.y0 * &self.y0) / &self.r2
    }

    /// `|center| / r`.
    pub fn tau(&self) -> f64 {
        rat_to_f64(&self.tau_sq()).sqrt()
    }

    pub fn scale(&self, n: u128) -> Ball {
        let n = BigRational::from_integer(BigInt::from(n));
        Ball {
            x0: &self.x0 * &n,
            y0: &self.y0 * &n,
            r2: &self.r2 * &n * &n,
        }
    }

    /// Whether the rational point lies strictly inside.
    pub fn contains_point(&self, x: &BigRational, y: &BigRational) -> bool {
        let dx = x - &self.x0;
        let dy = y - &self.y0;
        &dx * &dx + &dy * &dy < self.r2
    }

    /// Exact inclusion `self ⊆ other` for open balls: `|c − c'| + r ≤ r'`.
    pub fn is_subset_of(&self, other: &Ball) -> bool {
        let dx = &self.x0 - &other.x0;
        let dy = &self.y0 - &other.y0;
        let d2 = &dx * &dx + &dy * &dy;
        // |c−c'| ≤ r' − r  ⇔  r' ≥ r and d2 ≤ r'² − 2 r r' + r², i.e.
        // 2 r r' ≤ r'² + r² − d2, squared with a sign guard.
        if other.r2 < self.r2 {
            return false;
        }
        let rhs = &other.r2 + &self.r2 - &d2;
        if rhs.is_negative() {
            return false;
        }
        BigRational::from_integer(BigInt::from(4)) * &self.r2 * &other.r2 <= &rhs * &rhs
    }
}

impl FreqRegion for Ball {
    fn contains_freq(&self, f: Freq) -> bool {
        self.contains_point(&freq_coord(f.p), &freq_coord(f.q))
    }
}

/// A rational direction vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Direction {
    pub dx: BigRational,
    pub dy: BigRational,
}

impl Direction {
    pub fn new(dx: BigRational, dy: BigRational) -> Result<Self> {
        if dx.is_zero() && dy.is_zero() {
            return Err(Error::Geometry("zero direction vector".into()));
        }
        Ok(Direction { dx, dy })
    }

    /// Rational approximation (at `2^-40`) of the unit vector at angle `θ`.
    pub fn from_angle(theta: f64) -> Result<Self> {
        let (s, c) = theta.sin_cos();
        Direction::new(rat_approx(c, 40), rat_approx(s, 40))
    }

    pub fn angle(&self) -> f64 {
        let a = rat_to_f64(&self.dy).atan2(rat_to_f64(&self.dx));
        if a < 0.0 {
            a + std::f64::consts::TAU
        } else {
            a
        }
    }
}

fn cross(ax: &BigRational, ay: &BigRational, bx: &BigRational, by: &BigRational) -> BigRational {
    ax * by - ay * bx
}

/// Exact comparison of the polar angles in `[0, 2π)` of two nonzero vectors.
pub fn cmp_angle(
    ax: &BigRational,
    ay: &BigRational,
    bx: &BigRational,
    by: &BigRational,
) -> Ordering {
    let ua = ay.is_positive() || (ay.is_zero() && ax.is_positive());
    let ub = by.is_positive() || (by.is_zero() && bx.is_positive());
    match (ua, ub) {
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        _ => {
            let c = cross(ax, ay, bx, by);
            if c.is_positive() {
                Ordering::Less
            } else if c.is_negative() {
                Ordering::Greater
            } else {
                Ordering::Equal
            }
        }
    }
}

/// `offset + {v : α ≤ arg v < β}`; the vertex itself is included.
///
/// `beta = None` stands for `β = 2π`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Sector {
    pub alpha: Direction,
    pub beta: Option<Direction>,
    pub offset: Freq,
}

impl Sector {
    pub fn new(alpha: Direction, beta: Option<Direction>, offset: Freq) -> Result<Self> {
        if let Some(b) = &beta {
            if cmp_angle(&alpha.dx, &alpha.dy, &b.dx, &b.dy) != Ordering::Less {
                return Err(Error::Geometry("sector requires α < β".into()));
            }
        }
        Ok(Sector {
            alpha,
            beta,
            offset,
        })
    }

    pub fn from_angles(alpha: f64, beta: f64, offset: Freq) -> Result<Self> {
        if !(0.0..std::f64::consts::TAU).contains(&alpha)
            || beta <= alpha
            || beta > std::f64::consts::TAU
        {
            return Err(Error::Geometry(format!(
                "sector angles must satisfy 0 ≤ α < β ≤ 2π, got {alpha}, {beta}"
            )));
        }
        let beta = if beta >= std::f64::consts::TAU {
            None
        } else {
            Some(Direction::from_angle(beta)?)
        };
        Sector::new(Direction::from_angle(alpha)?, beta, offset)
    }

    pub fn contains_vec(&self, vx: &BigRational, vy: &BigRational) -> bool {
        if vx.is_zero() && vy.is_zero() {
            return true;
        }
        let a = &self.alpha;
        if cmp_angle(&a.dx, &a.dy, vx, vy) == Ordering::Greater {
            return false;
        }
        match &self.beta {
            None => true,
            Some(b) => cmp_angle(vx, vy, &b.dx, &b.dy) == Ordering::Less,
        }
    }

    pub fn scale(&self, n: u128) -> Result<Sector> {
        let k = i128::try_from(n).map_err(|_| Error::Overflow(format!("scale factor {n}")))?;
        Ok(Sector {
            alpha: self.alpha.clone(),
            beta: self.beta.clone(),
            offset: self.offset.checked_scale(k)?,
        })
    }
}

impl FreqRegion for Sector {
    fn contains_freq(&self, f: Freq) -> bool {
        let vx = rat_int(f.p) - rat_int(self.offset.p);
        let vy = rat_int(f.q) - rat_int(self.offset.q);
        self.contains_vec(&vx, &vy)
    }
}

/// The rhombus whose first-quadrant part is the triangle cut from `ℝ²₊`
/// by a sector with vertex `(l, 0)`, `l > 0`, bounded by the negative
/// `x` direction and a ray pointing up and to the left.
pub fn symmetrize_triangle(theta: &Sector) -> Result<Rhombus> {
    let bad = |why: &str| {
        Error::Geometry(format!(
            "sector does not cut a triangle from the first quadrant: {why}"
        ))
    };
    if theta.offset.q != 0 || theta.offset.p <= 0 {
        return Err(bad("vertex must lie on the positive x axis"));
    }
    let beta = theta
        .beta
        .as_ref()
        .ok_or_else(|| bad("unbounded aperture"))?;
    if !(beta.dy.is_zero() && beta.dx.is_negative()) {
        return Err(bad("upper boundary must point along the negative x axis"));
    }
    let a = &theta.alpha;
    if !(a.dx.is_negative() && a.dy.is_positive()) {
        return Err(bad(
            "lower boundary must point into the open second quadrant",
        ));
    }
    let l = rat_int(theta.offset.p);
    let y = &l * &a.dy / (-&a.dx);
    Rhombus::from_intercepts(l, y)
}

/// Any of the supported region shapes.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Region {
    Rhombus(Rhombus),
    Ball(Ball),
    Sector(Sector),
}

impl Region {
    pub fn scale(&self, n: u128) -> Result<Region> {
        if n == 0 {
            return Err(Error::Config("scale factor must be positive".into()));
        }
        Ok(match self {
            Region::Rhombus(r) => Region::Rhombus(r.scale(n)),
            Region::Ball(b) => Region::Ball(b.scale(n)),
            Region::Sector(s) => Region::Sector(s.scale(n)?),
        })
    }
}

impl FreqRegion for Region {
    fn contains_freq(&self, f: Freq) -> bool {
        match self {
            Region::Rhombus(r) => r.contains_freq(f),
            Region::Ball(b) => b.contains_freq(f),
            Region::Sector(s) => s.contains_freq(f),
        }
    }
}

/// Scales a region's frequency coordinates by `n`.
pub fn scale_region(g: &Region, n: u128) -> Result<Region> {
    g.scale(n)
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Region::Rhombus(r) => write!(f, "rhombus a={} b={}", r.a, r.b),
            Region::Ball(b) => write!(f, "ball x0={} y0={} r2={}", b.x0, b.y0, b.r2),
            Region::Sector(s) => {
                write!(f, "sector alpha_dir={},{}", s.alpha.dx, s.alpha.dy)?;
                if let Some(b) = &s.beta {
                    write!(f, " beta_dir={},{}", b.dx, b.dy)?;
                }
                write!(f, " offset={},{}", s.offset.p, s.offset.q)
            }
        }
    }
}

fn parse_angle(s: &str) -> Result<f64> {
    let bad = || Error::Config(format!("not an angle: {s:?}"));
    let s = s.trim();
    if let Some(idx) = s.find("pi") {
        let (coef, rest) = s.split_at(idx);
        let rest = &rest[2..];
        let c = match coef {
            "" => 1.0,
            "-" => -1.0,
            _ => coef
                .trim_end_matches('*')
                .parse::<f64>()
                .map_err(|_| bad())?,
        };
        let d = if rest.is_empty() {
            1.0
        } else {
            rest.strip_prefix('/')
                .ok_or_else(bad)?
                .parse::<f64>()
                .map_err(|_| bad())?
        };
        return Ok(c * std::f64::consts::PI / d);
    }
    s.parse::<f64>().map_err(|_| bad())
}

fn parse_pair<T, F: Fn(&str) -> Result<T>>(s: &str, each: F) -> Result<(T, T)> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| Error::Config(format!("expected a pair `x,y`, got {s:?}")))?;
    Ok((each(a)?, each(b)?))
}

fn parse_int(s: &str) -> Result<i128> {
    s.trim()
        .parse()
        .map_err(|_| Error::Config(format!("not an integer: {s:?}")))
}

impl FromStr for Region {
    type Err = Error;

    /// `rhombus a=1/4 b=1/3`, `ball x0=0 y0=-5 r2=169/4`,
    /// `sector alpha=3pi/4 beta=pi offset=p,q` or with `alpha_dir=dx,dy`.
    fn from_str(s: &str) -> Result<Self> {
        let mut words = s.split_whitespace();
        let kind = words
            .next()
            .ok_or_else(|| Error::Config("empty region literal".into()))?;
        let mut kv = std::collections::BTreeMap::new();
        for w in words {
            let (k, v) = w.split_once('=').ok_or_else(|| {
                Error::Config(format!("expected key=value in region literal, got {w:?}"))
            })?;
            kv.insert(k.to_string(), v.to_string());
        }
        let get = |k: &str| {
            kv.get(k)
                .cloned()
                .ok_or_else(|| Error::Config(format!("{kind} literal is missing `{k}`")))
        };
        match kind {
            "rhombus" => Ok(Region::Rhombus(Rhombus::new(
                parse_rational(&get("a")?)?,
                parse_rational(&get("b")?)?,
            )?)),
            "ball" => Ok(Region::Ball(Ball::new(
                parse_rational(&get("x0")?)?,
                parse_rational(&get("y0")?)?,
                parse_rational(&get("r2")?)?,
            )?)),
            "sector" => {
                let offset = match kv.get("offset") {
                    Some(o) => {
                        let (p, q) = parse_pair(o, parse_int)?;
                        Freq::new(p, q)?
                    }
                    None => Freq::ZERO,
                };
                if let Some(ad) = kv.get("alpha_dir") {
                    let (dx, dy) = parse_pair(ad, parse_rational)?;
                    let beta = match kv.get("beta_dir") {
                        Some(bd) => {
                            let (bx, by) = parse_pair(bd, parse_rational)?;
                            Some(Direction::new(bx, by)?)
                        }
                        None => None,
                    };
                    Ok(Region::Sector(Sector::new(
                        Direction::new(dx, dy)?,
                        beta,
                        offset,
                    )?))
                } else {
                    let alpha = parse_angle(&get("alpha")?)?;
                    let beta = parse_angle(&get("beta")?)?;
                    Ok(Region::Sector(Sector::from_angles(alpha, beta, offset)?))
                }
            }
            other => Err(Error::Config(format!("unknown region kind {other:?}"))),
        }
    }
}

/// Which builder produced a ladder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LadderKind {
    Rhombus,
    Ball,
}

/// An ordered region list meant to be increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionLadder {
    pub regions: Vec<Region>,
    pub kind: LadderKind,
}

impl RegionLadder {
    /// Exact parameter check for consecutive rhombi and balls. Pairs that are
    /// not comparable this way (mixed kinds or non-nested balls) are checked on
    /// `spectrum` instead: membership must be monotone along the ladder.
    pub fn verify_nested(&self, spectrum: &[Freq]) -> Result<()> {
        for (k, w) in self.regions.windows(2).enumerate() {
            let exact = match (&w[0], &w[1]) {
                (Region::Rhombus(a), Region::Rhombus(b)) => Some(a.is_subset_of(b)),
                (Region::Ball(a), Region::Ball(b)) if a.is_subset_of(b) => Some(true),
                _ => None,
            };
            match exact {
                Some(true) => {}
                Some(false) => {
                    return Err(Error::Geometry(format!(
                        "ladder regions {k} and {} are not nested",
                        k + 1
                    )));
                }
                None => {
                    if let Some(f) = spectrum
                        .iter()
                        .find(|f| w[0].contains_freq(**f) && !w[1].contains_freq(**f))
                    {
                        return Err(Error::Geometry(format!(
                            "frequency {f:?} lies in ladder region {k} but not in region {}",
                            k + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn scale(&self, n: u128) -> Result<RegionLadder> {
        Ok(RegionLadder {
            regions: self
                .regions
                .iter()
                .map(|r| r.scale(n))
                .collect::<Result<_>>()?,
            kind: self.kind,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(p: i128, q: i128) -> Freq {
        Freq { p, q }
    }

    #[test]
    fn rho_examples() {
        let r = |a, b| Rhombus::new(rat_int(a), rat_int(b)).unwrap().rho();
        assert_eq!(r(2, 3), rat(3, 2));
        assert_eq!(r(5, 5), rat_int(1));
        assert_eq!(r(1, 4), rat_int(4));
    }

    #[test]
    fn tau_examples() {
        let b = Ball::new(rat_int(3), rat_int(4), rat_int(100)).unwrap();
        assert_eq!(b.tau(), 0.5);
        let b = Ball::new(rat_int(0), rat_int(0), rat_int(49)).unwrap();
        assert_eq!(b.tau(), 0.0);
    }

    #[test]
    fn containment_examples() {
        let d = Rhombus::new(rat(1, 4), rat(1, 4)).unwrap();
        assert!(d.contains_freq(f(1, 1)));
        assert!(!d.contains_freq(f(2, 3)));
        // boundary is included
        assert!(d.contains_freq(f(4, 0)));
        let b = Ball::new(rat_int(0), rat_int(0), rat(144, 100)).unwrap();
        assert!(!b.contains_freq(f(1, 1)));
        assert!(b.contains_freq(f(0, 1)));
        // open ball excludes its boundary
        let b = Ball::new(rat_int(0), rat_int(0), rat_int(1)).unwrap();
        assert!(!b.contains_freq(f(1, 0)));
    }

    #[test]
    fn symmetrize_examples() {
        let beta = Some(Direction::new(rat_int(-1), rat_int(0)).unwrap());
        let s = Sector::new(
            Direction::new(rat_int(-1), rat_int(1)).unwrap(),
            beta.clone(),
            f(4, 0),
        )
        .unwrap();
        assert_eq!(
            symmetrize_triangle(&s).unwrap(),
            Rhombus::new(rat(1, 4), rat(1, 4)).unwrap()
        );
        let s = Sector::new(
            Direction::new(rat_int(-1), rat_int(3)).unwrap(),
            beta,
            f(2, 0),
        )
        .unwrap();
        let r = symmetrize_triangle(&s).unwrap();
        assert_eq!(r, Rhombus::new(rat(1, 2), rat(1, 6)).unwrap());
        assert_eq!(r.rho(), rat_int(3));
        let unbounded = Sector::new(
            Direction::new(rat_int(-1), rat_int(1)).unwrap(),
            None,
            f(4, 0),
        )
        .unwrap();
        assert!(matches!(
            symmetrize_triangle(&unbounded),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn sector_is_half_open() {
        let s = Sector::from_angles(0.0, std::f64::consts::FRAC_PI_2, Freq::ZERO).unwrap();
        assert!(s.contains_freq(f(3, 0)));
        assert!(!s.contains_freq(f(0, 3)));
        assert!(s.contains_freq(f(2, 5)));
        assert!(!s.contains_freq(f(-1, 5)));
        assert!(s.contains_freq(Freq::ZERO));
    }

    #[test]
    fn ball_in_ball() {
        let big = Ball::new(rat_int(0), rat_int(0), rat_int(25)).unwrap();
        let small = Ball::new(rat_int(3), rat_int(0), rat_int(4)).unwrap();
        assert!(small.is_subset_of(&big));
        let tangent = Ball::new(rat_int(3), rat_int(0), rat_int(4)).unwrap();
        assert!(tangent.is_subset_of(&Ball::new(rat_int(0), rat_int(0), rat_int(25)).unwrap()));
        let poking = Ball::new(rat_int(4), rat_int(0), rat_int(4)).unwrap();
        assert!(!poking.is_subset_of(&big));
    }

    #[test]
    fn literals_round_trip() {
        for lit in ["rhombus a=1/4 b=1/3", "ball x0=0 y0=-5 r2=169/4"] {
            let r: Region = lit.parse().unwrap();
            assert_eq!(r.to_string(), lit);
        }
        let s: Region = "sector alpha=3pi/4 beta=pi offset=10,0".parse().unwrap();
        let again: Region = s.to_string().parse().unwrap();
        assert_eq!(s, again);
        assert!(s.contains_freq(f(5, 3)));
        assert!(!s.contains_freq(f(5, 6)));
        assert!("hexagon a=1".parse::<Region>().is_err());
        assert_eq!(parse_rational("0.125").unwrap(), rat(1, 8));
        assert_eq!(parse_rational("-1.5").unwrap(), rat(-3, 2));
    }
}
