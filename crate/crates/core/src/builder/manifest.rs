//! Plain-text system manifests: every integer and rational needed to
//! re-verify a construction without rebuilding it.

use std::fmt::Write as _;

use num_rational::BigRational;

use super::schedule::{box_in_sector, spectrum_box, Divisibility, FreqSchedule};
use super::{ConstructedSystem, SectorFamily};
use crate::exact_eval::Freq;
use crate::regions::{parse_rational, Region};
use crate::tree::Rearrangement;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub m: u32,
    pub family: String,
    pub mode: Divisibility,
    pub growth: u128,
    pub gamma: Option<f64>,
    pub sigma: Vec<usize>,
    pub freqs: Vec<Freq>,
    pub p_next: u128,
    /// `(base node, degree)` for every factor of `f_n`, `n = 2..=ν`.
    pub degrees: Vec<Vec<(usize, u32)>>,
    /// `S_2, …, S_ν`.
    pub sectors: Vec<Region>,
    pub regions: Vec<Region>,
}

fn family_text(f: &SectorFamily) -> String {
    match f {
        SectorFamily::Rhombus { delta } => format!("rhombus delta={delta}"),
        SectorFamily::Ball { eps } => format!("ball eps={eps:?}"),
    }
}

impl Manifest {
    pub fn from_system(sys: &ConstructedSystem, gamma: Option<f64>, regions: &[Region]) -> Self {
        Manifest {
            m: sys.m(),
            family: family_text(&sys.family),
            mode: sys.schedule.mode,
            growth: sys.schedule.growth,
            gamma,
            sigma: sys.sigma.order.clone(),
            freqs: sys.schedule.freqs().to_vec(),
            p_next: sys.schedule.p_next,
            degrees: sys.smoothing.degrees(),
            sectors: sys.sectors.iter().cloned().map(Region::Sector).collect(),
            regions: regions.to_vec(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "m = {}", self.m);
        let _ = writeln!(out, "family = {}", self.family);
        let _ = writeln!(
            out,
            "mode = {}",
            match self.mode {
                Divisibility::Chain => "chain",
                Divisibility::TreeAncestor => "tree",
            }
        );
        let _ = writeln!(out, "growth = {}", self.growth);
        if let Some(g) = self.gamma {
            let _ = writeln!(out, "gamma = {g:?}");
        }
        let sigma: Vec<String> = self.sigma.iter().map(|n| n.to_string()).collect();
        let _ = writeln!(out, "sigma = {}", sigma.join(" "));
        for (i, f) in self.freqs.iter().enumerate() {
            let _ = writeln!(out, "freq {} = {} {}", i + 2, f.p, f.q);
        }
        let _ = writeln!(out, "p_next = {}", self.p_next);
        for (i, fs) in self.degrees.iter().enumerate() {
            let d: Vec<String> = fs.iter().map(|(b, d)| format!("{b}:{d}")).collect();
            let _ = writeln!(out, "degrees {} = {}", i + 2, d.join(" "));
        }
        for (i, s) in self.sectors.iter().enumerate() {
            let _ = writeln!(out, "sector {} = {s}", i + 2);
        }
        for (i, r) in self.regions.iter().enumerate() {
            let _ = writeln!(out, "region {} = {r}", i + 1);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: &str| Error::Config(format!("bad manifest line {line:?}"));
        let int = |s: &str| {
            s.trim()
                .parse::<i128>()
                .map_err(|_| Error::Config(format!("not an integer: {s:?}")))
        };
        let mut m = None;
        let mut man = Manifest {
            m: 0,
            family: String::new(),
            mode: Divisibility::Chain,
            growth: 0,
            gamma: None,
            sigma: Vec::new(),
            freqs: Vec::new(),
            p_next: 0,
            degrees: Vec::new(),
            sectors: Vec::new(),
            regions: Vec::new(),
        };
        for line in text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
        {
            let (key, val) = line.split_once('=').ok_or_else(|| bad(line))?;
            let (key, val) = (key.trim(), val.trim());
            let mut kw = key.split_whitespace();
            match (kw.next(), kw.next()) {
                (Some("m"), None) => m = Some(int(val)? as u32),
                (Some("family"), None) => man.family = val.to_string(),
                (Some("mode"), None) => {
                    man.mode = match val {
                        "chain" => Divisibility::Chain,
                        "tree" => Divisibility::TreeAncestor,
                        _ => return Err(bad(line)),
                    }
                }
                (Some("growth"), None) => man.growth = int(val)? as u128,
                (Some("gamma"), None) => man.gamma = Some(val.parse().map_err(|_| bad(line))?),
                (Some("sigma"), None) => {
                    man.sigma = val
                        .split_whitespace()
                        .map(|w| int(w).map(|v| v as usize))
                        .collect::<Result<_>>()?
                }
                (Some("freq"), Some(_)) => {
                    let (p, q) = val.split_once(' ').ok_or_else(|| bad(line))?;
                    man.freqs.push(Freq::new(int(p)?, int(q)?)?);
                }
                (Some("p_next"), None) => man.p_next = int(val)? as u128,
                (Some("degrees"), Some(_)) => {
                    let fs = val
                        .split_whitespace()
                        .map(|w| {
                            let (b, d) = w.split_once(':').ok_or_else(|| bad(line))?;
                            Ok((int(b)? as usize, int(d)? as u32))
                        })
                        .collect::<Result<_>>()?;
                    man.degrees.push(fs);
                }
                (Some("sector"), Some(_)) => man.sectors.push(val.parse()?),
                (Some("region"), Some(_)) => man.regions.push(val.parse()?),
                _ => return Err(bad(line)),
            }
        }
        man.m = m.ok_or_else(|| Error::Config("manifest has no `m`".into()))?;
        Ok(man)
    }

    /// Re-checks from the listed numbers alone: σ is a bijection, the
    /// schedule invariants hold, and every spectrum box of `T_l` lies in
    /// its sector.
    pub fn verify(&self) -> Result<()> {
        Rearrangement::supplied(self.m, self.sigma.clone())?.check_bijective()?;
        let mut sched = FreqSchedule::from_freqs(self.m, self.freqs.clone(), self.p_next)?;
        sched.mode = self.mode;
        sched.growth = self.growth;
        sched.validate()?;
        if self.degrees.len() != self.freqs.len() || self.sectors.len() != self.freqs.len() {
            return Err(Error::Config(
                "manifest degree or sector list has the wrong length".into(),
            ));
        }
        let sigma = Rearrangement::supplied(self.m, self.sigma.clone())?;
        for (i, region) in self.sectors.iter().enumerate() {
            let l = i + 2;
            let n = sigma.sigma(l);
            let Region::Sector(s) = region else {
                return Err(Error::Config(format!("sector {l} is not a sector literal")));
            };
            let (bx, by) = spectrum_box(&self.freqs, &self.degrees[n - 2])?;
            if !box_in_sector(s, sched.freq(n), bx, by)? {
                return Err(Error::Certificate(format!(
                    "spectrum box of T_{l} leaves its sector"
                )));
            }
        }
        Ok(())
    }

    /// The `δ` of a rhombus family, if that is what the manifest records.
    pub fn rhombus_delta(&self) -> Option<BigRational> {
        self.family
            .strip_prefix("rhombus delta=")
            .and_then(|d| parse_rational(d).ok())
    }
}
