//! Run configuration in a `key = value` text format.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are
//! rejected. The canonical rendering lists every key in a fixed order and
//! is what the run hash is computed from.

use std::fmt::Write as _;
use std::path::PathBuf;

use num_rational::BigRational;
use sha2::{Digest, Sha256};

use crate::regions::{parse_rational, rat, LadderKind};
use crate::{Error, Result};

/// Environment variable overriding `workers = 0`.
pub const WORKERS_ENV: &str = "TRIDIV_WORKERS";

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub m: u32,
    pub blocks: usize,
    /// Ladder family of the theorem checks.
    pub kind: LadderKind,
    pub seed: u64,
    pub samples: usize,
    pub weak_samples: usize,
    /// Random tree-systems for the rearrangement check.
    pub fresh_trials: usize,
    /// Lattice side of each fresh tree-system.
    pub tree_side: u32,
    pub search_trials: usize,
    pub search_side: u32,
    pub mixing_samples: usize,
    pub mixing_linear: u128,
    pub mixing_max: u128,
    pub parent_limit: usize,
    pub delta: BigRational,
    pub eps: f64,
    pub s: u128,
    pub r: u128,
    pub c2: BigRational,
    pub n0: u128,
    pub scan_linear: u128,
    pub scan_steps: usize,
    pub cross_check_points: usize,
    pub transfer_points: usize,
    /// Points for the exact interval sums of the martingale check.
    pub interval_points: usize,
    /// 0 means `TRIDIV_WORKERS`, or all cores.
    pub workers: usize,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            m: 3,
            blocks: 2,
            kind: LadderKind::Rhombus,
            seed: 1,
            samples: 100_000,
            weak_samples: 20_000,
            fresh_trials: 1000,
            tree_side: 256,
            search_trials: 20,
            search_side: 16,
            mixing_samples: 1_000_000,
            mixing_linear: 32,
            mixing_max: 20_000,
            parent_limit: 1 << 20,
            delta: rat(1, 10),
            eps: 0.36,
            s: 1,
            r: 1,
            c2: rat(1, 240),
            n0: 1,
            scan_linear: 32,
            scan_steps: 200,
            cross_check_points: 64,
            transfer_points: 10_000,
            interval_points: 200,
            workers: 0,
            out_dir: PathBuf::from("runs"),
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

pub fn kind_name(kind: LadderKind) -> &'static str {
    match kind {
        LadderKind::Rhombus => "rhombus",
        LadderKind::Ball => "ball",
    }
}

pub fn parse_kind(v: &str) -> Result<LadderKind> {
    match v {
        "rhombus" => Ok(LadderKind::Rhombus),
        "ball" => Ok(LadderKind::Ball),
        _ => Err(Error::Config(format!(
            "kind must be rhombus or ball, got {v:?}"
        ))),
    }
}

impl RunConfig {
    /// Every recognised key, in canonical order.
    pub const KEYS: &'static [&'static str] = &[
        "m",
        "blocks",
        "kind",
        "seed",
        "samples",
        "weak_samples",
        "fresh_trials",
        "tree_side",
        "search_trials",
        "search_side",
        "mixing_samples",
        "mixing_linear",
        "mixing_max",
        "parent_limit",
        "delta",
        "eps",
        "s",
        "r",
        "c2",
        "n0",
        "scan_linear",
        "scan_steps",
        "cross_check_points",
        "transfer_points",
        "interval_points",
        "workers",
        "out_dir",
    ];

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let v = v.trim();
        match key.trim() {
            "m" => self.m = num(key, v)?,
            "blocks" => self.blocks = num(key, v)?,
            "kind" => self.kind = parse_kind(v)?,
            "seed" => self.seed = num(key, v)?,
            "samples" => self.samples = num(key, v)?,
            "weak_samples" => self.weak_samples = num(key, v)?,
            "fresh_trials" => self.fresh_trials = num(key, v)?,
            "tree_side" => self.tree_side = num(key, v)?,
            "search_trials" => self.search_trials = num(key, v)?,
            "search_side" => self.search_side = num(key, v)?,
            "mixing_samples" => self.mixing_samples = num(key, v)?,
            "mixing_linear" => self.mixing_linear = num(key, v)?,
            "mixing_max" => self.mixing_max = num(key, v)?,
            "parent_limit" => self.parent_limit = num(key, v)?,
            "delta" => self.delta = parse_rational(v)?,
            "eps" => self.eps = num(key, v)?,
            "s" => self.s = num(key, v)?,
            "r" => self.r = num(key, v)?,
            "c2" => self.c2 = parse_rational(v)?,
            "n0" => self.n0 = num(key, v)?,
            "scan_linear" => self.scan_linear = num(key, v)?,
            "scan_steps" => self.scan_steps = num(key, v)?,
            "cross_check_points" => self.cross_check_points = num(key, v)?,
            "transfer_points" => self.transfer_points = num(key, v)?,
            "interval_points" => self.interval_points = num(key, v)?,
            "workers" => self.workers = num(key, v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "m" => self.m.to_string(),
            "blocks" => self.blocks.to_string(),
            "kind" => kind_name(self.kind).to_string(),
            "seed" => self.seed.to_string(),
            "samples" => self.samples.to_string(),
            "weak_samples" => self.weak_samples.to_string(),
            "fresh_trials" => self.fresh_trials.to_string(),
            "tree_side" => self.tree_side.to_string(),
            "search_trials" => self.search_trials.to_string(),
            "search_side" => self.search_side.to_string(),
            "mixing_samples" => self.mixing_samples.to_string(),
            "mixing_linear" => self.mixing_linear.to_string(),
            "mixing_max" => self.mixing_max.to_string(),
            "parent_limit" => self.parent_limit.to_string(),
            "delta" => self.delta.to_string(),
            "eps" => format!("{:?}", self.eps),
            "s" => self.s.to_string(),
            "r" => self.r.to_string(),
            "c2" => self.c2.to_string(),
            "n0" => self.n0.to_string(),
            "scan_linear" => self.scan_linear.to_string(),
            "scan_steps" => self.scan_steps.to_string(),
            "cross_check_points" => self.cross_check_points.to_string(),
            "transfer_points" => self.transfer_points.to_string(),
            "interval_points" => self.interval_points.to_string(),
            "workers" => self.workers.to_string(),
            "out_dir" => self.out_dir.display().to_string(),
            _ => return None,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=6).contains(&self.m) {
            return Err(Error::Config(format!(
                "m must be between 2 and 6, got {}",
                self.m
            )));
        }
        if self.blocks == 0 {
            return Err(Error::Usage("blocks must be at least 1".into()));
        }
        if self.samples == 0 || self.weak_samples == 0 || self.mixing_samples == 0 {
            return Err(Error::Config("sample counts must be positive".into()));
        }
        if self.delta <= rat(0, 1) || self.c2 <= rat(0, 1) {
            return Err(Error::Config("delta and c2 must be positive".into()));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::Config(format!(
                "eps must lie in (0, 1), got {}",
                self.eps
            )));
        }
        if self.s == 0 || self.r == 0 {
            return Err(Error::Config("s and r must be positive".into()));
        }
        Ok(())
    }

    /// Every key, one per line, in canonical order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for k in Self::KEYS {
            let _ = writeln!(out, "{k} = {}", self.get(k).expect("listed key"));
        }
        out
    }

    /// Hash of everything that can change a report: the canonical text
    /// without the scheduling-only keys, plus the crate version.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(env!("CARGO_PKG_VERSION").as_bytes());
        for k in Self::KEYS
            .iter()
            .filter(|k| !matches!(**k, "workers" | "out_dir"))
        {
            h.update(format!("{k} = {}\n", self.get(k).expect("listed key")).as_bytes());
        }
        hex::encode(&h.finalize()[..8])
    }

    pub fn run_dir(&self) -> PathBuf {
        self.out_dir.join(self.hash())
    }

    /// `workers`, else `TRIDIV_WORKERS`, else the number of cores.
    pub fn worker_count(&self) -> usize {
        if self.workers > 0 {
            return self.workers;
        }
        std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&w| w > 0)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    pub fn c2_f64(&self) -> f64 {
        crate::regions::rat_to_f64(&self.c2)
    }

    pub fn delta_f64(&self) -> f64 {
        crate::regions::rat_to_f64(&self.delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_text_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.set("delta", "1/20").unwrap();
        cfg.set("kind", "ball").unwrap();
        let back = RunConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn hash_ignores_scheduling_keys() {
        let mut a = RunConfig::default();
        let h = a.hash();
        a.workers = 3;
        a.out_dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), h);
        a.seed = 2;
        assert_ne!(a.hash(), h);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(RunConfig::parse("colour = red").is_err());
        assert!(RunConfig::parse("m 3").is_err());
        assert!(RunConfig::parse("m = three").is_err());
        assert!(matches!(
            RunConfig::parse("blocks = 0"),
            Err(Error::Usage(_))
        ));
        let cfg = RunConfig::parse("# comment\n\nm = 2\n").unwrap();
        assert_eq!(cfg.m, 2);
    }
}
