//! Named numerical checks, each tied to the inequality it verifies, plus
//! the theorem demos and JSON-lines reports.
//!
//! A report line is one [`CheckReport`]. Runs write
//! `<out_dir>/<config hash>/report.jsonl` along with the canonical config
//! and any curve CSVs.

pub mod config;
pub mod context;
pub mod runners;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::RunConfig;
pub use context::Context;
use runners::Outcome;

use crate::regions::LadderKind;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Indeterminate,
}

/// Where a check comes from: an equation label and a verbatim quote.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Anchor {
    pub label: String,
    pub quote: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub label: String,
    pub quote: String,
    pub status: Status,
    /// Absent when the check could not be decided.
    pub margin: Option<f64>,
    pub estimate: Option<f64>,
    pub stderr: Option<f64>,
    pub samples: Option<usize>,
    pub seed: u64,
    pub detail: String,
    pub wall_ms: u64,
}

impl CheckReport {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }

    /// The line with `wall_ms` zeroed, for comparing runs.
    pub fn stable_line(&self) -> String {
        CheckReport {
            wall_ms: 0,
            ..self.clone()
        }
        .to_line()
    }
}

/// Which family of artifacts a check needs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Group {
    Tree,
    Mixing,
    BSystem,
    ASystem,
    TSystem,
    Rhombus,
    Ball,
    Theorem,
}

type Runner = fn(&Context) -> Result<Outcome>;

pub struct CheckDef {
    pub name: &'static str,
    pub group: Group,
    run: Runner,
}

macro_rules! checks {
    ($($name:literal => $group:ident, $f:ident;)*) => {
        &[$(CheckDef { name: $name, group: Group::$group, run: runners::$f }),*]
    };
}

/// Every check, in registry order.
pub const REGISTRY: &[CheckDef] = checks! {
    "tree-parent" => Tree, tree_parent;
    "rearrangement-prefix" => Tree, rearrangement_prefix;
    "level-set-bound" => ASystem, level_set_bound;
    "mixing-limit" => Mixing, mixing_limit;
    "greedy-dilations" => Mixing, greedy_dilations;
    "pointwise-abs-sum" => BSystem, pointwise_abs_sum;
    "weak-type-curve" => BSystem, weak_type_curve;
    "martingale-zero-mean" => BSystem, martingale_zero_mean;
    "martingale-closeness" => BSystem, martingale_closeness;
    "martingale-support" => BSystem, martingale_support;
    "martingale-maximal-l2" => BSystem, martingale_maximal_l2;
    "real-part-integral" => ASystem, real_part_integral;
    "top-generation-union" => ASystem, top_generation_union;
    "uv-inclusions" => ASystem, uv_inclusions;
    "uv-gap" => ASystem, uv_gap;
    "children-cover" => ASystem, children_cover;
    "cap-exceptions" => ASystem, cap_exceptions;
    "level-measure-sum" => ASystem, level_measure_sum;
    "abs-cos-integral" => ASystem, abs_cos_integral;
    "rearranged-prefix-level" => ASystem, rearranged_prefix_level;
    "uniform-bound" => ASystem, uniform_bound;
    "t-spectrum-placement" => TSystem, t_spectrum_placement;
    "t-sup-bound" => TSystem, t_sup_bound;
    "t-prefix-level" => TSystem, t_prefix_level;
    "smoothing-approximation" => TSystem, smoothing_approximation;
    "t-closeness" => TSystem, t_closeness;
    "t-prefix-transfer" => TSystem, t_prefix_transfer;
    "rhombus-aspect" => Rhombus, rhombus_aspect;
    "rhombus-nesting" => Rhombus, rhombus_nesting;
    "rhombus-slotting" => Rhombus, rhombus_slotting;
    "rhombus-modulus-transfer" => Rhombus, rhombus_modulus_transfer;
    "ball-eccentricity" => Ball, ball_eccentricity;
    "ball-enclosure" => Ball, ball_enclosure;
    "ball-slotting" => Ball, ball_slotting;
    "ball-modulus-transfer" => Ball, ball_modulus_transfer;
    "block-sup-bound" => Theorem, block_sup_bound;
    "block-real-part" => Theorem, block_real_part;
    "assembled-sup-bound" => Theorem, assembled_sup_bound;
    "global-nesting" => Theorem, global_nesting;
    "dilation-coverage" => Theorem, dilation_coverage;
    "block-jump" => Theorem, block_jump;
};

const ANCHORS: &str = include_str!("anchors.tsv");

fn anchor_table() -> &'static Vec<(String, Anchor)> {
    static TABLE: OnceLock<Vec<(String, Anchor)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        ANCHORS
            .lines()
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                let mut f = l.splitn(3, '\t');
                let name = f.next().expect("name column").to_string();
                let label = f.next().expect("label column").to_string();
                let quote = f.next().expect("quote column").to_string();
                (name, Anchor { label, quote })
            })
            .collect()
    })
}

pub fn anchor(name: &str) -> Option<&'static Anchor> {
    anchor_table()
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, a)| a)
}

pub fn lookup(name: &str) -> Result<&'static CheckDef> {
    REGISTRY.iter().find(|c| c.name == name).ok_or_else(|| {
        Error::Usage(format!(
            "unknown check {name:?}; known checks: {}",
            REGISTRY
                .iter()
                .map(|c| c.name)
                .collect::<Vec<_>>()
                .join(", ")
        ))
    })
}

/// A report together with the files its check produced.
pub struct CheckRun {
    pub report: CheckReport,
    pub files: Vec<(String, String)>,
}

/// Runs one check. Hard membership errors give `indeterminate`, failed
/// certificates give `fail`; any other error is returned.
pub fn run_check(name: &str, ctx: &Context) -> Result<CheckRun> {
    let def = lookup(name)?;
    let anchor =
        anchor(name).ok_or_else(|| Error::Config(format!("check {name:?} has no anchor")))?;
    let t0 = Instant::now();
    let (status, outcome) = match (def.run)(ctx) {
        Ok(o) => (
            if o.margin >= 0.0 {
                Status::Pass
            } else {
                Status::Fail
            },
            Some(o),
        ),
        Err(e @ Error::Indeterminate { .. }) => (
            Status::Indeterminate,
            Some(Outcome {
                margin: f64::NAN,
                detail: e.to_string(),
                ..Default::default()
            }),
        ),
        Err(e @ Error::Certificate(_)) => (
            Status::Fail,
            Some(Outcome {
                margin: f64::NAN,
                detail: e.to_string(),
                ..Default::default()
            }),
        ),
        Err(e) => return Err(e),
    };
    let o = outcome.expect("set above");
    Ok(CheckRun {
        report: CheckReport {
            check: name.to_string(),
            label: anchor.label.clone(),
            quote: anchor.quote.clone(),
            status,
            margin: o.margin.is_finite().then_some(o.margin),
            estimate: o.estimate,
            stderr: o.stderr,
            samples: o.samples,
            seed: ctx.cfg.seed,
            detail: o.detail,
            wall_ms: t0.elapsed().as_millis() as u64,
        },
        files: o.files,
    })
}

/// Runs the named checks on `cfg.worker_count()` threads; results come
/// back sorted by check name.
pub fn run_checks(names: &[&str], ctx: &Context) -> Result<Vec<CheckRun>> {
    for n in names {
        lookup(n)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.cfg.worker_count())
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<Result<CheckRun>> =
        pool.install(|| names.par_iter().map(|n| run_check(n, ctx)).collect());
    let mut runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    runs.sort_by(|a, b| a.report.check.cmp(&b.report.check));
    Ok(runs)
}

pub fn all_names() -> Vec<&'static str> {
    REGISTRY.iter().map(|c| c.name).collect()
}

pub fn group_names(group: Group) -> Vec<&'static str> {
    REGISTRY
        .iter()
        .filter(|c| c.group == group)
        .map(|c| c.name)
        .collect()
}

/// 0 when everything passed, 1 otherwise.
pub fn exit_code(reports: &[CheckReport]) -> i32 {
    i32::from(reports.iter().any(|r| r.status != Status::Pass))
}

/// Writes the canonical config, `report.jsonl` and any produced files
/// under the run directory; returns that directory.
pub fn write_run(
    cfg: &RunConfig,
    runs: &[CheckRun],
    extra: &[(String, String)],
) -> Result<PathBuf> {
    let dir = cfg.run_dir();
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("config.txt"), cfg.to_text())?;
    let mut lines = String::new();
    for r in runs {
        lines.push_str(&r.report.to_line());
        lines.push('\n');
        for (name, contents) in &r.files {
            std::fs::write(dir.join(name), contents)?;
        }
    }
    for (name, contents) in extra {
        std::fs::write(dir.join(name), contents)?;
    }
    std::fs::write(dir.join("report.jsonl"), lines)?;
    Ok(dir)
}

/// Output of a theorem demo.
pub struct Demo {
    pub runs: Vec<CheckRun>,
    /// Growth table as CSV: one row per block.
    pub table: String,
    pub sup_bound: f64,
    pub coeff_sum: f64,
    pub sup_cap: f64,
}

/// Assembles the multi-block function for `kind` and runs the block
/// certificates on it.
pub fn demo(kind: LadderKind, cfg: &RunConfig) -> Result<Demo> {
    let mut cfg = cfg.clone();
    cfg.kind = kind;
    cfg.validate()?;
    let ctx = Context::new(cfg);
    let run = ctx.theorem()?;
    let runs = run_checks(&group_names(Group::Theorem), &ctx)?;
    let mut table = String::from(
        "block,m,threshold,part,level_measure,level_stderr,level_margin,jump_measure,jump_stderr,jump_margin,\
         dilation,shift,base,c1,sup_bound\n",
    );
    for b in &run.blocks {
        let _ = writeln!(
            table,
            "{},{},{},{:?},{},{},{},{},{},{},{},{},{},{},{}",
            b.k,
            b.m,
            b.threshold,
            b.part,
            b.level.value,
            b.level.stderr,
            b.level.lower() - 0.5,
            b.jump.value,
            b.jump.stderr,
            b.jump.lower() - 0.5,
            b.dilation,
            b.shift,
            b.base,
            b.c1,
            b.sup_bound
        );
    }
    Ok(Demo {
        runs,
        table,
        sup_bound: run.sup_bound,
        coeff_sum: run.coeff_sum,
        sup_cap: run.sup_cap,
    })
}

/// Pass/fail totals over one or more report streams.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub indeterminate: usize,
    /// Failed and indeterminate records, sorted by check name then seed.
    pub problems: Vec<CheckReport>,
}

impl Summary {
    pub fn exit_code(&self) -> i32 {
        i32::from(self.failed + self.indeterminate > 0)
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "{} checks: {} passed, {} failed, {} indeterminate\n",
            self.total, self.passed, self.failed, self.indeterminate
        );
        for r in &self.problems {
            let margin = r
                .margin
                .map_or("undecided".to_string(), |m| format!("{m:.6e}"));
            let _ = writeln!(
                out,
                "{:?} {} margin {margin} [{} \"{}\"] {}",
                r.status, r.check, r.label, r.quote, r.detail
            );
        }
        out
    }
}

pub fn summarize(reports: &[CheckReport]) -> Summary {
    let mut s = Summary {
        total: reports.len(),
        ..Default::default()
    };
    for r in reports {
        match r.status {
            Status::Pass => s.passed += 1,
            Status::Fail => s.failed += 1,
            Status::Indeterminate => s.indeterminate += 1,
        }
        if r.status != Status::Pass {
            s.problems.push(r.clone());
        }
    }
    s.problems
        .sort_by(|a, b| a.check.cmp(&b.check).then(a.seed.cmp(&b.seed)));
    s
}

pub fn parse_reports(text: &str) -> Result<Vec<CheckReport>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| Error::Config(format!("report line {}: {e}", i + 1)))
        })
        .collect()
}

/// Reads and aggregates report streams.
pub fn report(paths: &[impl AsRef<Path>]) -> Result<Summary> {
    let mut all = Vec::new();
    for p in paths {
        let text = std::fs::read_to_string(p.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", p.as_ref().display())))?;
        all.extend(parse_reports(&text)?);
    }
    Ok(summarize(&all))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_check_has_an_anchor_and_names_are_unique() {
        let mut names = all_names();
        for n in &names {
            let a = anchor(n).unwrap_or_else(|| panic!("{n} has no anchor"));
            assert!(!a.label.is_empty() && !a.quote.is_empty());
        }
        names.sort();
        names.dedup();
        assert_eq!(names.len(), REGISTRY.len());
        assert_eq!(anchor_table().len(), REGISTRY.len());
    }

    #[test]
    fn unknown_check_is_a_usage_error() {
        let ctx = Context::new(RunConfig::default());
        assert!(matches!(run_check("", &ctx), Err(Error::Usage(_))));
    }

    fn rec(check: &str, status: Status) -> CheckReport {
        CheckReport {
            check: check.into(),
            label: "(x)".into(),
            quote: "q".into(),
            status,
            margin: Some(if status == Status::Pass { 1.0 } else { -1.0 }),
            estimate: None,
            stderr: None,
            samples: None,
            seed: 1,
            detail: String::new(),
            wall_ms: 5,
        }
    }

    #[test]
    fn summary_counts_and_exit_codes() {
        assert_eq!(summarize(&[]).exit_code(), 0);
        let ok = vec![rec("a", Status::Pass), rec("b", Status::Pass)];
        assert_eq!(summarize(&ok).exit_code(), 0);
        let bad = vec![
            rec("b", Status::Pass),
            rec("z", Status::Fail),
            rec("c", Status::Indeterminate),
        ];
        let s = summarize(&bad);
        assert_eq!((s.passed, s.failed, s.indeterminate), (1, 1, 1));
        assert_eq!(s.exit_code(), 1);
        assert_eq!(s.problems[0].check, "c");
        assert!(s.render().contains("Fail z"));
    }

    #[test]
    fn report_lines_round_trip() {
        let r = rec("tree-parent", Status::Pass);
        let back = parse_reports(&format!("{}\n\n", r.to_line())).unwrap();
        assert_eq!(back, vec![r.clone()]);
        assert!(r.stable_line().contains("\"wall_ms\":0"));
    }

    #[test]
    fn tree_parent_passes_on_a_small_range() {
        let mut cfg = RunConfig::default();
        cfg.parent_limit = 1000;
        let run = run_check("tree-parent", &Context::new(cfg)).unwrap();
        assert_eq!(run.report.status, Status::Pass);
        assert_eq!(run.report.label, anchor("tree-parent").unwrap().label);
    }
}
