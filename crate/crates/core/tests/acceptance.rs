//! End-to-end acceptance run: one PASS/FAIL line per criterion.

use std::time::{Duration, Instant};

use num_rational::BigRational;
use tridiv::checks::context::Context;
use tridiv::checks::{self, CheckReport, RunConfig, Status};
use tridiv::regions::LadderKind;

fn config(m: u32) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.m = m;
    cfg.blocks = 2;
    cfg.seed = 1;
    cfg.samples = 100_000;
    cfg.fresh_trials = 1000;
    cfg.tree_side = 256;
    cfg.mixing_samples = 1_000_000;
    cfg.parent_limit = 1 << 20;
    cfg.transfer_points = 10_000;
    cfg.delta = BigRational::new(1.into(), 10.into());
    cfg.out_dir = std::env::temp_dir().join("tridiv-acceptance");
    cfg
}

struct Criterion {
    passed: bool,
    notes: Vec<String>,
}

impl Criterion {
    fn new() -> Self {
        Criterion {
            passed: true,
            notes: Vec::new(),
        }
    }

    fn require(&mut self, ok: bool, note: String) {
        self.passed &= ok;
        self.notes
            .push(if ok { note } else { format!("FAILED {note}") });
    }

    fn reports(&mut self, reports: &[CheckReport]) {
        for r in reports {
            let margin = r.margin.map_or("none".to_string(), |m| format!("{m:.4e}"));
            self.require(
                r.status == Status::Pass,
                format!("{} margin {margin}", r.check),
            );
        }
    }

    fn checks(&mut self, ctx: &Context, names: &[&str]) -> Vec<CheckReport> {
        match checks::run_checks(names, ctx) {
            Ok(runs) => {
                let reports: Vec<_> = runs.into_iter().map(|r| r.report).collect();
                self.reports(&reports);
                reports
            }
            Err(e) => {
                self.require(false, format!("{names:?}: {e}"));
                Vec::new()
            }
        }
    }

    fn within(&mut self, what: &str, took: Duration, limit: Duration) {
        self.require(
            took < limit,
            format!("{what} {:.2}s < {}s", took.as_secs_f64(), limit.as_secs()),
        );
    }
}

fn main() {
    let start = Instant::now();
    let ctx3 = Context::new(config(3));
    let ctx2 = Context::new(config(2));
    let mut results: Vec<(&str, Criterion)> = Vec::new();

    let mut c = Criterion::new();
    let r = c.checks(&ctx3, &["tree-parent"]);
    if let Some(r) = r.first() {
        c.within(
            "tree-parent",
            Duration::from_millis(r.wall_ms),
            Duration::from_secs(1),
        );
    }
    results.push(("1 tree structure", c));

    let mut c = Criterion::new();
    let t = Instant::now();
    match ctx3.sigma() {
        Ok(s) => c.require(s.m == 3, format!("σ = {:?}", s.order)),
        Err(e) => c.require(false, format!("search: {e}")),
    }
    c.within("search", t.elapsed(), Duration::from_secs(300));
    c.checks(&ctx3, &["rearrangement-prefix"]);
    results.push(("2 rearrangement", c));

    let mut c = Criterion::new();
    let t = Instant::now();
    c.checks(&ctx3, &["mixing-limit"]);
    c.within("mixing", t.elapsed(), Duration::from_secs(60));
    results.push(("3 mixing", c));

    let mut c = Criterion::new();
    c.checks(&ctx3, &["greedy-dilations"]);
    results.push(("4 greedy dilations", c));

    let mut c = Criterion::new();
    for ctx in [&ctx2, &ctx3] {
        let r = c.checks(
            ctx,
            &[
                "pointwise-abs-sum",
                "martingale-closeness",
                "weak-type-curve",
            ],
        );
        if let Some(w) = r.iter().find(|r| r.check == "weak-type-curve") {
            let c_est = w.estimate.unwrap_or(f64::NAN);
            c.require(
                c_est.is_finite(),
                format!("m = {}: c_est = {c_est:.4}", ctx.cfg.m),
            );
        }
    }
    results.push(("5 b-system", c));

    let mut c = Criterion::new();
    c.checks(
        &ctx3,
        &[
            "uniform-bound",
            "real-part-integral",
            "rearranged-prefix-level",
            "uv-inclusions",
            "uv-gap",
            "children-cover",
            "cap-exceptions",
        ],
    );
    results.push(("6 a-system", c));

    let mut c = Criterion::new();
    c.checks(
        &ctx3,
        &["t-spectrum-placement", "t-sup-bound", "t-prefix-level"],
    );
    results.push(("7 T-system", c));

    let mut c = Criterion::new();
    c.checks(
        &ctx3,
        &[
            "rhombus-aspect",
            "rhombus-nesting",
            "rhombus-slotting",
            "rhombus-modulus-transfer",
        ],
    );
    results.push(("8 rhombus ladder", c));

    let mut c = Criterion::new();
    c.checks(
        &ctx3,
        &[
            "ball-eccentricity",
            "ball-enclosure",
            "ball-slotting",
            "ball-modulus-transfer",
        ],
    );
    results.push(("9 ball ladder", c));

    let mut c = Criterion::new();
    let t = Instant::now();
    let wanted = [
        "block-real-part",
        "block-jump",
        "global-nesting",
        "assembled-sup-bound",
    ];
    for kind in [LadderKind::Rhombus, LadderKind::Ball] {
        let first = checks::demo(kind, &config(3));
        let second = checks::demo(kind, &config(3));
        match (first, second) {
            (Ok(a), Ok(b)) => {
                let reports: Vec<_> = a
                    .runs
                    .iter()
                    .map(|r| r.report.clone())
                    .filter(|r| wanted.contains(&r.check.as_str()))
                    .collect();
                c.reports(&reports);
                c.require(
                    a.coeff_sum <= a.sup_cap,
                    format!(
                        "{kind:?}: ‖f_trunc‖∞ ≤ {:.4} ≤ {:.4}",
                        a.coeff_sum, a.sup_cap
                    ),
                );
                let lines = |d: &checks::Demo| {
                    d.runs
                        .iter()
                        .map(|r| r.report.stable_line())
                        .collect::<Vec<_>>()
                };
                c.require(
                    lines(&a) == lines(&b) && a.table == b.table,
                    format!("{kind:?}: reruns identical byte-for-byte"),
                );
            }
            (Err(e), _) | (_, Err(e)) => c.require(false, format!("{kind:?}: {e}")),
        }
    }
    c.within("demos", t.elapsed(), Duration::from_secs(1800));
    results.push(("10 theorem demos", c));

    let mut failed = 0;
    for (name, c) in &results {
        println!(
            "{} criterion {name}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.notes.join("; ")
        );
        failed += usize::from(!c.passed);
    }
    println!(
        "{} of {} criteria passed in {:.1}s",
        results.len() - failed,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
