use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};

use tridiv::builder::ladder::{BallLadder, RhombusLadder};
use tridiv::builder::manifest::Manifest;
use tridiv::builder::tsystem::TSystem;
use tridiv::checks::context::{Context, SystemBundle};
use tridiv::checks::{self, RunConfig};
use tridiv::mixing::MeasureEstimate;
use tridiv::regions::LadderKind;
use tridiv::{Error, Result};

fn cli() -> Command {
    let mut cmd = Command::new("tridiv")
        .about("Builds the divergent trigonometric polynomials and checks every inequality of their construction")
        .subcommand_required(true)
        .arg(
            Arg::new("config")
                .long("config")
                .global(true)
                .value_name("FILE")
                .help("Run configuration in `key = value` format; flags override it"),
        );
    for key in RunConfig::KEYS {
        cmd = cmd.arg(
            Arg::new(*key)
                .long(&*Box::leak(key.replace('_', "-").into_boxed_str()))
                .global(true)
                .value_name("VALUE")
                .help(format!("Override config key `{key}`")),
        );
    }
    cmd.subcommand(
        Command::new("build-b").about("Build the uncapped system and write its manifest"),
    )
    .subcommand(
        Command::new("estimate-c").about("Estimate the weak-type constant of the uncapped system"),
    )
    .subcommand(Command::new("build-a").about("Build the capped system with γ = c + 2"))
    .subcommand(Command::new("build-T").about("Build the sector polynomials T_n"))
    .subcommand(
        Command::new("build-ladder")
            .about("Shift the sector polynomials into a rhombus or ball ladder and certify it")
            .arg(
                Arg::new("family")
                    .required(true)
                    .value_parser(["rhombus", "ball"]),
            ),
    )
    .subcommand(
        Command::new("check")
            .about("Run one named check, or all of them")
            .arg(Arg::new("name").required_unless_present_any(["all", "list"]))
            .arg(
                Arg::new("all")
                    .long("all")
                    .action(ArgAction::SetTrue)
                    .conflicts_with("name"),
            )
            .arg(
                Arg::new("list")
                    .long("list")
                    .action(ArgAction::SetTrue)
                    .help("Only list the registered checks"),
            ),
    )
    .subcommand(
        Command::new("demo")
            .about("Assemble a multi-block divergent function and certify its block jumps")
            .arg(
                Arg::new("theorem")
                    .required(true)
                    .value_parser(["theorem1", "theorem2"]),
            ),
    )
    .subcommand(
        Command::new("report")
            .about("Summarize report streams")
            .arg(
                Arg::new("paths")
                    .required(true)
                    .num_args(1..)
                    .value_parser(clap::value_parser!(PathBuf)),
            ),
    )
}

fn load_config(m: &ArgMatches) -> Result<RunConfig> {
    let mut cfg = match m.get_one::<String>("config") {
        Some(path) => RunConfig::parse(
            &std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{path}: {e}")))?,
        )?,
        None => RunConfig::default(),
    };
    for key in RunConfig::KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn family_bundle(ctx: &Context) -> Result<std::sync::Arc<SystemBundle>> {
    match ctx.cfg.kind {
        LadderKind::Rhombus => ctx.rhombus(),
        LadderKind::Ball => ctx.ball(),
    }
}

fn write_files(cfg: &RunConfig, files: &[(String, String)]) -> Result<PathBuf> {
    checks::write_run(cfg, &[], files)
}

fn summary_line(b: &SystemBundle) -> String {
    format!(
        "m = {}, ν = {}, largest frequency {} bits, lattice 2^{:.1}",
        b.sys.m(),
        b.sys.nu(),
        b.sys.schedule.max_bits(),
        (b.sys.lattice().unwrap_or(1) as f64).log2()
    )
}

fn build_b(cfg: &RunConfig) -> Result<i32> {
    let ctx = Context::new(cfg.clone());
    let b = family_bundle(&ctx)?;
    let man = Manifest::from_system(&b.sys, None, &[]);
    man.verify()?;
    let dir = write_files(cfg, &[("manifest_b.txt".into(), man.to_text())])?;
    println!(
        "{}\nσ = {:?}\nmanifest in {}",
        summary_line(&b),
        b.sys.sigma.order,
        dir.display()
    );
    Ok(0)
}

fn estimate_c(cfg: &RunConfig) -> Result<i32> {
    let ctx = Context::new(cfg.clone());
    let run = checks::run_check("weak-type-curve", &ctx)?;
    let b = family_bundle(&ctx)?;
    let dir = write_files(cfg, &run.files)?;
    println!(
        "c_est = {:.6}, γ = c_est + 2 = {:.6}\ncurve in {}",
        b.curve.c_est,
        b.gamma,
        dir.display()
    );
    Ok(0)
}

fn build_a(cfg: &RunConfig) -> Result<i32> {
    let ctx = Context::new(cfg.clone());
    let b = family_bundle(&ctx)?;
    let sets = b.sys.a_sets(b.gamma)?;
    let pts = ctx.points(&b.sys, cfg.samples, 2)?;
    let mut hits = vec![0usize; b.sys.nu() + 1];
    for &pt in &pts {
        for n in sets.path(pt)? {
            hits[n] += 1;
        }
    }
    let mut table = String::from("n,measure,stderr\n");
    for (n, &h) in hits.iter().enumerate().skip(2) {
        let e = MeasureEstimate::from_counts(h, pts.len(), cfg.seed);
        let _ = writeln!(table, "{n},{},{}", e.value, e.stderr);
    }
    let man = Manifest::from_system(&b.sys, Some(b.gamma), &[]);
    let dir = write_files(
        cfg,
        &[
            ("manifest_a.txt".into(), man.to_text()),
            ("level_measures.csv".into(), table.clone()),
        ],
    )?;
    println!(
        "{}\nγ = {:.6}\n{table}files in {}",
        summary_line(&b),
        b.gamma,
        dir.display()
    );
    Ok(0)
}

fn build_t(cfg: &RunConfig) -> Result<i32> {
    let ctx = Context::new(cfg.clone());
    let b = family_bundle(&ctx)?;
    let t: std::sync::Arc<TSystem> = b.tsys()?;
    let exc = t.placement_exceptions(&b.sys);
    let man = Manifest::from_system(&b.sys, Some(b.gamma), &[]);
    man.verify()?;
    let dir = write_files(cfg, &[("manifest_t.txt".into(), man.to_text())])?;
    println!(
        "{}\n{} terms, {exc} outside their sectors, Σ sup|f_n| ≤ {:.4}\nmanifest in {}",
        summary_line(&b),
        t.term_count(),
        b.sys.smoothing.abs_sum_bound(),
        dir.display()
    );
    Ok(i32::from(exc > 0))
}

fn build_ladder(cfg: &RunConfig, family: &str) -> Result<i32> {
    let mut cfg = cfg.clone();
    cfg.kind = tridiv::checks::config::parse_kind(family)?;
    let ctx = Context::new(cfg.clone());
    let b = family_bundle(&ctx)?;
    let t = b.tsys()?;
    let (ok, text, regions) = match cfg.kind {
        LadderKind::Rhombus => {
            let l: std::sync::Arc<RhombusLadder> = ctx.rhombus_ladder()?;
            let c = l.certify();
            let text = format!(
                "vertex l = {}, max ρ = {} < {}, decreasing {}, nested {}, {} of {} terms misplaced",
                l.l, c.rho_max, c.rho_bound, c.rho_decreasing, c.nested, c.slot_exceptions, c.terms
            );
            (c.passed(), text, l.as_regions())
        }
        LadderKind::Ball => {
            let l: std::sync::Arc<BallLadder> = ctx.ball_ladder()?;
            let c = l.certify(cfg.delta_f64(), &t)?;
            let text = format!(
                "R = {}, max τ = {:.6} < {}, B(0,0,{}) ⊂ U_n {}, U_n ⊂ B(0,0,{}) {}, {} misplaced pairs, {} corners",
                l.r_big,
                c.tau_max,
                c.tau_bound,
                l.inner,
                c.inner_ok,
                l.outer,
                c.outer_ok,
                c.slot_exceptions,
                c.corner_exceptions
            );
            (c.passed(), text, l.as_regions())
        }
    };
    let man = Manifest::from_system(&b.sys, Some(b.gamma), &regions);
    let dir = write_files(&cfg, &[(format!("manifest_{family}.txt"), man.to_text())])?;
    println!(
        "{text}\ncertificate {}\nmanifest in {}",
        if ok { "holds" } else { "FAILS" },
        dir.display()
    );
    Ok(i32::from(!ok))
}

fn print_runs(runs: &[checks::CheckRun]) {
    for r in runs {
        println!("{}", r.report.to_line());
    }
}

fn check(cfg: &RunConfig, m: &ArgMatches) -> Result<i32> {
    if m.get_flag("list") {
        for c in checks::REGISTRY {
            let a = checks::anchor(c.name).expect("registry entries have anchors");
            println!("{}\t{}\t{}", c.name, a.label, a.quote);
        }
        return Ok(0);
    }
    let ctx = Context::new(cfg.clone());
    let names: Vec<&str> = if m.get_flag("all") {
        checks::all_names()
    } else {
        vec![m.get_one::<String>("name").expect("required").as_str()]
    };
    let runs = checks::run_checks(&names, &ctx)?;
    let dir = checks::write_run(cfg, &runs, &[])?;
    print_runs(&runs);
    let reports: Vec<_> = runs.into_iter().map(|r| r.report).collect();
    eprint!("{}", checks::summarize(&reports).render());
    eprintln!("reports in {}", dir.display());
    Ok(checks::exit_code(&reports))
}

fn demo(cfg: &RunConfig, which: &str) -> Result<i32> {
    let kind = if which == "theorem1" {
        LadderKind::Rhombus
    } else {
        LadderKind::Ball
    };
    let mut cfg = cfg.clone();
    cfg.kind = kind;
    let d = checks::demo(kind, &cfg)?;
    let dir = checks::write_run(
        &cfg,
        &d.runs,
        &[("growth_table.csv".into(), d.table.clone())],
    )?;
    print_runs(&d.runs);
    println!("{}", d.table.trim_end());
    println!(
        "‖f_trunc‖∞ ≤ {:.4} (factored), ≤ {:.4} (coefficient sum); cap Σ c1/k² = {:.4}",
        d.sup_bound, d.coeff_sum, d.sup_cap
    );
    let reports: Vec<_> = d.runs.into_iter().map(|r| r.report).collect();
    eprint!("{}", checks::summarize(&reports).render());
    eprintln!("reports in {}", dir.display());
    Ok(checks::exit_code(&reports))
}

fn report(m: &ArgMatches) -> Result<i32> {
    let paths: Vec<&PathBuf> = m.get_many::<PathBuf>("paths").expect("required").collect();
    let s = checks::report(&paths)?;
    if s.total == 0 {
        eprintln!("warning: no check records found");
    }
    print!("{}", s.render());
    Ok(s.exit_code())
}

fn run(m: &ArgMatches) -> Result<i32> {
    let (name, sub) = m.subcommand().expect("subcommand required");
    if name == "report" {
        return report(sub);
    }
    let cfg = load_config(m)?;
    match name {
        "build-b" => build_b(&cfg),
        "estimate-c" => estimate_c(&cfg),
        "build-a" => build_a(&cfg),
        "build-T" => build_t(&cfg),
        "build-ladder" => build_ladder(&cfg, sub.get_one::<String>("family").expect("required")),
        "check" => check(&cfg, sub),
        "demo" => demo(&cfg, sub.get_one::<String>("theorem").expect("required")),
        other => Err(Error::Usage(format!("unknown subcommand {other}"))),
    }
}

fn main() -> ExitCode {
    let m = cli().get_matches();
    match run(&m) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::Certificate(_)) {
                1
            } else {
                2
            })
        }
    }
}
