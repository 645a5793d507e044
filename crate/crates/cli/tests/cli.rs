use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("tridiv-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn tridiv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tridiv"))
        .args(args)
        .output()
        .unwrap()
}

fn run_dirs(out: &Path) -> Vec<PathBuf> {
    std::fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect()
}

#[test]
fn check_writes_a_run_and_report_reads_it() {
    let out = scratch("check");
    let o = tridiv(&[
        "check",
        "tree-parent",
        "--parent-limit",
        "5000",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let line = String::from_utf8(o.stdout).unwrap();
    assert!(line.contains("\"check\":\"tree-parent\"") && line.contains("\"status\":\"pass\""));
    let dirs = run_dirs(&out);
    assert_eq!(dirs.len(), 1);
    let report = dirs[0].join("report.jsonl");
    assert!(dirs[0].join("config.txt").exists());
    let o = tridiv(&["report", report.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("1 passed"));
}

#[test]
fn flags_override_the_config_file() {
    let out = scratch("override");
    let cfg = out.join("run.cfg");
    std::fs::write(&cfg, "# small run\nparent_limit = 100\nseed = 9\n").unwrap();
    let o = tridiv(&[
        "check",
        "tree-parent",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "4",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let dir = run_dirs(&out).into_iter().find(|p| p.is_dir()).unwrap();
    let text = std::fs::read_to_string(dir.join("config.txt")).unwrap();
    assert!(
        text.contains("seed = 4\n") && text.contains("parent_limit = 100\n"),
        "{text}"
    );
}

#[test]
fn empty_report_warns_and_succeeds() {
    let out = scratch("empty");
    let path = out.join("empty.jsonl");
    std::fs::write(&path, "").unwrap();
    let o = tridiv(&["report", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}

#[test]
fn failed_records_give_exit_one() {
    let out = scratch("failed");
    let path = out.join("r.jsonl");
    let line = r#"{"check":"tree-parent","label":"x","quote":"y","status":"fail","margin":-1.0,"estimate":null,"stderr":null,"samples":null,"seed":1,"detail":"","wall_ms":0}"#;
    std::fs::write(&path, format!("{line}\n")).unwrap();
    assert_eq!(
        tridiv(&["report", path.to_str().unwrap()]).status.code(),
        Some(1)
    );
}

#[test]
fn bad_input_gives_exit_two() {
    let out = scratch("bad");
    let dir = out.to_str().unwrap();
    assert_eq!(
        tridiv(&["check", "no-such-check", "--out-dir", dir])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        tridiv(&["build-b", "--blocks", "0", "--out-dir", dir])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        tridiv(&["check", "tree-parent", "--m", "many", "--out-dir", dir])
            .status
            .code(),
        Some(2)
    );
    let cfg = out.join("bad.cfg");
    std::fs::write(&cfg, "colour = blue\n").unwrap();
    assert_eq!(
        tridiv(&["check", "--all", "--config", cfg.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn list_names_every_check() {
    let o = tridiv(&["check", "--list"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 41);
}
