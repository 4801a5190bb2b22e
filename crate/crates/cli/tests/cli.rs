use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fet")).args(args).output().expect("spawn fet")
}

fn ok_json(args: &[&str]) -> Value {
    let out = fet(args);
    assert!(out.status.success(), "fet {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const SMALL_VERIFY: &str = r#"
seed = 7

[green]
trials = 200

[purple]
trials = 200

[red]
trials = 200

[cyan]
n = 1024
trials = 200

[yellow]
n_list = [256, 512]
trials = 10

[convergence]
n_list = [256, 512]
trials = 10
"#;

#[test]
fn duel_prints_distribution_and_bounds() {
    let v = ok_json(&["duel", "--k", "2", "--p", "0.5", "--q", "0.5"]);
    assert!((v["p_eq"].as_f64().unwrap() - 0.375).abs() < 1e-15);
    assert!((v["p_lt"].as_f64().unwrap() - 0.3125).abs() < 1e-15);

    let v = ok_json(&["duel", "--k", "40", "--p", "0.3", "--q", "0.6", "--bounds"]);
    assert!(v["p_lt"].as_f64().unwrap() >= v["hoeffding_lower_bound_p_lt"].as_f64().unwrap());
    assert!(v["p_gt"].as_f64().unwrap() >= v["underdog_lower_bound_p_gt"].as_f64().unwrap());

    let out = fet(&["duel", "--k", "5", "--p", "0.6", "--q", "0.4", "--bounds"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn classify_matches_documented_examples() {
    let label = |x: &str, y: &str| ok_json(&["classify", "--x", x, "--y", y, "--n", "1000", "--delta", "0.1"])["label"].clone();
    assert_eq!(label("0.2", "0.5"), "Green1");
    assert_eq!(label("0.8", "0.5"), "Green0");
    let v = ok_json(&["classify", "--x", "0.5", "--y", "0.5", "--n", "1000", "--delta", "0.1"]);
    assert_eq!(v["yellow_label"], "A1");
}

#[test]
fn dynamics_reports_expectation() {
    let v = ok_json(&["dynamics", "--x", "0.4", "--y", "0.6", "--n", "1000", "--ell", "30"]);
    let g = v["g"].as_f64().unwrap();
    assert!(g > 0.6 && g <= 1.0, "g = {g}");
}

#[test]
fn audit_and_chain_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    let audit = dir.path().join("audit.json");
    let v = ok_json(&["audit", "--n", "64", "--delta", "0.05", "--out", audit.to_str().unwrap()]);
    assert_eq!(v["uncovered_count"], 0);
    let full: Value = serde_json::from_str(&std::fs::read_to_string(&audit).unwrap()).unwrap();
    assert_eq!(full["total_points"], 65 * 65);

    let chain = dir.path().join("chain.json");
    let v = ok_json(&["chain", "--n", "2", "--ell", "1", "--from", "1,1", "--out", chain.to_str().unwrap()]);
    assert!(chain.exists());
    assert!(v["states"].as_u64().unwrap() > 0);

    let out = fet(&["chain", "--n", "2", "--ell", "1", "--from", "11", "--out", chain.to_str().unwrap()]);
    assert!(!out.status.success());
}

#[test]
fn simulate_writes_trials_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.toml");
    std::fs::write(&cfg, "n = 128\nc_sample = 3.0\nseed = 5\ntrials = 3\nbackend = \"agent_level\"\n").unwrap();
    let out_dir = dir.path().join("run");
    let v = ok_json(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--preset",
        "half_half",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(v["trials"].as_array().unwrap().len(), 3);
    assert_eq!(v["config"]["preset"], "half_half");
    for k in 0..3 {
        assert!(out_dir.join(format!("trial_{k}.csv")).exists());
    }
    let written: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(written, v);

    std::fs::write(&cfg, "n = 128\nell = 5\ntrails = 3\n").unwrap();
    assert!(!fet(&["simulate", "--config", cfg.to_str().unwrap()]).status.success());
}

fn verify_all(config: &Path, out: &Path) -> String {
    let o = fet(&["verify", "--lemma", "all", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

#[test]
fn verify_is_deterministic_and_emits_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("verify.toml");
    std::fs::write(&cfg, SMALL_VERIFY).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let stdout = verify_all(&cfg, &a);
    assert_eq!(stdout, verify_all(&cfg, &b));

    let names = ["green", "purple", "red", "cyan", "yellow", "convergence"];
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), names.len());
    for (line, name) in lines.iter().zip(names) {
        let (lemma, verdict) = line.split_once(' ').unwrap();
        assert_eq!(lemma, name);
        assert!(verdict == "PASS" || verdict == "FAIL");
    }

    let mut files: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    files.sort();
    assert_eq!(files.len(), 2 * names.len() + 1);
    for f in &files {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f:?} differs");
    }

    for name in ["green", "purple", "red", "cyan"] {
        let csv = std::fs::read_to_string(a.join(format!("{name}.csv"))).unwrap();
        assert_eq!(csv.lines().next(), Some("point_x,point_y,trials,failures,verdict"));
    }
    for name in ["yellow", "convergence"] {
        let csv = std::fs::read_to_string(a.join(format!("{name}.csv"))).unwrap();
        assert_eq!(csv.lines().next(), Some("n,quantile50,quantile99,fit_C,fit_r2"));
        assert_eq!(csv.lines().count(), 3);
    }

    let summary: Value = serde_json::from_str(&std::fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 7);
    let green: Value = serde_json::from_str(&std::fs::read_to_string(a.join("green.json")).unwrap()).unwrap();
    assert_eq!(green["lemma"], "green");
    assert!(green["points"].as_array().is_some_and(|p| !p.is_empty()));
}

#[test]
fn verify_rejects_unknown_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[red]\ntrails = 5\n").unwrap();
    let o = fet(&["verify", "--lemma", "red", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
}
