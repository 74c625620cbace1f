//! Drives the `pbandit` binary end to end on a tiny dataset.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use precision_bandit::harness::{read_systems_csv, ConditionRange, SummaryRecord};

fn pbandit(root: &Path, args: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pbandit"))
        .env("PBANDIT_OUT", root)
        .args(args.split_whitespace())
        .output()
        .expect("binary runs")
}

fn ok(root: &Path, args: &str) -> String {
    let out = pbandit(root, args);
    assert!(out.status.success(), "{args}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

const SMALL: &str = "--profile ci --n-train 6 --n-test 6 --n-min 20 --n-max 40 --seed 3";

fn pipeline(root: &Path) {
    ok(root, &format!("gen {SMALL}"));
    ok(root, "train --profile ci --episodes 5 --seed 3");
    ok(root, "eval --profile ci");
    ok(root, "baseline --profile ci");
    ok(root, "report");
}

fn summary(path: &Path) -> Vec<SummaryRecord> {
    csv::Reader::from_path(path).unwrap().deserialize().map(Result::unwrap).collect()
}

#[test]
fn xi_recounts_from_the_systems_file() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path());
    let eval = dir.path().join("eval");
    let systems = read_systems_csv(&eval.join("rl_systems.csv")).unwrap();
    for row in summary(&eval.join("rl_summary.csv")) {
        let range = ConditionRange::ALL.into_iter().find(|r| r.label() == row.range).unwrap();
        let members: Vec<_> = systems.iter().filter(|s| ConditionRange::of(s.kappa_ref) == range).collect();
        assert_eq!(members.len(), row.count);
        let hits = members.iter().filter(|s| s.ferr.max(s.nbe) < row.tau).count();
        let xi: f64 = row.xi.parse().unwrap();
        assert_eq!(xi, hits as f64 / row.count as f64, "{}", row.range);
    }
    assert!(summary(&eval.join("fp64_summary.csv")).iter().all(|r| r.xi == "--"));

    let report = fs::read_to_string(dir.path().join("report/report_performance.csv")).unwrap();
    assert!(report.lines().any(|l| l.starts_with("rl,")));
    assert!(report.lines().any(|l| l.starts_with("fp64,")));
    assert!(dir.path().join("report/report_curves.csv").exists());

    // report is idempotent
    let before = fs::read(dir.path().join("report/report.md")).unwrap();
    ok(dir.path(), "report");
    assert_eq!(before, fs::read(dir.path().join("report/report.md")).unwrap());
}

#[test]
fn persisted_config_reproduces_training() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    ok(root, &format!("gen {SMALL}"));
    ok(root, "train --profile ci --episodes 4 --weights W2 --tau 1e-8 --seed 9");
    let cfg = root.join("train/train_config.toml");
    let again = root.join("again");
    ok(root, &format!("train --config {} --out {}", cfg.display(), again.display()));
    for f in ["qtable.json", "episodes.csv"] {
        assert_eq!(fs::read(root.join("train").join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }
    let resolved = precision_bandit::cli::RunConfig::load(&cfg).unwrap();
    assert_eq!(resolved.train.stop.tau_conv, 1e-8);
    assert_eq!(resolved.seed, Some(9));
}

#[test]
fn usage_and_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    let out = pbandit(root, "gen --n-train 0");
    assert_eq!(out.status.code(), Some(2));

    let out = pbandit(root, "train --weights W3");
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("valid presets: W1, W2"));

    let out = pbandit(root, &format!("report --input {}", root.display()));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nothing to report"));

    let out = pbandit(root, "train --profile ci");
    assert_eq!(out.status.code(), Some(1), "missing manifest must fail");
}

#[test]
fn damaged_qtable_and_tau_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    ok(root, &format!("gen {SMALL}"));
    ok(root, "train --profile ci --episodes 3");
    ok(root, "baseline --profile ci");

    let out = pbandit(root, "eval --profile ci --tau 1e-8");
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));

    let q = root.join("train/qtable.json");
    let text = fs::read_to_string(&q).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["bins"]["n1"] = serde_json::json!(3);
    fs::write(&q, v.to_string()).unwrap();
    let out = pbandit(root, "eval --profile ci");
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("shape mismatch"), "{}", String::from_utf8_lossy(&out.stderr));

    fs::write(&q, &text[..text.len() / 2]).unwrap();
    let out = pbandit(root, "eval --profile ci");
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed"));
}
