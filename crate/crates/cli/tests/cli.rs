use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn conjlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conjlab"))
        .args(args)
        .env_remove("CONJLAB_OUT")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn toy_conjugacy_run_passes_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = conjlab(&["run", "--system", "toy-1-1", "--suite", "conjugacy", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["passed"], true);
    assert_eq!(summary["suites"]["conjugacy"], true);
    let report = json(&out.join("report.json"));
    assert_eq!(report["config"]["system"], "toy-1-1");
    assert_eq!(report["suites"][0]["metrics"]["samples"], 100);
    assert!(report["suites"][0]["metrics"]["max_hg_identity_error"].as_f64().unwrap() <= 1e-6);
    let csv = fs::read_to_string(out.join("conjugacy_samples.csv")).unwrap();
    assert!(csv.starts_with("id,u1_0,u1_1,u2_0,u2_1,hg_identity,gh_identity,equivariance,h_norm,g_norm\n"));
    assert_eq!(csv.lines().count(), 101);
}

#[test]
fn heat_dichotomy_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = conjlab(&["run", "--system", "heat-8", "--suite", "dichotomy", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = json(&dir.path().join("report.json"));
    assert!(report["suites"][0]["metrics"]["duhamel_residual"].as_f64().unwrap() <= 1e-8);
    assert_eq!(report["suites"][0]["metrics"]["decay_checked"], true);
}

#[test]
fn gate_violation_names_the_inequality() {
    let dir = tempfile::tempdir().unwrap();
    let o = conjlab(&[
        "run",
        "--system",
        "toy-gate-violation",
        "--suite",
        "conjugacy",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("4·k·f_lip/alpha < 1"), "{}", stderr(&o));
    let report = json(&dir.path().join("report.json"));
    assert!(report["suites"][0]["diagnostics"][0].as_str().unwrap().contains("4·k·f_lip/alpha < 1"));
}

#[test]
fn same_seed_gives_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = conjlab(&[
            "run",
            "--system",
            "toy-2-1",
            "--suite",
            "conjugacy,inequalities",
            "--samples",
            "8",
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let (a, b, c) = (run("a", "5"), run("b", "5"), run("c", "6"));
    for f in ["summary.json", "conjugacy_samples.csv", "conjugacy_equivariance.csv", "inequalities.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_ne!(
        fs::read(a.join("conjugacy_samples.csv")).unwrap(),
        fs::read(c.join("conjugacy_samples.csv")).unwrap()
    );
}

#[test]
fn f_lip_sweep_writes_one_report_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = conjlab(&[
        "sweep",
        "--system",
        "toy-1-1",
        "--suite",
        "conjugacy",
        "--samples",
        "5",
        "--axis",
        "f_lip",
        "--values",
        "0.05,0.1,0.2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for v in ["0.05", "0.1", "0.2"] {
        let report = json(&dir.path().join(format!("f_lip={v}")).join("report.json"));
        let lip = report["system"]["f_lip"].as_f64().unwrap();
        assert!((lip - v.parse::<f64>().unwrap()).abs() < 1e-12);
    }
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("f_lip,passed,conjugacy."));
    assert!(lines[1].starts_with("0.05,true,"));
}

#[test]
fn empty_axis_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = conjlab(&[
        "sweep", "--system", "toy-1-1", "--axis", "f_lip", "--values", "", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no values"));
}

#[test]
fn delta_sweep_brackets_the_gate_flip() {
    let dir = tempfile::tempdir().unwrap();
    let o = conjlab(&[
        "sweep",
        "--system",
        "toy-local",
        "--suite",
        "localization",
        "--axis",
        "delta",
        "--values",
        "0.0098,0.0099",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let gate = |v: &str| json(&dir.path().join(format!("delta={v}")).join("report.json"))["suites"][0]["metrics"].clone();
    let (lo, hi) = (gate("0.0098"), gate("0.0099"));
    assert_eq!(lo["gate_holds"], true);
    assert_eq!(hi["gate_holds"], false);
    let star = lo["critical_delta"].as_f64().unwrap();
    assert!(0.0098 < star && star < 0.0099);
    assert!((star - lo["critical_delta_exact"].as_f64().unwrap()).abs() < 1e-6);
}

#[test]
fn localization_suite_rejects_other_systems() {
    let dir = tempfile::tempdir().unwrap();
    let o = conjlab(&["run", "--system", "toy-1-1", "--suite", "localization", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("needs a localized system"));
}

#[test]
fn systems_list_shows_builtins() {
    let o = conjlab(&["systems", "list"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("name,kind,x_dim,y_dim,gap_ratio,gate\n"));
    assert!(text.contains("toy-gate-violation,toy,2,2,"));
    assert!(text.contains("heat-8,heat,8,1,"));
    assert_eq!(text.lines().count(), 9);
}

#[test]
fn config_files_and_validation() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    fs::write(
        &good,
        r#"{
  "system": {"kind": "toy", "dim_stable": 1, "dim_unstable": 1, "b_eigenvalues": [-0.5], "scale": 0.05},
  "suites": ["inequalities"],
  "seed": 3,
  "inequality_params": [{"a1": 1.0, "a2": 0.5, "a3": 0.2, "a4": 0.1, "alpha": 1.0, "horizon": 4.0}]
}"#,
    )
    .unwrap();
    let o = conjlab(&["validate-config", good.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("ok: toy-1-1"));

    let out = dir.path().join("out");
    let o = conjlab(&["run", "--config", good.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("inequalities.csv")).unwrap();
    assert!(csv.starts_with("a1,a2,a3,a4,alpha,horizon,direction,hypothesis_slack,conclusion_slack,pass\n"));
    assert_eq!(csv.lines().count(), 3);
    assert_eq!(json(&out.join("report.json"))["config"]["seed"], 3);

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"system": "toy-1-1", "suites": ["nonsense"]}"#).unwrap();
    let o = conjlab(&["validate-config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    fs::write(&bad, "{not json").unwrap();
    assert_eq!(conjlab(&["validate-config", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn system_file_reference_is_resolved() {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("heat.json");
    fs::write(&sys, r#"{"kind": "heat", "n_modes": 3, "b_eigenvalues": [-0.5], "f_lip": 0.25, "shift": 0.0}"#).unwrap();
    let out = dir.path().join("out");
    let o = conjlab(&["run", "--system", sys.to_str().unwrap(), "--suite", "dichotomy", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(json(&out.join("summary.json"))["system"], "heat-3");
}

#[test]
fn unknown_system_exits_with_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = conjlab(&["run", "--system", "nope", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown system 'nope'"));
    assert_eq!(conjlab(&["run", "--out", dir.path().to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn output_root_defaults_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_conjlab"))
        .args(["run", "--system", "toy-zero", "--suite", "inequalities"])
        .env("CONJLAB_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("summary.json").is_file());
}

#[test]
fn zero_forcing_defects_vanish() {
    let dir = tempfile::tempdir().unwrap();
    let o = conjlab(&[
        "run", "--system", "toy-zero", "--suite", "conjugacy,regularity", "--samples", "10", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = json(&dir.path().join("report.json"));
    let m = &report["suites"][0]["metrics"];
    for key in ["max_hg_identity_error", "max_gh_identity_error", "max_equivariance_error", "max_h_norm", "max_g_norm"] {
        assert!(m[key].as_f64().unwrap() <= 1e-13, "{key} = {}", m[key]);
    }
    let r = &report["suites"][1]["metrics"];
    assert!((r["h_stable_slope"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!((r["g_full_slope"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}
