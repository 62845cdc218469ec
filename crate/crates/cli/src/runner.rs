use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _};
use conjlab_core::systems::SystemConfig;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, SystemRef};
use crate::suites::{csv_of, run_suite, Context, SuiteOutcome};

#[derive(Debug)]
pub struct RunResult {
    pub out_dir: PathBuf,
    pub outcomes: Vec<SuiteOutcome>,
    pub passed: bool,
}

fn write(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn pretty<T: Serialize>(v: &T) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

/// Runs the selected suites and writes `report.json`, `summary.json` and
/// the per-suite CSVs into `out`. Errors are reserved for unusable input
/// and I/O; failing suites are reported through `RunResult::passed`.
pub fn run(config: &ExperimentConfig, out: &Path) -> anyhow::Result<RunResult> {
    let (system_config, system) = config.validate()?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let ctx = Context {
        config,
        system_config: &system_config,
        system: &system,
    };
    let mut outcomes = Vec::new();
    for suite in config.selected_suites(&system_config) {
        let outcome = run_suite(suite, &ctx);
        for (name, contents) in &outcome.artifacts {
            write(&out.join(name), contents)?;
        }
        outcomes.push(outcome);
    }
    let passed = outcomes.iter().all(|o| o.passed);

    let report = json!({
        "config": config,
        "resolved_system": system_config,
        "system": system.describe(),
        "passed": passed,
        "suites": outcomes,
    });
    write(&out.join("report.json"), &pretty(&report)?)?;
    let summary = json!({
        "system": system.name(),
        "fingerprint": system.fingerprint(),
        "seed": config.seed,
        "passed": passed,
        "suites": outcomes
            .iter()
            .map(|o| (o.suite.name().to_string(), Value::Bool(o.passed)))
            .collect::<serde_json::Map<_, _>>(),
    });
    write(&out.join("summary.json"), &pretty(&summary)?)?;
    Ok(RunResult {
        out_dir: out.to_path_buf(),
        outcomes,
        passed,
    })
}

#[derive(Debug)]
pub struct SweepResult {
    pub runs: Vec<(f64, RunResult)>,
    pub passed: bool,
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

/// One run per axis value in `out/<axis>=<value>/`, plus `out/sweep.csv`
/// with one row per value and one column per scalar metric.
pub fn sweep(config: &ExperimentConfig, axis: &str, values: &[f64], out: &Path) -> anyhow::Result<SweepResult> {
    if values.is_empty() {
        bail!("sweep axis '{axis}' has no values");
    }
    let base: SystemConfig = config.system.resolve()?;
    // Fail on a bad axis before any run starts.
    base.with_axis(axis, values[0])?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let mut runs = Vec::new();
    for &v in values {
        let cfg = ExperimentConfig {
            system: SystemRef::Inline(base.with_axis(axis, v)?),
            ..config.clone()
        };
        let dir = out.join(format!("{axis}={v}"));
        runs.push((v, run(&cfg, &dir)?));
    }

    let mut columns: Vec<String> = runs
        .iter()
        .flat_map(|(_, r)| {
            r.outcomes.iter().flat_map(|o| {
                o.metrics
                    .iter()
                    .filter(|(_, v)| scalar(v).is_some())
                    .map(move |(k, _)| format!("{}.{k}", o.suite))
            })
        })
        .collect();
    columns.sort();
    columns.dedup();

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![axis.to_string(), "passed".into()];
    header.extend(columns.iter().cloned());
    w.write_record(&header)?;
    for (v, r) in &runs {
        let mut row = vec![v.to_string(), r.passed.to_string()];
        for c in &columns {
            let (suite, key) = c.split_once('.').expect("column has a suite prefix");
            let cell = r
                .outcomes
                .iter()
                .find(|o| o.suite.name() == suite)
                .and_then(|o| o.metrics.get(key))
                .and_then(scalar)
                .unwrap_or_default();
            row.push(cell);
        }
        w.write_record(&row)?;
    }
    write(&out.join("sweep.csv"), &String::from_utf8(w.into_inner()?)?)?;
    let passed = runs.iter().all(|(_, r)| r.passed);
    Ok(SweepResult { runs, passed })
}

/// `name,kind,x_dim,y_dim,gap_ratio,gate` for every built-in system.
pub fn systems_table() -> anyhow::Result<String> {
    #[derive(Serialize)]
    struct Row {
        name: &'static str,
        kind: &'static str,
        x_dim: usize,
        y_dim: usize,
        gap_ratio: f64,
        gate: &'static str,
    }
    let rows = conjlab_core::systems::BUILTIN_NAMES
        .iter()
        .map(|&name| {
            let cfg = SystemConfig::builtin(name)?;
            let sys = cfg.build()?;
            Ok(Row {
                name,
                kind: cfg.kind(),
                x_dim: sys.x_dim(),
                y_dim: sys.y_dim(),
                gap_ratio: sys.gap_ratio(),
                gate: if sys.check_gap().is_ok() { "holds" } else { "fails" },
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    csv_of(&rows)
}
