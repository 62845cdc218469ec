use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use conjlab_cli::{run, sweep, systems_table, ExperimentConfig, RunResult, Suite, SystemRef};

/// Numerical verification of linearization conjugacies for semilinear
/// evolution equations.
#[derive(Parser)]
#[command(name = "conjlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run verification suites on one system.
    Run(RunArgs),
    /// Repeat a run over values of one numeric system parameter.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// f_lip (toy, heat), gap_margin (toy) or delta (localized).
        #[arg(long)]
        axis: String,
        /// Comma-separated values, e.g. 0.05,0.1,0.2.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
    /// Built-in systems.
    Systems {
        #[command(subcommand)]
        action: SystemsAction,
    },
    /// Parse an experiment config and build its system.
    ValidateConfig { path: PathBuf },
}

#[derive(Subcommand)]
enum SystemsAction {
    List,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON); flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in name or path to a system JSON file.
    #[arg(long)]
    system: Option<String>,
    /// Suites to run; repeat or separate by commas. Defaults to all.
    #[arg(long, value_enum, value_delimiter = ',')]
    suite: Vec<Suite>,
    #[arg(long, env = "CONJLAB_OUT")]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Tail tolerance of the Green-kernel truncation.
    #[arg(long)]
    tol_quadrature: Option<f64>,
    #[arg(long)]
    tol_picard: Option<f64>,
    /// Truncation horizon for the conjugacy integrals.
    #[arg(long)]
    horizon_override: Option<f64>,
    /// Number of conjugacy samples.
    #[arg(long)]
    samples: Option<usize>,
}

impl RunArgs {
    fn config(&self) -> anyhow::Result<(ExperimentConfig, PathBuf)> {
        let mut cfg = match (&self.config, &self.system) {
            (Some(path), _) => ExperimentConfig::from_file(path)?,
            (None, Some(name)) => ExperimentConfig::new(SystemRef::Named(name.clone())),
            (None, None) => bail!("either --system or --config is required"),
        };
        if let Some(name) = &self.system {
            cfg.system = SystemRef::Named(name.clone());
        }
        if !self.suite.is_empty() {
            cfg.suites = Some(self.suite.clone());
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(t) = self.tol_quadrature {
            cfg.tolerances.quadrature = t;
        }
        if let Some(t) = self.tol_picard {
            cfg.tolerances.picard = t;
        }
        if self.horizon_override.is_some() {
            cfg.tolerances.horizon_override = self.horizon_override;
        }
        if self.samples.is_some() {
            cfg.samples = self.samples;
        }
        let out = self
            .out
            .clone()
            .or_else(|| cfg.out.clone())
            .unwrap_or_else(|| PathBuf::from("conjlab-out"));
        Ok((cfg, out))
    }
}

fn print_run(r: &RunResult) {
    for o in &r.outcomes {
        println!("{:<13} {}", o.suite.name(), if o.passed { "PASS" } else { "FAIL" });
        for d in &o.diagnostics {
            eprintln!("  {}: {d}", o.suite.name());
        }
    }
    println!("reports in {}", r.out_dir.display());
}

fn status(passed: bool) -> ExitCode {
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn execute(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run(args) => {
            let (cfg, out) = args.config()?;
            let r = run(&cfg, &out)?;
            print_run(&r);
            Ok(status(r.passed))
        }
        Command::Sweep { run: args, axis, values } => {
            let (cfg, out) = args.config()?;
            let values = values
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().with_context(|| format!("bad sweep value '{s}'")))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let r = sweep(&cfg, &axis, &values, &out)?;
            for (v, run) in &r.runs {
                println!("{axis}={v}: {}", if run.passed { "PASS" } else { "FAIL" });
            }
            println!("combined table in {}", out.join("sweep.csv").display());
            Ok(status(r.passed))
        }
        Command::Systems { action: SystemsAction::List } => {
            print!("{}", systems_table()?);
            Ok(ExitCode::SUCCESS)
        }
        Command::ValidateConfig { path } => {
            let cfg = ExperimentConfig::from_file(&path)?;
            let (_, sys) = cfg.validate()?;
            println!("ok: {} ({})", sys.name(), sys.fingerprint());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
