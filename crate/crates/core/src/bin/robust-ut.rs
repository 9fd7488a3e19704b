use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use robust_ut::distortion::TestFunction;
use robust_ut::experiment::{run_distortion, run_experiment, run_solve, ExperimentConfig};
use robust_ut::robust::Method;
use robust_ut::{Error, ErrorCategory, Result};

/// Robust sigma points for the unscented transform under interval moments.
#[derive(Parser)]
#[command(name = "robust-ut", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sigma points for each requested method.
    Solve(RunArgs),
    /// Sigma points plus mean transform errors and the distortion estimate.
    Experiment(RunArgs),
    /// Distortion of the transform over the feasible set.
    Distortion(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON file with the moment spec and optional run fields.
    #[arg(long)]
    config: PathBuf,
    /// Restrict to these methods (repeatable).
    #[arg(long = "method", value_parser = parse_method)]
    methods: Vec<Method>,
    #[arg(long)]
    order: Option<u32>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Test function: sin, cos, exp, identity or poly:c0,c1,...
    #[arg(long, value_parser = parse_function)]
    f: Option<TestFunction>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-sample errors as CSV (experiment only).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Include wall-clock timings in the report.
    #[arg(long)]
    timings: bool,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_function(s: &str) -> std::result::Result<TestFunction, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::from_path(&self.config)?;
        if !self.methods.is_empty() {
            cfg.methods = self.methods.clone();
        }
        if let Some(k) = self.order {
            cfg.relaxation_order = k;
        }
        if let Some(e) = self.epsilon {
            cfg.spec.epsilon = e;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(f) = &self.f {
            cfg.f = f.clone();
        }
        Ok(cfg)
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, format!("{text}\n"))?,
        None => writeln!(io::stdout().lock(), "{text}")?,
    }
    Ok(())
}

fn exit_code(c: ErrorCategory) -> u8 {
    match c {
        ErrorCategory::Config | ErrorCategory::Io => 2,
        ErrorCategory::Solver => 3,
        ErrorCategory::Sampling => 4,
    }
}

fn run(cli: Cli) -> Result<Option<ErrorCategory>> {
    match cli.command {
        Command::Solve(args) => {
            let report = run_solve(&args.config()?)?;
            emit(&report.to_json(args.timings)?, args.out.as_deref())?;
            Ok(report.first_failure())
        }
        Command::Experiment(args) => {
            let report = run_experiment(&args.config()?)?;
            emit(&report.to_json(args.timings)?, args.out.as_deref())?;
            if let Some(p) = &args.csv {
                let mut w = BufWriter::new(File::create(p)?);
                report.write_csv(&mut w)?;
                w.flush()?;
            }
            Ok(report.first_failure())
        }
        Command::Distortion(args) => {
            let est = run_distortion(&args.config()?)?;
            emit(&serde_json::to_string_pretty(&est)?, args.out.as_deref())?;
            Ok(None)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(c)) => {
            eprintln!("robust-ut: at least one method failed; see the report");
            ExitCode::from(exit_code(c))
        }
        Err(e) => {
            eprintln!("robust-ut: {e}");
            ExitCode::from(exit_code(e.category()))
        }
    }
}
