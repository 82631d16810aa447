//! `qkverify verify --config <path> [--section.key value ...] [--out report.json]`

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qkverify::config::{ConfigMap, RunConfig};
use qkverify::run::{run_verification, write_outputs, ExitStatus};

#[derive(Parser)]
#[command(
    name = "qkverify",
    version,
    about = "Numerical verifier for the quaternionic Kähler construction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every verification pass. Any dotted config key may be given as
    /// `--key value` and overrides the file.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
        /// JSON report path; overrides `output.report`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Slab table path; overrides `output.slab_csv`.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Print the report to stdout even when it is written to a file.
        #[arg(long)]
        print: bool,
    },
}

type Overrides = Vec<(String, String)>;

/// Splits `--a.b value` pairs off the argument list.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Overrides), String> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        match arg.strip_prefix("--").filter(|k| k.contains('.')) {
            Some(key) => {
                let (key, value) = match key.split_once('=') {
                    Some((k, v)) => (k.to_string(), v.to_string()),
                    None => (
                        key.to_string(),
                        it.next().ok_or(format!("missing value for --{key}"))?,
                    ),
                };
                overrides.push((key, value));
            }
            None => rest.push(arg),
        }
    }
    Ok((rest, overrides))
}

fn load(config: Option<&PathBuf>, overrides: &[(String, String)]) -> Result<RunConfig, String> {
    let text = match config {
        Some(p) => {
            fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?
        }
        None => String::new(),
    };
    let mut map = ConfigMap::parse(&text).map_err(|e| e.to_string())?;
    for (k, v) in overrides {
        map.set(k, v).map_err(|e| e.to_string())?;
    }
    RunConfig::from_map(&map).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let (args, overrides) = match split_overrides(std::env::args().collect()) {
        Ok(split) => split,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(ExitStatus::ConfigError.code() as u8);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                ExitStatus::ConfigError.code() as u8
            } else {
                0
            });
        }
    };
    let Command::Verify {
        config,
        out,
        csv,
        print,
    } = cli.command;

    let mut cfg = match load(config.as_ref(), &overrides) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("config error: {msg}");
            return ExitCode::from(ExitStatus::ConfigError.code() as u8);
        }
    };
    if out.is_some() {
        cfg.report_path = out;
    }
    if csv.is_some() {
        cfg.slab_csv_path = csv;
    }

    let report = run_verification(&cfg);
    if let Err(e) = write_outputs(
        &report,
        cfg.report_path.as_deref(),
        cfg.slab_csv_path.as_deref(),
    ) {
        eprintln!("error: {e}");
        return ExitCode::from(ExitStatus::EngineError.code() as u8);
    }
    if print || cfg.report_path.is_none() {
        println!("{}", report.to_json());
    }
    for section in &report.sections {
        for check in section.checks.iter().filter(|c| !c.passed) {
            eprintln!(
                "FAIL {}/{} residual={:?} tolerance={:?}",
                section.name, check.name, check.residual, check.tolerance
            );
        }
    }
    if let Some(err) = &report.error {
        eprintln!("error: {err}");
    }
    eprintln!(
        "{}: {:?}",
        if report.passed { "PASS" } else { "FAIL" },
        report.status
    );
    ExitCode::from(report.status.code() as u8)
}
