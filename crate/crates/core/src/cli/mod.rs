//! The `margin-forge` command line.

pub mod config;
pub mod report;
pub mod runner;

use std::path::PathBuf;

use clap::Parser;

use crate::error::{Error, Result};
use config::{parse_overrides, Command, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "margin-forge", version, about = "Active-learning informativeness, quantile strategies and cover certification")]
pub struct Args {
    pub command: Command,
    /// Flat JSON config with dotted keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Further `--key value` overrides.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    pub overrides: Vec<String>,
}

fn resolve(args: &Args) -> Result<ExperimentConfig> {
    let mut overrides = Vec::new();
    let mut config = args.config.clone();
    // The named options may also appear among the trailing overrides.
    for (key, value) in parse_overrides(&args.overrides)? {
        match key.as_str() {
            "out" => overrides.push(("output_path".into(), value)),
            "config" => config = Some(PathBuf::from(value.as_str().map_or_else(|| value.to_string(), str::to_string))),
            _ => overrides.push((key, value)),
        }
    }
    if let Some(seed) = args.seed {
        overrides.push(("seed".into(), seed.into()));
    }
    if let Some(out) = &args.out {
        overrides.push(("output_path".into(), out.display().to_string().into()));
    }
    ExperimentConfig::load(args.command, config.as_deref(), &overrides)
}

fn write(path: Option<&str>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(Error::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Runs one command and returns the process exit code.
pub fn run(args: &Args) -> i32 {
    let cfg = match resolve(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("margin-forge: {e}");
            let out = args.out.as_ref().map(|p| p.display().to_string());
            let _ = write(out.as_deref(), &report::render(&report::failure(args.command, None, &e)));
            return report::exit_code(&e);
        }
    };
    let output = cfg.opt_string("output_path").ok().flatten().map(str::to_string);
    let (body, code, csv) = match runner::run(&cfg) {
        Ok(outcome) => (report::success(&cfg, outcome.result), report::EXIT_OK, outcome.csv),
        Err(e) => {
            eprintln!("margin-forge: {e}");
            (report::failure(cfg.command, Some(&cfg), &e), report::exit_code(&e), None)
        }
    };
    if let Err(e) = write(output.as_deref(), &report::render(&body)) {
        eprintln!("margin-forge: cannot write report: {e}");
        return report::EXIT_FAILURE;
    }
    if let (Some(csv), Ok(Some(path))) = (csv, cfg.opt_string("csv_path")) {
        if let Err(e) = std::fs::write(path, csv) {
            eprintln!("margin-forge: cannot write CSV: {e}");
            return report::EXIT_FAILURE;
        }
    }
    code
}
