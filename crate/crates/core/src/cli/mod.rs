//! Command-line front end: `train`, `sweep`, `certify`, `attack` and `audit`.
//!
//! Exit codes: 0 success or certified, 1 usage or IO error, 2 not certified
//! (or an audit finding), 3 uncertifiable because t = 0.

pub mod commands;
pub mod config;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::Result;
use commands::CertifyTargets;
use config::{ExperimentConfig, SEED_ENV};

#[derive(Debug, Parser)]
#[command(name = "rotsmooth", version, about = "Noisy quantum classifier experiments and robustness certification")]
pub struct Cli {
    /// Experiment configuration (JSON); built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a configuration field, e.g. `--set noise.t=0.5`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Output directory (same as `--set output_dir=DIR`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the classifier; writes model.json, metrics.csv and a manifest.
    Train,
    /// Accuracy with and without noise over h, shots and repeats.
    Sweep {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Certify test inputs (by index) or feature vectors from a JSON file.
    Certify {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long = "index")]
        indices: Vec<usize>,
        #[arg(long, conflicts_with = "indices")]
        input: Option<PathBuf>,
    },
    /// Search for label flips inside and outside the certified radius.
    Attack {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Absolute attack radius; defaults to attack.radius_scale times the certified radius.
        #[arg(long = "tau-d")]
        tau_d: Option<f64>,
    },
    /// Empirical privacy audit over random state pairs.
    Audit {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long = "tau-d")]
        tau_d: Option<f64>,
        #[arg(long)]
        pairs: Option<usize>,
    },
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig> {
    let mut overrides = Vec::new();
    if let Some(out) = &cli.out {
        overrides.push(format!("output_dir={}", serde_json::to_string(out)?));
    }
    if let Command::Audit { tau_d, pairs, .. } = &cli.command {
        if let Some(t) = tau_d {
            overrides.push(format!("audit.tau_d={t}"));
        }
        if let Some(p) = pairs {
            overrides.push(format!("audit.n_pairs={p}"));
        }
    }
    overrides.extend(cli.overrides.iter().cloned());
    let env_seed = std::env::var(SEED_ENV).ok();
    ExperimentConfig::resolve(cli.config.as_deref(), &overrides, env_seed.as_deref())
}

pub fn execute(cli: &Cli) -> Result<i32> {
    let cfg = resolve(cli)?;
    match &cli.command {
        Command::Train => commands::cmd_train(&cfg),
        Command::Sweep { model } => commands::cmd_sweep(&cfg, model.as_deref()),
        Command::Certify { model, indices, input } => {
            let targets = match (input, indices.is_empty()) {
                (Some(p), _) => CertifyTargets::File(p.clone()),
                (None, false) => CertifyTargets::Indices(indices.clone()),
                (None, true) => CertifyTargets::All,
            };
            commands::cmd_certify(&cfg, model.as_deref(), &targets)
        }
        Command::Attack { model, tau_d } => commands::cmd_attack(&cfg, model.as_deref(), *tau_d),
        Command::Audit { model, .. } => commands::cmd_audit(&cfg, model.as_deref()),
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
