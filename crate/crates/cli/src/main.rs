//! `heston-weak-lab`: batch runner for prices, convergence studies,
//! reference values and lemma checks. Output is CSV.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CliError;
use config::{RawConfig, StudyConfig};

#[derive(Parser, Debug)]
#[command(name = "heston-weak-lab", version, about = "Weak-error experiments for Euler schemes of the Heston model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One Monte Carlo estimate per payoff, with its reference and error.
    Price(Common),
    /// Weak errors over a grid of step counts and the fitted rate.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Full-size study: M = 2e7 and N up to 256 unless set explicitly.
        #[arg(long)]
        full_scale: bool,
    },
    /// Semi-analytic call, put and digital prices.
    Reference(Common),
    /// Deterministic sequence inequalities and Monte Carlo negativity checks.
    VerifyLemmas(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Flat `key = value` file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset name (model1..model4) or `all`.
    #[arg(long)]
    model: Option<String>,
    /// sym or abs; comma-separated for several.
    #[arg(long)]
    scheme: Option<String>,
    /// call, put, digital, smooth_v, smooth_x; comma-separated for several.
    #[arg(long)]
    payoff: Option<String>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores); never changes results.
    #[arg(long, env = "HESTON_LAB_THREADS")]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated ascending powers of two.
    #[arg(long)]
    grid: Option<String>,
    /// Step count N for `price`, or a single N for `verify-lemmas`.
    #[arg(long)]
    steps: Option<usize>,
    /// Comma-separated values in (0, 1/2].
    #[arg(long)]
    epsilon: Option<String>,
    /// Step count at which `verify-lemmas` runs the Monte Carlo check.
    #[arg(long)]
    mc_grid: Option<usize>,
    #[arg(long)]
    mc_samples: Option<u64>,
    /// Any config key, e.g. `--set kappa=1.5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn resolve(&self) -> Result<StudyConfig, CliError> {
        let mut raw = match &self.config {
            Some(path) => RawConfig::from_file(path)?,
            None => RawConfig::default(),
        };
        let path_str = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let flags = [
            ("model", self.model.clone()),
            ("scheme", self.scheme.clone()),
            ("payoff", self.payoff.clone()),
            ("samples", self.samples.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("threads", self.threads.map(|v| v.to_string())),
            ("out", path_str(&self.out)),
            ("grid", self.grid.clone()),
            ("steps", self.steps.map(|v| v.to_string())),
            ("epsilon", self.epsilon.clone()),
            ("mc_grid", self.mc_grid.map(|v| v.to_string())),
            ("mc_samples", self.mc_samples.map(|v| v.to_string())),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                raw.set(key, &v)?;
            }
        }
        for kv in &self.overrides {
            let (k, v) = kv.split_once('=').ok_or_else(|| config::ConfigError::Value {
                key: "--set".into(),
                msg: format!("expected KEY=VALUE, got `{kv}`"),
            })?;
            raw.set(k.trim(), v.trim())?;
        }
        Ok(StudyConfig::from_raw(&raw)?)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Price(c) => commands::cmd_price(&c.resolve()?),
        Command::Converge { common, full_scale } => commands::cmd_converge(&common.resolve()?, full_scale),
        Command::Reference(c) => commands::cmd_reference(&c.resolve()?),
        Command::VerifyLemmas(c) => commands::cmd_verify_lemmas(&c.resolve()?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Lab(heston_lab::Error::ZeroError { .. }) = e {
                eprintln!("hint: increase --samples so the Monte Carlo error does not vanish at some N");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
