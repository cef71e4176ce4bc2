//! `spillover`: batch command line for interference structures, true effects,
//! simulated experiments and misspecification reports.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(name = "spillover", version, about = "Experiments under network interference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an interference structure and write structure.txt
    Generate(Common),
    /// Compute true average direct, spillover and policy effects (truth.csv)
    Truth(Common),
    /// Run one Bernoulli experiment and its HT estimate
    Simulate(Common),
    /// Monte Carlo study of the HT estimators (reps.csv, summary.csv)
    Estimate(Common),
    /// Misspecified spillover effect report (misspec_report.csv, weights.csv)
    Misspec {
        #[command(flatten)]
        common: Common,
        /// Emit a prebuilt adversarial instance instead
        #[arg(long, value_name = "KIND")]
        demo: Option<String>,
    },
    /// Prebuilt adversarial instance: sign_flip, magnitude_inflation, cancellation
    Demo {
        kind: String,
        #[command(flatten)]
        common: Common,
    },
}

/// Flags shared by every command; each overrides the same key in --config.
#[derive(Args, Default)]
struct Common {
    /// key=value config file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<String>,
    /// Design probability
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    /// Exhaustive enumeration bound on n
    #[arg(long)]
    bound: Option<String>,
    /// Ring generator with N units
    #[arg(long, value_name = "N")]
    ring: Option<String>,
    /// Grid generator, WIDTHxHEIGHT
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    metric: Option<String>,
    /// Edge-list file
    #[arg(long)]
    edges: Option<String>,
    #[arg(long)]
    units: Option<String>,
    /// Structure dump file
    #[arg(long)]
    structure: Option<String>,
    #[arg(long)]
    radius: Option<String>,
    /// Model file
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    model_seed: Option<String>,
    #[arg(long, value_name = "LO,HI")]
    alpha_range: Option<String>,
    #[arg(long, value_name = "LO,HI")]
    beta_range: Option<String>,
    #[arg(long, value_name = "LO,HI")]
    gamma_range: Option<String>,
    /// Assumed-structure dump file
    #[arg(long)]
    assumed: Option<String>,
    #[arg(long)]
    transform: Option<String>,
    #[arg(long)]
    transform_seed: Option<String>,
    /// Skip the enumeration oracle in misspec
    #[arg(long)]
    closed_only: bool,
}

impl Common {
    fn resolve(self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        let flags = [
            ("seed", self.seed),
            ("out", self.out),
            ("p", self.p),
            ("reps", self.reps),
            ("bound", self.bound),
            ("ring", self.ring),
            ("grid", self.grid),
            ("metric", self.metric),
            ("edges", self.edges),
            ("units", self.units),
            ("structure", self.structure),
            ("radius", self.radius),
            ("model", self.model),
            ("model_seed", self.model_seed),
            ("alpha_range", self.alpha_range),
            ("beta_range", self.beta_range),
            ("gamma_range", self.gamma_range),
            ("assumed", self.assumed),
            ("transform", self.transform),
            ("transform_seed", self.transform_seed),
        ];
        for (key, value) in flags {
            if let Some(value) = value {
                cfg.set(key, value);
            }
        }
        if self.closed_only {
            cfg.set("closed_only", "true");
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(c) => commands::generate(&c.resolve()?),
        Command::Truth(c) => commands::truth(&c.resolve()?),
        Command::Simulate(c) => commands::simulate_cmd(&c.resolve()?),
        Command::Estimate(c) => commands::estimate(&c.resolve()?),
        Command::Misspec { common, demo } => commands::misspec(&common.resolve()?, demo.as_deref()),
        Command::Demo { kind, common } => commands::demo(&common.resolve()?, &kind),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spillover: {e}");
            e.exit_code()
        }
    }
}
