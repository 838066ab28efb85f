//! `uss`: batch front-end for the optimizer, simulator and attack harness.
//!
//! Exit status 0 when every check passes, 1 on a bound or invariant
//! failure, 2 on a configuration error.

mod attack;
mod optimize;
mod selftest;
mod simulate;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use uss_core::netsim::Scenario;

use attack::Strategy;
use table::Format;

pub const DEFAULT_SEED: u64 = 20_240_601;

const HONEST_SCENARIO: &str = include_str!("../../../scenarios/honest.toml");

#[derive(Debug, Parser)]
#[command(
    name = "uss",
    version,
    about = "Multiparty unconditionally secure signatures over QKD links"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Seed for every random choice; scenario files carry their own otherwise.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for CSV, trace and report files (created if missing).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Set a configuration value, e.g. `scheme.k=40` or `a=64`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Monte Carlo trials per strategy.
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    #[arg(long, value_enum, default_value = "table", global = true)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal k, b and s0 per configuration, the cost against b, and the
    /// cost against N in both transferability regimes.
    Optimize {
        /// TOML file with a `rows` array; the reference configurations if absent.
        input: Option<PathBuf>,
    },
    /// Key consumption and signing rate for a scenario's scheme and links.
    Consume {
        /// Scenario TOML; the honest example if absent.
        scenario: Option<PathBuf>,
    },
    /// Run a scenario through the network simulator.
    Simulate {
        /// Scenario TOML; the honest example if absent.
        scenario: Option<PathBuf>,
    },
    /// Run attack strategies and compare success rates with the bounds.
    Attack {
        /// Strategies to run; forgery, nontransfer, repudiation and counter
        /// if none given.
        #[arg(value_enum)]
        strategies: Vec<Strategy>,
        /// Scenario TOML whose scheme every strategy uses.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Exhaustive checks of the hash family, small fields and broadcast.
    Selftest,
}

fn load_scenario(path: Option<&PathBuf>, common: &Common) -> Result<Scenario> {
    let mut overrides = common.overrides.clone();
    if let Some(seed) = common.seed {
        overrides.push(format!("seed={seed}"));
    }
    Ok(match path {
        Some(p) => Scenario::load(p, &overrides)?,
        None => Scenario::from_toml_with_overrides(HONEST_SCENARIO, &overrides)?,
    })
}

fn run(cli: &Cli) -> Result<bool> {
    let common = &cli.common;
    if let Some(dir) = &common.out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    match &cli.command {
        Command::Optimize { input } => optimize::cmd_optimize(input.as_deref(), common),
        Command::Consume { scenario } => {
            optimize::cmd_consume(&load_scenario(scenario.as_ref(), common)?, common)
        }
        Command::Simulate { scenario } => {
            simulate::cmd_simulate(&load_scenario(scenario.as_ref(), common)?, common)
        }
        Command::Attack { strategies, config } => {
            attack::cmd_attack(strategies, config.as_deref(), common)
        }
        Command::Selftest => selftest::cmd_selftest(common),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
