//! Command-line front end for `blockmom`.
//!
//! Four subcommands share one set of flags:
//!
//! * `estimate` reads one number per line and prints the block estimate.
//! * `simulate` runs a deviation study and writes tail curves.
//! * `diagnose` estimates `g(m)` and the Hajek-projection variance.
//! * `sweep` runs `simulate` over a grid of families and block parameters.
//!
//! Settings come from a flat `key = value` file (`--config`) and are overridden
//! by flags. Exit codes: 0 success, 2 configuration, 3 data, 4 capacity.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

use commands::{DesignChoice, EstimateArgs, Overrides};
use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(
    name = "blockmom",
    version,
    about = "Overlapping-block median-of-means estimation and simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the mean of a data file (one number per line).
    Estimate(EstimateCmd),
    /// Run a Monte Carlo deviation study.
    Simulate(StudyCmd),
    /// Estimate g(m) and the Hajek-projection variance.
    Diagnose(DiagnoseCmd),
    /// Run simulate over a grid of families, k, l and T.
    Sweep(StudyCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Configuration file (`key = value` lines, or a JSON summary).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads, or `auto`.
    #[arg(long)]
    pub threads: Option<String>,
    /// What to print on stdout.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct EstimateCmd {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 1)]
    pub l: usize,
    /// Subset budget, or `exact` for the full design.
    #[arg(long = "T", default_value = "exact")]
    pub t: String,
    /// Shuffle the observations (seeded) before blocking.
    #[arg(long)]
    pub shuffle: bool,
}

#[derive(Debug, Args)]
pub struct StudyCmd {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub l: Option<String>,
    /// Subset budget (`auto` or an integer).
    #[arg(long = "T")]
    pub t: Option<String>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Comma-separated deviation levels.
    #[arg(long)]
    pub grid: Option<String>,
}

#[derive(Debug, Args)]
pub struct DiagnoseCmd {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub l: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub b: Option<usize>,
    #[arg(long)]
    pub t: Option<String>,
}

fn base_map(common: &Common, command: &str) -> Result<config::KeyMap> {
    match &common.config {
        Some(path) => config::load(path, command),
        None => Ok(config::KeyMap::new()),
    }
}

fn study_map(cmd: &StudyCmd, command: &str) -> Result<config::KeyMap> {
    let mut map = base_map(&cmd.common, command)?;
    Overrides {
        seed: cmd.common.seed,
        threads: cmd.common.threads.clone(),
        k: cmd.k.clone(),
        l: cmd.l.clone(),
        t: cmd.t.clone(),
        replicates: cmd.replicates,
        grid: cmd.grid.clone(),
    }
    .apply(&mut map);
    Ok(map)
}

/// Runs a parsed command line and returns the text for stdout.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Estimate(cmd) => {
            if cmd.common.config.is_some() {
                return Err(CliError::Config(
                    "estimate takes its settings from flags only".into(),
                ));
            }
            let args = EstimateArgs {
                input: cmd.input,
                k: cmd.k,
                l: cmd.l,
                design: cmd.t.parse::<DesignChoice>()?,
                seed: cmd.common.seed.unwrap_or(0),
                shuffle: cmd.shuffle,
                out_dir: cmd.common.out,
            };
            let out = commands::cmd_estimate(&args)?;
            Ok(match cmd.common.format {
                Format::Csv => format!("{}\n", io::num(out.report.value)),
                Format::Json => out.json,
            })
        }
        Command::Simulate(cmd) => {
            let map = study_map(&cmd, "simulate")?;
            let out = commands::cmd_simulate(&map, &cmd.common.out)?;
            Ok(match cmd.common.format {
                Format::Csv => out.csv,
                Format::Json => out.json,
            })
        }
        Command::Sweep(cmd) => {
            let map = study_map(&cmd, "sweep")?;
            let out = commands::cmd_sweep(&map, &cmd.common.out)?;
            Ok(match cmd.common.format {
                Format::Csv => out.merged_csv,
                Format::Json => format!(
                    "{}\n",
                    serde_json::json!({
                        "cells": out.cell_paths.len(),
                        "computed": out.computed,
                        "reused": out.reused,
                        "merged": out.merged_path.display().to_string(),
                    })
                ),
            })
        }
        Command::Diagnose(cmd) => {
            let mut map = base_map(&cmd.common, "diagnose")?;
            let mut set = |key: &str, value: Option<String>| {
                if let Some(v) = value {
                    map.insert(key.to_string(), v);
                }
            };
            set("seed", cmd.common.seed.map(|s| s.to_string()));
            set("threads", cmd.common.threads.clone());
            set("l", cmd.l.map(|v| v.to_string()));
            set("k", cmd.k.map(|v| v.to_string()));
            set("b", cmd.b.map(|v| v.to_string()));
            set("t", cmd.t.clone());
            let out = commands::cmd_diagnose(&map, &cmd.common.out)?;
            Ok(match cmd.common.format {
                Format::Csv => out.csv,
                Format::Json => out.json,
            })
        }
    }
}
