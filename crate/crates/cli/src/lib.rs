//! Command-line front end for the RIS localization experiments.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use ris_locate_core::harness::{
    run_baseline_comparison, run_elements_sweep, run_noiseless, run_snr_sweep,
};

use crate::config::{parse_config, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "ris-locate",
    version,
    about = "RIS-assisted MISO localization experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration file; omitted keys use reference defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed for the noise streams.
    #[arg(long, global = true, value_name = "INT")]
    pub seed: Option<u64>,
    /// Monte Carlo trials per grid point.
    #[arg(long, global = true, value_name = "INT", value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Noiseless localization along the configured trajectory.
    Noiseless,
    /// Position error versus SNR.
    SnrSweep,
    /// Position error versus elements per RIS.
    ElementsSweep,
    /// Array BS against a single-antenna BS, paired noise.
    CompareBaseline,
}

/// Loads the config file (if any) and applies flag overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            parse_config(&text).with_context(|| format!("invalid config {}", path.display()))?
        }
        None => parse_config("")?,
    };
    if let Some(seed) = cli.seed {
        cfg.experiment.master_seed = seed;
    }
    if let Some(trials) = cli.trials {
        cfg.experiment.trials = trials as usize;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

/// Runs `command` and returns the rendered files, without touching disk.
pub fn render(command: Command, cfg: &RunConfig) -> Result<Vec<(&'static str, Vec<u8>)>> {
    let exp = &cfg.experiment;
    Ok(match command {
        Command::Noiseless => {
            let points = run_noiseless(&exp.scene, &cfg.trajectory, exp.sweep_points_per_element)?;
            vec![("trajectory.csv", output::trajectory_csv(&points))]
        }
        Command::SnrSweep => {
            let out = run_snr_sweep(exp)?;
            vec![
                ("summary.csv", output::summary_csv("snr_db", &out.summary)),
                ("trials.csv", output::trials_csv(&out.trials)),
            ]
        }
        Command::ElementsSweep => {
            let out = run_elements_sweep(exp)?;
            vec![
                ("summary.csv", output::summary_csv("n_ris", &out.summary)),
                ("trials.csv", output::trials_csv(&out.trials)),
            ]
        }
        Command::CompareBaseline => {
            let out = run_baseline_comparison(exp)?;
            vec![
                ("comparison.csv", output::comparison_csv(&out)),
                ("comparison_trials.csv", output::comparison_trials_csv(&out)),
            ]
        }
    })
}

pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    let cfg = resolve_config(cli)?;
    let files = render(cli.command, &cfg)?;
    let dir: &Path = &cfg.output_dir;
    output::write_all(dir, &files).with_context(|| format!("writing to {}", dir.display()))
}

/// Entry point shared by the binary and tests. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
