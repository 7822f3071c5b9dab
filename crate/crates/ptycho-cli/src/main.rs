//! `ptycho`: simulate blind-ptychography instances, reconstruct probe and
//! object with one of five solvers, benchmark the solvers against each
//! other, and recompute metrics from saved results.

mod commands;
mod config;
mod instance;
mod pgm;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use config::Config;
use ptycho_core::SolverError;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ptycho", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic instance: truth images, measurements, sidecar.
    Simulate(CommonArgs),
    /// Run one solver on an instance and write the reconstruction, trace,
    /// and certificate summary.
    Reconstruct(CommonArgs),
    /// Run repeated trials of several solvers and aggregate the metrics.
    Benchmark(CommonArgs),
    /// Recompute metrics from a saved reconstruction directory.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config solver variant.
    #[arg(long)]
    variant: Option<String>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Directory holding instance.json, probe.cimg and object.cimg.
    #[arg(long)]
    out: PathBuf,
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."))
        .to_path_buf()
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => {
            let cfg = Config::load(&a.config)?;
            commands::simulate(&cfg, &a.out, a.seed.unwrap_or(cfg.seed))
        }
        Command::Reconstruct(a) => {
            let cfg = Config::load(&a.config)?;
            commands::reconstruct(&cfg, &config_dir(&a.config), &a.out, a.seed, a.variant.as_deref())
        }
        Command::Benchmark(a) => {
            let cfg = Config::load(&a.config)?;
            commands::benchmark(&cfg, &config_dir(&a.config), &a.out, a.seed, a.variant.as_deref())
        }
        Command::Metrics(a) => commands::metrics(&a.out),
    }
}

fn main() -> ExitCode {
    // PTYCHO_THREADS caps the data-parallel worker pool.
    if let Ok(v) = std::env::var("PTYCHO_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        } else {
            eprintln!("warning: ignoring unparsable PTYCHO_THREADS={v:?}");
        }
    }

    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let non_finite = err
                .downcast_ref::<SolverError>()
                .map(|e| matches!(e, SolverError::NonFinite { .. }))
                .unwrap_or(false);
            if non_finite {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
