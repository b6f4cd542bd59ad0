use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use spatial_schmidt::commands;
use spatial_schmidt::config::RunConfig;
use spatial_schmidt::error::Result;

/// Simulate magnifying-interferometer frames of an SPDC signal photon and
/// recover its spatial Schmidt modes.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Run configuration (JSON). Defaults to the built-in parameters.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Shot-noise seed, replacing the configured one.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, replacing the configured one.
    #[arg(long, global = true, env = "SPATIAL_SCHMIDT_OUT")]
    out: Option<PathBuf>,
    /// Oracle directory: written by `oracle`, read by `schmidt` and `report`.
    #[arg(long, global = true)]
    oracle: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the φ = π/4, φ = 0 and beam-splitter-removed frames.
    Simulate,
    /// Recover per-axis cross-spectral densities from the frames.
    Reconstruct,
    /// Diagonalize the recovered matrices and rank the 2D spectrum.
    Schmidt,
    /// Brute-force Schmidt decomposition of the model amplitude.
    Oracle,
    /// Run the whole chain and write a summary report.
    Report,
}

fn print<T: Serialize>(value: &T) {
    let text = serde_json::to_string_pretty(value).expect("summary serializes");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    let oracle = cli.oracle.as_deref();
    match cli.command {
        Command::Simulate => {
            let frames = commands::cmd_simulate(&cfg)?;
            print(&serde_json::json!({
                "frames": commands::frames_dir(&cfg.output_dir),
                "bright_max": frames.bright.max(),
                "arm_max": frames.arm.max(),
            }));
        }
        Command::Reconstruct => {
            let rec = commands::cmd_reconstruct(&cfg)?;
            print(&serde_json::json!({
                "reconstruction": commands::reconstruction_dir(&cfg.output_dir),
                "grid_n": rec.x.w.n(),
                "grid_dx": rec.x.w.grid.dx(),
                "mu_range_x": rec.x.profile.symmetric_range(),
                "mu_range_y": rec.y.profile.symmetric_range(),
            }));
        }
        Command::Schmidt => print(&commands::cmd_schmidt(&cfg, oracle)?),
        Command::Oracle => {
            let o = commands::cmd_oracle(&cfg, oracle)?;
            let k = o.schmidt_number();
            print(&serde_json::json!({ "schmidt_number_1d": k, "schmidt_number": k * k }));
        }
        Command::Report => print(&commands::cmd_report(&cfg, oracle)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
