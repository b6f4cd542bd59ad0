//! Drives the same commands as the CLI from a JSON configuration and prints
//! the report and the artifact manifest.
//!
//!     cargo run --release --example command_chain [config.json] [out_dir]

use std::path::PathBuf;

use spatial_schmidt::commands::{cmd_oracle, cmd_reconstruct, cmd_schmidt, cmd_simulate, default_oracle_dir};
use spatial_schmidt::config::RunConfig;

const SMALL: &str = r#"{
    "source": {"kind": "double_gaussian", "a_plus": 9.2e-5, "a_minus": 2.3e-5},
    "grid": {"n": 512, "dx": 4.6e-6},
    "reconstruction": {"support_eps": 1e-20, "noise_gate": null},
    "schmidt": {"k_max": 40, "top_k": 40}
}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let mut cfg = match args.next() {
        Some(path) => RunConfig::load(path.as_ref())?,
        None => RunConfig::from_json(SMALL)?,
    };
    cfg.output_dir = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("chain"));
    println!("config sha256 {}", cfg.hash());

    cmd_simulate(&cfg)?;
    cmd_reconstruct(&cfg)?;
    let oracle_dir = default_oracle_dir(&cfg.output_dir);
    cmd_oracle(&cfg, Some(&oracle_dir))?;
    let report = cmd_schmidt(&cfg, Some(&oracle_dir))?;
    println!("{}", serde_json::to_string_pretty(&report)?);

    let manifest = std::fs::read_to_string(cfg.output_dir.join("manifest_schmidt.json"))?;
    println!("{manifest}");
    Ok(())
}
