//! The five pipeline commands. Each reads and writes under an output
//! directory and records what it wrote in a manifest:
//!
//! ```text
//! <out>/frames/{bright,dark,arm}.{pgm,json}      simulate
//! <out>/reconstruction/w_{x,y}.{bin,json}        reconstruct
//! <out>/reconstruction/{intensity,mu}_{x,y}.csv
//! <out>/schmidt/spectrum{,_x,_y}.csv             schmidt
//! <out>/schmidt/modes/phi_<m>_<n>.{pfm,pgm}
//! <out>/schmidt/report.json
//! <oracle>/oracle_{spectrum.csv,modes.*,summary.json}   oracle
//! <out>/report.json                              report
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coherence::{factorize, HomogeneityReport};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{self, Manifest};
use crate::pipeline::{self, compare_with_oracle, ModeComparison, Oracle};
use crate::reconstruct::{reconstruct, FieldAxis, FrameSet, Reconstruction};
use crate::schmidt::{analyze, fidelity, tensor_combine, SchmidtResult};

/// Schmidt number reported for the laboratory data this toolkit models.
pub const PUBLISHED_SCHMIDT_NUMBER: f64 = 3413.0;

/// Number of 2D modes written as images.
const MODE_IMAGES: usize = 16;

/// Modes per axis compared against the oracle.
const COMPARED_MODES: usize = 20;

const FRAME_NAMES: [&str; 3] = ["bright", "dark", "arm"];

pub fn frames_dir(out: &Path) -> PathBuf {
    out.join("frames")
}

pub fn reconstruction_dir(out: &Path) -> PathBuf {
    out.join("reconstruction")
}

pub fn schmidt_dir(out: &Path) -> PathBuf {
    out.join("schmidt")
}

pub fn default_oracle_dir(out: &Path) -> PathBuf {
    out.join("oracle")
}

fn start(cfg: &RunConfig, command: &str, root: &Path) -> Result<Manifest> {
    cfg.validate()?;
    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let mut manifest = Manifest::new(command, cfg.hash());
    let config_path = root.join(format!("config_{command}.json"));
    io::write_atomic(&config_path, format!("{}\n", cfg.to_json()).as_bytes())?;
    manifest.record(root, &config_path)?;
    Ok(manifest)
}

fn record_all(manifest: &mut Manifest, root: &Path, paths: &[PathBuf]) -> Result<()> {
    paths.iter().try_for_each(|p| manifest.record(root, p))
}

fn frame_files(stem: &Path) -> [PathBuf; 2] {
    [stem.with_extension("pgm"), stem.with_extension("json")]
}

/// Simulate and write the `φ = π/4`, `φ = 0` and beam-splitter-removed frames.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<FrameSet> {
    let out = &cfg.output_dir;
    let mut manifest = start(cfg, "simulate", out)?;
    let w = pipeline::forward_w(cfg)?;
    let frames = pipeline::simulate_frames(&w, &w, &cfg.resolved_interferometer())?;
    let dir = frames_dir(out);
    for (name, frame) in FRAME_NAMES.iter().zip([&frames.bright, &frames.dark, &frames.arm]) {
        let stem = dir.join(name);
        io::write_frame(&stem, frame)?;
        record_all(&mut manifest, out, &frame_files(&stem))?;
    }
    manifest.write(out)?;
    log::info!("wrote frames to {}", dir.display());
    Ok(frames)
}

pub fn read_frames(dir: &Path) -> Result<FrameSet> {
    let load = |name: &str| {
        let stem = dir.join(name);
        if !stem.with_extension("pgm").exists() {
            return Err(Error::DataContract(format!("missing {name} frame in {}", dir.display())));
        }
        io::read_frame(&stem)
    };
    Ok(FrameSet {
        bright: load("bright")?,
        dark: load("dark")?,
        arm: load("arm")?,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct IntensityRow {
    x: f64,
    intensity: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct MuRow {
    delta: f64,
    mu: f64,
    noise: f64,
    valid: u8,
}

fn write_reconstruction(rec: &Reconstruction, dir: &Path, root: &Path, manifest: &mut Manifest) -> Result<()> {
    for axis in [FieldAxis::X, FieldAxis::Y] {
        let a = rec.axis(axis);
        let stem = dir.join(format!("w_{axis}"));
        io::write_matrix(&stem, &a.w, axis)?;
        let grid = a.w.grid;
        let intensity = dir.join(format!("intensity_{axis}.csv"));
        io::write_csv(
            &intensity,
            &["x", "intensity"],
            (0..grid.n()).map(|j| IntensityRow {
                x: grid.x(j),
                intensity: a.intensity[j],
            }),
        )?;
        let p = &a.profile;
        let mu = dir.join(format!("mu_{axis}.csv"));
        io::write_csv(
            &mu,
            &["delta", "mu", "noise", "valid"],
            (0..p.delta.len()).map(|k| MuRow {
                delta: p.delta[k],
                mu: p.values[k],
                noise: p.noise[k],
                valid: p.valid_mask[k] as u8,
            }),
        )?;
        record_all(
            manifest,
            root,
            &[stem.with_extension("bin"), stem.with_extension("json"), intensity, mu],
        )?;
    }
    Ok(())
}

/// Reconstruct per-axis `W` from the frames under `<out>/frames`.
pub fn cmd_reconstruct(cfg: &RunConfig) -> Result<Reconstruction> {
    let out = &cfg.output_dir;
    let mut manifest = start(cfg, "reconstruct", out)?;
    let frames = read_frames(&frames_dir(out))?;
    let rec = reconstruct(&frames, &cfg.reconstruction)?;
    write_reconstruction(&rec, &reconstruction_dir(out), out, &mut manifest)?;
    manifest.write(out)?;
    Ok(rec)
}

/// Oracle agreement recorded in the Schmidt report.
#[derive(Debug, Clone, Serialize)]
pub struct OracleComparison {
    /// Oracle Schmidt number (2D) over all modes.
    pub schmidt_number_full: f64,
    /// Oracle Schmidt number (2D) over the same `k_max` modes per axis as the
    /// reconstruction.
    pub schmidt_number_matched: f64,
    /// `K_pipeline / K_oracle,matched - 1`.
    pub schmidt_number_relative_error: f64,
    /// Coefficient of determination of the ranked 2D spectrum.
    pub spectrum_fidelity: f64,
    pub modes_x: Vec<ModeComparison>,
    pub modes_y: Vec<ModeComparison>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SchmidtReport {
    pub schmidt_number: f64,
    pub schmidt_number_x: f64,
    pub schmidt_number_y: f64,
    pub k_max: usize,
    pub negativity_budget_x: f64,
    pub negativity_budget_y: f64,
    pub truncated_weight_x: f64,
    pub truncated_weight_y: f64,
    /// Where the oracle was read from; `None` when absent or computed in place.
    pub oracle_dir: Option<PathBuf>,
    pub oracle: Option<OracleComparison>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct RankedRow {
    rank: usize,
    m: usize,
    n: usize,
    lambda: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct LambdaRow {
    index: usize,
    lambda: f64,
}

/// Compare a decomposition with the oracle of the same source.
pub fn oracle_comparison(res: &SchmidtResult, oracle: &Oracle) -> Result<OracleComparison> {
    let kx = res.x.len();
    let ky = res.y.len();
    let ox = oracle.truncated_lambdas(kx);
    let oy = oracle.truncated_lambdas(ky);
    let matched = oracle.truncated_schmidt_number(kx) * oracle.truncated_schmidt_number(ky);
    let reference = tensor_combine(&ox, &oy, res.ranked.len());
    let ours: Vec<f64> = res.ranked.iter().map(|r| r.lambda).collect();
    let theirs: Vec<f64> = reference.iter().map(|r| r.lambda).collect();
    Ok(OracleComparison {
        schmidt_number_full: oracle.schmidt_number().powi(2),
        schmidt_number_matched: matched,
        schmidt_number_relative_error: res.schmidt_number / matched - 1.0,
        spectrum_fidelity: fidelity(&ours, &theirs)?,
        modes_x: compare_with_oracle(&res.x, oracle, COMPARED_MODES)?,
        modes_y: compare_with_oracle(&res.y, oracle, COMPARED_MODES)?,
    })
}

fn write_schmidt(res: &SchmidtResult, report: &SchmidtReport, dir: &Path, root: &Path, manifest: &mut Manifest) -> Result<()> {
    let spectrum = dir.join("spectrum.csv");
    io::write_csv(
        &spectrum,
        &["rank", "m", "n", "lambda"],
        res.ranked.iter().enumerate().map(|(rank, r)| RankedRow {
            rank,
            m: r.m,
            n: r.n,
            lambda: r.lambda,
        }),
    )?;
    let mut written = vec![spectrum];
    for (axis, s) in [("x", &res.x), ("y", &res.y)] {
        let p = dir.join(format!("spectrum_{axis}.csv"));
        io::write_csv(
            &p,
            &["index", "lambda"],
            s.lambdas.iter().enumerate().map(|(index, &lambda)| LambdaRow { index, lambda }),
        )?;
        written.push(p);
    }
    for r in res.ranked.iter().take(MODE_IMAGES) {
        let image = res.mode_2d(r.m, r.n);
        let pfm = dir.join("modes").join(format!("phi_{}_{}.pfm", r.m, r.n));
        let pgm = pfm.with_extension("pgm");
        io::write_pfm(&pfm, &image)?;
        io::write_signed_preview(&pgm, &image)?;
        written.extend([pfm, pgm]);
    }
    let json = dir.join("report.json");
    io::write_json(&json, report)?;
    written.push(json);
    record_all(manifest, root, &written)
}

fn schmidt_report(cfg: &RunConfig, res: &SchmidtResult, oracle: Option<&Oracle>, oracle_dir: Option<&Path>) -> Result<SchmidtReport> {
    Ok(SchmidtReport {
        schmidt_number: res.schmidt_number,
        schmidt_number_x: res.x.schmidt_number(),
        schmidt_number_y: res.y.schmidt_number(),
        k_max: cfg.schmidt.k_max,
        negativity_budget_x: res.x.negativity_budget,
        negativity_budget_y: res.y.negativity_budget,
        truncated_weight_x: res.x.truncated_weight,
        truncated_weight_y: res.y.truncated_weight,
        oracle_dir: oracle_dir.map(Path::to_path_buf),
        oracle: oracle.map(|o| oracle_comparison(res, o)).transpose()?,
    })
}

/// Diagonalize the matrices under `<out>/reconstruction`, optionally scoring
/// them against the oracle stored in `oracle_dir`.
pub fn cmd_schmidt(cfg: &RunConfig, oracle_dir: Option<&Path>) -> Result<SchmidtReport> {
    let out = &cfg.output_dir;
    let mut manifest = start(cfg, "schmidt", out)?;
    let rdir = reconstruction_dir(out);
    for axis in ["x", "y"] {
        if !rdir.join(format!("w_{axis}.json")).exists() {
            return Err(Error::DataContract(format!(
                "missing w_{axis} in {}; run the reconstruct command first",
                rdir.display()
            )));
        }
    }
    let (wx, ax) = io::read_matrix(&rdir.join("w_x"))?;
    let (wy, ay) = io::read_matrix(&rdir.join("w_y"))?;
    if ax != FieldAxis::X || ay != FieldAxis::Y {
        return Err(Error::DataContract("matrix axis labels do not match their file names".into()));
    }
    let oracle = oracle_dir.map(read_oracle).transpose()?;
    let res = analyze(&wx, &wy, &cfg.schmidt)?;
    let report = schmidt_report(cfg, &res, oracle.as_ref(), oracle_dir)?;
    write_schmidt(&res, &report, &schmidt_dir(out), out, &mut manifest)?;
    manifest.write(out)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleSummary {
    pub n: usize,
    pub dx: f64,
    pub schmidt_number_1d: f64,
    pub schmidt_number: f64,
    pub lambda_sum: f64,
}

/// Brute-force Schmidt decomposition of the configured amplitude, written to
/// `dir` (default `<out>/oracle`).
pub fn cmd_oracle(cfg: &RunConfig, dir: Option<&Path>) -> Result<Oracle> {
    cfg.check_oracle_size()?;
    let default = default_oracle_dir(&cfg.output_dir);
    let dir = dir.unwrap_or(&default);
    let mut manifest = start(cfg, "oracle", dir)?;
    let psi = pipeline::two_photon_amplitude(cfg)?;
    let oracle = pipeline::oracle(&psi, cfg.schmidt.k_max)?;
    let spectrum = dir.join("oracle_spectrum.csv");
    io::write_csv(
        &spectrum,
        &["index", "lambda"],
        oracle.lambdas.iter().enumerate().map(|(index, &lambda)| LambdaRow { index, lambda }),
    )?;
    let stem = dir.join("oracle_modes");
    io::write_modes(&stem, &oracle.grid, &oracle.modes)?;
    let k1 = oracle.schmidt_number();
    let summary = dir.join("summary.json");
    io::write_json(
        &summary,
        &OracleSummary {
            n: oracle.grid.n(),
            dx: oracle.grid.dx(),
            schmidt_number_1d: k1,
            schmidt_number: k1 * k1,
            lambda_sum: oracle.lambdas.sum(),
        },
    )?;
    record_all(
        &mut manifest,
        dir,
        &[spectrum, stem.with_extension("bin"), stem.with_extension("json"), summary],
    )?;
    manifest.write(dir)?;
    Ok(oracle)
}

pub fn read_oracle(dir: &Path) -> Result<Oracle> {
    let spectrum = dir.join("oracle_spectrum.csv");
    if !spectrum.exists() {
        return Err(Error::DataContract(format!(
            "no oracle found in {}; run the oracle command first",
            dir.display()
        )));
    }
    let rows: Vec<LambdaRow> = io::read_csv(&spectrum)?;
    let (grid, modes) = io::read_modes(&dir.join("oracle_modes"))?;
    Ok(Oracle {
        grid,
        lambdas: rows.iter().map(|r| r.lambda).collect(),
        modes,
    })
}

/// Everything needed to judge a run at a glance.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config_sha256: String,
    pub schmidt: SchmidtReport,
    /// Quasi-homogeneity of the forward-model `W`.
    pub homogeneity: HomogeneityReport,
    pub homogeneity_passes: bool,
    /// The laboratory value, for context only; the model is not expected to
    /// reproduce it.
    pub published_schmidt_number: f64,
}

/// Full chain in one go: simulate, reconstruct, diagonalize, compare with the
/// oracle (loaded from `oracle_dir` or computed), and check quasi-homogeneity.
pub fn cmd_report(cfg: &RunConfig, oracle_dir: Option<&Path>) -> Result<RunReport> {
    let out = &cfg.output_dir;
    let mut manifest = start(cfg, "report", out)?;
    let psi = pipeline::two_photon_amplitude(cfg)?;
    let w = crate::coherence::partial_trace(&psi)?;
    let oracle = match oracle_dir {
        Some(d) => read_oracle(d)?,
        None => {
            cfg.check_oracle_size()?;
            pipeline::oracle(&psi, cfg.schmidt.k_max)?
        }
    };
    drop(psi);
    let fact = factorize(&w, cfg.reconstruction.support_eps)?;
    let frames = pipeline::simulate_frames(&w, &w, &cfg.resolved_interferometer())?;
    let fdir = frames_dir(out);
    for (name, frame) in FRAME_NAMES.iter().zip([&frames.bright, &frames.dark, &frames.arm]) {
        let stem = fdir.join(name);
        io::write_frame(&stem, frame)?;
        record_all(&mut manifest, out, &frame_files(&stem))?;
    }
    let rec = reconstruct(&frames, &cfg.reconstruction)?;
    write_reconstruction(&rec, &reconstruction_dir(out), out, &mut manifest)?;
    let res = analyze(&rec.x.w, &rec.y.w, &cfg.schmidt)?;
    let schmidt = schmidt_report(cfg, &res, Some(&oracle), oracle_dir)?;
    write_schmidt(&res, &schmidt, &schmidt_dir(out), out, &mut manifest)?;
    let homogeneity = fact.homogeneity_report;
    let report = RunReport {
        config_sha256: cfg.hash(),
        schmidt,
        homogeneity,
        homogeneity_passes: homogeneity.passes(&cfg.homogeneity),
        published_schmidt_number: PUBLISHED_SCHMIDT_NUMBER,
    };
    let path = out.join("report.json");
    io::write_json(&path, &report)?;
    manifest.record(out, &path)?;
    manifest.write(out)?;
    Ok(report)
}
