//! Run configuration: one strict JSON document holding every knob.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coherence::HomogeneityThresholds;
use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::interferometer::{InterferometerConfig, NoiseModel};
use crate::reconstruct::ReconstructionConfig;
use crate::schmidt::SchmidtConfig;
use crate::spdc::{DoubleGaussian, SpdcParams};

/// Largest grid the dense oracle decomposition accepts.
pub const MAX_ORACLE_N: usize = 2048;

/// Which two-photon amplitude drives the simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Source {
    /// Pump envelope times phase-matching sinc, from the `spdc` section.
    Spdc,
    /// Gaussian in the sum and difference coordinates, widths in meters.
    DoubleGaussian { a_plus: f64, a_minus: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub source: Source,
    pub spdc: SpdcParams,
    /// Field-plane grid for the forward model and the oracle.
    pub grid: Grid1D,
    pub interferometer: InterferometerConfig,
    pub reconstruction: ReconstructionConfig,
    pub schmidt: SchmidtConfig,
    pub homogeneity: HomogeneityThresholds,
    /// Seeds the shot noise; replaces any seed given under
    /// `interferometer.noise`.
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            source: Source::Spdc,
            spdc: SpdcParams::default(),
            grid: Grid1D::new(2048, 2.3e-6).expect("default grid"),
            interferometer: InterferometerConfig::default(),
            reconstruction: ReconstructionConfig::default(),
            schmidt: SchmidtConfig::default(),
            homogeneity: HomogeneityThresholds::default(),
            seed: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        match self.source {
            Source::Spdc => self.spdc.validate()?,
            Source::DoubleGaussian { a_plus, a_minus } => DoubleGaussian::new(a_plus, a_minus).map(|_| ())?,
        }
        self.interferometer.validate()?;
        self.reconstruction.validate()?;
        self.schmidt.validate()?;
        let t = self.homogeneity;
        if !(t.max_sum_coordinate_variation >= 0.0 && t.min_width_ratio >= 0.0) {
            return Err(Error::config("homogeneity", "thresholds must be non-negative"));
        }
        if self.schmidt.k_max > self.grid.n() {
            return Err(Error::config(
                "schmidt.k_max",
                format!("exceeds grid.n = {}", self.grid.n()),
            ));
        }
        Ok(())
    }

    /// Interferometer settings with the run seed applied to the noise model.
    pub fn resolved_interferometer(&self) -> InterferometerConfig {
        let mut c = self.interferometer;
        if let NoiseModel::Poisson { .. } = c.noise {
            c.noise = NoiseModel::Poisson { seed: self.seed };
        }
        c
    }

    /// The oracle is a dense decomposition; refuse grids that would not fit.
    pub fn check_oracle_size(&self) -> Result<()> {
        if self.grid.n() > MAX_ORACLE_N {
            return Err(Error::config(
                "grid.n",
                format!("oracle decomposition is limited to n <= {MAX_ORACLE_N}, got {}", self.grid.n()),
            ));
        }
        Ok(())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
