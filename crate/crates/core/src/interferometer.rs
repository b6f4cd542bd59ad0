//! Forward model of the magnifying common-path interferometer and camera.
//!
//! One alternative images the field magnified by `m`, the other demagnified by
//! `m`. With the beam splitter in place the expected detection probability at
//! camera position `ρ` is
//!
//! ```text
//! I_out(ρ) = I(mρ) + I(ρ/m) - 2 W(mρ, ρ/m) cos(4φ)
//! ```
//!
//! so `φ = 0` is the dark fringe where `W ≥ 0`. With the beam splitter removed
//! only the demagnified alternative `I(ρ/m)` reaches the camera. The 2D field
//! is the tensor product of one [`AxisField`] per Cartesian axis.
//!
//! Expected counts are scaled so that a fully coherent peak reads
//! `counts_scale`: beam-splitter frames are divided by `4 · I_x,max · I_y,max`,
//! arm frames by `I_x,max · I_y,max`.

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coherence::{CoherenceFactorization, CorrelationMatrix};
use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::interp::{Uniform1, Uniform2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    None,
    Poisson {
        #[serde(default)]
        seed: u64,
    },
}

impl NoiseModel {
    pub fn seed(&self) -> Option<u64> {
        match self {
            NoiseModel::None => None,
            NoiseModel::Poisson { seed } => Some(*seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterferometerConfig {
    pub magnification: f64,
    /// Half-wave plate angle φ in radians.
    pub hwp_angle: f64,
    pub bs_present: bool,
    /// Camera pixel pitch in meters.
    pub pixel_pitch: f64,
    pub width: usize,
    pub height: usize,
    /// Expected counts at a fully coherent peak.
    pub counts_scale: f64,
    pub noise: NoiseModel,
    /// Standard deviation of additive Gaussian read noise, in counts.
    pub read_noise: f64,
}

impl Default for InterferometerConfig {
    fn default() -> Self {
        InterferometerConfig {
            magnification: 2.0,
            hwp_angle: 0.0,
            bs_present: true,
            pixel_pitch: 4.6e-6,
            width: 1024,
            height: 1024,
            counts_scale: 60_000.0,
            noise: NoiseModel::None,
            read_noise: 0.0,
        }
    }
}

impl InterferometerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.magnification.is_finite() && self.magnification > 1.0) {
            return Err(Error::config(
                "interferometer.magnification",
                format!("must exceed 1, got {}", self.magnification),
            ));
        }
        if !self.hwp_angle.is_finite() {
            return Err(Error::config("interferometer.hwp_angle", "must be finite"));
        }
        if !(self.pixel_pitch.is_finite() && self.pixel_pitch > 0.0) {
            return Err(Error::config(
                "interferometer.pixel_pitch",
                format!("must be positive, got {}", self.pixel_pitch),
            ));
        }
        for (field, v) in [("interferometer.width", self.width), ("interferometer.height", self.height)] {
            if v < 2 || v % 2 != 0 {
                return Err(Error::config(field, format!("must be even and >= 2, got {v}")));
            }
        }
        if !(self.counts_scale.is_finite() && self.counts_scale > 0.0) {
            return Err(Error::config(
                "interferometer.counts_scale",
                format!("must be positive, got {}", self.counts_scale),
            ));
        }
        if !(self.read_noise.is_finite() && self.read_noise >= 0.0) {
            return Err(Error::config(
                "interferometer.read_noise",
                format!("must be non-negative, got {}", self.read_noise),
            ));
        }
        Ok(())
    }

    pub fn grid_x(&self) -> Grid1D {
        Grid1D::new(self.width, self.pixel_pitch).expect("validated camera grid")
    }

    pub fn grid_y(&self) -> Grid1D {
        Grid1D::new(self.height, self.pixel_pitch).expect("validated camera grid")
    }

    pub fn with_phase(&self, hwp_angle: f64) -> Self {
        InterferometerConfig {
            hwp_angle,
            bs_present: true,
            ..*self
        }
    }

    pub fn without_beam_splitter(&self) -> Self {
        InterferometerConfig {
            bs_present: false,
            ..*self
        }
    }
}

/// Half-open pixel ranges `[x0, x1) × [y0, y1)` where the frame is defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidRegion {
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
}

impl ValidRegion {
    pub fn full(width: usize, height: usize) -> Self {
        ValidRegion {
            x0: 0,
            x1: width,
            y0: 0,
            y1: height,
        }
    }

    pub fn contains(&self, col: usize, row: usize) -> bool {
        (self.x0..self.x1).contains(&col) && (self.y0..self.y1).contains(&row)
    }

    pub fn is_empty(&self) -> bool {
        self.x0 >= self.x1 || self.y0 >= self.y1
    }

    fn from_flags(fx: &[bool], fy: &[bool]) -> Self {
        let range = |f: &[bool]| match (f.iter().position(|&v| v), f.iter().rposition(|&v| v)) {
            (Some(a), Some(b)) => (a, b + 1),
            _ => (0, 0),
        };
        let (x0, x1) = range(fx);
        let (y0, y1) = range(fy);
        ValidRegion { x0, x1, y0, y1 }
    }
}

/// Acquisition metadata carried with every frame (and written to its JSON
/// sidecar).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameMeta {
    pub phi: f64,
    pub m: f64,
    pub bs_present: bool,
    pub seed: Option<u64>,
    pub counts_scale: f64,
    pub pixel_pitch: f64,
    pub exposure_tag: String,
    pub valid_region: ValidRegion,
}

/// Camera image; `values[(row, col)]` is pixel `(x = col, y = row)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub values: Array2<f64>,
    pub meta: FrameMeta,
}

impl Frame {
    pub fn width(&self) -> usize {
        self.values.ncols()
    }

    pub fn height(&self) -> usize {
        self.values.nrows()
    }

    pub fn grid_x(&self) -> Result<Grid1D> {
        Grid1D::new(self.width(), self.meta.pixel_pitch)
    }

    pub fn grid_y(&self) -> Result<Grid1D> {
        Grid1D::new(self.height(), self.meta.pixel_pitch)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Multiply every pixel by `gain`.
    pub fn scaled(&self, gain: f64) -> Frame {
        Frame {
            values: self.values.mapv(|v| v * gain),
            meta: self.meta.clone(),
        }
    }

    /// Intensity-weighted centroid `(x, y)` in meters over the valid region.
    ///
    /// The first row and column have no mirror partner on the grid and are
    /// left out, so a field centered on the origin has its centroid there.
    pub fn centroid(&self) -> Result<(f64, f64)> {
        let gx = self.grid_x()?;
        let gy = self.grid_y()?;
        let r = self.meta.valid_region;
        let (mut sx, mut sy, mut total) = (0.0, 0.0, 0.0);
        for row in r.y0.max(1)..r.y1 {
            for col in r.x0.max(1)..r.x1 {
                let v = self.values[(row, col)];
                sx += v * gx.x(col);
                sy += v * gy.x(row);
                total += v;
            }
        }
        if !(total > 0.0) {
            return Err(Error::DataContract(format!(
                "frame `{}` has no positive signal in its valid region",
                self.meta.exposure_tag
            )));
        }
        Ok((sx / total, sy / total))
    }

    pub(crate) fn interpolator(&self) -> Uniform2<'_> {
        let gx = Grid1D::new(self.width(), self.meta.pixel_pitch).expect("frame geometry");
        let gy = Grid1D::new(self.height(), self.meta.pixel_pitch).expect("frame geometry");
        Uniform2::with_origins(self.values.view(), gy.first(), gx.first(), self.meta.pixel_pitch)
    }
}

/// One Cartesian axis of a separable field: intensity `I(x)` and
/// cross-spectral density `W(x1, x2)` at arbitrary points.
pub trait AxisField: Sync {
    fn grid(&self) -> &Grid1D;
    fn intensity_at(&self, x: f64) -> Option<f64>;
    fn cross_at(&self, x1: f64, x2: f64) -> Option<f64>;
    fn peak_intensity(&self) -> f64;
}

impl AxisField for CorrelationMatrix {
    fn grid(&self) -> &Grid1D {
        &self.grid
    }

    fn intensity_at(&self, x: f64) -> Option<f64> {
        let diag = self.values.diag();
        Uniform1::new(diag, self.grid.first(), self.grid.dx()).eval(x)
    }

    fn cross_at(&self, x1: f64, x2: f64) -> Option<f64> {
        self.value_at(x1, x2)
    }

    fn peak_intensity(&self) -> f64 {
        self.values.diag().iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl AxisField for CoherenceFactorization {
    fn grid(&self) -> &Grid1D {
        &self.grid
    }

    fn intensity_at(&self, x: f64) -> Option<f64> {
        Uniform1::new(self.intensity.view(), self.grid.first(), self.grid.dx()).eval(x)
    }

    fn cross_at(&self, x1: f64, x2: f64) -> Option<f64> {
        let i1 = self.intensity_at(x1)?;
        let i2 = self.intensity_at(x2)?;
        let mu = Uniform2::new(self.mu_two_point.view(), self.grid.first(), self.grid.dx()).eval(x1, x2)?;
        Some((i1.max(0.0) * i2.max(0.0)).sqrt() * mu)
    }

    fn peak_intensity(&self) -> f64 {
        self.intensity.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Per-axis samples the frame is built from.
struct AxisSamples {
    magnified: Array1<f64>,
    demagnified: Array1<f64>,
    cross: Array1<f64>,
    valid: Vec<bool>,
}

fn sample_axis(field: &dyn AxisField, camera: &Grid1D, m: f64, need_magnified: bool) -> AxisSamples {
    let n = camera.n();
    let mut s = AxisSamples {
        magnified: Array1::zeros(n),
        demagnified: Array1::zeros(n),
        cross: Array1::zeros(n),
        valid: vec![false; n],
    };
    for k in 0..n {
        let x = camera.x(k);
        let demag = field.intensity_at(x / m);
        if !need_magnified {
            if let Some(d) = demag {
                s.demagnified[k] = d;
                s.valid[k] = true;
            }
            continue;
        }
        if let (Some(a), Some(d), Some(w)) = (field.intensity_at(m * x), demag, field.cross_at(m * x, x / m)) {
            s.magnified[k] = a;
            s.demagnified[k] = d;
            s.cross[k] = w;
            s.valid[k] = true;
        }
    }
    s
}

fn check_fields(fx: &dyn AxisField, fy: &dyn AxisField) -> Result<f64> {
    let peak = fx.peak_intensity() * fy.peak_intensity();
    if !(peak.is_finite() && peak > 0.0) {
        return Err(Error::NumericalGuard("field intensity has no positive peak".into()));
    }
    Ok(peak)
}

/// Interferogram with the beam splitter in place, at `cfg.hwp_angle`.
pub fn simulate_frame(fx: &dyn AxisField, fy: &dyn AxisField, cfg: &InterferometerConfig) -> Result<Frame> {
    cfg.validate()?;
    if !cfg.bs_present {
        return Err(Error::DataContract(
            "simulate_frame needs the beam splitter in place; use simulate_arm".into(),
        ));
    }
    let peak = check_fields(fx, fy)?;
    let m = cfg.magnification;
    let sx = sample_axis(fx, &cfg.grid_x(), m, true);
    let sy = sample_axis(fy, &cfg.grid_y(), m, true);
    let region = ValidRegion::from_flags(&sx.valid, &sy.valid);
    let cos4 = (4.0 * cfg.hwp_angle).cos();
    let norm = cfg.counts_scale / (4.0 * peak);
    let mut values = Array2::zeros((cfg.height, cfg.width));
    values
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(row, mut out)| {
            if !sy.valid[row] {
                return;
            }
            for col in 0..cfg.width {
                if !sx.valid[col] {
                    continue;
                }
                let e = sx.magnified[col] * sy.magnified[row] + sx.demagnified[col] * sy.demagnified[row]
                    - 2.0 * sx.cross[col] * sy.cross[row] * cos4;
                out[col] = (e * norm).max(0.0);
            }
        });
    let tag = format!("phi={:.6}", cfg.hwp_angle);
    finish_frame(values, cfg, region, tag)
}

/// Beam splitter removed: only the demagnified alternative `I(ρ/m)`.
pub fn simulate_arm(fx: &dyn AxisField, fy: &dyn AxisField, cfg: &InterferometerConfig) -> Result<Frame> {
    cfg.validate()?;
    if cfg.bs_present {
        return Err(Error::DataContract(
            "simulate_arm needs the beam splitter removed".into(),
        ));
    }
    let peak = check_fields(fx, fy)?;
    let m = cfg.magnification;
    let sx = sample_axis(fx, &cfg.grid_x(), m, false);
    let sy = sample_axis(fy, &cfg.grid_y(), m, false);
    let region = ValidRegion::from_flags(&sx.valid, &sy.valid);
    let norm = cfg.counts_scale / peak;
    let values = Array2::from_shape_fn((cfg.height, cfg.width), |(row, col)| {
        if sx.valid[col] && sy.valid[row] {
            (sx.demagnified[col] * sy.demagnified[row] * norm).max(0.0)
        } else {
            0.0
        }
    });
    finish_frame(values, cfg, region, "arm".to_string())
}

fn finish_frame(mut values: Array2<f64>, cfg: &InterferometerConfig, region: ValidRegion, tag: String) -> Result<Frame> {
    let stream = frame_stream(cfg.hwp_angle, cfg.bs_present);
    apply_noise(&mut values, cfg, stream)?;
    Ok(Frame {
        values,
        meta: FrameMeta {
            phi: if cfg.bs_present { cfg.hwp_angle } else { 0.0 },
            m: cfg.magnification,
            bs_present: cfg.bs_present,
            seed: cfg.noise.seed(),
            counts_scale: cfg.counts_scale,
            pixel_pitch: cfg.pixel_pitch,
            exposure_tag: tag,
            valid_region: region,
        },
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Distinct random streams for each (φ, beam splitter) acquisition.
fn frame_stream(phi: f64, bs_present: bool) -> u64 {
    let bs = if bs_present { 0 } else { 0xA5A5_5A5A_0F0F_F0F0 };
    splitmix64(phi.to_bits() ^ bs)
}

/// Per-pixel counter-based seeding: the result does not depend on the order
/// in which pixels are visited.
fn pixel_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(stream ^ splitmix64(index))))
}

fn apply_noise(values: &mut Array2<f64>, cfg: &InterferometerConfig, stream: u64) -> Result<()> {
    let read = if cfg.read_noise > 0.0 {
        Some(Normal::new(0.0, cfg.read_noise).map_err(|e| Error::config("interferometer.read_noise", e.to_string()))?)
    } else {
        None
    };
    let seed = match (cfg.noise, read) {
        (NoiseModel::None, None) => return Ok(()),
        (NoiseModel::None, Some(_)) => 0,
        (NoiseModel::Poisson { seed }, _) => seed,
    };
    let poisson = matches!(cfg.noise, NoiseModel::Poisson { .. });
    let width = values.ncols();
    values
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(row, mut out)| {
            for (col, v) in out.iter_mut().enumerate() {
                let mut rng = pixel_rng(seed, stream, (row * width + col) as u64);
                let mut sample = *v;
                if poisson {
                    sample = if sample > 0.0 {
                        Poisson::new(sample).map(|p| p.sample(&mut rng)).unwrap_or(0.0)
                    } else {
                        0.0
                    };
                }
                if let Some(n) = &read {
                    sample += n.sample(&mut rng);
                }
                *v = sample.max(0.0);
            }
        });
    Ok(())
}

/// Estimate of `I(mρ)` from the beam-splitter-removed frame `I(ρ/m)`, by
/// resampling at `m²` times the camera coordinate about the frame centroid.
/// The amplitude is left as measured.
pub fn rescale_arm(arm: &Frame, m: f64) -> Result<Frame> {
    let center = arm.centroid()?;
    rescale_arm_about(arm, m, center)
}

/// [`rescale_arm`] about an explicit fixed point `(x, y)` in meters.
pub fn rescale_arm_about(arm: &Frame, m: f64, center: (f64, f64)) -> Result<Frame> {
    if arm.meta.bs_present {
        return Err(Error::DataContract(
            "rescale_arm expects a frame recorded without the beam splitter".into(),
        ));
    }
    if !(m.is_finite() && m >= 1.0) {
        return Err(Error::config("interferometer.magnification", format!("must be >= 1, got {m}")));
    }
    let gx = arm.grid_x()?;
    let gy = arm.grid_y()?;
    let r = arm.meta.valid_region;
    let s = m * m;
    let map = |x: f64, c: f64| s * (x - c) + c;
    let inside = |g: &Grid1D, lo: usize, hi: usize, x: f64| {
        let t = g.fractional_index(x);
        hi > lo && t >= lo as f64 - 1e-9 && t <= (hi - 1) as f64 + 1e-9
    };
    let fx: Vec<bool> = (0..arm.width())
        .map(|c| inside(&gx, r.x0, r.x1, map(gx.x(c), center.0)))
        .collect();
    let fy: Vec<bool> = (0..arm.height())
        .map(|c| inside(&gy, r.y0, r.y1, map(gy.x(c), center.1)))
        .collect();
    let interp = arm.interpolator();
    let values = Array2::from_shape_fn((arm.height(), arm.width()), |(row, col)| {
        if fx[col] && fy[row] {
            interp
                .eval(map(gy.x(row), center.1), map(gx.x(col), center.0))
                .unwrap_or(0.0)
        } else {
            0.0
        }
    });
    let mut meta = arm.meta.clone();
    meta.exposure_tag = format!("{}:rescaled", arm.meta.exposure_tag);
    meta.valid_region = ValidRegion::from_flags(&fx, &fy);
    Ok(Frame { values, meta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Gaussian Schell-model axis with closed-form evaluation.
    struct Schell {
        grid: Grid1D,
        w: f64,
        sigma: f64,
    }

    impl AxisField for Schell {
        fn grid(&self) -> &Grid1D {
            &self.grid
        }
        fn intensity_at(&self, x: f64) -> Option<f64> {
            Some((-2.0 * x * x / (self.w * self.w)).exp())
        }
        fn cross_at(&self, a: f64, b: f64) -> Option<f64> {
            Some((-(a * a + b * b) / (self.w * self.w)).exp() * (-(a - b).powi(2) / (2.0 * self.sigma.powi(2))).exp())
        }
        fn peak_intensity(&self) -> f64 {
            1.0
        }
    }

    fn small_cfg() -> InterferometerConfig {
        InterferometerConfig {
            pixel_pitch: 1.0,
            width: 64,
            height: 48,
            counts_scale: 1e4,
            ..Default::default()
        }
    }

    fn schell() -> Schell {
        Schell {
            grid: Grid1D::new(256, 1.0).unwrap(),
            w: 12.0,
            sigma: 3.0,
        }
    }

    #[test]
    fn config_validation() {
        let bad = InterferometerConfig {
            magnification: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = InterferometerConfig {
            width: 5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = InterferometerConfig {
            counts_scale: 0.0,
            noise: NoiseModel::Poisson { seed: 1 },
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(InterferometerConfig::default().validate().is_ok());
    }

    #[test]
    fn quadrature_angle_removes_interference() {
        let f = schell();
        let cfg = small_cfg();
        let frame = simulate_frame(&f, &f, &cfg.with_phase(PI / 8.0)).unwrap();
        let gx = cfg.grid_x();
        let gy = cfg.grid_y();
        for row in 0..cfg.height {
            for col in 0..cfg.width {
                let (x, y) = (gx.x(col), gy.x(row));
                let expected = cfg.counts_scale / 4.0
                    * (f.intensity_at(2.0 * x).unwrap() * f.intensity_at(2.0 * y).unwrap()
                        + f.intensity_at(x / 2.0).unwrap() * f.intensity_at(y / 2.0).unwrap());
                assert!((frame.values[(row, col)] - expected).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn bright_frame_peaks_at_counts_scale() {
        let f = schell();
        let cfg = small_cfg();
        let bright = simulate_frame(&f, &f, &cfg.with_phase(PI / 4.0)).unwrap();
        assert!((bright.max() - cfg.counts_scale).abs() < 1e-9);
        let c = (cfg.height / 2, cfg.width / 2);
        assert_eq!(bright.values[c], bright.max());
        let dark = simulate_frame(&f, &f, &cfg.with_phase(0.0)).unwrap();
        assert!(dark.values[c].abs() < 1e-9);
    }

    #[test]
    fn arm_frame_is_demagnified_intensity() {
        let f = schell();
        let cfg = small_cfg().without_beam_splitter();
        let arm = simulate_arm(&f, &f, &cfg).unwrap();
        let gx = cfg.grid_x();
        let gy = cfg.grid_y();
        for row in (0..cfg.height).step_by(5) {
            for col in (0..cfg.width).step_by(3) {
                let expected = cfg.counts_scale * (-2.0 * (gx.x(col).powi(2) + gy.x(row).powi(2)) / (4.0 * 144.0)).exp();
                assert!((arm.values[(row, col)] - expected).abs() < 1e-9);
            }
        }
        assert!(simulate_frame(&f, &f, &cfg).is_err());
        assert!(simulate_arm(&f, &f, &small_cfg()).is_err());
    }

    #[test]
    fn out_of_field_pixels_are_masked() {
        let f = Schell {
            grid: Grid1D::new(64, 1.0).unwrap(),
            w: 6.0,
            sigma: 2.0,
        };
        // Correlation matrices know their own extent; analytic fields do not,
        // so use a sampled one here.
        let x = f.grid.positions();
        let n = f.grid.n();
        let w = CorrelationMatrix::normalized(
            f.grid,
            Array2::from_shape_fn((n, n), |(j, k)| f.cross_at(x[j], x[k]).unwrap()),
        )
        .unwrap();
        let cfg = small_cfg();
        let frame = simulate_frame(&w, &w, &cfg).unwrap();
        let r = frame.meta.valid_region;
        // m x must stay within [-32, 31].
        assert_eq!((r.x0, r.x1), (16, 48));
        assert!(frame.values[(24, 10)] == 0.0);
    }

    #[test]
    fn poisson_is_deterministic_per_seed() {
        let f = schell();
        let cfg = InterferometerConfig {
            noise: NoiseModel::Poisson { seed: 7 },
            ..small_cfg()
        };
        let a = simulate_frame(&f, &f, &cfg).unwrap();
        let b = simulate_frame(&f, &f, &cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate_frame(
            &f,
            &f,
            &InterferometerConfig {
                noise: NoiseModel::Poisson { seed: 8 },
                ..cfg
            },
        )
        .unwrap();
        assert_ne!(a.values, c.values);
        assert!(a.values.iter().all(|v| *v >= 0.0 && v.fract() == 0.0));
    }

    #[test]
    fn poisson_mean_converges_to_noiseless_frame() {
        let f = schell();
        let clean = simulate_frame(&f, &f, &small_cfg()).unwrap();
        let seeds = 200;
        let mut sum = Array2::<f64>::zeros(clean.values.dim());
        for seed in 0..seeds {
            let cfg = InterferometerConfig {
                noise: NoiseModel::Poisson { seed },
                ..small_cfg()
            };
            sum += &simulate_frame(&f, &f, &cfg).unwrap().values;
        }
        let n = seeds as f64;
        let inside = ndarray::Zip::from(&sum)
            .and(&clean.values)
            .fold(0usize, |acc, s, e| {
                let sigma = (e / n).sqrt();
                acc + usize::from((s / n - e).abs() <= 3.0 * sigma)
            });
        let fraction = inside as f64 / clean.values.len() as f64;
        assert!(fraction >= 0.99, "{fraction}");
    }

    #[test]
    fn read_noise_keeps_frames_non_negative() {
        let f = schell();
        let cfg = InterferometerConfig {
            read_noise: 50.0,
            ..small_cfg()
        };
        let frame = simulate_frame(&f, &f, &cfg).unwrap();
        assert!(frame.values.iter().all(|v| *v >= 0.0));
        assert!(frame.values.iter().any(|v| v.fract() != 0.0));
    }

    #[test]
    fn rescale_identity_and_gaussian_width() {
        let f = schell();
        let cfg = small_cfg().without_beam_splitter();
        let arm = simulate_arm(&f, &f, &cfg).unwrap();
        let same = rescale_arm(&arm, 1.0).unwrap();
        assert_eq!(same.values, arm.values);
        assert_eq!(same.meta.valid_region, arm.meta.valid_region);
        // I(x/2) resampled at 4x is I(2x).
        let est = rescale_arm(&arm, 2.0).unwrap();
        let gx = cfg.grid_x();
        let gy = cfg.grid_y();
        let r = est.meta.valid_region;
        assert!(r.x1 - r.x0 < cfg.width / 2 + 2);
        for row in r.y0..r.y1 {
            for col in r.x0..r.x1 {
                let expected = cfg.counts_scale
                    * f.intensity_at(2.0 * gx.x(col)).unwrap()
                    * f.intensity_at(2.0 * gy.x(row)).unwrap();
                assert!((est.values[(row, col)] - expected).abs() < 1e-9 * cfg.counts_scale);
            }
        }
        assert!(rescale_arm(&simulate_frame(&f, &f, &small_cfg()).unwrap(), 2.0).is_err());
    }
}
