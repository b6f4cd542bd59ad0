//! Inverse pipeline: interferograms to a per-axis cross-spectral density.
//!
//! 1. The difference of the `φ = π/4` and `φ = 0` frames, divided by 4, is
//!    `W(mρ, ρ/m)` up to a constant.
//! 2. Dividing a central cut of it by `sqrt(I(mρ) I(ρ/m))` gives the degree of
//!    coherence `μ` sampled at `Δ = ρ (m - 1/m)`, scaled so `μ(0) = 1`.
//! 3. `μ(Δ)` is laid out as a Toeplitz matrix and combined with the intensity
//!    recovered from the beam-splitter-removed frame.
//!
//! Every overall scale (gain, exposure, counts_scale) cancels along the way.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::coherence::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::interferometer::{rescale_arm_about, Frame, FrameMeta, ValidRegion};
use crate::interp::Uniform1;

const PHI_TOL: f64 = 1e-9;

/// Median of |N(0, 1)|.
const MAD_TO_SIGMA: f64 = 0.674_489_750_196_081_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldAxis {
    X,
    Y,
}

impl FieldAxis {
    pub fn name(self) -> &'static str {
        match self {
            FieldAxis::X => "x",
            FieldAxis::Y => "y",
        }
    }
}

impl std::fmt::Display for FieldAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// What `μ(Δ)` is taken to be beyond the measured range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extrapolation {
    #[default]
    Zero,
}

/// Truncates the measured `μ(Δ)` where it sinks into shot noise.
///
/// The noise level is calibrated from the data: `κ` is the robust spread of
/// `μ / s` over the outer half of the measured range, where `s` is the
/// Poisson standard deviation predicted from the raw counts. Walking outward
/// from `Δ = 0`, the profile ends at the first run of `run` samples with
/// `|μ| < sigmas · κ · s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseGate {
    pub sigmas: f64,
    pub run: usize,
}

impl Default for NoiseGate {
    fn default() -> Self {
        NoiseGate { sigmas: 3.0, run: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructionConfig {
    /// Pixels whose arm intensity falls below `support_eps` times the peak are
    /// excluded from the μ division.
    pub support_eps: f64,
    /// Rows on either side of the central cut that are averaged in.
    pub row_average: usize,
    pub extrapolation: Extrapolation,
    /// `None` keeps every sample inside the support.
    pub noise_gate: Option<NoiseGate>,
    /// Field grid for the assembled matrices; `None` picks the grid commensurate
    /// with the camera (see [`default_analysis_grid`]).
    pub analysis_grid: Option<Grid1D>,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        ReconstructionConfig {
            support_eps: 1e-3,
            row_average: 3,
            extrapolation: Extrapolation::Zero,
            noise_gate: Some(NoiseGate::default()),
            analysis_grid: None,
        }
    }
}

impl ReconstructionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.support_eps > 0.0 && self.support_eps < 1.0) {
            return Err(Error::config(
                "reconstruction.support_eps",
                format!("must lie in (0, 1), got {}", self.support_eps),
            ));
        }
        if let Some(g) = self.noise_gate {
            if !(g.sigmas.is_finite() && g.sigmas > 0.0) {
                return Err(Error::config(
                    "reconstruction.noise_gate.sigmas",
                    format!("must be positive, got {}", g.sigmas),
                ));
            }
            if g.run == 0 {
                return Err(Error::config("reconstruction.noise_gate.run", "must be at least 1"));
            }
        }
        Ok(())
    }
}

/// `(F_{π/4} - F_0) / 4` with a per-pixel shot-noise variance estimate.
#[derive(Debug, Clone)]
pub struct AntiDiagonal {
    pub values: Array2<f64>,
    /// `(F_{π/4} + F_0) / 16`, the Poisson variance of `values` in counts.
    pub variance: Array2<f64>,
    pub valid_region: ValidRegion,
    pub meta: FrameMeta,
}

/// Degree of coherence sampled along the difference coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct MuProfile {
    /// `Δ_k = (ρ_k - ρ_c)(m - 1/m)`, uniformly spaced.
    pub delta: Array1<f64>,
    pub values: Array1<f64>,
    /// Predicted shot-noise standard deviation of each value.
    pub noise: Array1<f64>,
    pub valid_mask: Vec<bool>,
}

impl MuProfile {
    pub fn step(&self) -> f64 {
        if self.delta.len() > 1 {
            self.delta[1] - self.delta[0]
        } else {
            0.0
        }
    }

    /// Interpolated μ at `d`, or `None` outside the valid run containing 0.
    pub fn eval(&self, d: f64) -> Option<f64> {
        let (lo, hi) = self.valid_span()?;
        if d < self.delta[lo] - 1e-9 * self.step() || d > self.delta[hi] + 1e-9 * self.step() {
            return None;
        }
        Uniform1::new(self.values.view(), self.delta[0], self.step()).eval(d)
    }

    /// Index range of the contiguous valid samples around `Δ = 0`.
    pub fn valid_span(&self) -> Option<(usize, usize)> {
        let c = self.center_index()?;
        if !self.valid_mask[c] {
            return None;
        }
        let mut lo = c;
        while lo > 0 && self.valid_mask[lo - 1] {
            lo -= 1;
        }
        let mut hi = c;
        while hi + 1 < self.valid_mask.len() && self.valid_mask[hi + 1] {
            hi += 1;
        }
        Some((lo, hi))
    }

    /// Sample nearest `Δ = 0`.
    pub fn center_index(&self) -> Option<usize> {
        let step = self.step();
        if !(step > 0.0) {
            return None;
        }
        let t = (-self.delta[0] / step).round();
        (t >= 0.0 && (t as usize) < self.delta.len()).then_some(t as usize)
    }

    /// Largest `|Δ|` covered on both sides.
    pub fn symmetric_range(&self) -> f64 {
        match self.valid_span() {
            Some((lo, hi)) => self.delta[hi].min(-self.delta[lo]).max(0.0),
            None => 0.0,
        }
    }
}

fn check_same_geometry(a: &FrameMeta, sa: (usize, usize), b: &FrameMeta, sb: (usize, usize)) -> Result<()> {
    if sa != sb {
        return Err(Error::DataContract(format!(
            "frame geometry differs: {}x{} vs {}x{}",
            sa.1, sa.0, sb.1, sb.0
        )));
    }
    if a.m != b.m {
        return Err(Error::DataContract(format!("magnification differs: {} vs {}", a.m, b.m)));
    }
    if a.pixel_pitch != b.pixel_pitch {
        return Err(Error::DataContract(format!(
            "pixel pitch differs: {} vs {}",
            a.pixel_pitch, b.pixel_pitch
        )));
    }
    if a.counts_scale != b.counts_scale {
        return Err(Error::DataContract(format!(
            "counts_scale differs: {} vs {}",
            a.counts_scale, b.counts_scale
        )));
    }
    Ok(())
}

fn intersect(a: ValidRegion, b: ValidRegion) -> ValidRegion {
    ValidRegion {
        x0: a.x0.max(b.x0),
        x1: a.x1.min(b.x1),
        y0: a.y0.max(b.y0),
        y1: a.y1.min(b.y1),
    }
}

/// `(F_{π/4} - F_0) / 4`. Negative values are kept.
pub fn extract_w_antidiagonal(frame_pi4: &Frame, frame_0: &Frame) -> Result<AntiDiagonal> {
    for (f, phi) in [(frame_pi4, std::f64::consts::FRAC_PI_4), (frame_0, 0.0)] {
        if !f.meta.bs_present {
            return Err(Error::DataContract(format!(
                "frame `{}` was recorded without the beam splitter",
                f.meta.exposure_tag
            )));
        }
        if (f.meta.phi - phi).abs() > PHI_TOL {
            return Err(Error::DataContract(format!(
                "frame `{}` has φ = {}, expected {phi}",
                f.meta.exposure_tag, f.meta.phi
            )));
        }
    }
    check_same_geometry(&frame_pi4.meta, frame_pi4.values.dim(), &frame_0.meta, frame_0.values.dim())?;
    let values = (&frame_pi4.values - &frame_0.values) / 4.0;
    let variance = (&frame_pi4.values + &frame_0.values).mapv(|v| v.max(0.0) / 16.0);
    let mut meta = frame_pi4.meta.clone();
    meta.exposure_tag = "difference".into();
    Ok(AntiDiagonal {
        values,
        variance,
        valid_region: intersect(frame_pi4.meta.valid_region, frame_0.meta.valid_region),
        meta,
    })
}

/// Central cut along `axis` through `center`, averaged over `±half` rows.
/// Returns the averaged profile and the number of rows used.
fn cut(values: &Array2<f64>, region: ValidRegion, pitch: f64, axis: FieldAxis, center: (f64, f64), half: usize) -> Result<(Array1<f64>, usize)> {
    let (h, w) = values.dim();
    let (perp_n, perp_c, lo, hi) = match axis {
        FieldAxis::X => (h, center.1, region.y0, region.y1),
        FieldAxis::Y => (w, center.0, region.x0, region.x1),
    };
    let perp = Grid1D::new(perp_n, pitch)?;
    let mid = perp.fractional_index(perp_c).round();
    if !(mid >= lo as f64 && mid < hi as f64) {
        return Err(Error::DataContract(format!(
            "central {axis} cut lies outside the valid region"
        )));
    }
    let mid = mid as usize;
    let first = mid.saturating_sub(half).max(lo);
    let last = (mid + half).min(hi - 1);
    let rows = last - first + 1;
    let profile = match axis {
        FieldAxis::X => {
            let mut acc = Array1::zeros(w);
            for r in first..=last {
                acc += &values.row(r);
            }
            acc
        }
        FieldAxis::Y => {
            let mut acc = Array1::zeros(h);
            for c in first..=last {
                acc += &values.column(c);
            }
            acc
        }
    };
    Ok((profile / rows as f64, rows))
}

fn axis_range(region: ValidRegion, axis: FieldAxis) -> (usize, usize) {
    match axis {
        FieldAxis::X => (region.x0, region.x1),
        FieldAxis::Y => (region.y0, region.y1),
    }
}

fn axis_grid(meta: &FrameMeta, dim: (usize, usize), axis: FieldAxis) -> Result<Grid1D> {
    let n = match axis {
        FieldAxis::X => dim.1,
        FieldAxis::Y => dim.0,
    };
    Grid1D::new(n, meta.pixel_pitch)
}

/// `μ(Δ)` along one axis from the difference map and the two arm intensities.
///
/// `arm_mag_est` must be [`rescale_arm_about`] applied to `arm_demag` about
/// `center`, which is also where the cut is taken.
pub fn compute_mu_profile(
    anti: &AntiDiagonal,
    arm_demag: &Frame,
    arm_mag_est: &Frame,
    center: (f64, f64),
    axis: FieldAxis,
    cfg: &ReconstructionConfig,
) -> Result<MuProfile> {
    cfg.validate()?;
    for arm in [arm_demag, arm_mag_est] {
        if arm.meta.bs_present {
            return Err(Error::DataContract(format!(
                "frame `{}` was recorded with the beam splitter in place",
                arm.meta.exposure_tag
            )));
        }
        check_same_geometry(&anti.meta, anti.values.dim(), &arm.meta, arm.values.dim())?;
    }
    let m = anti.meta.m;
    let pitch = anti.meta.pixel_pitch;
    let half = cfg.row_average;
    let (w, rows) = cut(&anti.values, anti.valid_region, pitch, axis, center, half)?;
    let (var, _) = cut(&anti.variance, anti.valid_region, pitch, axis, center, half)?;
    let (demag, _) = cut(&arm_demag.values, arm_demag.meta.valid_region, pitch, axis, center, half)?;
    let (mag, _) = cut(&arm_mag_est.values, arm_mag_est.meta.valid_region, pitch, axis, center, half)?;

    let grid = axis_grid(&anti.meta, anti.values.dim(), axis)?;
    let c = match axis {
        FieldAxis::X => center.0,
        FieldAxis::Y => center.1,
    };
    let (a0, a1) = axis_range(anti.valid_region, axis);
    let (d0, d1) = axis_range(arm_demag.meta.valid_region, axis);
    let (g0, g1) = axis_range(arm_mag_est.meta.valid_region, axis);
    let peak = demag.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) {
        return Err(Error::NumericalGuard("arm frame cut has no positive signal".into()));
    }
    let threshold = cfg.support_eps * peak;

    let n = grid.n();
    let mut valid = vec![false; n];
    let mut mu = Array1::zeros(n);
    let mut noise = Array1::zeros(n);
    for k in 0..n {
        let inside = (a0..a1).contains(&k) && (d0..d1).contains(&k) && (g0..g1).contains(&k);
        if inside && demag[k] > threshold && mag[k] > threshold {
            let den = (demag[k] * mag[k]).sqrt();
            mu[k] = w[k] / den;
            noise[k] = (var[k] / rows as f64).sqrt() / den;
            valid[k] = true;
        }
    }
    let scale = m - 1.0 / m;
    let delta = Array1::from_iter((0..n).map(|k| (grid.x(k) - c) * scale));
    let masked = Array1::from_iter((0..n).map(|k| if valid[k] { mu[k] } else { 0.0 }));
    let mut profile = MuProfile {
        delta,
        values: masked,
        noise,
        valid_mask: valid,
    };
    let mu0 = profile
        .valid_span()
        .and_then(|_| Uniform1::new(profile.values.view(), profile.delta[0], profile.step()).eval(0.0))
        .unwrap_or(f64::NAN);
    if !(mu0.is_finite() && mu0 > 0.0) {
        return Err(Error::NumericalGuard(format!(
            "degree of coherence at zero separation is {mu0}; the difference frame carries no interference"
        )));
    }
    profile.values.mapv_inplace(|v| (v / mu0).clamp(-1.0, 1.0));
    profile.noise.mapv_inplace(|v| v / mu0);
    if let Some(gate) = cfg.noise_gate {
        apply_noise_gate(&mut profile, gate);
    }
    for k in 0..n {
        if !profile.valid_mask[k] {
            profile.values[k] = 0.0;
        }
    }
    Ok(profile)
}

fn apply_noise_gate(p: &mut MuProfile, gate: NoiseGate) {
    let Some((lo, hi)) = p.valid_span() else { return };
    let reach = p.delta[hi].abs().max(p.delta[lo].abs());
    let mut ratios: Vec<f64> = (lo..=hi)
        .filter(|&k| p.delta[k].abs() >= 0.5 * reach && p.noise[k] > 0.0)
        .map(|k| p.values[k].abs() / p.noise[k])
        .collect();
    if ratios.is_empty() {
        return;
    }
    ratios.sort_by(f64::total_cmp);
    let kappa = ratios[ratios.len() / 2] / MAD_TO_SIGMA;
    if !(kappa.is_finite() && kappa > 0.0) {
        return;
    }
    let c = p.center_index().expect("valid span implies a center");
    let limit = gate.sigmas * kappa;
    let below = |k: usize| p.values[k].abs() < limit * p.noise[k];
    let mut run = 0;
    for k in c..=hi {
        run = if below(k) { run + 1 } else { 0 };
        if run >= gate.run {
            let start = k + 1 - gate.run;
            p.valid_mask[start..].iter_mut().for_each(|v| *v = false);
            break;
        }
    }
    run = 0;
    for k in (lo..=c).rev() {
        run = if below(k) { run + 1 } else { 0 };
        if run >= gate.run {
            let start = k + gate.run - 1;
            p.valid_mask[..=start].iter_mut().for_each(|v| *v = false);
            break;
        }
    }
}

/// Toeplitz `μ[j][k] = μ(|x_j - x_k|)` on `grid`.
///
/// Where both signs of `Δ` are measured the two are averaged; beyond the
/// measured range the extrapolation policy applies.
pub fn remap_mu(profile: &MuProfile, grid: &Grid1D, extrapolation: Extrapolation) -> Array2<f64> {
    let n = grid.n();
    let dx = grid.dx();
    let lag: Vec<f64> = (0..n)
        .map(|t| {
            let d = t as f64 * dx;
            match (profile.eval(d), profile.eval(-d)) {
                (Some(a), Some(b)) => 0.5 * (a + b),
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => match extrapolation {
                    Extrapolation::Zero => 0.0,
                },
            }
        })
        .collect();
    Array2::from_shape_fn((n, n), |(j, k)| lag[j.abs_diff(k)])
}

/// `W[j][k] = sqrt(I_j I_k) μ[j][k]`, scaled to unit trace.
pub fn assemble_w(grid: &Grid1D, intensity: &Array1<f64>, mu: &Array2<f64>) -> Result<CorrelationMatrix> {
    let n = grid.n();
    if intensity.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: intensity.len(),
        });
    }
    if mu.dim() != (n, n) {
        return Err(Error::LengthMismatch {
            expected: n * n,
            actual: mu.len(),
        });
    }
    if intensity.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::DataContract("intensity must be finite and non-negative".into()));
    }
    if !intensity.iter().any(|v| *v > 0.0) {
        return Err(Error::NumericalGuard("intensity is identically zero".into()));
    }
    let amp = intensity.mapv(f64::sqrt);
    let values = Array2::from_shape_fn((n, n), |(j, k)| amp[j] * amp[k] * mu[(j, k)]);
    CorrelationMatrix::normalized(*grid, values)
}

/// Field-plane intensity `I(x)` from the beam-splitter-removed frame: the
/// central cut read at camera position `ρ_c + m x`. Negative samples are
/// clipped to zero and positions outside the frame read as zero.
pub fn intensity_on_field_grid(
    arm_demag: &Frame,
    center: (f64, f64),
    axis: FieldAxis,
    row_average: usize,
    grid: &Grid1D,
) -> Result<Array1<f64>> {
    if arm_demag.meta.bs_present {
        return Err(Error::DataContract(
            "field intensity must come from a frame recorded without the beam splitter".into(),
        ));
    }
    let m = arm_demag.meta.m;
    let region = arm_demag.meta.valid_region;
    let (profile, _) = cut(&arm_demag.values, region, arm_demag.meta.pixel_pitch, axis, center, row_average)?;
    let cam = axis_grid(&arm_demag.meta, arm_demag.values.dim(), axis)?;
    let (lo, hi) = axis_range(region, axis);
    let masked = Array1::from_iter((0..cam.n()).map(|k| if (lo..hi).contains(&k) { profile[k] } else { 0.0 }));
    let c = match axis {
        FieldAxis::X => center.0,
        FieldAxis::Y => center.1,
    };
    let f = Uniform1::new(masked.view(), cam.first(), cam.dx());
    Ok(Array1::from_iter(
        (0..grid.n()).map(|j| f.eval(c + m * grid.x(j)).unwrap_or(0.0).max(0.0)),
    ))
}

/// Field grid whose nodes map onto camera pixels for both the intensity
/// (`ρ = m x`) and the coherence (`Δ = ρ (m - 1/m)`) lookups, spanning as much
/// of the camera as the intensity lookup allows.
pub fn default_analysis_grid(pixel_pitch: f64, pixels: usize, m: f64) -> Result<Grid1D> {
    let scale = m - 1.0 / m;
    let dx = pixel_pitch * scale;
    let half = ((pixels / 2) as f64 / (m * scale)).floor() as usize;
    Grid1D::new(2 * half, dx)
}

/// The three frames the pipeline consumes.
#[derive(Debug, Clone)]
pub struct FrameSet {
    /// `φ = π/4`, beam splitter in.
    pub bright: Frame,
    /// `φ = 0`, beam splitter in.
    pub dark: Frame,
    /// Beam splitter removed.
    pub arm: Frame,
}

impl FrameSet {
    pub fn scaled(&self, gain: f64) -> FrameSet {
        FrameSet {
            bright: self.bright.scaled(gain),
            dark: self.dark.scaled(gain),
            arm: self.arm.scaled(gain),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AxisReconstruction {
    pub axis: FieldAxis,
    pub profile: MuProfile,
    pub intensity: Array1<f64>,
    pub mu: Array2<f64>,
    pub w: CorrelationMatrix,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// Intensity centroid of the arm frame, camera coordinates in meters.
    pub centroid: (f64, f64),
    pub x: AxisReconstruction,
    pub y: AxisReconstruction,
}

impl Reconstruction {
    pub fn axis(&self, axis: FieldAxis) -> &AxisReconstruction {
        match axis {
            FieldAxis::X => &self.x,
            FieldAxis::Y => &self.y,
        }
    }
}

/// Run the whole inverse pipeline on both axes.
pub fn reconstruct(frames: &FrameSet, cfg: &ReconstructionConfig) -> Result<Reconstruction> {
    cfg.validate()?;
    check_same_geometry(
        &frames.bright.meta,
        frames.bright.values.dim(),
        &frames.arm.meta,
        frames.arm.values.dim(),
    )?;
    let anti = extract_w_antidiagonal(&frames.bright, &frames.dark)?;
    let centroid = frames.arm.centroid()?;
    let mag = rescale_arm_about(&frames.arm, frames.arm.meta.m, centroid)?;
    let run = |axis| reconstruct_axis(&anti, &frames.arm, &mag, centroid, axis, cfg);
    let (x, y) = rayon::join(|| run(FieldAxis::X), || run(FieldAxis::Y));
    Ok(Reconstruction {
        centroid,
        x: x?,
        y: y?,
    })
}

fn reconstruct_axis(
    anti: &AntiDiagonal,
    arm: &Frame,
    mag: &Frame,
    centroid: (f64, f64),
    axis: FieldAxis,
    cfg: &ReconstructionConfig,
) -> Result<AxisReconstruction> {
    let profile = compute_mu_profile(anti, arm, mag, centroid, axis, cfg)?;
    let grid = match cfg.analysis_grid {
        Some(g) => g,
        None => {
            let pixels = match axis {
                FieldAxis::X => arm.width(),
                FieldAxis::Y => arm.height(),
            };
            default_analysis_grid(arm.meta.pixel_pitch, pixels, arm.meta.m)?
        }
    };
    let intensity = intensity_on_field_grid(arm, centroid, axis, cfg.row_average, &grid)?;
    let mu = remap_mu(&profile, &grid, cfg.extrapolation);
    let w = assemble_w(&grid, &intensity, &mu)?;
    Ok(AxisReconstruction {
        axis,
        profile,
        intensity,
        mu,
        w,
    })
}
