//! Reduced single-photon state and its quasi-homogeneous factorization.
//!
//! Tracing the idler out of `ψ(x_s, x_i)` leaves the cross-spectral density
//! `W(x, x') = Σ_k ψ(x, x_k) ψ*(x', x_k) dx`. A quasi-homogeneous `W`
//! factors as `sqrt(I(x) I(x')) μ(x - x')`, which is what the interferometer
//! can measure.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::interp::Uniform2;
use crate::linalg;
use crate::spdc::{Representation, TwoPhotonAmplitude};

/// Relative symmetry tolerance for correlation matrices.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Sampled real two-point function `W[(j, k)] = W(x_j, x_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub grid: Grid1D,
    pub values: Array2<f64>,
    /// `Σ_j W(x_j, x_j) dx` before the matrix was scaled to unit trace.
    pub trace_norm: f64,
}

impl CorrelationMatrix {
    /// Wrap raw values without rescaling. Checks shape and symmetry.
    pub fn from_values(grid: Grid1D, values: Array2<f64>, trace_norm: f64) -> Result<Self> {
        let n = grid.n();
        if values.dim() != (n, n) {
            return Err(Error::LengthMismatch {
                expected: n * n,
                actual: values.len(),
            });
        }
        let w = CorrelationMatrix {
            grid,
            values,
            trace_norm,
        };
        let asym = w.asymmetry();
        let peak = w.max_abs();
        if asym > SYMMETRY_TOL * peak.max(f64::MIN_POSITIVE) {
            return Err(Error::DataContract(format!(
                "correlation matrix is not symmetric: max |W - Wᵀ| = {asym:e} (peak {peak:e})"
            )));
        }
        Ok(w)
    }

    /// Scale `values` so `Σ_j W_jj dx = 1`, remembering the original trace.
    pub fn normalized(grid: Grid1D, values: Array2<f64>) -> Result<Self> {
        let mut w = Self::from_values(grid, values, 1.0)?;
        let trace = w.trace_weight();
        if !(trace.is_finite() && trace > 0.0) {
            return Err(Error::NumericalGuard(format!(
                "cannot normalize correlation matrix with trace {trace}"
            )));
        }
        w.values.mapv_inplace(|v| v / trace);
        w.trace_norm = trace;
        Ok(w)
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    /// `Σ_j W_jj dx`.
    pub fn trace_weight(&self) -> f64 {
        self.values.diag().sum() * self.grid.dx()
    }

    pub fn intensity(&self) -> Array1<f64> {
        self.values.diag().to_owned()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn asymmetry(&self) -> f64 {
        let v = &self.values;
        let n = v.nrows();
        let mut worst = 0.0f64;
        for j in 0..n {
            for k in 0..j {
                worst = worst.max((v[(j, k)] - v[(k, j)]).abs());
            }
        }
        worst
    }

    /// `W(x1, x2)` by bicubic interpolation; `None` outside the grid.
    pub fn value_at(&self, x1: f64, x2: f64) -> Option<f64> {
        Uniform2::new(self.values.view(), self.grid.first(), self.grid.dx()).eval(x1, x2)
    }

    /// Resample onto another grid (zero outside this grid) and renormalize.
    pub fn resample(&self, grid: &Grid1D) -> Result<CorrelationMatrix> {
        let x = grid.positions();
        let n = grid.n();
        let mut values = Array2::zeros((n, n));
        for j in 0..n {
            for k in 0..=j {
                let v = self.value_at(x[j], x[k]).unwrap_or(0.0);
                values[(j, k)] = v;
                values[(k, j)] = v;
            }
        }
        CorrelationMatrix::normalized(*grid, values)
    }

    /// Eigenvalues of `W dx`, descending.
    pub fn weighted_eigenvalues(&self) -> Result<Array1<f64>> {
        let scaled = self.values.mapv(|v| v * self.grid.dx());
        linalg::symmetric_eigenvalues(&scaled)
    }
}

/// Partial trace over the idler: `W(x, x') = Σ_k ψ(x, x_k) ψ*(x', x_k) dx`.
///
/// The imaginary part of the result must vanish to `SYMMETRY_TOL` relative to
/// the peak; it is then dropped. The output is scaled to unit trace, with the
/// pre-scaling trace kept in `trace_norm` (1 for a unit-norm `ψ`).
pub fn partial_trace(psi: &TwoPhotonAmplitude) -> Result<CorrelationMatrix> {
    if psi.representation != Representation::Position {
        return Err(Error::DataContract(
            "partial_trace expects a position-representation amplitude".into(),
        ));
    }
    let dx = psi.grid.dx();
    let re = psi.values.mapv(|c| c.re);
    let im = psi.values.mapv(|c| c.im);
    let mut w = linalg::mul_transpose(&re, &re);
    if psi.max_imag() > 0.0 {
        w += &linalg::mul_transpose(&im, &im);
        let w_im = linalg::mul_transpose(&im, &re) - linalg::mul_transpose(&re, &im);
        let peak = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let imag = w_im.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if imag > SYMMETRY_TOL * peak {
            return Err(Error::NumericalGuard(format!(
                "cross-spectral density is not real: max |Im W| = {imag:e} vs peak {peak:e}"
            )));
        }
    }
    w.mapv_inplace(|v| v * dx);
    symmetrize(&mut w);
    CorrelationMatrix::normalized(psi.grid, w)
}

fn symmetrize(w: &mut Array2<f64>) {
    let n = w.nrows();
    for j in 0..n {
        for k in 0..j {
            let avg = 0.5 * (w[(j, k)] + w[(k, j)]);
            w[(j, k)] = avg;
            w[(k, j)] = avg;
        }
    }
}

/// Quantitative form of the two quasi-homogeneity conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityReport {
    /// Worst spread of μ along lines of constant `x - x'`, relative to max |μ|.
    pub sum_coordinate_variation: f64,
    /// Intensity 1/e half-width over coherence 1/e half-width. `+∞` when the
    /// coherence never falls to 1/e on the support (serialized as `null`).
    pub width_ratio: f64,
    pub intensity_half_width: f64,
    /// `None` when μ stays above 1/e across the support.
    pub coherence_half_width: Option<f64>,
}

/// Acceptance gates for [`HomogeneityReport`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HomogeneityThresholds {
    pub max_sum_coordinate_variation: f64,
    pub min_width_ratio: f64,
}

impl Default for HomogeneityThresholds {
    fn default() -> Self {
        HomogeneityThresholds {
            max_sum_coordinate_variation: 0.05,
            min_width_ratio: 10.0,
        }
    }
}

impl HomogeneityReport {
    /// Both gates pass. An undefined coherence width never passes.
    pub fn passes(&self, t: &HomogeneityThresholds) -> bool {
        self.coherence_half_width.is_some()
            && self.sum_coordinate_variation <= t.max_sum_coordinate_variation
            && self.width_ratio >= t.min_width_ratio
    }
}

/// `W = sqrt(I I') μ` split into its factors on the intensity support.
#[derive(Debug, Clone)]
pub struct CoherenceFactorization {
    pub grid: Grid1D,
    pub intensity: Array1<f64>,
    pub mu_two_point: Array2<f64>,
    /// `I(x) > support_eps · max I`.
    pub support: Vec<bool>,
    pub support_eps: f64,
    pub homogeneity_report: HomogeneityReport,
}

impl CoherenceFactorization {
    /// `sqrt(I_j I_k) μ_jk` (zero off the support), not renormalized.
    pub fn reassemble(&self) -> Array2<f64> {
        let n = self.grid.n();
        Array2::from_shape_fn((n, n), |(j, k)| {
            (self.intensity[j] * self.intensity[k]).sqrt() * self.mu_two_point[(j, k)]
        })
    }
}

/// Split `w` into intensity and degree of coherence.
pub fn factorize(w: &CorrelationMatrix, support_eps: f64) -> Result<CoherenceFactorization> {
    if !(support_eps > 0.0 && support_eps < 1.0) {
        return Err(Error::config(
            "reconstruction.support_eps",
            format!("must lie in (0, 1), got {support_eps}"),
        ));
    }
    let intensity = w.intensity();
    let peak = intensity.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) {
        return Err(Error::NumericalGuard("intensity is identically zero".into()));
    }
    let support: Vec<bool> = intensity.iter().map(|&v| v > support_eps * peak).collect();
    let n = w.n();
    let mu = Array2::from_shape_fn((n, n), |(j, k)| {
        if support[j] && support[k] {
            if j == k {
                1.0
            } else {
                w.values[(j, k)] / (intensity[j] * intensity[k]).sqrt()
            }
        } else {
            0.0
        }
    });
    let mut fact = CoherenceFactorization {
        grid: w.grid,
        intensity,
        mu_two_point: mu,
        support,
        support_eps,
        homogeneity_report: HomogeneityReport {
            sum_coordinate_variation: 0.0,
            width_ratio: f64::INFINITY,
            intensity_half_width: 0.0,
            coherence_half_width: None,
        },
    };
    fact.homogeneity_report = homogeneity_metrics(&fact);
    Ok(fact)
}

/// Evaluate the quasi-homogeneity conditions on a factorization.
///
/// Variation: for each difference index `d = j - k`, the population standard
/// deviation of μ over support pairs on that line; the maximum over `d`,
/// divided by max |μ| on the support. Widths: 1/e half-width of `I` around its
/// peak, and of μ along the anti-diagonal `x' = -x` as a function of `x - x'`.
pub fn homogeneity_metrics(fact: &CoherenceFactorization) -> HomogeneityReport {
    let n = fact.grid.n();
    let mu = &fact.mu_two_point;
    let s = &fact.support;

    let mut max_mu = 0.0f64;
    let mut worst = 0.0f64;
    let mut line = Vec::with_capacity(n);
    for d in -(n as isize - 1)..(n as isize) {
        line.clear();
        for j in 0..n as isize {
            let k = j - d;
            if k < 0 || k >= n as isize {
                continue;
            }
            let (j, k) = (j as usize, k as usize);
            if s[j] && s[k] {
                line.push(mu[(j, k)]);
            }
        }
        max_mu = line.iter().fold(max_mu, |m, v| m.max(v.abs()));
        if line.len() >= 2 {
            let mean = line.iter().sum::<f64>() / line.len() as f64;
            let var = line.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / line.len() as f64;
            worst = worst.max(var.sqrt());
        }
    }
    let variation = if max_mu > 0.0 { worst / max_mu } else { 0.0 };

    let dx = fact.grid.dx();
    let intensity_half_width = intensity_half_width(&fact.intensity, dx);
    let coherence_half_width = antidiagonal_half_width(fact);
    let width_ratio = match coherence_half_width {
        Some(c) if c > 0.0 => intensity_half_width / c,
        _ => f64::INFINITY,
    };
    HomogeneityReport {
        sum_coordinate_variation: variation,
        width_ratio,
        intensity_half_width,
        coherence_half_width,
    }
}

/// Mean of the left and right distances from the peak to the 1/e level.
fn intensity_half_width(intensity: &Array1<f64>, dx: f64) -> f64 {
    let (peak_idx, peak) = intensity
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let level = peak / std::f64::consts::E;
    let walk = |step: isize| -> f64 {
        let mut prev = peak;
        let mut i = peak_idx as isize;
        loop {
            let next = i + step;
            if next < 0 || next >= intensity.len() as isize {
                return (i - peak_idx as isize).unsigned_abs() as f64 * dx;
            }
            let v = intensity[next as usize];
            if v < level {
                let frac = (prev - level) / (prev - v);
                return ((i - peak_idx as isize).unsigned_abs() as f64 + frac) * dx;
            }
            prev = v;
            i = next;
        }
    };
    0.5 * (walk(-1) + walk(1))
}

fn antidiagonal_half_width(fact: &CoherenceFactorization) -> Option<f64> {
    let n = fact.grid.n();
    let c = fact.grid.center_index();
    let level = 1.0 / std::f64::consts::E;
    let mut prev = 1.0;
    // Pair (c + t, c - t) has x - x' = 2 t dx.
    for t in 1..c {
        let (j, k) = (c + t, c - t);
        if j >= n || !(fact.support[j] && fact.support[k]) {
            return None;
        }
        let v = fact.mu_two_point[(j, k)];
        if v < level {
            let frac = (prev - level) / (prev - v);
            return Some((t as f64 - 1.0 + frac) * 2.0 * fact.grid.dx());
        }
        prev = v;
    }
    None
}
