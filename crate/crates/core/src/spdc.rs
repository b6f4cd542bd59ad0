//! Two-photon amplitude of collinear, degenerate type-I down-conversion.
//!
//! All physics is computed per Cartesian axis; the 2D state is the tensor
//! product of two identical 1D amplitudes. In the momentum representation
//!
//! ```text
//! ψ(q_s, q_i) ∝ exp[-(q_s + q_i)² w_p² / 4] · sinc(Δk_z L / 2),
//! Δk_z = -(q_s - q_i)² / (2 k_p),   k_p = 2π n_p / λ_p.
//! ```
//!
//! The double-Gaussian model is the analytic reference: its Schmidt spectrum
//! is geometric and its Schmidt modes are Hermite-Gauss functions.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CenteredFft, Grid1D};

/// Pump and crystal parameters. Lengths in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpdcParams {
    pub pump_wavelength: f64,
    pub pump_waist: f64,
    pub crystal_length: f64,
    /// Refractive-index scale in `k_p = 2π n_p / λ_p`.
    pub pump_index: f64,
}

impl Default for SpdcParams {
    fn default() -> Self {
        SpdcParams {
            pump_wavelength: 355e-9,
            pump_waist: 507e-6,
            crystal_length: 1e-3,
            pump_index: 1.0,
        }
    }
}

impl SpdcParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("spdc.pump_wavelength", self.pump_wavelength),
            ("spdc.pump_waist", self.pump_waist),
            ("spdc.crystal_length", self.crystal_length),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(field, format!("must be positive, got {v}")));
            }
        }
        if !(self.pump_index.is_finite() && self.pump_index >= 1.0) {
            return Err(Error::config(
                "spdc.pump_index",
                format!("must be >= 1, got {}", self.pump_index),
            ));
        }
        Ok(())
    }

    pub fn pump_wavenumber(&self) -> f64 {
        2.0 * PI * self.pump_index / self.pump_wavelength
    }

    /// Longitudinal phase mismatch for transverse momenta `q_s`, `q_i`.
    pub fn phase_mismatch(&self, q_s: f64, q_i: f64) -> f64 {
        let d = q_s - q_i;
        -d * d / (2.0 * self.pump_wavenumber())
    }

    /// Minimum |q| the momentum grid must reach to hold the pump envelope.
    pub fn pump_momentum_span(&self) -> f64 {
        6.0 / self.pump_waist
    }

    /// Minimum |q| the momentum grid must reach to hold the sinc envelope.
    pub fn phase_matching_momentum_span(&self) -> f64 {
        3.0 * (4.0 * PI * self.pump_index / (self.pump_wavelength * self.crystal_length)).sqrt()
    }

    /// Double-Gaussian surrogate obtained by replacing `sinc(s²)` with
    /// `exp(-α s²)`, where `s² = |Δk_z| L / 2`. Gives `a_plus = w_p` and
    /// `a_minus = sqrt(α L / k_p)`.
    pub fn gaussian_surrogate(&self, alpha: f64) -> Result<DoubleGaussian> {
        self.validate()?;
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::config("alpha", format!("must be positive, got {alpha}")));
        }
        DoubleGaussian::new(
            self.pump_waist,
            (alpha * self.crystal_length / self.pump_wavenumber()).sqrt(),
        )
    }
}

/// Default exponent of the Gaussian stand-in for the sinc phase-matching term.
pub const SINC_GAUSSIAN_ALPHA: f64 = 0.455;

/// `sin(u)/u` with the removable singularity filled.
pub fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-8 {
        1.0 - u * u / 6.0
    } else {
        u.sin() / u
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Momentum,
    Position,
}

/// Sampled amplitude `values[(j, k)] = ψ(s = grid[j], i = grid[k])`, unit
/// norm under rectangle quadrature in its own representation.
#[derive(Debug, Clone)]
pub struct TwoPhotonAmplitude {
    pub grid: Grid1D,
    pub values: Array2<Complex64>,
    pub representation: Representation,
}

impl TwoPhotonAmplitude {
    fn cell(&self) -> f64 {
        match self.representation {
            Representation::Momentum => self.grid.dq(),
            Representation::Position => self.grid.dx(),
        }
    }

    /// `ΣΣ |ψ|² h²` with `h` the spacing of the current representation.
    pub fn norm_sqr(&self) -> f64 {
        let h = self.cell();
        self.values.iter().map(|c| c.norm_sqr()).sum::<f64>() * h * h
    }

    fn normalize(&mut self) -> Result<()> {
        let norm = self.norm_sqr();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NumericalGuard(format!(
                "two-photon amplitude has degenerate norm {norm}"
            )));
        }
        let s = 1.0 / norm.sqrt();
        self.values.mapv_inplace(|v| v * s);
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    /// Largest `|ψ(a, b) - ψ(b, a)|`.
    pub fn exchange_asymmetry(&self) -> f64 {
        let v = &self.values;
        let n = v.nrows();
        (0..n)
            .flat_map(|j| (0..j).map(move |k| (j, k)))
            .map(|(j, k)| (v[(j, k)] - v[(k, j)]).norm())
            .fold(0.0, f64::max)
    }

    /// Real part as a dense matrix, after checking the imaginary residue is
    /// below `tol` relative to the peak magnitude.
    pub fn real_part(&self, tol: f64) -> Result<Array2<f64>> {
        let peak = self.max_abs();
        let imag = self.max_imag();
        if imag > tol * peak {
            return Err(Error::NumericalGuard(format!(
                "amplitude is not real: max |Im ψ| = {imag:e} vs peak {peak:e}"
            )));
        }
        Ok(self.values.mapv(|c| c.re))
    }
}

/// Momentum-space amplitude on the conjugate grid of `grid`.
///
/// The row and column at index 0 (momentum `-n/2 dq`) have no mirror partner
/// on an even grid; they are set to zero so the position-space amplitude is
/// real to rounding.
pub fn momentum_amplitude(params: &SpdcParams, grid: &Grid1D) -> Result<TwoPhotonAmplitude> {
    params.validate()?;
    let span = grid.q_span();
    let pump = params.pump_momentum_span();
    if span < pump {
        return Err(Error::config(
            "grid",
            format!(
                "momentum grid reaches ±{span:.4e} 1/m but the pump envelope needs ±6/w_p = ±{pump:.4e} 1/m; decrease dx"
            ),
        ));
    }
    let phase = params.phase_matching_momentum_span();
    if span < phase {
        return Err(Error::config(
            "grid",
            format!(
                "momentum grid reaches ±{span:.4e} 1/m but the phase-matching sinc needs ±{phase:.4e} 1/m; decrease dx"
            ),
        ));
    }

    let n = grid.n();
    let q = grid.momenta();
    let w2 = params.pump_waist * params.pump_waist;
    let half_l = params.crystal_length / 2.0;
    let mut values = Array2::<Complex64>::zeros((n, n));
    values
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .skip(1)
        .for_each(|(j, mut row)| {
            for k in 1..n {
                let sum = q[j] + q[k];
                let amp = (-sum * sum * w2 / 4.0).exp() * sinc(params.phase_mismatch(q[j], q[k]) * half_l);
                row[k] = Complex64::new(amp, 0.0);
            }
        });
    let mut psi = TwoPhotonAmplitude {
        grid: *grid,
        values,
        representation: Representation::Momentum,
    };
    psi.normalize()?;
    Ok(psi)
}

fn transform_rows(values: &mut Array2<Complex64>, fft: &CenteredFft, inverse: bool) -> Result<()> {
    values
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .try_for_each(|mut row| {
            let mut buf = row.to_vec();
            if inverse {
                fft.inverse(&mut buf)?;
            } else {
                fft.forward(&mut buf)?;
            }
            row.iter_mut().zip(buf).for_each(|(dst, src)| *dst = src);
            Ok(())
        })
}

/// 2D centered transform of a momentum amplitude into the position
/// representation, renormalized to unit norm.
pub fn to_position(psi: &TwoPhotonAmplitude) -> Result<TwoPhotonAmplitude> {
    if psi.representation != Representation::Momentum {
        return Err(Error::DataContract(
            "to_position expects a momentum-representation amplitude".into(),
        ));
    }
    let n = psi.grid.n();
    if psi.values.dim() != (n, n) {
        return Err(Error::LengthMismatch {
            expected: n * n,
            actual: psi.values.len(),
        });
    }
    let fft = CenteredFft::new(n);
    let mut values = psi.values.clone();
    transform_rows(&mut values, &fft, true)?;
    let mut values = values.t().as_standard_layout().into_owned();
    transform_rows(&mut values, &fft, true)?;
    let values = values.t().as_standard_layout().into_owned();
    let mut out = TwoPhotonAmplitude {
        grid: psi.grid,
        values,
        representation: Representation::Position,
    };
    out.normalize()?;
    Ok(out)
}

/// Analytic double-Gaussian state
/// `ψ(x_s, x_i) ∝ exp[-(x_s + x_i)² / (4 a_plus²)] · exp[-(x_s - x_i)² / (4 a_minus²)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoubleGaussian {
    pub a_plus: f64,
    pub a_minus: f64,
}

impl DoubleGaussian {
    /// `a_plus == a_minus` is accepted (product state); `a_plus < a_minus`
    /// describes an anti-correlated pair and is rejected.
    pub fn new(a_plus: f64, a_minus: f64) -> Result<Self> {
        let model = DoubleGaussian { a_plus, a_minus };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a_minus.is_finite() && self.a_minus > 0.0) {
            return Err(Error::config("a_minus", format!("must be positive, got {}", self.a_minus)));
        }
        if !(self.a_plus.is_finite() && self.a_plus >= self.a_minus) {
            return Err(Error::config(
                "a_plus",
                format!(
                    "must be >= a_minus ({}) for a position-correlated state, got {}",
                    self.a_minus, self.a_plus
                ),
            ));
        }
        Ok(())
    }

    /// Geometric ratio `λ_{n+1}/λ_n = ((a_plus - a_minus)/(a_plus + a_minus))²`.
    pub fn ratio(&self) -> f64 {
        let t = (self.a_plus - self.a_minus) / (self.a_plus + self.a_minus);
        t * t
    }

    pub fn eigenvalue(&self, n: usize) -> f64 {
        let z = self.ratio();
        (1.0 - z) * z.powi(n as i32)
    }

    pub fn spectrum(&self, count: usize) -> Vec<f64> {
        (0..count).map(|n| self.eigenvalue(n)).collect()
    }

    /// `(1 + z) / (1 - z)`.
    pub fn schmidt_number(&self) -> f64 {
        let z = self.ratio();
        (1.0 + z) / (1.0 - z)
    }

    /// Width of the Hermite-Gauss Schmidt modes, `sqrt(a_plus a_minus)`.
    pub fn mode_width(&self) -> f64 {
        (self.a_plus * self.a_minus).sqrt()
    }

    /// Schmidt mode `n` sampled on `grid`, normalized so `Σ φ² dx ≈ 1`.
    pub fn mode(&self, n: usize, grid: &Grid1D) -> Array1<f64> {
        let s = self.mode_width();
        Array1::from_iter(grid.positions().into_iter().map(|x| hermite_function(n, x / s) / s.sqrt()))
    }

    pub fn amplitude(&self, grid: &Grid1D) -> Result<TwoPhotonAmplitude> {
        double_gaussian_amplitude(self.a_plus, self.a_minus, grid)
    }
}

/// Normalized Hermite function `H_n(u) e^{-u²/2} / sqrt(2ⁿ n! √π)`, by the
/// stable three-term recursion.
pub fn hermite_function(n: usize, u: f64) -> f64 {
    let h0 = PI.powf(-0.25) * (-u * u / 2.0).exp();
    if n == 0 {
        return h0;
    }
    let mut prev = h0;
    let mut cur = 2f64.sqrt() * u * h0;
    for k in 1..n {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * u * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Position-space double-Gaussian amplitude on `grid`.
pub fn double_gaussian_amplitude(a_plus: f64, a_minus: f64, grid: &Grid1D) -> Result<TwoPhotonAmplitude> {
    DoubleGaussian { a_plus, a_minus }.validate()?;
    if grid.x_span() < 5.0 * a_plus {
        return Err(Error::config(
            "grid",
            format!(
                "position grid reaches ±{:.4e} m but the double-Gaussian needs ±5 a_plus = ±{:.4e} m",
                grid.x_span(),
                5.0 * a_plus
            ),
        ));
    }
    let x = grid.positions();
    let n = grid.n();
    let cp = 1.0 / (4.0 * a_plus * a_plus);
    let cm = 1.0 / (4.0 * a_minus * a_minus);
    let values = Array2::from_shape_fn((n, n), |(j, k)| {
        let s = x[j] + x[k];
        let d = x[j] - x[k];
        Complex64::new((-cp * s * s - cm * d * d).exp(), 0.0)
    });
    let mut psi = TwoPhotonAmplitude {
        grid: *grid,
        values,
        representation: Representation::Position,
    };
    psi.normalize()?;
    Ok(psi)
}
