//! Uniform transverse sampling grids and the centered Fourier transform.
//!
//! Every module shares one convention: an even number of samples `n`, spacing
//! `dx`, and points `x_k = (k - n/2) dx`. Index `n/2` is the origin, so moving
//! between "centered" and FFT order is a rotation by `n/2` in both directions.
//! The conjugate grid has spacing `dq = 2π / (n dx)` and points
//! `q_k = (k - n/2) dq`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform 1D sampling grid with an implied conjugate momentum grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid1D {
    n: usize,
    dx: f64,
}

/// Unvalidated grid description, as it appears in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    pub dx: f64,
}

impl TryFrom<GridSpec> for Grid1D {
    type Error = Error;

    fn try_from(spec: GridSpec) -> Result<Self> {
        Grid1D::new(spec.n, spec.dx)
    }
}

impl From<Grid1D> for GridSpec {
    fn from(grid: Grid1D) -> Self {
        GridSpec {
            n: grid.n,
            dx: grid.dx,
        }
    }
}

impl Grid1D {
    pub fn new(n: usize, dx: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::config("grid.n", format!("need at least 2 samples, got {n}")));
        }
        if n % 2 != 0 {
            return Err(Error::config("grid.n", format!("sample count must be even, got {n}")));
        }
        if !(dx.is_finite() && dx > 0.0) {
            return Err(Error::config("grid.dx", format!("spacing must be positive, got {dx}")));
        }
        Ok(Grid1D { n, dx })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Conjugate (momentum) spacing, `2π / (n dx)`.
    #[inline]
    pub fn dq(&self) -> f64 {
        2.0 * PI / (self.n as f64 * self.dx)
    }

    #[inline]
    pub fn center_index(&self) -> usize {
        self.n / 2
    }

    #[inline]
    pub fn x(&self, k: usize) -> f64 {
        (k as f64 - (self.n / 2) as f64) * self.dx
    }

    #[inline]
    pub fn q(&self, k: usize) -> f64 {
        (k as f64 - (self.n / 2) as f64) * self.dq()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.x(k)).collect()
    }

    pub fn momenta(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.q(k)).collect()
    }

    /// Total window width `n dx`.
    pub fn extent(&self) -> f64 {
        self.n as f64 * self.dx
    }

    /// Largest |q| reached on both sides of the momentum grid.
    pub fn q_span(&self) -> f64 {
        ((self.n / 2) - 1) as f64 * self.dq()
    }

    /// Largest |x| reached on both sides of the position grid.
    pub fn x_span(&self) -> f64 {
        ((self.n / 2) - 1) as f64 * self.dx
    }

    pub fn first(&self) -> f64 {
        self.x(0)
    }

    pub fn last(&self) -> f64 {
        self.x(self.n - 1)
    }

    /// Fractional sample index of position `x` (not bounds-checked).
    #[inline]
    pub fn fractional_index(&self, x: f64) -> f64 {
        x / self.dx + (self.n / 2) as f64
    }
}

/// Planned centered unitary DFT of a fixed length.
///
/// `forward` computes `F_k = n^{-1/2} Σ_j f_j exp(-2πi (j - n/2)(k - n/2)/n)`,
/// `inverse` its adjoint. Physical scale factors live in [`fft_centered`].
#[derive(Clone)]
pub struct CenteredFft {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CenteredFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CenteredFft").field("n", &self.n).finish()
    }
}

impl CenteredFft {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        CenteredFft {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, data: &mut [Complex64]) -> Result<()> {
        self.apply(data, &self.forward)
    }

    pub fn inverse(&self, data: &mut [Complex64]) -> Result<()> {
        self.apply(data, &self.inverse)
    }

    fn apply(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) -> Result<()> {
        if data.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: data.len(),
            });
        }
        let half = self.n / 2;
        data.rotate_left(half);
        plan.process(data);
        data.rotate_left(half);
        let scale = 1.0 / (self.n as f64).sqrt();
        data.iter_mut().for_each(|v| *v *= scale);
        Ok(())
    }
}

/// Samples of the continuous transform `F(q) = (2π)^{-1/2} ∫ f(x) e^{-iqx} dx`
/// on the conjugate grid. With this scaling `Σ|f|² dx = Σ|F|² dq`.
pub fn fft_centered(grid: &Grid1D, field: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut out = field.to_vec();
    CenteredFft::new(grid.n()).forward(&mut out)?;
    let scale = (grid.dx() / grid.dq()).sqrt();
    out.iter_mut().for_each(|v| *v *= scale);
    Ok(out)
}

/// Inverse of [`fft_centered`].
pub fn ifft_centered(grid: &Grid1D, spectrum: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut out = spectrum.to_vec();
    CenteredFft::new(grid.n()).inverse(&mut out)?;
    let scale = (grid.dq() / grid.dx()).sqrt();
    out.iter_mut().for_each(|v| *v *= scale);
    Ok(out)
}
