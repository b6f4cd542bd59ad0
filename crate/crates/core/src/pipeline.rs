//! End-to-end chain used by the commands and the examples: amplitude, reduced
//! state, frames, reconstruction, Schmidt decomposition and the brute-force
//! oracle it is checked against.

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::coherence::{partial_trace, CorrelationMatrix};
use crate::config::{RunConfig, Source};
use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::interferometer::{simulate_arm, simulate_frame, AxisField, InterferometerConfig};
use crate::interp::Uniform1;
use crate::linalg;
use crate::reconstruct::FrameSet;
use crate::schmidt::{fidelity, AxisSpectrum};
use crate::spdc::{double_gaussian_amplitude, momentum_amplitude, to_position, TwoPhotonAmplitude};

/// Position-space two-photon amplitude selected by the configuration.
pub fn two_photon_amplitude(cfg: &RunConfig) -> Result<TwoPhotonAmplitude> {
    match cfg.source {
        Source::Spdc => to_position(&momentum_amplitude(&cfg.spdc, &cfg.grid)?),
        Source::DoubleGaussian { a_plus, a_minus } => double_gaussian_amplitude(a_plus, a_minus, &cfg.grid),
    }
}

/// Per-axis cross-spectral density of the configured source. Both transverse
/// axes share it.
pub fn forward_w(cfg: &RunConfig) -> Result<CorrelationMatrix> {
    partial_trace(&two_photon_amplitude(cfg)?)
}

/// The three frames for one acquisition.
pub fn simulate_frames(fx: &dyn AxisField, fy: &dyn AxisField, cfg: &InterferometerConfig) -> Result<FrameSet> {
    let pi4 = std::f64::consts::FRAC_PI_4;
    let (bright, (dark, arm)) = rayon::join(
        || simulate_frame(fx, fy, &cfg.with_phase(pi4)),
        || {
            rayon::join(
                || simulate_frame(fx, fy, &cfg.with_phase(0.0)),
                || simulate_arm(fx, fy, &cfg.without_beam_splitter()),
            )
        },
    );
    Ok(FrameSet {
        bright: bright?,
        dark: dark?,
        arm: arm?,
    })
}

/// Schmidt decomposition of a sampled amplitude by direct SVD.
#[derive(Debug, Clone)]
pub struct Oracle {
    pub grid: Grid1D,
    /// Squared singular values of `ψ dx`, summing to 1 over all `n`.
    pub lambdas: Array1<f64>,
    /// Column `i` is the signal mode `φ_i` with `Σ φ_i² dx = 1`.
    pub modes: Array2<f64>,
}

/// `ψ(x, x') dx = Σ_i s_i u_i(x) v_i(x')`, so `λ_i = s_i²` and
/// `φ_i = u_i / sqrt(dx)`. Keeps the leading `k` modes (all eigenvalues).
pub fn oracle(psi: &TwoPhotonAmplitude, k: usize) -> Result<Oracle> {
    let dx = psi.grid.dx();
    let real = psi.real_part(crate::coherence::SYMMETRY_TOL)?;
    let (s, u, _) = linalg::svd(&real.mapv(|v| v * dx))?;
    let total: f64 = s.iter().map(|v| v * v).sum();
    if !(total > 0.0) {
        return Err(Error::NumericalGuard("amplitude is identically zero".into()));
    }
    let lambdas = s.mapv(|v| v * v / total);
    let k = k.min(u.ncols());
    let norm = 1.0 / dx.sqrt();
    let mut modes = Array2::zeros((u.nrows(), k));
    for i in 0..k {
        let col = u.column(i);
        let peak = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let sign = col.iter().find(|v| v.abs() > 1e-2 * peak).map_or(1.0, |v| v.signum());
        for j in 0..u.nrows() {
            modes[(j, i)] = sign * norm * col[j];
        }
    }
    Ok(Oracle {
        grid: psi.grid,
        lambdas,
        modes,
    })
}

impl Oracle {
    pub fn schmidt_number(&self) -> f64 {
        1.0 / self.lambdas.iter().map(|l| l * l).sum::<f64>()
    }

    /// Leading `k` eigenvalues renormalized to sum to one, matching what
    /// [`crate::schmidt::diagonalize`] keeps for the same `k`.
    pub fn truncated_lambdas(&self, k: usize) -> Array1<f64> {
        let kept = self.lambdas.slice(ndarray::s![..k.min(self.lambdas.len())]);
        let sum = kept.sum();
        kept.mapv(|l| l / sum)
    }

    /// Schmidt number of [`Oracle::truncated_lambdas`].
    pub fn truncated_schmidt_number(&self, k: usize) -> f64 {
        1.0 / self.truncated_lambdas(k).iter().map(|l| l * l).sum::<f64>()
    }

    /// Mode `i` interpolated onto `grid` (zero outside the oracle grid).
    pub fn mode_on(&self, i: usize, grid: &Grid1D) -> Array1<f64> {
        let f = Uniform1::new(self.modes.column(i), self.grid.first(), self.grid.dx());
        Array1::from_iter((0..grid.n()).map(|j| f.eval(grid.x(j)).unwrap_or(0.0)))
    }
}

/// Per-mode agreement between a reconstructed axis spectrum and the oracle.
#[derive(Debug, Clone, Serialize)]
pub struct ModeComparison {
    pub index: usize,
    pub lambda: f64,
    pub oracle_lambda: f64,
    pub relative_error: f64,
    pub fidelity: f64,
}

/// Compare the leading `count` modes, with oracle modes interpolated onto the
/// reconstruction grid and the oracle spectrum truncated to the same number of
/// modes as `spectrum`.
pub fn compare_with_oracle(spectrum: &AxisSpectrum, oracle: &Oracle, count: usize) -> Result<Vec<ModeComparison>> {
    let count = count.min(spectrum.len()).min(oracle.modes.ncols());
    let reference_lambdas = oracle.truncated_lambdas(spectrum.len());
    (0..count)
        .map(|i| {
            let reference = oracle.mode_on(i, &spectrum.grid);
            let f = fidelity(&spectrum.mode(i).to_vec(), reference.as_slice().expect("contiguous"))?;
            let (l, o) = (spectrum.lambdas[i], reference_lambdas[i]);
            Ok(ModeComparison {
                index: i,
                lambda: l,
                oracle_lambda: o,
                relative_error: (l - o).abs() / o,
                fidelity: f,
            })
        })
        .collect()
}
