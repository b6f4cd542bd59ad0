#![allow(dead_code)]

use std::sync::OnceLock;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use spatial_schmidt::coherence::{partial_trace, CorrelationMatrix};
use spatial_schmidt::config::RunConfig;
use spatial_schmidt::grid::{fft_centered, Grid1D};
use spatial_schmidt::interferometer::{AxisField, InterferometerConfig};
use spatial_schmidt::pipeline::{oracle, simulate_frames, two_photon_amplitude, Oracle};
use spatial_schmidt::reconstruct::{
    reconstruct, remap_mu, Extrapolation, FrameSet, MuProfile, Reconstruction, ReconstructionConfig,
};
use spatial_schmidt::schmidt::{analyze, AxisSpectrum, SchmidtConfig, SchmidtResult};

/// Gaussian Schell-model axis in closed form: `I(x) = exp(-2x²/w²)`,
/// `μ(x1, x2) = exp(-(x1 - x2)²/(2σ²))`.
pub struct GaussianSchell {
    pub grid: Grid1D,
    pub w: f64,
    pub sigma: f64,
}

impl GaussianSchell {
    pub fn new(w: f64, sigma: f64) -> Self {
        GaussianSchell {
            grid: Grid1D::new(2, w).expect("grid"),
            w,
            sigma,
        }
    }

    pub fn intensity(&self, x: f64) -> f64 {
        (-2.0 * x * x / (self.w * self.w)).exp()
    }

    pub fn cross(&self, a: f64, b: f64) -> f64 {
        (self.intensity(a) * self.intensity(b)).sqrt() * (-(a - b).powi(2) / (2.0 * self.sigma * self.sigma)).exp()
    }
}

impl AxisField for GaussianSchell {
    fn grid(&self) -> &Grid1D {
        &self.grid
    }
    fn intensity_at(&self, x: f64) -> Option<f64> {
        Some(self.intensity(x))
    }
    fn cross_at(&self, a: f64, b: f64) -> Option<f64> {
        Some(self.cross(a, b))
    }
    fn peak_intensity(&self) -> f64 {
        1.0
    }
}

/// Unit-pitch camera wide enough for the beam-splitter-removed image of a
/// Schell field of intensity width `w`.
pub fn schell_camera(w: f64, m: f64) -> InterferometerConfig {
    let half = (2.7 * m * w).ceil() as usize;
    InterferometerConfig {
        magnification: m,
        pixel_pitch: 1.0,
        width: 2 * half,
        height: 2 * half,
        ..Default::default()
    }
}

pub fn run_schell(w: f64, sigma: f64, m: f64) -> spatial_schmidt::error::Result<(Reconstruction, SchmidtResult)> {
    let field = GaussianSchell::new(w, sigma);
    let frames = simulate_frames(&field, &field, &schell_camera(w, m))?;
    let rec = reconstruct(&frames, &ReconstructionConfig::default())?;
    let k_max = rec.x.w.n().min(100);
    let cfg = SchmidtConfig {
        k_max,
        top_k: k_max,
        ..Default::default()
    };
    let res = analyze(&rec.x.w, &rec.y.w, &cfg)?;
    Ok((rec, res))
}

pub fn max_abs(a: impl IntoIterator<Item = f64>) -> f64 {
    a.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn orthonormality_error(s: &AxisSpectrum) -> f64 {
    let dx = s.grid.dx();
    let gram = s.modes.t().dot(&s.modes) * dx;
    max_abs(gram.indexed_iter().map(|((i, j), v)| v - if i == j { 1.0 } else { 0.0 }))
}

pub fn spectrum_sum_error(s: &AxisSpectrum) -> f64 {
    (s.lambdas.sum() - 1.0).abs()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if ok {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

/// Orthonormal modes, normalized spectrum and a small negativity budget on a
/// noiseless Schell-model acquisition.
pub fn check_schell_spectrum(w_over_sigma: f64, sigma: f64, m: f64) -> Result<(), TestCaseError> {
    let (_, res) = run_schell(w_over_sigma * sigma, sigma, m).map_err(|e| TestCaseError::fail(e.to_string()))?;
    for s in [&res.x, &res.y] {
        let o = orthonormality_error(s);
        ensure(o < 1e-8, || format!("orthonormality error {o:e}"))?;
        let e = spectrum_sum_error(s);
        ensure(e < 1e-9, || format!("spectrum sum error {e:e}"))?;
        ensure(s.negativity_budget < 0.01, || format!("negativity {}", s.negativity_budget))?;
    }
    Ok(())
}

pub fn schell_strategy() -> impl Strategy<Value = (f64, f64, f64)> {
    (6.0..12.0f64, 3.0..6.0f64, prop_oneof![Just(2.0), 1.5..3.0f64])
}

/// Remapped μ is exactly Toeplitz and symmetric, reads the profile at its
/// nodes, and is zero beyond the measured range.
pub fn check_toeplitz(profile: &MuProfile, grid: &Grid1D) -> Result<(), TestCaseError> {
    let mu = remap_mu(profile, grid, Extrapolation::Zero);
    let n = grid.n();
    for j in 0..n {
        for k in 0..n {
            ensure(mu[(j, k)].to_bits() == mu[(k, j)].to_bits(), || format!("asymmetric at ({j}, {k})"))?;
            if j + 1 < n && k + 1 < n {
                ensure(mu[(j, k)].to_bits() == mu[(j + 1, k + 1)].to_bits(), || {
                    format!("not Toeplitz at ({j}, {k})")
                })?;
            }
        }
    }
    let stride = (grid.dx() / profile.step()).round() as usize;
    let c = profile.center_index().expect("centered profile");
    let (lo, hi) = profile.valid_span().expect("valid center");
    for t in 0..n {
        let (plus, minus) = (c + stride * t, c as isize - (stride * t) as isize);
        let expected = match (plus <= hi, minus >= lo as isize) {
            (true, true) => 0.5 * (profile.values[plus] + profile.values[minus as usize]),
            (true, false) => profile.values[plus],
            (false, true) => profile.values[minus as usize],
            (false, false) => 0.0,
        };
        ensure((mu[(0, t)] - expected).abs() <= 1e-14, || {
            format!("lag {t}: {} vs {expected}", mu[(0, t)])
        })?;
    }
    Ok(())
}

/// Profile with `half` samples on each side of zero, a valid run of
/// `lo_valid`/`hi_valid` samples on each side, and an analysis grid whose
/// spacing is `stride` profile steps.
pub fn toeplitz_strategy() -> impl Strategy<Value = (MuProfile, Grid1D)> {
    (5usize..40, 0.05..3.0f64, 1usize..4, 2usize..24)
        .prop_flat_map(|(half, step, stride, n_half)| {
            let len = 2 * half + 1;
            (
                Just((half, step, stride, n_half)),
                proptest::collection::vec(-1.0..1.0f64, len),
                0..=half,
                0..=half,
            )
        })
        .prop_map(|((half, step, stride, n_half), values, lo_valid, hi_valid)| {
            let len = 2 * half + 1;
            let delta = Array1::from_iter((0..len).map(|k| (k as f64 - half as f64) * step));
            let mut values = Array1::from(values);
            values[half] = 1.0;
            let valid_mask = (0..len).map(|k| k + lo_valid >= half && k <= half + hi_valid).collect();
            let profile = MuProfile {
                noise: Array1::zeros(len),
                delta,
                values,
                valid_mask,
            };
            (profile, Grid1D::new(2 * n_half, step * stride as f64).expect("grid"))
        })
}

pub fn check_parseval(grid: &Grid1D, field: &[Complex64]) -> Result<(), TestCaseError> {
    let spectrum = fft_centered(grid, field).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let ex: f64 = field.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.dx();
    let eq: f64 = spectrum.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.dq();
    let rel = (eq / ex - 1.0).abs();
    ensure(rel < 1e-12, || format!("Parseval mismatch {rel:e} at n = {}", grid.n()))
}

pub fn parseval_strategy() -> impl Strategy<Value = (Grid1D, Vec<Complex64>)> {
    (1usize..=512, -7.0..1.0f64).prop_flat_map(|(half, log_dx)| {
        let grid = Grid1D::new(2 * half, 10f64.powf(log_dx)).expect("grid");
        let values = proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 2 * half)
            .prop_map(|v| v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect::<Vec<_>>());
        (Just(grid), values)
    })
}

/// Full width at `level · peak` by linear interpolation between samples.
pub fn width_at(values: &[f64], dx: f64, level: f64) -> f64 {
    let (peak_idx, peak) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let target = level * peak;
    let side = |step: isize| -> f64 {
        let mut i = peak_idx as isize;
        loop {
            let next = i + step;
            if next < 0 || next >= values.len() as isize {
                return (i - peak_idx as isize).unsigned_abs() as f64 * dx;
            }
            let (a, b) = (values[i as usize], values[next as usize]);
            if b <= target {
                let frac = (a - target) / (a - b);
                return ((i - peak_idx as isize).unsigned_abs() as f64 + frac) * dx;
            }
            i = next;
        }
    };
    side(-1) + side(1)
}

/// The default configuration carried through the whole chain once per test
/// binary.
pub struct DefaultRun {
    pub cfg: RunConfig,
    /// `|ψ(x, x)|²` on the field grid.
    pub diagonal: Vec<f64>,
    /// `|ψ(x, -x)|²` on the field grid (index `k` pairs with `n - k`).
    pub anti_diagonal: Vec<f64>,
    pub w: CorrelationMatrix,
    pub frames: FrameSet,
    pub rec: Reconstruction,
    pub res: SchmidtResult,
    /// Present when built with [`DefaultRun::with_oracle`].
    pub oracle: Option<Oracle>,
}

impl DefaultRun {
    pub fn build(cfg: RunConfig) -> DefaultRun {
        Self::with_oracle(cfg, None)
    }

    pub fn with_oracle(cfg: RunConfig, oracle_modes: Option<usize>) -> DefaultRun {
        let psi = two_photon_amplitude(&cfg).expect("amplitude");
        let oracle = oracle_modes.map(|k| oracle(&psi, k).expect("oracle"));
        let n = cfg.grid.n();
        let diagonal = (0..n).map(|k| psi.values[(k, k)].norm_sqr()).collect();
        let anti_diagonal = (0..n).map(|k| psi.values[(k, (n - k) % n)].norm_sqr()).collect();
        let w = partial_trace(&psi).expect("partial trace");
        drop(psi);
        let frames = simulate_frames(&w, &w, &cfg.resolved_interferometer()).expect("frames");
        let rec = reconstruct(&frames, &cfg.reconstruction).expect("reconstruction");
        let res = analyze(&rec.x.w, &rec.y.w, &cfg.schmidt).expect("schmidt");
        DefaultRun {
            cfg,
            diagonal,
            anti_diagonal,
            w,
            frames,
            rec,
            res,
            oracle,
        }
    }
}

pub fn default_run() -> &'static DefaultRun {
    static RUN: OnceLock<DefaultRun> = OnceLock::new();
    RUN.get_or_init(|| DefaultRun::build(RunConfig::default()))
}

/// Indices `[lo, hi)` of the central half of the span where `values` exceeds
/// `eps` times its peak.
pub fn inner_half(values: &[f64], eps: f64) -> (usize, usize) {
    let peak = max_abs(values.iter().copied());
    let on: Vec<usize> = (0..values.len()).filter(|&i| values[i] > eps * peak).collect();
    let (a, b) = (on[0], *on.last().expect("non-empty support"));
    let quarter = (b - a) / 4;
    (a + quarter, b - quarter + 1)
}

pub fn relative_max_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    max_abs((a - b).iter().copied()) / max_abs(b.iter().copied())
}
