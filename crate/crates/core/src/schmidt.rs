//! Coherent-mode decomposition of each axis and the tensor-product Schmidt
//! spectrum.
//!
//! The eigenfunctions of `W` solve `∫ W(x, x') φ(x') dx' = λ φ(x)`, which on a
//! uniform grid is the symmetric eigenproblem of `W dx`. For a separable field
//! the 2D modes are `φ_m(x) φ_n(y)` with weights `λ_m λ_n`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::coherence::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::linalg;

/// Tolerance on `Σλ = 1` for spectra handed to [`schmidt_number`].
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Relative amplitude above which a mode sample fixes the sign convention.
const SIGN_THRESHOLD: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClipPolicy {
    /// Largest acceptable `Σ|λ_neg| / Σλ_pos` before the run is rejected.
    pub max_negativity_budget: f64,
}

impl Default for ClipPolicy {
    fn default() -> Self {
        ClipPolicy {
            max_negativity_budget: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchmidtConfig {
    /// Modes kept per axis.
    pub k_max: usize,
    /// Entries of the ranked 2D spectrum to materialize.
    pub top_k: usize,
    pub clip_policy: ClipPolicy,
}

impl Default for SchmidtConfig {
    fn default() -> Self {
        SchmidtConfig {
            k_max: 100,
            top_k: 100,
            clip_policy: ClipPolicy::default(),
        }
    }
}

impl SchmidtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_max == 0 {
            return Err(Error::config("schmidt.k_max", "must be at least 1"));
        }
        if self.top_k == 0 {
            return Err(Error::config("schmidt.top_k", "must be at least 1"));
        }
        let b = self.clip_policy.max_negativity_budget;
        if !(b.is_finite() && b >= 0.0) {
            return Err(Error::config(
                "schmidt.clip_policy.max_negativity_budget",
                format!("must be non-negative, got {b}"),
            ));
        }
        Ok(())
    }
}

/// Eigen-decomposition of one axis.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisSpectrum {
    pub grid: Grid1D,
    /// Descending, summing to 1 over the kept modes.
    pub lambdas: Array1<f64>,
    /// Column `i` is `φ_i` sampled on `grid`, with `Σ φ_i² dx = 1`.
    pub modes: Array2<f64>,
    /// Weight of the clipped negative eigenvalues relative to the positive ones.
    pub negativity_budget: f64,
    /// Positive weight beyond the kept modes, relative to the total.
    pub truncated_weight: f64,
}

impl AxisSpectrum {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn mode(&self, i: usize) -> ndarray::ArrayView1<'_, f64> {
        self.modes.column(i)
    }

    pub fn schmidt_number(&self) -> f64 {
        1.0 / self.lambdas.iter().map(|l| l * l).sum::<f64>()
    }

    /// `Σ_i λ_i φ_i(x) φ_i(x')`.
    pub fn reassemble(&self) -> Array2<f64> {
        let n = self.grid.n();
        let scaled = Array2::from_shape_fn(self.modes.dim(), |(j, i)| self.modes[(j, i)] * self.lambdas[i]);
        let mut out = Array2::zeros((n, n));
        ndarray::linalg::general_mat_mul(1.0, &scaled, &self.modes.t(), 0.0, &mut out);
        out
    }
}

/// Leading `k_max` eigenpairs of the quadrature-weighted kernel `W dx`.
///
/// Negative eigenvalues are clipped to zero; the kept eigenvalues are
/// renormalized to sum to one. Each mode is signed so that its first sample
/// above 1% of its peak magnitude is positive.
pub fn diagonalize(w: &CorrelationMatrix, k_max: usize) -> Result<AxisSpectrum> {
    let n = w.n();
    if k_max == 0 || k_max > n {
        return Err(Error::config(
            "schmidt.k_max",
            format!("must lie in 1..={n} for this grid, got {k_max}"),
        ));
    }
    let dx = w.grid.dx();
    let scaled = w.values.mapv(|v| v * dx);
    let (values, vectors) = linalg::symmetric_eigen(&scaled)?;
    let positive: f64 = values.iter().filter(|v| **v > 0.0).sum();
    if !(positive > 0.0) {
        return Err(Error::NumericalGuard("correlation matrix has no positive eigenvalue".into()));
    }
    let negative = values.iter().filter(|v| **v < 0.0).fold(0.0, |acc, v| acc - v);
    let kept: Vec<f64> = values.iter().take(k_max).map(|v| v.max(0.0)).collect();
    let kept_sum: f64 = kept.iter().sum();
    let lambdas = Array1::from_iter(kept.iter().map(|v| v / kept_sum));
    let norm = 1.0 / dx.sqrt();
    let mut modes = Array2::zeros((n, k_max));
    for i in 0..k_max {
        let col = vectors.column(i);
        let peak = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let sign = col
            .iter()
            .find(|v| v.abs() > SIGN_THRESHOLD * peak)
            .map_or(1.0, |v| v.signum());
        for j in 0..n {
            modes[(j, i)] = sign * norm * col[j];
        }
    }
    Ok(AxisSpectrum {
        grid: w.grid,
        lambdas,
        modes,
        negativity_budget: negative / positive,
        truncated_weight: 1.0 - kept_sum / positive,
    })
}

/// One entry of the 2D spectrum `λ_mn = λ_m λ_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedMode {
    pub m: usize,
    pub n: usize,
    pub lambda: f64,
}

#[derive(PartialEq)]
struct Candidate(RankedMode);

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .lambda
            .total_cmp(&other.0.lambda)
            .then_with(|| (other.0.m, other.0.n).cmp(&(self.0.m, self.0.n)))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The `top_k` largest `λ_m λ_n`, descending, ties in lexicographic `(m, n)`
/// order. Requests beyond the number of products are truncated.
pub fn tensor_combine(x: &Array1<f64>, y: &Array1<f64>, top_k: usize) -> Vec<RankedMode> {
    let total = x.len() * y.len();
    if top_k > total {
        log::warn!("top_k = {top_k} exceeds the {total} available 2D modes; truncating");
    }
    let want = top_k.min(total);
    let mut out = Vec::with_capacity(want);
    if want == 0 {
        return out;
    }
    // Both spectra are descending, so (m, n) can only be needed after
    // (m - 1, n) and (m, n - 1). Pushing (m + 1, n) always and (m, n + 1) only
    // from the first column visits every cell once.
    let mut heap = BinaryHeap::new();
    let entry = |m: usize, n: usize| {
        Candidate(RankedMode {
            m,
            n,
            lambda: x[m] * y[n],
        })
    };
    heap.push(entry(0, 0));
    while out.len() < want {
        let Some(Candidate(top)) = heap.pop() else { break };
        out.push(top);
        if top.m + 1 < x.len() {
            heap.push(entry(top.m + 1, top.n));
        }
        if top.m == 0 && top.n + 1 < y.len() {
            heap.push(entry(0, top.n + 1));
        }
    }
    out
}

/// `φ_mn(x, y) = φ_m(x) φ_n(y)` with rows along `y`.
pub fn mode_2d(x: &AxisSpectrum, y: &AxisSpectrum, m: usize, n: usize) -> Array2<f64> {
    let fx = x.mode(m);
    let fy = y.mode(n);
    Array2::from_shape_fn((fy.len(), fx.len()), |(r, c)| fy[r] * fx[c])
}

fn check_spectrum(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(Error::DataContract("empty spectrum".into()));
    }
    if lambdas.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::DataContract("spectrum entries must be finite and non-negative".into()));
    }
    let sum: f64 = lambdas.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::DataContract(format!("spectrum is not normalized: Σλ = {sum}")));
    }
    Ok(())
}

/// `K = 1 / Σλ²` of a normalized spectrum.
pub fn schmidt_number(lambdas: &[f64]) -> Result<f64> {
    check_spectrum(lambdas)?;
    Ok(1.0 / lambdas.iter().map(|l| l * l).sum::<f64>())
}

/// `K` of the outer-product spectrum `λ_m λ_n`, as `K_x K_y`.
pub fn tensor_schmidt_number(x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(schmidt_number(x)? * schmidt_number(y)?)
}

/// Coefficient of determination of `candidate` against `reference`, with the
/// global sign of `candidate` chosen to maximize it.
pub fn fidelity(candidate: &[f64], reference: &[f64]) -> Result<f64> {
    if candidate.len() != reference.len() {
        return Err(Error::LengthMismatch {
            expected: reference.len(),
            actual: candidate.len(),
        });
    }
    let mean = reference.iter().sum::<f64>() / reference.len().max(1) as f64;
    let total: f64 = reference.iter().map(|r| (r - mean).powi(2)).sum();
    if !(total > 0.0) {
        return Err(Error::DataContract("fidelity reference has zero variance".into()));
    }
    let residual = |s: f64| -> f64 { candidate.iter().zip(reference).map(|(c, r)| (s * c - r).powi(2)).sum() };
    Ok(1.0 - residual(1.0).min(residual(-1.0)) / total)
}

/// Both axes diagonalized and combined.
#[derive(Debug, Clone)]
pub struct SchmidtResult {
    pub x: AxisSpectrum,
    pub y: AxisSpectrum,
    pub ranked: Vec<RankedMode>,
    pub schmidt_number: f64,
}

impl SchmidtResult {
    pub fn mode_2d(&self, m: usize, n: usize) -> Array2<f64> {
        mode_2d(&self.x, &self.y, m, n)
    }

    pub fn negativity_budget(&self) -> f64 {
        self.x.negativity_budget.max(self.y.negativity_budget)
    }
}

/// Diagonalize both axes concurrently and rank the 2D spectrum. Fails with a
/// numerical-guard error when either axis exceeds the negativity budget.
pub fn analyze(wx: &CorrelationMatrix, wy: &CorrelationMatrix, cfg: &SchmidtConfig) -> Result<SchmidtResult> {
    cfg.validate()?;
    let (x, y) = rayon::join(
        || diagonalize(wx, cfg.k_max.min(wx.n())),
        || diagonalize(wy, cfg.k_max.min(wy.n())),
    );
    let (x, y) = (x?, y?);
    for (axis, s) in [("x", &x), ("y", &y)] {
        if s.negativity_budget > cfg.clip_policy.max_negativity_budget {
            return Err(Error::NumericalGuard(format!(
                "{axis} axis negativity budget {:.3e} exceeds {:.3e}",
                s.negativity_budget, cfg.clip_policy.max_negativity_budget
            )));
        }
    }
    let ranked = tensor_combine(&x.lambdas, &y.lambdas, cfg.top_k);
    let k = tensor_schmidt_number(
        x.lambdas.as_slice().expect("contiguous"),
        y.lambdas.as_slice().expect("contiguous"),
    )?;
    Ok(SchmidtResult {
        x,
        y,
        ranked,
        schmidt_number: k,
    })
}
