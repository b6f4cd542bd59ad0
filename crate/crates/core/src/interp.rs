//! Catmull-Rom resampling on uniform grids.
//!
//! Evaluation points within `NODE_SNAP` (in units of the sample step) of a
//! node return that node's value exactly, so grids that are commensurate with
//! each other resample without interpolation error.

use ndarray::{ArrayView1, ArrayView2};

const NODE_SNAP: f64 = 1e-9;

/// Uniformly sampled 1D function: `values[k]` at `origin + k * step`.
#[derive(Debug, Clone, Copy)]
pub struct Uniform1<'a> {
    pub values: ArrayView1<'a, f64>,
    pub origin: f64,
    pub step: f64,
}

impl<'a> Uniform1<'a> {
    pub fn new(values: ArrayView1<'a, f64>, origin: f64, step: f64) -> Self {
        Uniform1 {
            values,
            origin,
            step,
        }
    }

    /// Interpolated value at `x`, `None` outside the sampled interval.
    pub fn eval(&self, x: f64) -> Option<f64> {
        let n = self.values.len();
        let (i, f) = locate(n, (x - self.origin) / self.step)?;
        if f == 0.0 {
            return Some(self.values[i]);
        }
        let at = |k: isize| self.values[k.clamp(0, n as isize - 1) as usize];
        let i = i as isize;
        Some(catmull_rom(at(i - 1), at(i), at(i + 1), at(i + 2), f))
    }
}

/// Uniformly sampled 2D function with the same step along both axes:
/// `values[(r, c)]` at `(row_origin + r * step, col_origin + c * step)`.
#[derive(Debug, Clone, Copy)]
pub struct Uniform2<'a> {
    pub values: ArrayView2<'a, f64>,
    pub row_origin: f64,
    pub col_origin: f64,
    pub step: f64,
}

impl<'a> Uniform2<'a> {
    /// Square sampling with a common origin on both axes.
    pub fn new(values: ArrayView2<'a, f64>, origin: f64, step: f64) -> Self {
        Self::with_origins(values, origin, origin, step)
    }

    pub fn with_origins(values: ArrayView2<'a, f64>, row_origin: f64, col_origin: f64, step: f64) -> Self {
        Uniform2 {
            values,
            row_origin,
            col_origin,
            step,
        }
    }

    /// Separable bicubic Catmull-Rom value at `(x_row, x_col)`.
    pub fn eval(&self, x_row: f64, x_col: f64) -> Option<f64> {
        let (nr, nc) = self.values.dim();
        let (ir, fr) = locate(nr, (x_row - self.row_origin) / self.step)?;
        let (ic, fc) = locate(nc, (x_col - self.col_origin) / self.step)?;
        let at = |r: isize, c: isize| {
            self.values[(
                r.clamp(0, nr as isize - 1) as usize,
                c.clamp(0, nc as isize - 1) as usize,
            )]
        };
        let (ir, ic) = (ir as isize, ic as isize);
        let row = |r: isize| {
            if fc == 0.0 {
                at(r, ic)
            } else {
                catmull_rom(at(r, ic - 1), at(r, ic), at(r, ic + 1), at(r, ic + 2), fc)
            }
        };
        if fr == 0.0 {
            return Some(row(ir));
        }
        Some(catmull_rom(row(ir - 1), row(ir), row(ir + 1), row(ir + 2), fr))
    }
}

/// Split a fractional index into a base node and offset in `[0, 1)`.
fn locate(n: usize, t: f64) -> Option<(usize, f64)> {
    if !t.is_finite() || n == 0 {
        return None;
    }
    let nearest = t.round();
    if (t - nearest).abs() <= NODE_SNAP {
        if nearest < 0.0 || nearest > (n - 1) as f64 {
            return None;
        }
        return Some((nearest as usize, 0.0));
    }
    if t < 0.0 || t > (n - 1) as f64 {
        return None;
    }
    let i = t.floor();
    Some((i as usize, t - i))
}

#[inline]
fn catmull_rom(p0: f64, p1: f64, p2: f64, p3: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    0.5 * (2.0 * p1
        + (p2 - p0) * t
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2
        + (3.0 * (p1 - p2) + p3 - p0) * t3)
}
