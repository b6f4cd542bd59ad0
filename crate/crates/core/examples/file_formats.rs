//! Round trips every on-disk format: PGM frames with sidecars, raw matrices,
//! mode stacks, PFM images and CSV tables.
//!
//!     cargo run --example file_formats

use ndarray::Array2;
use spatial_schmidt::coherence::CorrelationMatrix;
use spatial_schmidt::grid::Grid1D;
use spatial_schmidt::interferometer::{simulate_frame, AxisField, InterferometerConfig};
use spatial_schmidt::io;
use spatial_schmidt::reconstruct::FieldAxis;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let grid = Grid1D::new(128, 1e-6)?;
    let (w_i, sigma) = (15e-6, 4e-6);
    let values = Array2::from_shape_fn((128, 128), |(i, j)| {
        let (a, b) = (grid.x(i), grid.x(j));
        (-(a * a + b * b) / (w_i * w_i) - (a - b).powi(2) / (2.0 * sigma * sigma)).exp()
    });
    let w = CorrelationMatrix::normalized(grid, values)?;
    println!("W peak intensity {:.4e}", w.peak_intensity());

    let cam = InterferometerConfig {
        pixel_pitch: 1e-6,
        width: 96,
        height: 64,
        counts_scale: 2e5,
        ..Default::default()
    };
    let frame = simulate_frame(&w, &w, &cam)?;
    let stem = dir.path().join("bright");
    io::write_frame(&stem, &frame)?;
    let back = io::read_frame(&stem)?;
    let err = (&back.values - &frame.values).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    println!("frame above 16 bits: peak {:.0}, stored with power-of-two gain, max error {err:.3}", frame.max());
    println!("{}", std::fs::read_to_string(stem.with_extension("json"))?);

    let mstem = dir.path().join("w_x");
    io::write_matrix(&mstem, &w, FieldAxis::X)?;
    let (w2, axis) = io::read_matrix(&mstem)?;
    println!("matrix round trip exact: {} (axis {axis})", w2.values == w.values);

    let pfm = dir.path().join("w.pfm");
    io::write_pfm(&pfm, &w.values)?;
    let img = io::read_pfm(&pfm)?;
    let err = (&img - &w.values).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    println!("PFM keeps single precision: max error {err:.2e}");

    let table = io::csv_bytes(&["x", "intensity"], (0..4).map(|j| (grid.x(j), w.intensity()[j])))?;
    print!("{}", String::from_utf8(table)?);
    Ok(())
}
