//! Recovers the one-axis cross-spectral density from the frames and compares
//! it with the forward model on the analysis grid.
//!
//!     cargo run --release --example reconstruct_coherence

use spatial_schmidt::config::RunConfig;
use spatial_schmidt::pipeline::{forward_w, simulate_frames};
use spatial_schmidt::reconstruct::reconstruct;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RunConfig::default();
    let w = forward_w(&cfg)?;
    let frames = simulate_frames(&w, &w, &cfg.resolved_interferometer())?;
    let rec = reconstruct(&frames, &cfg.reconstruction)?;
    println!("arm centroid: ({:+.3e}, {:+.3e}) m", rec.centroid.0, rec.centroid.1);

    let x = &rec.x;
    let grid = x.w.grid;
    println!("analysis grid: n = {}, dx = {:.2} um", grid.n(), grid.dx() * 1e6);
    println!(
        "mu recovered over |delta| <= {:.1} um ({} of {} samples valid)",
        x.profile.symmetric_range() * 1e6,
        x.profile.valid_mask.iter().filter(|v| **v).count(),
        x.profile.delta.len()
    );
    println!("  delta [um]    mu");
    let c = x.profile.center_index().unwrap_or(0);
    for k in (c..x.profile.delta.len()).step_by(2).take(8) {
        println!("  {:9.2}  {:+.5}", x.profile.delta[k] * 1e6, x.profile.values[k]);
    }

    let truth = w.resample(&grid)?;
    let scale = truth.max_abs();
    let err = (&x.w.values - &truth.values).iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale;
    println!("max |W_rec - W_true| / max |W_true| = {err:.3e}");
    println!("trace of W_rec dx = {:.12}", x.w.trace_weight());
    Ok(())
}
