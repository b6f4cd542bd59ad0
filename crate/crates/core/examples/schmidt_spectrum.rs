//! Full chain from frames to the ranked two-dimensional Schmidt spectrum.
//!
//!     cargo run --release --example schmidt_spectrum

use spatial_schmidt::config::RunConfig;
use spatial_schmidt::pipeline::{forward_w, simulate_frames};
use spatial_schmidt::reconstruct::reconstruct;
use spatial_schmidt::schmidt::analyze;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RunConfig::default();
    let w = forward_w(&cfg)?;
    let frames = simulate_frames(&w, &w, &cfg.resolved_interferometer())?;
    let rec = reconstruct(&frames, &cfg.reconstruction)?;
    let res = analyze(&rec.x.w, &rec.y.w, &cfg.schmidt)?;

    println!("K_x = {:.2}, K_y = {:.2}, K = {:.1}", res.x.schmidt_number(), res.y.schmidt_number(), res.schmidt_number);
    println!(
        "negativity budget {:.2e}, weight beyond k_max = {}: {:.4}",
        res.negativity_budget(),
        cfg.schmidt.k_max,
        res.x.truncated_weight
    );
    println!("rank  (m, n)   lambda");
    for (rank, mode) in res.ranked.iter().take(12).enumerate() {
        println!("{rank:4}  ({:2}, {:2})  {:.4e}", mode.m, mode.n, mode.lambda);
    }

    // Mode n of a Hermite-like family changes sign n times across its support.
    for i in 0..6 {
        let m = res.x.mode(i);
        let peak = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let strong: Vec<f64> = m.iter().copied().filter(|v| v.abs() > 0.05 * peak).collect();
        let flips = strong.windows(2).filter(|p| p[0].signum() != p[1].signum()).count();
        println!("x mode {i}: lambda {:.4e}, {flips} sign changes", res.x.lambdas[i]);
    }

    let img = res.mode_2d(res.ranked[3].m, res.ranked[3].n);
    println!("2D mode at rank 3 is {} x {}", img.nrows(), img.ncols());
    Ok(())
}
