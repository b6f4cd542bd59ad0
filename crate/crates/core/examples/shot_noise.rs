//! Repeats the acquisition under Poisson shot noise and reports the spread of
//! the recovered Schmidt number and mode fidelities.
//!
//!     cargo run --release --example shot_noise [seeds] [counts_scale]

use spatial_schmidt::coherence::partial_trace;
use spatial_schmidt::config::RunConfig;
use spatial_schmidt::interferometer::NoiseModel;
use spatial_schmidt::pipeline::{compare_with_oracle, oracle, simulate_frames, two_photon_amplitude};
use spatial_schmidt::reconstruct::reconstruct;
use spatial_schmidt::schmidt::analyze;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().map_or(Ok(5), |s| s.parse())?;
    let counts: f64 = args.next().map_or(Ok(1e5), |s| s.parse())?;

    let mut cfg = RunConfig::default();
    cfg.interferometer.counts_scale = counts;
    let psi = two_photon_amplitude(&cfg)?;
    let w = partial_trace(&psi)?;
    let truth = oracle(&psi, 10)?;
    drop(psi);

    let clean = {
        let frames = simulate_frames(&w, &w, &cfg.interferometer)?;
        let rec = reconstruct(&frames, &cfg.reconstruction)?;
        analyze(&rec.x.w, &rec.y.w, &cfg.schmidt)?.schmidt_number
    };
    println!("noiseless K = {clean:.1} at {counts:.0} peak counts");

    cfg.interferometer.noise = NoiseModel::Poisson { seed: 0 };
    let mut mean_fidelity = vec![0.0; 10];
    let mut ks = Vec::new();
    for seed in 0..seeds {
        cfg.seed = seed;
        let frames = simulate_frames(&w, &w, &cfg.resolved_interferometer())?;
        let rec = reconstruct(&frames, &cfg.reconstruction)?;
        let res = analyze(&rec.x.w, &rec.y.w, &cfg.schmidt)?;
        for c in compare_with_oracle(&res.x, &truth, 10)? {
            mean_fidelity[c.index] += c.fidelity / seeds as f64;
        }
        println!(
            "seed {seed}: K = {:.1} ({:+.2}%), mu range {:.1} um, negativity {:.1e}",
            res.schmidt_number,
            100.0 * (res.schmidt_number / clean - 1.0),
            rec.x.profile.symmetric_range() * 1e6,
            res.negativity_budget()
        );
        ks.push(res.schmidt_number);
    }
    let mean = ks.iter().sum::<f64>() / ks.len() as f64;
    println!("mean K deviation {:+.3}%", 100.0 * (mean / clean - 1.0));
    println!("mean fidelity of the first ten x modes: {mean_fidelity:.4?}");
    Ok(())
}
