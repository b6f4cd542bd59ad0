//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit status if
//! any criterion fails.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use ndarray::Array2;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use spatial_schmidt::coherence::{factorize, partial_trace};
use spatial_schmidt::commands::PUBLISHED_SCHMIDT_NUMBER;
use spatial_schmidt::config::{RunConfig, Source};
use spatial_schmidt::grid::Grid1D;
use spatial_schmidt::interferometer::{simulate_frame, InterferometerConfig, NoiseModel};
use spatial_schmidt::pipeline::{compare_with_oracle, oracle, simulate_frames, two_photon_amplitude, Oracle};
use spatial_schmidt::reconstruct::{extract_w_antidiagonal, reconstruct, Reconstruction};
use spatial_schmidt::schmidt::{analyze, diagonalize, fidelity, tensor_combine, SchmidtResult};

type Verdict = Result<String, String>;

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct DoubleGaussianRun {
    oracle: Oracle,
    res: SchmidtResult,
    elapsed: Duration,
}

fn double_gaussian_run() -> DoubleGaussianRun {
    let start = Instant::now();
    let mut cfg = RunConfig {
        source: Source::DoubleGaussian {
            a_plus: 92e-6,
            a_minus: 23e-6,
        },
        grid: Grid1D::new(1024, 2.3e-6).unwrap(),
        ..RunConfig::default()
    };
    cfg.reconstruction.noise_gate = None;
    cfg.reconstruction.support_eps = 1e-20;
    let psi = two_photon_amplitude(&cfg).unwrap();
    let oracle = oracle(&psi, 30).unwrap();
    let w = partial_trace(&psi).unwrap();
    drop(psi);
    let frames = simulate_frames(&w, &w, &cfg.resolved_interferometer()).unwrap();
    let rec = reconstruct(&frames, &cfg.reconstruction).unwrap();
    let res = analyze(&rec.x.w, &rec.y.w, &cfg.schmidt).unwrap();
    DoubleGaussianRun {
        oracle,
        res,
        elapsed: start.elapsed(),
    }
}

fn criterion_1(dg: &DoubleGaussianRun) -> Verdict {
    let mut worst_err = 0.0f64;
    let mut worst_fid = 1.0f64;
    for axis in [&dg.res.x, &dg.res.y] {
        let cmp = compare_with_oracle(axis, &dg.oracle, 20).map_err(|e| e.to_string())?;
        worst_err = cmp.iter().map(|c| c.relative_error).fold(worst_err, f64::max);
        worst_fid = cmp.iter().take(11).map(|c| c.fidelity).fold(worst_fid, f64::min);
    }
    let secs = dg.elapsed.as_secs_f64();
    verdict(
        worst_err < 0.01 && worst_fid >= 0.99 && secs < 60.0,
        format!("max rel. error n<20 {worst_err:.2e}, min fidelity n<=10 {worst_fid:.6}, {secs:.1} s"),
    )
}

fn geometric_deviation(lambdas: &[f64]) -> f64 {
    let z = lambdas[1] / lambdas[0];
    (0..=10).map(|n| (lambdas[n + 1] / lambdas[n] - z).abs()).fold(0.0, f64::max)
}

fn criterion_2(dg: &DoubleGaussianRun) -> Verdict {
    let oracle_dev = geometric_deviation(dg.oracle.lambdas.as_slice().unwrap());
    let pipe_dev = geometric_deviation(dg.res.x.lambdas.as_slice().unwrap())
        .max(geometric_deviation(dg.res.y.lambdas.as_slice().unwrap()));
    verdict(
        oracle_dev < 1e-4 && pipe_dev < 1e-2,
        format!("oracle ratio spread {oracle_dev:.2e}, pipeline {pipe_dev:.2e}"),
    )
}

fn criterion_3(run: &DefaultRun) -> Verdict {
    let oracle = run.oracle.as_ref().expect("oracle requested");
    let k_oracle_full = oracle.schmidt_number().powi(2);
    let kx = run.res.x.len();
    let ky = run.res.y.len();
    let k_oracle_matched = oracle.truncated_schmidt_number(kx) * oracle.truncated_schmidt_number(ky);
    let k_pipe = run.res.schmidt_number;
    let matched = k_pipe / k_oracle_matched - 1.0;

    let n = run.rec.x.w.n();
    let fx = diagonalize(&run.rec.x.w, n).map_err(|e| e.to_string())?;
    let fy = diagonalize(&run.rec.y.w, n).map_err(|e| e.to_string())?;
    let k_pipe_full = fx.schmidt_number() * fy.schmidt_number();
    let full = k_pipe_full / k_oracle_full - 1.0;
    verdict(
        matched.abs() < 0.10 && full.abs() < 0.10,
        format!(
            "K {k_pipe:.1} vs oracle {k_oracle_matched:.1} at k_max = {kx} ({:+.2}%); all modes {k_pipe_full:.1} vs {k_oracle_full:.1} ({:+.2}%); published {PUBLISHED_SCHMIDT_NUMBER} for context",
            100.0 * matched,
            100.0 * full
        ),
    )
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let field = GaussianSchell::new(400e-6, 20e-6);
    let cam = InterferometerConfig::default();
    let f0 = simulate_frame(&field, &field, &cam.with_phase(0.0)).map_err(|e| e.to_string())?;
    let f8 = simulate_frame(&field, &field, &cam.with_phase(PI / 8.0)).map_err(|e| e.to_string())?;
    let f4 = simulate_frame(&field, &field, &cam.with_phase(PI / 4.0)).map_err(|e| e.to_string())?;
    let scale = cam.counts_scale;
    let mean = (&f0.values + &f4.values) / 2.0;
    let mean_dev = max_abs((&f8.values - &mean).iter().copied()) / scale;

    let (gx, gy) = (cam.grid_x(), cam.grid_y());
    let m = cam.magnification;
    let unit = scale / 4.0;
    let four_w = Array2::from_shape_fn((cam.height, cam.width), |(r, c)| {
        4.0 * field.cross(m * gx.x(c), gx.x(c) / m) * field.cross(m * gy.x(r), gy.x(r) / m)
    });
    let diff = (&f4.values - &f0.values) / unit;
    let diff_dev = max_abs((&diff - &four_w).iter().copied()) / max_abs(four_w.iter().copied());
    let anti = extract_w_antidiagonal(&f4, &f0).map_err(|e| e.to_string())?;
    let anti_dev = max_abs((&anti.values / unit * 4.0 - &four_w).iter().copied()) / max_abs(four_w.iter().copied());
    let secs = start.elapsed().as_secs_f64();
    verdict(
        mean_dev < 1e-12 && diff_dev < 1e-12 && anti_dev < 1e-12 && secs < 5.0,
        format!("pi/8 vs mean {mean_dev:.1e}, difference vs 4W {diff_dev:.1e}, extracted map {anti_dev:.1e}, {secs:.2} s"),
    )
}

fn criterion_5(run: &DefaultRun) -> Verdict {
    let mut cam = run.cfg.interferometer;
    cam.noise = NoiseModel::Poisson { seed: 1 };
    let frames = simulate_frames(&run.w, &run.w, &cam).map_err(|e| e.to_string())?;
    let solve = |g: f64| -> Result<(Reconstruction, SchmidtResult), String> {
        let rec = reconstruct(&frames.scaled(g), &run.cfg.reconstruction).map_err(|e| e.to_string())?;
        let res = analyze(&rec.x.w, &rec.y.w, &run.cfg.schmidt).map_err(|e| e.to_string())?;
        Ok((rec, res))
    };
    let (base_rec, base_res) = solve(1.0)?;
    let mut worst = 0.0f64;
    for g in [0.1, 1.0, 37.0] {
        let (rec, res) = solve(g)?;
        for (a, b) in [(&rec.x, &base_rec.x), (&rec.y, &base_rec.y)] {
            worst = worst.max(max_abs((&a.profile.values - &b.profile.values).iter().copied()));
            worst = worst.max(max_abs((&a.mu - &b.mu).iter().copied()));
            worst = worst.max(relative_max_diff(&a.w.values, &b.w.values));
        }
        for (a, b) in [(&res.x, &base_res.x), (&res.y, &base_res.y)] {
            worst = worst.max(max_abs((&a.lambdas - &b.lambdas).iter().copied()));
        }
        worst = worst.max((res.schmidt_number / base_res.schmidt_number - 1.0).abs());
    }
    verdict(worst < 1e-12, format!("largest change in mu, W, lambda, K over g in {{0.1, 1, 37}}: {worst:.1e}"))
}

fn criterion_6() -> Verdict {
    let start = Instant::now();
    let runner = |cases: u32| {
        TestRunner::new_with_rng(
            Config {
                cases,
                failure_persistence: None,
                ..Config::default()
            },
            TestRng::deterministic_rng(RngAlgorithm::ChaCha),
        )
    };
    runner(24)
        .run(&schell_strategy(), |(ratio, sigma, m)| check_schell_spectrum(ratio, sigma, m))
        .map_err(|e| format!("orthonormality / normalization / negativity: {e}"))?;
    runner(128)
        .run(&toeplitz_strategy(), |(p, g)| check_toeplitz(&p, &g))
        .map_err(|e| format!("Toeplitz: {e}"))?;
    runner(128)
        .run(&parseval_strategy(), |(g, f)| check_parseval(&g, &f))
        .map_err(|e| format!("Parseval: {e}"))?;
    let secs = start.elapsed().as_secs_f64();
    verdict(secs < 120.0, format!("280 generated cases, {secs:.1} s"))
}

fn criterion_7(run: &DefaultRun) -> Verdict {
    let oracle = run.oracle.as_ref().expect("oracle requested");
    let k_clean = run.res.schmidt_number;
    let seeds = 5u64;
    let top: Vec<(usize, usize)> = tensor_combine(&oracle.truncated_lambdas(10), &oracle.truncated_lambdas(10), 10)
        .iter()
        .map(|r| (r.m, r.n))
        .collect();
    let oracle_modes: Vec<Vec<f64>> = (0..10).map(|i| oracle.mode_on(i, &run.rec.x.w.grid).to_vec()).collect();

    let mut dev = 0.0;
    let mut fid_1d = [0.0f64; 10];
    let mut fid_2d = [0.0f64; 10];
    for seed in 0..seeds {
        let mut cam = run.cfg.interferometer;
        cam.counts_scale = 1e5;
        cam.noise = NoiseModel::Poisson { seed };
        let frames = simulate_frames(&run.w, &run.w, &cam).map_err(|e| e.to_string())?;
        let rec = reconstruct(&frames, &run.cfg.reconstruction).map_err(|e| e.to_string())?;
        let res = analyze(&rec.x.w, &rec.y.w, &run.cfg.schmidt).map_err(|e| e.to_string())?;
        dev += (res.schmidt_number / k_clean - 1.0).abs() / seeds as f64;
        for spectrum in [&res.x, &res.y] {
            for c in compare_with_oracle(spectrum, oracle, 10).map_err(|e| e.to_string())? {
                fid_1d[c.index] += c.fidelity / (2 * seeds) as f64;
            }
        }
        for (i, &(m, n)) in top.iter().enumerate() {
            let got = res.mode_2d(m, n);
            let want: Vec<f64> = oracle_modes[n]
                .iter()
                .flat_map(|fy| oracle_modes[m].iter().map(move |fx| fy * fx))
                .collect();
            let f = fidelity(got.as_slice().unwrap(), &want).map_err(|e| e.to_string())?;
            fid_2d[i] += f / seeds as f64;
        }
    }
    let min_1d = fid_1d.iter().cloned().fold(1.0, f64::min);
    let min_2d = fid_2d.iter().cloned().fold(1.0, f64::min);
    verdict(
        dev < 0.05 && min_1d >= 0.97 && min_2d >= 0.97,
        format!(
            "mean |K/K0 - 1| {:.2}% over {seeds} seeds, min mean fidelity of top-10 axis modes {min_1d:.4}, of top-10 2D modes {min_2d:.4}",
            100.0 * dev
        ),
    )
}

fn criterion_8(run: &DefaultRun) -> Verdict {
    let f = factorize(&run.w, run.cfg.reconstruction.support_eps).map_err(|e| e.to_string())?;
    let h = f.homogeneity_report;
    let t = run.cfg.homogeneity;
    verdict(
        h.passes(&t),
        format!(
            "sum-coordinate variation {:.2e} (<= {}), width ratio {:.1} (>= {})",
            h.sum_coordinate_variation, t.max_sum_coordinate_variation, h.width_ratio, t.min_width_ratio
        ),
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |id: usize, name: &str, start: Instant, v: Verdict| {
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match v {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {id} {name}: {tag} ({detail}) [{secs:.1} s]");
    };

    let t = Instant::now();
    let dg = double_gaussian_run();
    report(1, "end-to-end oracle equivalence", t, criterion_1(&dg));
    let t = Instant::now();
    report(2, "geometric spectrum", t, criterion_2(&dg));

    let t = Instant::now();
    let defaults = DefaultRun::with_oracle(RunConfig::default(), Some(10));
    report(3, "default-parameter consistency band", t, criterion_3(&defaults));
    let t = Instant::now();
    report(4, "interferometer algebra", t, criterion_4());
    let t = Instant::now();
    report(5, "gain invariance", t, criterion_5(&defaults));
    let t = Instant::now();
    report(6, "invariant suite", t, criterion_6());
    let t = Instant::now();
    report(7, "noise robustness", t, criterion_7(&defaults));
    let t = Instant::now();
    report(8, "quasi-homogeneity diagnostic", t, criterion_8(&defaults));

    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
