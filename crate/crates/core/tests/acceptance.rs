//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Pass criterion numbers as arguments to run a subset,
//! e.g. `cargo test --test acceptance -- 1 2 3`.

mod common;

use std::f64::consts::TAU;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use freqtime::channel::{load_profile, TdlModel};
use freqtime::dataset::{build_dataset, build_split, realize, sample_scenario, MixConfig, ScenarioDraw, Split};
use freqtime::estimators::{complexity_report, EstimatorModel, FreqTimeConfig, Variant};
use freqtime::link::{GridConfig, PilotObservation};
use freqtime::seed::{rng_for, stream};
use freqtime::train::{evaluate_mse, train, InterpBaseline, TrainConfig};
use ndarray::Array3;
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_freqtime"))
}

// 1. Parameter counts of the default FreqTimeNet.
fn parameter_counts() -> Outcome {
    let c = FreqTimeConfig::default();
    let (p, t, f, l) = (c.n_p_f, c.n_p_t, c.n_f, c.l_group);
    let freq_closed = (2 * p) * (3 * p) + 3 * p + (3 * p) * (2 * f) + 2 * f;
    let time_in = 2 * t * l;
    let time_closed = time_in * time_in + time_in + time_in * (2 * c.n_t * l) + 2 * c.n_t * l;

    let model = EstimatorModel::new(Variant::FreqTime, c, 0).unwrap();
    let report = complexity_report(&model);
    let freq_block = model.freq_blocks[0].param_count();
    let time_block = model.time_blocks[0].param_count();

    let out = cli().args(["complexity", "--variant", "freqtime"]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    let cli_ok = out.status.success() && text.contains("total params: 102432");

    let pass = report.params == 102_432
        && model.param_count() == 102_432
        && freq_block == 41_808
        && freq_closed == 41_808
        && time_block == 18_816
        && time_closed == 18_816
        && model.freq_blocks.len() == 2
        && model.time_blocks.len() == 1
        && cli_ok;
    outcome(
        pass,
        format!(
            "total {} (want 102432), freq block {freq_block} (41808), time block {time_block} (18816), cli {}",
            report.params,
            if cli_ok { "ok" } else { "mismatch" }
        ),
    )
}

// 2. (2, 48, 2) -> (14, 96, 2) for both variants over random weights.
fn shape_contract() -> Outcome {
    let mut runner = TestRunner::new(PropConfig {
        cases: 24,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let strategy = (any::<u64>(), any::<u64>(), -5.0f64..30.0, prop::bool::ANY);
    let result = runner.run(&strategy, |(model_seed, input_seed, snr_db, atten)| {
        let variant = if atten {
            Variant::AttenFreqTime
        } else {
            Variant::FreqTime
        };
        let model = EstimatorModel::new(variant, FreqTimeConfig::default(), model_seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(input_seed);
        let obs = Array3::from_shape_fn((2, 48, 2), |_| rng.random_range(-3.0..3.0));
        let out = model.forward(&PilotObservation::new(obs, snr_db).unwrap()).unwrap();
        prop_assert_eq!(out.dim(), (14, 96, 2));
        prop_assert!(out.iter().all(|v| v.is_finite()));
        Ok(())
    });
    match result {
        Ok(()) => outcome(true, "24 random weight/input draws, both variants"),
        Err(e) => outcome(false, format!("{e}")),
    }
}

// 3. End-to-end gradients against central differences.
fn gradient_oracle() -> Outcome {
    let (ft_p, ft_x) = common::worst_gradient_errors(Variant::FreqTime);
    let (at_p, at_x) = common::worst_gradient_errors(Variant::AttenFreqTime);
    let worst = ft_p.max(ft_x).max(at_p).max(at_x);
    outcome(
        worst < common::TOL,
        format!(
            "worst rel. error freqtime {:.2e}, atten {:.2e} (limit 1e-5)",
            ft_p.max(ft_x),
            at_p.max(at_x)
        ),
    )
}

// 4. Tap powers, Doppler autocorrelation, noiseless LS.
fn channel_statistics() -> Outcome {
    let draws = 100_000;
    let mut errors = Vec::new();
    for (i, model) in TdlModel::ALL.into_iter().enumerate() {
        let profile = load_profile(model).unwrap();
        let got = common::empirical_tap_powers(&profile, draws, 100.0, 40 + i as u64);
        for (l, (g, p)) in got.iter().zip(profile.linear_powers()).enumerate() {
            errors.push((g / p - 1.0, model, l));
        }
    }
    let mean_error = errors.iter().map(|e| e.0).sum::<f64>() / errors.len() as f64;
    let (worst_power, worst_model, worst_tap) = errors
        .iter()
        .map(|&(e, m, l)| (e.abs(), m, l))
        .fold((0.0, TdlModel::A, 0), |acc, x| if x.0 > acc.0 { x } else { acc });

    let fd = 100.0;
    let lags: Vec<f64> = (0..=20).map(|i| i as f64 * 0.05 / fd).collect();
    let corr = common::ensemble_autocorrelation(&common::nlos_single_tap(), fd, &lags, draws, 7);
    let worst_corr = lags
        .iter()
        .zip(&corr)
        .map(|(lag, r)| (r - common::bessel_j0(TAU * fd * lag)).abs())
        .fold(0.0, f64::max);

    let grid = GridConfig::default();
    let mut worst_ls = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for model in TdlModel::ALL {
        let draw = ScenarioDraw {
            model,
            delay_spread_ns: rng.random_range(0.0..300.0),
            speed_kmh: rng.random_range(0.0..50.0),
            snr_db: 10.0,
            sample_seed: rng.random(),
        };
        let (obs, h) = realize(&draw, &grid, 3.5e9, true).unwrap();
        let pattern = freqtime::link::pilot_pattern(&grid).unwrap();
        let truth = h.at_pilots(&pattern);
        for ((row, col), v) in truth.indexed_iter() {
            let d = (obs.h_p_ls[[row, col, 0]] - v.re)
                .abs()
                .max((obs.h_p_ls[[row, col, 1]] - v.im).abs());
            worst_ls = worst_ls.max(d);
        }
    }

    let pass = worst_power <= 0.01 && worst_corr <= 0.05 && worst_ls <= 1e-12;
    outcome(
        pass,
        format!(
            "(a) worst tap power error {:.3}% at {worst_model} tap {worst_tap} (limit 1%; {} taps, mean error {:+.3}%, per-tap standard error {:.2}%), (b) worst |R - J0| {worst_corr:.4} (limit 0.05), (c) noiseless LS error {worst_ls:.1e} (limit 1e-12)",
            100.0 * worst_power,
            errors.len(),
            100.0 * mean_error,
            100.0 / (draws as f64).sqrt()
        ),
    )
}

// 5. Model and SNR marginals of the mixed recipe.
fn mixture_marginals() -> Outcome {
    let mix = MixConfig::default();
    let mut rng = rng_for(99, stream::SCENARIO, 0);
    let n = 100_000;
    let mut models = [0usize; 5];
    let mut snrs = [0usize; 5];
    for _ in 0..n {
        let d = sample_scenario(&mut rng, &mix);
        models[d.model.index() as usize] += 1;
        snrs[mix.snr_grid_db.iter().position(|&s| s == d.snr_db).unwrap()] += 1;
    }
    let freq = |c: usize| c as f64 / n as f64;
    let worst = models
        .iter()
        .chain(&snrs)
        .map(|&c| (freq(c) - 0.2).abs())
        .fold(0.0, f64::max);
    outcome(
        worst <= 0.01,
        format!(
            "models {:?}, snrs {:?}, worst deviation {worst:.4} (limit 0.01)",
            models.map(freq),
            snrs.map(freq)
        ),
    )
}

// 6. Reduced-scale training ordering.
fn training_ordering() -> Outcome {
    let grid = GridConfig::default();
    let mix = MixConfig::default();
    let train_ds = build_dataset(20_000, &mix, &grid).unwrap();
    let test_ds = build_split(10_000, &mix, &grid, Split::Test).unwrap();
    let cfg = TrainConfig {
        epochs: 30,
        ..TrainConfig::default()
    };
    let net_cfg = FreqTimeConfig::from_grid(&grid, 12);

    let baseline = evaluate_mse(&InterpBaseline::new(&grid).unwrap(), &test_ds).unwrap();
    let mut reports = Vec::new();
    for variant in [Variant::FreqTime, Variant::AttenFreqTime] {
        let mut model = EstimatorModel::new(variant, net_cfg.clone(), 1).unwrap();
        train(&mut model, &train_ds, None, &cfg).unwrap();
        reports.push(evaluate_mse(&model, &test_ds).unwrap());
    }
    let (ft, at) = (&reports[0], &reports[1]);

    let mut lines = Vec::new();
    let mut beats_baseline = true;
    for (b, f) in baseline.bins.iter().zip(&ft.bins) {
        let (bm, fm) = (b.mse.unwrap(), f.mse.unwrap());
        beats_baseline &= fm < bm;
        lines.push(format!("{} dB: net {fm:.3e} vs LS+bilinear {bm:.3e}", b.snr_db));
    }
    let ratio = at.snr_averaged_mse() / ft.snr_averaged_mse();
    outcome(
        beats_baseline && ratio <= 1.05,
        format!(
            "[{}]; atten/freqtime SNR-avg MSE {:.3e}/{:.3e} = {ratio:.3} (limit 1.05)",
            lines.join("; "),
            at.snr_averaged_mse(),
            ft.snr_averaged_mse()
        ),
    )
}

fn pipeline(dir: &Path) -> Result<(), String> {
    let run = |args: &[&str]| -> Result<(), String> {
        let out = cli().current_dir(dir).args(args).output().map_err(|e| e.to_string())?;
        if out.status.success() {
            Ok(())
        } else {
            Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
        }
    };
    run(&["gen-data", "--samples", "300", "--seed", "17", "--out", "train.ftds"])?;
    run(&[
        "gen-data",
        "--samples",
        "100",
        "--seed",
        "17",
        "--split",
        "test",
        "--out",
        "test.ftds",
    ])?;
    run(&[
        "train",
        "--variant",
        "atten",
        "--data",
        "train.ftds",
        "--epochs",
        "2",
        "--batch",
        "32",
        "--seed",
        "5",
        "--threads",
        "2",
        "--quiet",
        "--out",
        "model.ftnn",
    ])?;
    run(&[
        "eval",
        "--model",
        "model.ftnn",
        "--data",
        "test.ftds",
        "--csv",
        "report.csv",
    ])
}

// 7. Byte-identical artifacts across two seeded runs.
fn determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        if let Err(e) = pipeline(dir) {
            return outcome(false, e);
        }
    }
    let same = |name: &str| std::fs::read(a.path().join(name)).unwrap() == std::fs::read(b.path().join(name)).unwrap();
    let files = ["train.ftds", "test.ftds", "model.ftnn", "report.csv"];
    let differing: Vec<&str> = files.iter().copied().filter(|f| !same(f)).collect();
    outcome(
        differing.is_empty(),
        if differing.is_empty() {
            "datasets, checkpoint and CSV byte-identical across runs".to_string()
        } else {
            format!("differing: {differing:?}")
        },
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 7] = [
        (1, "parameter count", parameter_counts),
        (2, "shape contract", shape_contract),
        (3, "gradient oracle", gradient_oracle),
        (4, "channel statistics", channel_statistics),
        (5, "mixed-data marginals", mixture_marginals),
        (6, "reduced-scale training ordering", training_ordering),
        (7, "determinism", determinism),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (id, name, check) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let status = if result.pass { "PASS" } else { "FAIL" };
        println!(
            "{status} criterion {id} ({name}, {:.1}s): {}",
            start.elapsed().as_secs_f64(),
            result.detail
        );
        if !result.pass {
            failures += 1;
        }
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
