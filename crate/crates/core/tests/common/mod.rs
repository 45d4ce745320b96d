//! Oracles shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

use freqtime::channel::{spawn_fading, FadingConfig, TdlModel, TdlProfile};
use freqtime::estimators::{EstimatorModel, FreqTimeConfig, Variant};
use freqtime::nn::mse_loss;
use ndarray::{Array1, Array4};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `J0(x) = (1/pi) * integral_0^pi cos(x sin t) dt` by composite Simpson.
pub fn bessel_j0(x: f64) -> f64 {
    let n = 2000;
    let h = PI / n as f64;
    let f = |t: f64| (x * t.sin()).cos();
    let mut acc = f(0.0) + f(PI);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * h);
    }
    acc * h / 3.0 / PI
}

/// Mean `|g_l|^2` per tap over `draws` independent (seed, time) pairs.
pub fn empirical_tap_powers(profile: &TdlProfile, draws: usize, doppler_hz: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = vec![0.0; profile.tap_count()];
    for _ in 0..draws {
        let cfg = FadingConfig::new(100e-9, doppler_hz, rng.random());
        let t = rng.random_range(0.0..1.0);
        let g = spawn_fading(profile, &cfg).unwrap().tap_gains(t);
        for (a, x) in acc.iter_mut().zip(&g.gains) {
            *a += x.norm_sqr();
        }
    }
    acc.iter().map(|a| a / draws as f64).collect()
}

/// Normalized ensemble autocorrelation `E[g(t) g*(t+lag)] / E|g|^2` of the
/// first tap, for each lag.
pub fn ensemble_autocorrelation(
    profile: &TdlProfile,
    doppler_hz: f64,
    lags_s: &[f64],
    draws: usize,
    seed: u64,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut corr = vec![Complex64::new(0.0, 0.0); lags_s.len()];
    let mut power = 0.0;
    for _ in 0..draws {
        let cfg = FadingConfig::new(0.0, doppler_hz, rng.random());
        let process = spawn_fading(profile, &cfg).unwrap();
        let t0 = rng.random_range(0.0..10.0);
        let g0 = process.tap_gains(t0).gains[0];
        power += g0.norm_sqr();
        for (c, lag) in corr.iter_mut().zip(lags_s) {
            *c += g0 * process.tap_gains(t0 + lag).gains[0].conj();
        }
    }
    corr.iter().map(|c| c.re / power).collect()
}

pub fn nlos_single_tap() -> TdlProfile {
    freqtime::channel::parse_pdp(TdlModel::A, "0.0 0.0\n").unwrap()
}

pub const H: f64 = 1e-5;
pub const TOL: f64 = 1e-5;
/// Gradient components smaller than this are compared on an absolute scale.
pub const FLOOR: f64 = 1e-6;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

pub fn reduced_config() -> FreqTimeConfig {
    FreqTimeConfig {
        n_p_t: 2,
        n_p_f: 12,
        n_t: 14,
        n_f: 24,
        l_group: 12,
        ..FreqTimeConfig::default()
    }
}

pub struct Fixture {
    pub obs: Array4<f64>,
    pub snr: Array1<f64>,
    pub target: Array4<f64>,
}

pub fn fixture(c: &FreqTimeConfig, batch: usize, seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Fixture {
        obs: Array4::from_shape_fn((batch, c.n_p_t, c.n_p_f, 2), |_| rng.random_range(-1.0..1.0)),
        snr: Array1::from_shape_fn(batch, |_| 10f64.powf(rng.random_range(0.0..2.0))),
        target: Array4::from_shape_fn((batch, c.n_t, c.n_f, 2), |_| rng.random_range(-1.0..1.0)),
    }
}

/// Loss evaluated independently of the library's loss helper.
pub fn loss(m: &EstimatorModel, obs: &Array4<f64>, fx: &Fixture) -> f64 {
    let out = m.forward_batch(obs.view(), fx.snr.view()).unwrap();
    out.iter().zip(&fx.target).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / out.len() as f64
}

pub fn outputs(m: &EstimatorModel, obs: &Array4<f64>, fx: &Fixture) -> Array4<f64> {
    m.forward_batch(obs.view(), fx.snr.view()).unwrap()
}

/// `(L(+h) - L(-h)) / 2h` for the MSE against `target`, using
/// `(a - t)^2 - (b - t)^2 = (a - b)(a + b - 2t)` so the two loss sums are
/// never subtracted.
pub fn mse_central_difference(plus: &Array4<f64>, minus: &Array4<f64>, target: &Array4<f64>) -> f64 {
    let diff: f64 = plus
        .iter()
        .zip(minus)
        .zip(target)
        .map(|((a, b), t)| (a - b) * (a + b - 2.0 * t))
        .sum();
    diff / plus.len() as f64 / (2.0 * H)
}

/// Worst relative error over every parameter and every input element.
pub fn worst_gradient_errors(variant: Variant) -> (f64, f64) {
    let c = reduced_config();
    let mut model = EstimatorModel::new(variant, c.clone(), 21).unwrap();
    // Non-zero biases so every code path carries gradient.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for s in model.param_slices_mut() {
        if s.len() <= 64 {
            s.iter_mut().for_each(|v| *v = rng.random_range(-0.2..0.2));
        }
    }
    let fx = fixture(&c, 3, 9);

    let (out, cache) = model.forward_train(fx.obs.view(), fx.snr.view()).unwrap();
    let (l0, upstream) = mse_loss(out.view(), fx.target.view()).unwrap();
    assert!((l0 - loss(&model, &fx.obs, &fx)).abs() < 1e-14);
    let (grads, d_obs) = model.backward(&cache, upstream.view()).unwrap();

    let analytic: Vec<f64> = grads.param_slices().into_iter().flatten().copied().collect();
    assert_eq!(analytic.len(), model.param_count());
    let mut worst = 0.0f64;
    let mut idx = 0;
    for t in 0..model.param_slices().len() {
        for i in 0..model.param_slices()[t].len() {
            let orig = model.param_slices()[t][i];
            model.param_slices_mut()[t][i] = orig + H;
            let yp = outputs(&model, &fx.obs, &fx);
            model.param_slices_mut()[t][i] = orig - H;
            let ym = outputs(&model, &fx.obs, &fx);
            model.param_slices_mut()[t][i] = orig;
            let numeric = mse_central_difference(&yp, &ym, &fx.target);
            worst = worst.max(rel_err(analytic[idx], numeric));
            idx += 1;
        }
    }

    let mut worst_in = 0.0f64;
    let mut obs = fx.obs.clone();
    for i in 0..obs.len() {
        let orig = obs.as_slice().unwrap()[i];
        obs.as_slice_mut().unwrap()[i] = orig + H;
        let yp = outputs(&model, &obs, &fx);
        obs.as_slice_mut().unwrap()[i] = orig - H;
        let ym = outputs(&model, &obs, &fx);
        obs.as_slice_mut().unwrap()[i] = orig;
        let numeric = mse_central_difference(&yp, &ym, &fx.target);
        worst_in = worst_in.max(rel_err(d_obs.as_slice().unwrap()[i], numeric));
    }
    (worst, worst_in)
}

#[test]
fn j0_oracle_matches_tabulated_values() {
    // Abramowitz & Stegun table 9.1.
    assert!((bessel_j0(0.0) - 1.0).abs() < 1e-12);
    assert!((bessel_j0(1.0) - 0.765_197_686_6).abs() < 1e-9);
    assert!((bessel_j0(2.404_825_557_7)).abs() < 1e-9);
    assert!((bessel_j0(5.0) + 0.177_596_771_3).abs() < 1e-9);
}
