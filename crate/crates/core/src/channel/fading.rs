use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::profile::TdlProfile;
use crate::error::{Error, Result};
use crate::seed::{rng_for, stream};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const DEFAULT_SINUSOIDS: usize = 64;

/// Maximum Doppler shift `v * f_c / c` for a speed in km/h.
pub fn doppler_from_speed(speed_kmh: f64, carrier_hz: f64) -> Result<f64> {
    if !(speed_kmh >= 0.0) || !speed_kmh.is_finite() {
        return Err(Error::invalid(format!("speed must be >= 0 km/h, got {speed_kmh}")));
    }
    if !(carrier_hz > 0.0) || !carrier_hz.is_finite() {
        return Err(Error::invalid(format!("carrier must be > 0 Hz, got {carrier_hz}")));
    }
    Ok(speed_kmh / 3.6 * carrier_hz / SPEED_OF_LIGHT)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FadingConfig {
    pub delay_spread_s: f64,
    pub doppler_hz: f64,
    pub seed: u64,
    pub n_sinusoids: usize,
}

impl FadingConfig {
    pub fn new(delay_spread_s: f64, doppler_hz: f64, seed: u64) -> Self {
        Self {
            delay_spread_s,
            doppler_hz,
            seed,
            n_sinusoids: DEFAULT_SINUSOIDS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delay_spread_s >= 0.0) || !self.delay_spread_s.is_finite() {
            return Err(Error::invalid(format!(
                "delay spread must be >= 0, got {}",
                self.delay_spread_s
            )));
        }
        if !(self.doppler_hz >= 0.0) || !self.doppler_hz.is_finite() {
            return Err(Error::invalid(format!("Doppler must be >= 0, got {}", self.doppler_hz)));
        }
        if self.n_sinusoids < 8 {
            return Err(Error::invalid(format!(
                "need at least 8 sinusoids, got {}",
                self.n_sinusoids
            )));
        }
        Ok(())
    }
}

/// Complex gains of every tap at one instant, scaled by the tap amplitude so
/// that `E|g_l|^2` equals the tap's linear power.
#[derive(Clone, Debug, PartialEq)]
pub struct TapGains {
    pub gains: Vec<Complex64>,
    pub time_s: f64,
}

#[derive(Clone, Debug)]
struct TapOscillator {
    /// Specular component: amplitude, Doppler (Hz) and initial phase.
    los: Option<(f64, f64, f64)>,
    diffuse_amplitude: f64,
    /// Per-sinusoid Doppler frequency `f_d cos(alpha_n)` and phase.
    freqs: Vec<f64>,
    phases: Vec<f64>,
}

impl TapOscillator {
    fn eval(&self, t: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (f, phi) in self.freqs.iter().zip(&self.phases) {
            acc += Complex64::from_polar(1.0, TAU * f * t + phi);
        }
        let mut g = acc * self.diffuse_amplitude;
        if let Some((amp, fd, phi)) = self.los {
            g += Complex64::from_polar(amp, TAU * fd * t + phi);
        }
        g
    }
}

/// A seeded, immutable fading realization. Evaluation is a pure function of
/// time, so it can be sampled in any order and from several threads.
#[derive(Clone, Debug)]
pub struct FadingProcess {
    taps: Vec<TapOscillator>,
}

/// Builds one sum-of-sinusoids oscillator per tap.
///
/// Arrival angles are equally spaced with a common random rotation,
/// `alpha_n = 2*pi*(n + theta)/N`, and each sinusoid gets an independent
/// uniform phase. Averaged over the rotation, the autocorrelation is exactly
/// `J0(2*pi*f_d*tau)`. A Rician tap adds a specular phasor at the full
/// Doppler shift (arrival angle 0) carrying `K/(K+1)` of the tap power.
pub fn spawn_fading(profile: &TdlProfile, config: &FadingConfig) -> Result<FadingProcess> {
    config.validate()?;
    let n = config.n_sinusoids;
    let k_factor = profile.rician_k();
    let taps = profile
        .taps()
        .iter()
        .enumerate()
        .map(|(l, tap)| {
            let mut rng = rng_for(config.seed, stream::TAP, l as u64);
            let power = tap.linear_power();
            let (specular, diffuse) = match (l, k_factor) {
                (0, Some(k)) if k.is_infinite() => (power, 0.0),
                (0, Some(k)) => (power * k / (k + 1.0), power / (k + 1.0)),
                _ => (0.0, power),
            };
            let theta: f64 = rng.random();
            let freqs = (0..n)
                .map(|i| config.doppler_hz * (TAU * (i as f64 + theta) / n as f64).cos())
                .collect();
            let phases = (0..n).map(|_| TAU * rng.random::<f64>()).collect();
            let los_phase = TAU * rng.random::<f64>();
            TapOscillator {
                los: (specular > 0.0).then(|| (specular.sqrt(), config.doppler_hz, los_phase)),
                diffuse_amplitude: (diffuse / n as f64).sqrt(),
                freqs,
                phases,
            }
        })
        .collect();
    Ok(FadingProcess { taps })
}

impl FadingProcess {
    pub fn tap_count(&self) -> usize {
        self.taps.len()
    }

    pub fn tap_gains(&self, time_s: f64) -> TapGains {
        TapGains {
            gains: self.taps.iter().map(|tap| tap.eval(time_s)).collect(),
            time_s,
        }
    }
}

/// `H(f) = sum_l a_l exp(-j 2 pi f tau_l)` with `tau_l` the normalized delay
/// scaled by the configured delay spread.
pub fn freq_response(
    gains: &TapGains,
    profile: &TdlProfile,
    config: &FadingConfig,
    subcarrier_hz: &[f64],
) -> Result<Vec<Complex64>> {
    if subcarrier_hz.is_empty() {
        return Err(Error::invalid("no subcarrier frequencies"));
    }
    if gains.gains.len() != profile.tap_count() {
        return Err(Error::dims(
            "freq_response taps",
            profile.tap_count(),
            gains.gains.len(),
        ));
    }
    let delays = profile.delays_s(config.delay_spread_s);
    Ok(subcarrier_hz
        .iter()
        .map(|&f| {
            gains
                .gains
                .iter()
                .zip(&delays)
                .map(|(a, tau)| a * Complex64::from_polar(1.0, -TAU * f * tau))
                .sum()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::super::profile::{load_profile, Tap, TdlModel};
    use super::*;

    fn single_tap(model: TdlModel, k_db: Option<f64>) -> TdlProfile {
        TdlProfile::new(
            model,
            vec![Tap {
                normalized_delay: 0.0,
                power_db: 0.0,
                rician_k_db: k_db,
            }],
        )
        .unwrap()
    }

    #[test]
    fn doppler_examples() {
        assert_eq!(doppler_from_speed(0.0, 3.5e9).unwrap(), 0.0);
        let fd50 = doppler_from_speed(50.0, 3.5e9).unwrap();
        assert!((fd50 - 162.15).abs() < 0.01, "{fd50}");
        let fd3 = doppler_from_speed(3.0, 3.5e9).unwrap();
        assert!((fd3 - 9.73).abs() < 0.01, "{fd3}");
        assert!(doppler_from_speed(-1.0, 3.5e9).is_err());
        assert!(doppler_from_speed(1.0, 0.0).is_err());
    }

    #[test]
    fn zero_doppler_freezes_gains() {
        let p = load_profile(TdlModel::C).unwrap();
        let fp = spawn_fading(&p, &FadingConfig::new(100e-9, 0.0, 5)).unwrap();
        let g0 = fp.tap_gains(0.0);
        let g1 = fp.tap_gains(0.37);
        assert_eq!(g0.gains, g1.gains);
    }

    #[test]
    fn same_seed_same_process() {
        let p = load_profile(TdlModel::E).unwrap();
        let cfg = FadingConfig::new(30e-9, 160.0, 99);
        let a = spawn_fading(&p, &cfg).unwrap();
        let b = spawn_fading(&p, &cfg).unwrap();
        for t in [0.0, 1e-3, 0.25] {
            assert_eq!(a.tap_gains(t), b.tap_gains(t));
        }
        let c = spawn_fading(&p, &FadingConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(a.tap_gains(0.0), c.tap_gains(0.0));
    }

    #[test]
    fn evaluation_order_is_irrelevant() {
        let p = load_profile(TdlModel::A).unwrap();
        let fp = spawn_fading(&p, &FadingConfig::new(300e-9, 100.0, 1)).unwrap();
        let late = fp.tap_gains(0.5);
        let early = fp.tap_gains(0.01);
        assert_eq!(fp.tap_gains(0.01), early);
        assert_eq!(fp.tap_gains(0.5), late);
    }

    #[test]
    fn pure_los_tap_has_unit_modulus() {
        let p = single_tap(TdlModel::D, Some(f64::INFINITY));
        let fp = spawn_fading(&p, &FadingConfig::new(0.0, 150.0, 3)).unwrap();
        for i in 0..100 {
            let g = fp.tap_gains(i as f64 * 1.3e-4).gains[0];
            assert!((g.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_single_tap_response() {
        let p = single_tap(TdlModel::A, None);
        let cfg = FadingConfig::new(100e-9, 0.0, 0);
        let g = Complex64::new(0.3, -0.8);
        let gains = TapGains {
            gains: vec![g],
            time_s: 0.0,
        };
        let freqs: Vec<f64> = (0..12).map(|i| i as f64 * 15e3).collect();
        let h = freq_response(&gains, &p, &cfg, &freqs).unwrap();
        assert!(h.iter().all(|&x| x == g));
    }

    #[test]
    fn taps_one_symbol_apart_realign() {
        let df = 15e3;
        let tap = |d: f64| Tap {
            normalized_delay: d,
            power_db: 0.0,
            rician_k_db: None,
        };
        // Delay spread 1/df with normalized delays 0 and 1 puts the second
        // tap exactly one subcarrier period later.
        let p = TdlProfile::new(TdlModel::A, vec![tap(0.0), tap(1.0)]).unwrap();
        let cfg = FadingConfig::new(1.0 / df, 0.0, 0);
        let a = Complex64::new(0.6, 0.2);
        let gains = TapGains {
            gains: vec![a, a],
            time_s: 0.0,
        };
        let freqs: Vec<f64> = (0..24).map(|n| n as f64 * df).collect();
        for h in freq_response(&gains, &p, &cfg, &freqs).unwrap() {
            assert!((h - 2.0 * a).norm() < 1e-12, "{h}");
        }
    }

    #[test]
    fn zero_delay_spread_is_flat() {
        let p = load_profile(TdlModel::B).unwrap();
        let cfg = FadingConfig::new(0.0, 50.0, 11);
        let gains = spawn_fading(&p, &cfg).unwrap().tap_gains(2e-4);
        let freqs: Vec<f64> = (0..96).map(|n| n as f64 * 15e3).collect();
        let h = freq_response(&gains, &p, &cfg, &freqs).unwrap();
        assert!(h.iter().all(|&x| x == h[0]));
    }

    #[test]
    fn rejects_bad_config() {
        let p = load_profile(TdlModel::A).unwrap();
        assert!(spawn_fading(&p, &FadingConfig::new(-1.0, 0.0, 0)).is_err());
        assert!(spawn_fading(&p, &FadingConfig::new(0.0, -1.0, 0)).is_err());
        let few = FadingConfig {
            n_sinusoids: 4,
            ..FadingConfig::new(0.0, 0.0, 0)
        };
        assert!(spawn_fading(&p, &few).is_err());
        let gains = TapGains {
            gains: vec![],
            time_s: 0.0,
        };
        assert!(freq_response(&gains, &p, &FadingConfig::new(0.0, 0.0, 0), &[0.0]).is_err());
    }
}
