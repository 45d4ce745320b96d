//! Mixed-scenario dataset construction.
//!
//! Every sample is a pure function of `(master_seed, split, index)`: the
//! scenario draw, fading realization, pilot symbols and noise all come from
//! seeds derived from that triple. Samples are generated in parallel and
//! collected in index order, so the result does not depend on worker count.

mod format;

use ndarray::{Array1, Array3, Array4, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{doppler_from_speed, load_profile, FadingConfig, TdlModel};
use crate::error::{Error, Result};
use crate::link::{
    channel_grid, ls_estimate, pilot_pattern, simulate_pilot_rx, ChannelGrid, GridConfig, PilotObservation,
    PilotSequence,
};
use crate::seed::{derive_seed, rng_for, stream};

pub use format::{read_dataset, read_dataset_from, write_dataset, write_dataset_to, FORMAT_VERSION, MAGIC};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Split::Train),
            1 => Ok(Split::Validation),
            2 => Ok(Split::Test),
            _ => Err(Error::CorruptHeader(format!("unknown split tag {tag}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixConfig {
    pub models: Vec<TdlModel>,
    pub ds_range_ns: [f64; 2],
    pub speed_range_kmh: [f64; 2],
    pub snr_grid_db: Vec<f64>,
    pub carrier_hz: f64,
    pub master_seed: u64,
    /// Skip receiver noise (the observation is the exact pilot channel).
    pub noiseless: bool,
}

impl Default for MixConfig {
    fn default() -> Self {
        Self {
            models: TdlModel::ALL.to_vec(),
            ds_range_ns: [0.0, 300.0],
            speed_range_kmh: [0.0, 50.0],
            snr_grid_db: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            carrier_hz: 3.5e9,
            master_seed: 0,
            noiseless: false,
        }
    }
}

impl MixConfig {
    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::invalid("mix has no channel models"));
        }
        if self.snr_grid_db.is_empty() {
            return Err(Error::invalid("mix has an empty SNR grid"));
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("SNR grid values must be finite"));
        }
        let [ds_lo, ds_hi] = self.ds_range_ns;
        if !(0.0 <= ds_lo && ds_lo <= ds_hi && ds_hi.is_finite()) {
            return Err(Error::invalid(format!("bad delay-spread range {:?}", self.ds_range_ns)));
        }
        let [v_lo, v_hi] = self.speed_range_kmh;
        if !(0.0 <= v_lo && v_lo <= v_hi && v_hi.is_finite()) {
            return Err(Error::invalid(format!("bad speed range {:?}", self.speed_range_kmh)));
        }
        if !(self.carrier_hz > 0.0) || !self.carrier_hz.is_finite() {
            return Err(Error::invalid("carrier frequency must be positive"));
        }
        Ok(())
    }
}

/// One sample's scenario. Continuous fields are kept at f32 precision so
/// that the on-disk record regenerates the identical sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDraw {
    pub model: TdlModel,
    pub delay_spread_ns: f64,
    pub speed_kmh: f64,
    pub snr_db: f64,
    pub sample_seed: u64,
}

fn to_f32_precision(x: f64) -> f64 {
    x as f32 as f64
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Model uniform over the set, delay spread and speed uniform on their
/// ranges, SNR uniform over the grid.
pub fn sample_scenario<R: Rng + ?Sized>(rng: &mut R, mix: &MixConfig) -> ScenarioDraw {
    let model = mix.models[rng.random_range(0..mix.models.len())];
    let delay_spread_ns = to_f32_precision(uniform(rng, mix.ds_range_ns));
    let speed_kmh = to_f32_precision(uniform(rng, mix.speed_range_kmh));
    let snr_db = to_f32_precision(mix.snr_grid_db[rng.random_range(0..mix.snr_grid_db.len())]);
    ScenarioDraw {
        model,
        delay_spread_ns: delay_spread_ns.clamp(mix.ds_range_ns[0], mix.ds_range_ns[1]),
        speed_kmh: speed_kmh.clamp(mix.speed_range_kmh[0], mix.speed_range_kmh[1]),
        snr_db,
        sample_seed: rng.random(),
    }
}

/// Regenerates the channel and LS observation for a draw.
pub fn realize(
    draw: &ScenarioDraw,
    grid: &GridConfig,
    carrier_hz: f64,
    noiseless: bool,
) -> Result<(PilotObservation, ChannelGrid)> {
    let profile = load_profile(draw.model)?;
    let doppler = doppler_from_speed(draw.speed_kmh, carrier_hz)?;
    let fading = FadingConfig::new(
        draw.delay_spread_ns * 1e-9,
        doppler,
        derive_seed(draw.sample_seed, stream::FADING, 0),
    );
    let h = channel_grid(&profile, &fading, grid)?;
    let pattern = pilot_pattern(grid)?;
    let (rows, cols) = pattern.shape();
    let seq = PilotSequence::qpsk(rows, cols, derive_seed(draw.sample_seed, stream::PILOT, 0));
    let snr_rx = if noiseless { f64::INFINITY } else { draw.snr_db };
    let y = simulate_pilot_rx(
        &h,
        &seq,
        &pattern,
        snr_rx,
        derive_seed(draw.sample_seed, stream::NOISE, 0),
    )?;
    let obs = PilotObservation::new(ls_estimate(&y, &seq)?, draw.snr_db)?;
    Ok((obs, h))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub draw: ScenarioDraw,
    /// LS pilot tensor `(n_p,t, n_p,f, 2)`.
    pub observation: Array3<f32>,
    /// Noise-free channel `(n_t, n_f, 2)`.
    pub target: Array3<f32>,
}

impl Sample {
    pub fn snr_linear(&self) -> f64 {
        10f64.powf(self.draw.snr_db / 10.0)
    }

    pub fn pilot_observation(&self) -> Result<PilotObservation> {
        PilotObservation::new(self.observation.mapv(f64::from), self.draw.snr_db)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub grid: GridConfig,
    pub mix: MixConfig,
    pub split: Split,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn obs_dims(&self) -> (usize, usize, usize) {
        (self.grid.n_pilot_symbols(), self.grid.n_pilot_subcarriers(), 2)
    }

    pub fn target_dims(&self) -> (usize, usize, usize) {
        (self.grid.n_t, self.grid.n_f, 2)
    }

    /// Sample counts per SNR grid value, in grid order.
    pub fn snr_counts(&self) -> Vec<(f64, usize)> {
        self.mix
            .snr_grid_db
            .iter()
            .map(|&snr| {
                let snr = to_f32_precision(snr);
                (snr, self.samples.iter().filter(|s| s.draw.snr_db == snr).count())
            })
            .collect()
    }

    /// Gathers samples into f64 batches: observations `(B, n_p,t, n_p,f, 2)`,
    /// linear SNRs `(B)` and targets `(B, n_t, n_f, 2)`.
    pub fn batch(&self, indices: &[usize]) -> (Array4<f64>, Array1<f64>, Array4<f64>) {
        let (a, b, c) = self.obs_dims();
        let (d, e, f) = self.target_dims();
        let mut obs = Array4::zeros((indices.len(), a, b, c));
        let mut tgt = Array4::zeros((indices.len(), d, e, f));
        let mut snr = Array1::zeros(indices.len());
        for (row, &idx) in indices.iter().enumerate() {
            let s = &self.samples[idx];
            obs.index_axis_mut(Axis(0), row).assign(&s.observation.mapv(f64::from));
            tgt.index_axis_mut(Axis(0), row).assign(&s.target.mapv(f64::from));
            snr[row] = s.snr_linear();
        }
        (obs, snr, tgt)
    }

    pub(crate) fn validate_shapes(&self) -> Result<()> {
        for (i, s) in self.samples.iter().enumerate() {
            if s.observation.dim() != self.obs_dims() {
                return Err(Error::dims(
                    "sample observation",
                    (i, self.obs_dims()),
                    (i, s.observation.dim()),
                ));
            }
            if s.target.dim() != self.target_dims() {
                return Err(Error::dims(
                    "sample target",
                    (i, self.target_dims()),
                    (i, s.target.dim()),
                ));
            }
        }
        Ok(())
    }
}

fn make_sample(draw: ScenarioDraw, grid: &GridConfig, mix: &MixConfig) -> Result<Sample> {
    let (obs, h) = realize(&draw, grid, mix.carrier_hz, mix.noiseless)?;
    Ok(Sample {
        draw,
        observation: obs.h_p_ls.mapv(|v| v as f32),
        target: h.to_tensor().mapv(|v| v as f32),
    })
}

fn generate<F>(n_samples: usize, mix: &MixConfig, grid: &GridConfig, split: Split, draw_for: F) -> Result<Dataset>
where
    F: Fn(usize) -> ScenarioDraw + Sync,
{
    if n_samples == 0 {
        return Err(Error::invalid("dataset needs at least one sample"));
    }
    mix.validate()?;
    grid.validate()?;
    let mut samples: Vec<Sample> = Vec::new();
    samples
        .try_reserve_exact(n_samples)
        .map_err(|e| Error::ResourceExhausted(format!("{n_samples} samples: {e}")))?;
    let generated: Result<Vec<Sample>> = (0..n_samples)
        .into_par_iter()
        .map(|i| make_sample(draw_for(i), grid, mix))
        .collect();
    samples.extend(generated?);
    Ok(Dataset {
        grid: grid.clone(),
        mix: mix.clone(),
        split,
        samples,
    })
}

/// Builds a split of the mixed dataset. Splits draw from disjoint seed
/// streams of the same master seed.
pub fn build_split(n_samples: usize, mix: &MixConfig, grid: &GridConfig, split: Split) -> Result<Dataset> {
    let stream_id = stream::SCENARIO + ((split.tag() as u64) << 32);
    generate(n_samples, mix, grid, split, |i| {
        let mut rng = rng_for(mix.master_seed, stream_id, i as u64);
        sample_scenario(&mut rng, mix)
    })
}

/// Training split of the mixed dataset.
pub fn build_dataset(n_samples: usize, mix: &MixConfig, grid: &GridConfig) -> Result<Dataset> {
    build_split(n_samples, mix, grid, Split::Train)
}

/// A fixed channel condition, e.g. TDL-C with 100 ns delay spread at 3 km/h.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub model: TdlModel,
    pub delay_spread_ns: f64,
    pub speed_kmh: f64,
}

impl Scenario {
    /// Named presets: `tdlc100` (NLOS) and `tdld30` (LOS).
    pub fn preset(name: &str, speed_kmh: f64) -> Result<Self> {
        let (model, ds) = match name.to_ascii_lowercase().as_str() {
            "tdlc100" => (TdlModel::C, 100.0),
            "tdld30" => (TdlModel::D, 30.0),
            other => return Err(Error::invalid(format!("unknown scenario preset {other:?}"))),
        };
        Ok(Self {
            model,
            delay_spread_ns: ds,
            speed_kmh,
        })
    }
}

/// Test set for a fixed scenario with exactly `n_per_snr` samples at each
/// SNR, laid out SNR-major.
pub fn build_scenario_dataset(
    scenario: &Scenario,
    snr_list_db: &[f64],
    n_per_snr: usize,
    grid: &GridConfig,
    carrier_hz: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_per_snr == 0 {
        return Err(Error::invalid("scenario evaluation needs at least one sample per SNR"));
    }
    let mix = MixConfig {
        models: vec![scenario.model],
        ds_range_ns: [scenario.delay_spread_ns; 2],
        speed_range_kmh: [scenario.speed_kmh; 2],
        snr_grid_db: snr_list_db.to_vec(),
        carrier_hz,
        master_seed: seed,
        noiseless: false,
    };
    let stream_id = stream::SCENARIO + ((Split::Test.tag() as u64) << 32) + 1;
    generate(n_per_snr * snr_list_db.len().max(1), &mix, grid, Split::Test, |i| {
        ScenarioDraw {
            model: scenario.model,
            delay_spread_ns: to_f32_precision(scenario.delay_spread_ns),
            speed_kmh: to_f32_precision(scenario.speed_kmh),
            snr_db: to_f32_precision(snr_list_db[i / n_per_snr]),
            sample_seed: derive_seed(seed, stream_id, i as u64),
        }
    })
}
