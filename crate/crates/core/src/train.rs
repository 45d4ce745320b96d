//! Training loop, per-SNR MSE evaluation and report export.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array4, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{build_scenario_dataset, Dataset, Scenario};
use crate::error::{Error, Result};
use crate::estimators::{interp_baseline_tensor, model_checksum, EstimatorModel};
use crate::link::{pilot_pattern, GridConfig, PilotPattern};
use crate::nn::{mse_loss, AdamConfig, AdamState};
use crate::seed::{rng_for, stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Reduce data-parallel gradients in a fixed order.
    pub determinism: bool,
    /// Gradient workers per mini-batch; 1 evaluates the batch in one piece.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 128,
            lr: 1e-3,
            seed: 0,
            determinism: true,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.threads == 0 {
            return Err(Error::invalid("epochs, batch size and threads must all be >= 1"));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Full-pass training loss before the first update.
    pub initial_train_loss: f64,
    /// Mean mini-batch loss seen during each epoch.
    pub train_loss: Vec<f64>,
    /// Full-pass validation loss after each epoch (empty without a
    /// validation set).
    pub val_loss: Vec<f64>,
    /// Full-pass training loss after the last epoch.
    pub final_train_loss: f64,
}

/// Anything that maps dataset samples to full-grid estimates.
pub trait ChannelEstimator: Sync {
    fn name(&self) -> String;

    fn checksum(&self) -> Option<String> {
        None
    }

    /// Estimates `(B, n_t, n_f, 2)` for the given sample indices.
    fn estimate(&self, ds: &Dataset, indices: &[usize]) -> Result<Array4<f64>>;
}

impl ChannelEstimator for EstimatorModel {
    fn name(&self) -> String {
        self.variant.name().to_string()
    }

    fn checksum(&self) -> Option<String> {
        model_checksum(self).ok()
    }

    fn estimate(&self, ds: &Dataset, indices: &[usize]) -> Result<Array4<f64>> {
        self.config.matches_grid(&ds.grid)?;
        let (obs, snr, _) = ds.batch(indices);
        self.forward_batch(obs.view(), snr.view())
    }
}

/// LS at the pilots followed by bilinear interpolation.
#[derive(Clone, Debug)]
pub struct InterpBaseline {
    pub grid: GridConfig,
    pattern: PilotPattern,
}

impl InterpBaseline {
    pub fn new(grid: &GridConfig) -> Result<Self> {
        Ok(Self {
            grid: grid.clone(),
            pattern: pilot_pattern(grid)?,
        })
    }
}

impl ChannelEstimator for InterpBaseline {
    fn name(&self) -> String {
        "LS+bilinear".to_string()
    }

    fn estimate(&self, ds: &Dataset, indices: &[usize]) -> Result<Array4<f64>> {
        if ds.grid != self.grid {
            return Err(Error::dims("baseline grid", &self.grid, &ds.grid));
        }
        let (obs, _, _) = ds.batch(indices);
        let mut out = Array4::zeros((indices.len(), self.grid.n_t, self.grid.n_f, 2));
        for (b, o) in obs.axis_iter(Axis(0)).enumerate() {
            out.index_axis_mut(Axis(0), b)
                .assign(&interp_baseline_tensor(o, &self.pattern, &self.grid)?);
        }
        Ok(out)
    }
}

const EVAL_CHUNK: usize = 256;

/// Mean elementwise squared error of `estimator` over the whole dataset.
pub fn dataset_loss(estimator: &dyn ChannelEstimator, ds: &Dataset) -> Result<f64> {
    let per_sample = per_sample_mse(estimator, ds)?;
    Ok(per_sample.iter().sum::<f64>() / per_sample.len() as f64)
}

fn per_sample_mse(estimator: &dyn ChannelEstimator, ds: &Dataset) -> Result<Vec<f64>> {
    if ds.is_empty() {
        return Err(Error::invalid("evaluation dataset is empty"));
    }
    let indices: Vec<usize> = (0..ds.len()).collect();
    let mut out = Vec::with_capacity(ds.len());
    for chunk in indices.chunks(EVAL_CHUNK) {
        let pred = estimator.estimate(ds, chunk)?;
        for (row, &idx) in chunk.iter().enumerate() {
            let p = pred.index_axis(Axis(0), row);
            let t = &ds.samples[idx].target;
            if p.dim() != t.dim() {
                return Err(Error::dims("prediction vs target", t.dim(), p.dim()));
            }
            let sq: f64 = p.iter().zip(t.iter()).map(|(a, &b)| (a - f64::from(b)).powi(2)).sum();
            out.push(sq / t.len() as f64);
        }
    }
    Ok(out)
}

fn add_into(acc: &mut EstimatorModel, other: &EstimatorModel) {
    for (a, b) in acc.param_slices_mut().into_iter().zip(other.param_slices()) {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
    }
}

/// Sum of squared errors and parameter gradients of the batch loss, where the
/// loss is normalized by `total_elems` (the element count of the full batch).
fn batch_gradients(
    model: &EstimatorModel,
    ds: &Dataset,
    indices: &[usize],
    total_elems: usize,
) -> Result<(f64, EstimatorModel)> {
    let (obs, snr, target) = ds.batch(indices);
    let (pred, cache) = model.forward_train(obs.view(), snr.view())?;
    let (mse, mut grad) = mse_loss(pred.view(), target.view())?;
    let scale = pred.len() as f64 / total_elems as f64;
    grad.mapv_inplace(|g| g * scale);
    let (grads, _) = model.backward(&cache, grad.view())?;
    Ok((mse * pred.len() as f64, grads))
}

/// Mini-batch Adam on MSE loss. Shuffling is seeded by `cfg.seed`; weights
/// after the final epoch are kept.
pub fn train(
    model: &mut EstimatorModel,
    train_ds: &Dataset,
    val_ds: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    train_with_progress(model, train_ds, val_ds, cfg, |_, _, _| {})
}

/// [`train`] with a callback receiving `(epoch, train_loss, val_loss)` after
/// every epoch.
pub fn train_with_progress(
    model: &mut EstimatorModel,
    train_ds: &Dataset,
    val_ds: Option<&Dataset>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64, Option<f64>),
) -> Result<TrainHistory> {
    cfg.validate()?;
    model.validate()?;
    if train_ds.is_empty() {
        return Err(Error::invalid("training dataset is empty"));
    }
    model.config.matches_grid(&train_ds.grid)?;
    if let Some(v) = val_ds {
        model.config.matches_grid(&v.grid)?;
    }

    let adam_cfg = AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    };
    let mut adam = AdamState::for_params(adam_cfg, &model.param_slices());
    let mut rng = rng_for(cfg.seed, stream::SHUFFLE, 0);
    let mut order: Vec<usize> = (0..train_ds.len()).collect();
    let sample_elems = train_ds.target_dims().0 * train_ds.target_dims().1 * 2;

    let initial_train_loss = dataset_loss(model, train_ds)?;
    let mut train_loss = Vec::with_capacity(cfg.epochs);
    let mut val_loss = Vec::new();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sse = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let total = batch.len() * sample_elems;
            let (batch_sse, grads) = if cfg.threads == 1 || batch.len() < cfg.threads {
                batch_gradients(model, train_ds, batch, total)?
            } else {
                let piece = batch.len().div_ceil(cfg.threads);
                let model_ref = &*model;
                let parts: Vec<Result<(f64, EstimatorModel)>> = batch
                    .par_chunks(piece)
                    .map(|p| batch_gradients(model_ref, train_ds, p, total))
                    .collect();
                if cfg.determinism {
                    let mut parts = parts.into_iter();
                    let (mut s, mut g) = parts.next().expect("non-empty batch")?;
                    for part in parts {
                        let (ps, pg) = part?;
                        s += ps;
                        add_into(&mut g, &pg);
                    }
                    (s, g)
                } else {
                    parts
                        .into_par_iter()
                        .reduce_with(|a, b| {
                            let ((sa, mut ga), (sb, gb)) = (a?, b?);
                            add_into(&mut ga, &gb);
                            Ok((sa + sb, ga))
                        })
                        .expect("non-empty batch")?
                }
            };
            sse += batch_sse;
            adam.step(model.param_slices_mut(), grads.param_slices())?;
        }
        let epoch_loss = sse / (train_ds.len() * sample_elems) as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::invalid("training diverged (non-finite loss)"));
        }
        train_loss.push(epoch_loss);
        if let Some(v) = val_ds {
            val_loss.push(dataset_loss(model, v)?);
        }
        on_epoch(epoch + 1, epoch_loss, val_loss.last().copied());
    }

    Ok(TrainHistory {
        initial_train_loss,
        train_loss,
        val_loss,
        final_train_loss: dataset_loss(model, train_ds)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnrBin {
    pub snr_db: f64,
    /// `None` when the bin holds no samples.
    pub mse: Option<f64>,
    pub n_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub estimator: String,
    pub checksum: Option<String>,
    pub scenario: String,
    pub bins: Vec<SnrBin>,
}

impl EvalReport {
    pub fn total_samples(&self) -> usize {
        self.bins.iter().map(|b| b.n_samples).sum()
    }

    /// Mean of the per-SNR MSEs over non-empty bins.
    pub fn snr_averaged_mse(&self) -> f64 {
        let vals: Vec<f64> = self.bins.iter().filter_map(|b| b.mse).collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    }

    pub fn mse_at(&self, snr_db: f64) -> Option<f64> {
        self.bins.iter().find(|b| b.snr_db == snr_db).and_then(|b| b.mse)
    }

    /// `snr_db,mse,n_samples` with one row per bin.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("snr_db,mse,n_samples\n");
        for b in &self.bins {
            let mse = b.mse.map(|m| format!("{m:.9e}")).unwrap_or_default();
            let _ = writeln!(out, "{},{},{}", b.snr_db, mse, b.n_samples);
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

fn describe_mix(ds: &Dataset) -> String {
    let models: Vec<&str> = ds.mix.models.iter().map(|m| m.name()).collect();
    format!(
        "{} ds={:?}ns v={:?}km/h n={}",
        models.join("+"),
        ds.mix.ds_range_ns,
        ds.mix.speed_range_kmh,
        ds.len()
    )
}

/// Per-SNR mean of per-sample MSE, binned by the dataset's SNR grid.
pub fn evaluate_mse(estimator: &dyn ChannelEstimator, test_ds: &Dataset) -> Result<EvalReport> {
    let per_sample = per_sample_mse(estimator, test_ds)?;
    let bins = test_ds
        .snr_counts()
        .into_iter()
        .map(|(snr_db, _)| {
            let (sum, n) = test_ds
                .samples
                .iter()
                .zip(&per_sample)
                .filter(|(s, _)| s.draw.snr_db == snr_db)
                .fold((0.0, 0usize), |(sum, n), (_, m)| (sum + m, n + 1));
            SnrBin {
                snr_db,
                mse: (n > 0).then(|| sum / n as f64),
                n_samples: n,
            }
        })
        .collect::<Vec<_>>();
    let binned: usize = bins.iter().map(|b| b.n_samples).sum();
    if binned != test_ds.len() {
        return Err(Error::invalid(format!(
            "{} samples carry an SNR outside the dataset grid",
            test_ds.len() - binned
        )));
    }
    Ok(EvalReport {
        estimator: estimator.name(),
        checksum: estimator.checksum(),
        scenario: describe_mix(test_ds),
        bins,
    })
}

/// Generates a fresh test set for a fixed scenario (`n_per_snr` samples per
/// SNR) and evaluates it.
pub fn scenario_eval(
    estimator: &dyn ChannelEstimator,
    scenario: &Scenario,
    snr_list_db: &[f64],
    n_per_snr: usize,
    grid: &GridConfig,
    carrier_hz: f64,
    seed: u64,
) -> Result<EvalReport> {
    if snr_list_db.is_empty() {
        return Err(Error::invalid("scenario evaluation needs at least one SNR"));
    }
    let ds = build_scenario_dataset(scenario, snr_list_db, n_per_snr, grid, carrier_hz, seed)?;
    let mut report = evaluate_mse(estimator, &ds)?;
    report.scenario = format!(
        "{} ds={}ns v={}km/h n_per_snr={}",
        scenario.model, scenario.delay_spread_ns, scenario.speed_kmh, n_per_snr
    );
    Ok(report)
}
