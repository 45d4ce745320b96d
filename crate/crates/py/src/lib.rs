//! Python bindings. Tensors cross the boundary as nested lists
//! (`[symbol][subcarrier][re, im]`), so `numpy.asarray` works on every result.

use std::path::PathBuf;

use ndarray::Array3;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use freqtime::channel::{self, TdlModel};
use freqtime::dataset::{self, MixConfig, Scenario, Split};
use freqtime::estimators::{self, EstimatorModel, FreqTimeConfig, Variant};
use freqtime::link::{self, PilotObservation};
use freqtime::train::{self, ChannelEstimator, EvalReport, InterpBaseline, TrainConfig};
use freqtime::Error;

type Tensor = Vec<Vec<Vec<f64>>>;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::UnreadableDataset { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_nested(a: &Array3<f64>) -> Tensor {
    a.outer_iter()
        .map(|m| m.outer_iter().map(|row| row.to_vec()).collect())
        .collect()
}

fn from_nested(t: &Tensor) -> PyResult<Array3<f64>> {
    let d0 = t.len();
    let d1 = t.first().map_or(0, Vec::len);
    let d2 = t.first().and_then(|r| r.first()).map_or(0, Vec::len);
    if t.iter().any(|r| r.len() != d1 || r.iter().any(|c| c.len() != d2)) {
        return Err(PyValueError::new_err("ragged nested list"));
    }
    let flat: Vec<f64> = t.iter().flatten().flatten().copied().collect();
    Array3::from_shape_vec((d0, d1, d2), flat).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn parse_model(name: &str) -> PyResult<TdlModel> {
    name.parse().map_err(py_err)
}

fn report_rows<'py>(py: Python<'py>, report: &EvalReport) -> PyResult<Vec<Bound<'py, PyDict>>> {
    report
        .bins
        .iter()
        .map(|b| {
            let d = PyDict::new(py);
            d.set_item("snr_db", b.snr_db)?;
            d.set_item("mse", b.mse)?;
            d.set_item("n_samples", b.n_samples)?;
            Ok(d)
        })
        .collect()
}

/// Maximum Doppler shift in Hz.
#[pyfunction]
#[pyo3(signature = (speed_kmh, carrier_hz = 3.5e9))]
fn doppler_from_speed(speed_kmh: f64, carrier_hz: f64) -> PyResult<f64> {
    channel::doppler_from_speed(speed_kmh, carrier_hz).map_err(py_err)
}

#[pyfunction]
fn noise_variance(snr_db: f64) -> f64 {
    link::noise_variance(snr_db)
}

/// Normalized taps of a TDL model as `(normalized_delay, power_db, k_db)`.
#[pyfunction]
fn load_profile(model: &str) -> PyResult<Vec<(f64, f64, Option<f64>)>> {
    let profile = channel::load_profile(parse_model(model)?).map_err(py_err)?;
    Ok(profile
        .taps()
        .iter()
        .map(|t| (t.normalized_delay, t.power_db, t.rician_k_db))
        .collect())
}

#[pyclass(name = "GridConfig", from_py_object)]
#[derive(Clone)]
struct PyGridConfig {
    inner: link::GridConfig,
}

#[pymethods]
impl PyGridConfig {
    #[new]
    #[pyo3(signature = (n_f = 96, n_t = 14, pilot_symbols = vec![2, 11], pilot_comb_step = 2, pilot_comb_offset = 0))]
    fn new(
        n_f: usize,
        n_t: usize,
        pilot_symbols: Vec<usize>,
        pilot_comb_step: usize,
        pilot_comb_offset: usize,
    ) -> PyResult<Self> {
        let inner = link::GridConfig {
            n_f,
            n_t,
            pilot_symbols,
            pilot_comb_step,
            pilot_comb_offset,
            ..link::GridConfig::default()
        };
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n_f(&self) -> usize {
        self.inner.n_f
    }

    #[getter]
    fn n_t(&self) -> usize {
        self.inner.n_t
    }

    /// `(symbol, subcarrier)` of every pilot, in tensor order.
    fn pilot_positions(&self) -> PyResult<Vec<(usize, usize)>> {
        Ok(link::pilot_pattern(&self.inner).map_err(py_err)?.positions())
    }

    fn __repr__(&self) -> String {
        format!(
            "GridConfig(n_f={}, n_t={}, pilot_symbols={:?}, pilot_comb_step={}, pilot_comb_offset={})",
            self.inner.n_f,
            self.inner.n_t,
            self.inner.pilot_symbols,
            self.inner.pilot_comb_step,
            self.inner.pilot_comb_offset
        )
    }
}

#[pyclass(name = "Dataset")]
struct PyDataset {
    inner: dataset::Dataset,
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: dataset::read_dataset(path).map_err(py_err)?,
        })
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        dataset::write_dataset(&self.inner, path).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn grid(&self) -> PyGridConfig {
        PyGridConfig {
            inner: self.inner.grid.clone(),
        }
    }

    /// `(snr_db, count)` for every SNR in the grid.
    fn snr_counts(&self) -> Vec<(f64, usize)> {
        self.inner.snr_counts()
    }

    /// Scenario fields plus `observation` (LS at pilots) and `target`.
    fn sample<'py>(&self, py: Python<'py>, index: usize) -> PyResult<Bound<'py, PyDict>> {
        let s = self
            .inner
            .samples
            .get(index)
            .ok_or_else(|| PyValueError::new_err(format!("index {index} out of range")))?;
        let d = PyDict::new(py);
        d.set_item("model", s.draw.model.name())?;
        d.set_item("delay_spread_ns", s.draw.delay_spread_ns)?;
        d.set_item("speed_kmh", s.draw.speed_kmh)?;
        d.set_item("snr_db", s.draw.snr_db)?;
        d.set_item("sample_seed", s.draw.sample_seed)?;
        d.set_item("observation", to_nested(&s.observation.mapv(f64::from)))?;
        d.set_item("target", to_nested(&s.target.mapv(f64::from)))?;
        Ok(d)
    }
}

/// Builds a mixed-scenario dataset. Unset options keep their defaults.
#[pyfunction]
#[pyo3(signature = (n_samples, seed = 0, split = "train", models = None, snrs_db = None, ds_range_ns = None, speed_range_kmh = None, noiseless = false, grid = None))]
#[allow(clippy::too_many_arguments)]
fn build_dataset(
    py: Python<'_>,
    n_samples: usize,
    seed: u64,
    split: &str,
    models: Option<Vec<String>>,
    snrs_db: Option<Vec<f64>>,
    ds_range_ns: Option<(f64, f64)>,
    speed_range_kmh: Option<(f64, f64)>,
    noiseless: bool,
    grid: Option<PyGridConfig>,
) -> PyResult<PyDataset> {
    let mut mix = MixConfig {
        master_seed: seed,
        noiseless,
        ..MixConfig::default()
    };
    if let Some(m) = models {
        mix.models = m.iter().map(|s| parse_model(s)).collect::<PyResult<_>>()?;
    }
    if let Some(s) = snrs_db {
        mix.snr_grid_db = s;
    }
    if let Some((lo, hi)) = ds_range_ns {
        mix.ds_range_ns = [lo, hi];
    }
    if let Some((lo, hi)) = speed_range_kmh {
        mix.speed_range_kmh = [lo, hi];
    }
    let split = match split {
        "train" => Split::Train,
        "validation" | "val" => Split::Validation,
        "test" => Split::Test,
        other => return Err(PyValueError::new_err(format!("unknown split {other:?}"))),
    };
    let grid = grid.map(|g| g.inner).unwrap_or_default();
    let inner = py
        .detach(|| dataset::build_split(n_samples, &mix, &grid, split))
        .map_err(py_err)?;
    Ok(PyDataset { inner })
}

#[pyclass(name = "Estimator")]
struct PyEstimator {
    inner: EstimatorModel,
}

#[pymethods]
impl PyEstimator {
    /// `variant` is `"freqtime"` or `"atten"`.
    #[new]
    #[pyo3(signature = (variant = "freqtime", seed = 0, l_group = 12, share_freq_blocks = false, grid = None))]
    fn new(
        variant: &str,
        seed: u64,
        l_group: usize,
        share_freq_blocks: bool,
        grid: Option<PyGridConfig>,
    ) -> PyResult<Self> {
        let variant: Variant = variant.parse().map_err(py_err)?;
        let grid = grid.map(|g| g.inner).unwrap_or_default();
        let mut config = FreqTimeConfig::from_grid(&grid, l_group);
        config.share_freq_blocks = share_freq_blocks;
        Ok(Self {
            inner: EstimatorModel::new(variant, config, seed).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: estimators::load_checkpoint(path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        estimators::save_checkpoint(&self.inner, path).map_err(py_err)
    }

    #[getter]
    fn variant(&self) -> &'static str {
        self.inner.variant.name()
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    fn checksum(&self) -> PyResult<String> {
        estimators::model_checksum(&self.inner).map_err(py_err)
    }

    fn complexity<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let r = estimators::complexity_report(&self.inner);
        let d = PyDict::new(py);
        d.set_item("params", r.params)?;
        d.set_item("flops", r.flops)?;
        d.set_item("reference_params", r.reference_params)?;
        d.set_item("reference_flops", r.reference_flops)?;
        let blocks: Vec<(&str, usize, usize, usize)> = r
            .blocks
            .iter()
            .map(|b| (b.kind, b.instances, b.params, b.flops))
            .collect();
        d.set_item("blocks", blocks)?;
        Ok(d)
    }

    /// Full-grid estimate `[n_t][n_f][2]` from an LS pilot tensor
    /// `[n_p_t][n_p_f][2]`.
    fn forward(&self, observation: Tensor, snr_db: f64) -> PyResult<Tensor> {
        let obs = PilotObservation::new(from_nested(&observation)?, snr_db).map_err(py_err)?;
        Ok(to_nested(&self.inner.forward(&obs).map_err(py_err)?))
    }

    /// Trains in place and returns the loss history as a dict.
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (data, epochs = 100, batch_size = 128, lr = 1e-3, seed = 0, validation = None))]
    fn train<'py>(
        &mut self,
        py: Python<'py>,
        data: &PyDataset,
        epochs: usize,
        batch_size: usize,
        lr: f64,
        seed: u64,
        validation: Option<PyRef<'py, PyDataset>>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let cfg = TrainConfig {
            epochs,
            batch_size,
            lr,
            seed,
            ..TrainConfig::default()
        };
        let val = validation.as_ref().map(|v| &v.inner);
        let model = &mut self.inner;
        let h = py
            .detach(|| train::train(model, &data.inner, val, &cfg))
            .map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("initial_train_loss", h.initial_train_loss)?;
        d.set_item("train_loss", h.train_loss)?;
        d.set_item("val_loss", h.val_loss)?;
        d.set_item("final_train_loss", h.final_train_loss)?;
        Ok(d)
    }

    /// Per-SNR MSE rows `{snr_db, mse, n_samples}`.
    fn evaluate<'py>(&self, py: Python<'py>, data: &PyDataset) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let report = evaluate(&self.inner, &data.inner)?;
        report_rows(py, &report)
    }
}

fn evaluate(estimator: &dyn ChannelEstimator, data: &dataset::Dataset) -> PyResult<EvalReport> {
    train::evaluate_mse(estimator, data).map_err(py_err)
}

/// Per-SNR MSE of LS + bilinear interpolation.
#[pyfunction]
fn evaluate_baseline<'py>(py: Python<'py>, data: &PyDataset) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let baseline = InterpBaseline::new(&data.inner.grid).map_err(py_err)?;
    report_rows(py, &evaluate(&baseline, &data.inner)?)
}

/// Fixed-scenario sweep (`"tdlc100"` or `"tdld30"`); `estimator=None`
/// evaluates the interpolation baseline.
#[pyfunction]
#[pyo3(signature = (scenario, speed_kmh, estimator = None, n_per_snr = 2000, snrs_db = vec![0.0, 5.0, 10.0, 15.0, 20.0], seed = 1))]
fn scenario_eval<'py>(
    py: Python<'py>,
    scenario: &str,
    speed_kmh: f64,
    estimator: Option<PyRef<'py, PyEstimator>>,
    n_per_snr: usize,
    snrs_db: Vec<f64>,
    seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let sc = Scenario::preset(scenario, speed_kmh).map_err(py_err)?;
    let grid = link::GridConfig::default();
    let baseline;
    let est: &dyn ChannelEstimator = match &estimator {
        Some(e) => &e.inner,
        None => {
            baseline = InterpBaseline::new(&grid).map_err(py_err)?;
            &baseline
        }
    };
    let carrier = MixConfig::default().carrier_hz;
    let report = train::scenario_eval(est, &sc, &snrs_db, n_per_snr, &grid, carrier, seed).map_err(py_err)?;
    report_rows(py, &report)
}

#[pymodule]
fn pyfreqtime(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(doppler_from_speed, m)?)?;
    m.add_function(wrap_pyfunction!(noise_variance, m)?)?;
    m.add_function(wrap_pyfunction!(load_profile, m)?)?;
    m.add_function(wrap_pyfunction!(build_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_eval, m)?)?;
    m.add_class::<PyGridConfig>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyEstimator>()?;
    Ok(())
}
