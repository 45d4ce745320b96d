//! OFDM resource grid, comb pilots and least-squares pilot estimation.
//!
//! Tensors use a fixed real layout: `(symbol, subcarrier, 2)` with plane 0
//! holding the real part and plane 1 the imaginary part.

use ndarray::{Array2, Array3};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::{spawn_fading, FadingConfig, TdlProfile};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub n_f: usize,
    pub n_t: usize,
    pub subcarrier_spacing_hz: f64,
    pub pilot_symbols: Vec<usize>,
    pub pilot_comb_offset: usize,
    pub pilot_comb_step: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_f: 96,
            n_t: 14,
            subcarrier_spacing_hz: 15e3,
            pilot_symbols: vec![2, 11],
            pilot_comb_offset: 0,
            pilot_comb_step: 2,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_f == 0 || !self.n_f.is_multiple_of(12) {
            return Err(Error::invalid(format!(
                "n_f = {} is not a whole number of RBs",
                self.n_f
            )));
        }
        if self.n_t == 0 {
            return Err(Error::invalid("n_t must be positive"));
        }
        if !(self.subcarrier_spacing_hz > 0.0) || !self.subcarrier_spacing_hz.is_finite() {
            return Err(Error::invalid("subcarrier spacing must be positive"));
        }
        if self.pilot_symbols.is_empty() {
            return Err(Error::invalid("at least one pilot symbol is required"));
        }
        if self.pilot_symbols.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("pilot symbol indices must be strictly increasing"));
        }
        if self.pilot_symbols.iter().any(|&k| k >= self.n_t) {
            return Err(Error::invalid(format!("pilot symbol outside [0, {})", self.n_t)));
        }
        if self.pilot_comb_step == 0 || self.pilot_comb_offset >= self.pilot_comb_step {
            return Err(Error::invalid("pilot comb requires step >= 1 and offset < step"));
        }
        if self.pilot_comb_offset >= self.n_f {
            return Err(Error::invalid("pilot comb offset outside the band"));
        }
        Ok(())
    }

    /// Number of pilot-bearing OFDM symbols (`n_p,t`).
    pub fn n_pilot_symbols(&self) -> usize {
        self.pilot_symbols.len()
    }

    pub fn pilot_subcarriers(&self) -> Vec<usize> {
        (self.pilot_comb_offset..self.n_f)
            .step_by(self.pilot_comb_step)
            .collect()
    }

    /// Number of pilot subcarriers per pilot symbol (`n_p,f`).
    pub fn n_pilot_subcarriers(&self) -> usize {
        (self.n_f - self.pilot_comb_offset).div_ceil(self.pilot_comb_step)
    }

    pub fn pilot_count(&self) -> usize {
        self.n_pilot_symbols() * self.n_pilot_subcarriers()
    }

    /// Symbol duration with 14 symbols per slot and a 1 ms slot at 15 kHz.
    pub fn symbol_duration_s(&self) -> f64 {
        15.0 / (14.0 * self.subcarrier_spacing_hz)
    }

    pub fn subcarrier_freqs(&self) -> Vec<f64> {
        (0..self.n_f).map(|i| i as f64 * self.subcarrier_spacing_hz).collect()
    }

    pub fn symbol_times(&self) -> Vec<f64> {
        let ts = self.symbol_duration_s();
        (0..self.n_t).map(|k| k as f64 * ts).collect()
    }
}

/// Pilot resource elements, sorted by `(symbol, subcarrier)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PilotPattern {
    symbols: Vec<usize>,
    subcarriers: Vec<usize>,
}

impl PilotPattern {
    pub fn positions(&self) -> Vec<(usize, usize)> {
        self.symbols
            .iter()
            .flat_map(|&k| self.subcarriers.iter().map(move |&i| (k, i)))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.symbols.len() * self.subcarriers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn subcarriers(&self) -> &[usize] {
        &self.subcarriers
    }

    /// `(n_p,t, n_p,f)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.symbols.len(), self.subcarriers.len())
    }

    /// Grid position of pilot tensor entry `(row, col)`.
    pub fn position(&self, row: usize, col: usize) -> Option<(usize, usize)> {
        Some((*self.symbols.get(row)?, *self.subcarriers.get(col)?))
    }

    /// Pilot tensor entry holding grid position `(symbol, subcarrier)`.
    pub fn tensor_index(&self, symbol: usize, subcarrier: usize) -> Option<(usize, usize)> {
        let row = self.symbols.binary_search(&symbol).ok()?;
        let col = self.subcarriers.binary_search(&subcarrier).ok()?;
        Some((row, col))
    }
}

pub fn pilot_pattern(config: &GridConfig) -> Result<PilotPattern> {
    config.validate()?;
    Ok(PilotPattern {
        symbols: config.pilot_symbols.clone(),
        subcarriers: config.pilot_subcarriers(),
    })
}

/// True channel `H[subcarrier, symbol]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelGrid {
    pub h: Array2<Complex64>,
}

impl ChannelGrid {
    pub fn n_f(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_t(&self) -> usize {
        self.h.ncols()
    }

    /// Real tensor `(n_t, n_f, 2)`.
    pub fn to_tensor(&self) -> Array3<f64> {
        Array3::from_shape_fn((self.n_t(), self.n_f(), 2), |(k, i, c)| {
            let h = self.h[[i, k]];
            if c == 0 {
                h.re
            } else {
                h.im
            }
        })
    }

    /// Values at the pilot positions as an `n_p,t x n_p,f` matrix.
    pub fn at_pilots(&self, pattern: &PilotPattern) -> Array2<Complex64> {
        let (rows, cols) = pattern.shape();
        Array2::from_shape_fn((rows, cols), |(r, c)| {
            let (k, i) = pattern.position(r, c).expect("in range");
            self.h[[i, k]]
        })
    }
}

/// Block-fading channel over the grid: column `k` is the frequency response
/// at symbol `k`'s start time.
pub fn channel_grid(profile: &TdlProfile, fading: &FadingConfig, grid: &GridConfig) -> Result<ChannelGrid> {
    grid.validate()?;
    let process = spawn_fading(profile, fading)?;
    let delays = profile.delays_s(fading.delay_spread_s);
    let freqs = grid.subcarrier_freqs();
    // Steering matrix exp(-j 2 pi f_i tau_l), shared by every symbol.
    let steering = Array2::from_shape_fn((grid.n_f, delays.len()), |(i, l)| {
        Complex64::from_polar(1.0, -std::f64::consts::TAU * freqs[i] * delays[l])
    });
    let mut h = Array2::zeros((grid.n_f, grid.n_t));
    for (k, t) in grid.symbol_times().into_iter().enumerate() {
        let gains = process.tap_gains(t).gains;
        for i in 0..grid.n_f {
            h[[i, k]] = steering.row(i).iter().zip(&gains).map(|(e, a)| e * a).sum();
        }
    }
    if h.iter().any(|x: &Complex64| !x.is_finite()) {
        return Err(Error::invalid("channel synthesis produced non-finite values"));
    }
    Ok(ChannelGrid { h })
}

/// Known pilot symbols drawn from `{1, j, -1, -j}`, so `|s| = 1` exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct PilotSequence {
    pub s_p: Array2<Complex64>,
    pub seed: u64,
}

impl PilotSequence {
    pub fn qpsk(n_p_t: usize, n_p_f: usize, seed: u64) -> Self {
        const POINTS: [Complex64; 4] = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s_p = Array2::from_shape_simple_fn((n_p_t, n_p_f), || POINTS[rng.random_range(0..4)]);
        Self { s_p, seed }
    }

    pub fn ones(n_p_t: usize, n_p_f: usize) -> Self {
        Self {
            s_p: Array2::from_elem((n_p_t, n_p_f), Complex64::new(1.0, 0.0)),
            seed: 0,
        }
    }
}

/// Noise variance per resource element for unit signal and channel power.
pub fn noise_variance(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// `Y_p = H_p * s_p + z_p`. Passing `snr_db = f64::INFINITY` disables noise.
pub fn simulate_pilot_rx(
    grid: &ChannelGrid,
    seq: &PilotSequence,
    pattern: &PilotPattern,
    snr_db: f64,
    noise_seed: u64,
) -> Result<Array2<Complex64>> {
    if seq.s_p.dim() != pattern.shape() {
        return Err(Error::dims("pilot sequence", pattern.shape(), seq.s_p.dim()));
    }
    let max_symbol = pattern.symbols().last().copied().unwrap_or(0);
    let max_sc = pattern.subcarriers().last().copied().unwrap_or(0);
    if max_symbol >= grid.n_t() || max_sc >= grid.n_f() {
        return Err(Error::dims(
            "pilot pattern vs grid",
            (grid.n_t(), grid.n_f()),
            (max_symbol + 1, max_sc + 1),
        ));
    }
    if snr_db.is_nan() {
        return Err(Error::invalid("SNR is NaN"));
    }
    let mut y = grid.at_pilots(pattern) * &seq.s_p;
    let sigma2 = noise_variance(snr_db);
    if sigma2 > 0.0 {
        let scale = (sigma2 / 2.0).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
        for v in y.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *v += Complex64::new(re, im) * scale;
        }
    }
    Ok(y)
}

/// LS channel estimate at the pilots, `y_p / s_p`, as an `(n_p,t, n_p,f, 2)`
/// tensor.
pub fn ls_estimate(y_p: &Array2<Complex64>, seq: &PilotSequence) -> Result<Array3<f64>> {
    if y_p.dim() != seq.s_p.dim() {
        return Err(Error::dims("ls_estimate", seq.s_p.dim(), y_p.dim()));
    }
    if seq.s_p.iter().any(|s| s.norm_sqr() == 0.0) {
        return Err(Error::invalid("zero pilot symbol"));
    }
    let (rows, cols) = y_p.dim();
    let h = y_p / &seq.s_p;
    Ok(Array3::from_shape_fn((rows, cols, 2), |(r, c, p)| {
        if p == 0 {
            h[[r, c]].re
        } else {
            h[[r, c]].im
        }
    }))
}

/// LS pilot tensor plus the SNR it was observed at.
#[derive(Clone, Debug, PartialEq)]
pub struct PilotObservation {
    pub h_p_ls: Array3<f64>,
    pub snr_db: f64,
    pub snr_linear: f64,
}

impl PilotObservation {
    pub fn new(h_p_ls: Array3<f64>, snr_db: f64) -> Result<Self> {
        let snr_linear = 10f64.powf(snr_db / 10.0);
        if !(snr_linear > 0.0) || !snr_linear.is_finite() {
            return Err(Error::invalid(format!("SNR {snr_db} dB has no usable linear value")));
        }
        if h_p_ls.dim().2 != 2 {
            return Err(Error::dims("pilot observation planes", 2, h_p_ls.dim().2));
        }
        Ok(Self {
            h_p_ls,
            snr_db,
            snr_linear,
        })
    }
}
