//! FreqTimeNet, AttenFreqTimeNet and a non-learned interpolation baseline.
//!
//! Layout conventions (fixed across training, checkpoints and bindings):
//!
//! * input `(n_p_t, n_p_f, 2)`; frequency block `k` sees row `k` flattened
//!   subcarrier-major with interleaved re/im: `[re_0, im_0, re_1, im_1, ..]`;
//! * frequency-block outputs are `(1, n_f, 2)` in the same interleaving and
//!   stack into an `(n_p_t, n_f, 2)` feature map;
//! * time block `g` sees subcarriers `g*L .. (g+1)*L` of that map flattened
//!   symbol-major, i.e. an `(n_p_t, L, 2)` row-major slab, and emits an
//!   `(n_t, L, 2)` slab placed back at the same subcarriers.

mod attention;
mod checkpoint;
mod complexity;
mod interp;
mod network;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::GridConfig;
use crate::nn::{Activation, Mlp};
use crate::seed::{rng_for, stream};

pub use attention::{attention_block_eval, AttentionBlock, SNR_EMBED_HIDDEN, SNR_EMBED_OUT};
pub use checkpoint::{
    load_checkpoint, model_checksum, model_from_bytes, model_to_bytes, save_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use complexity::{complexity_report, BlockComplexity, ComplexityReport};
pub use interp::{interp_baseline, interp_baseline_tensor};
pub use network::{atten_forward, freqtime_forward, ForwardCache};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "freqtime")]
    FreqTime,
    #[serde(rename = "atten")]
    AttenFreqTime,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::FreqTime => "FreqTimeNet",
            Variant::AttenFreqTime => "AttenFreqTimeNet",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "freqtime" | "freqtimenet" => Ok(Variant::FreqTime),
            "atten" | "attenfreqtime" | "attenfreqtimenet" => Ok(Variant::AttenFreqTime),
            _ => Err(Error::invalid(format!(
                "unknown variant {s:?} (expected freqtime|atten)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreqTimeConfig {
    pub n_p_t: usize,
    pub n_p_f: usize,
    pub n_t: usize,
    pub n_f: usize,
    /// Subcarriers per time block (`L`).
    pub l_group: usize,
    pub share_time_blocks: bool,
    pub share_freq_blocks: bool,
}

impl Default for FreqTimeConfig {
    fn default() -> Self {
        Self {
            n_p_t: 2,
            n_p_f: 48,
            n_t: 14,
            n_f: 96,
            l_group: 12,
            share_time_blocks: true,
            share_freq_blocks: false,
        }
    }
}

impl FreqTimeConfig {
    /// Dimensions implied by a grid's pilot layout.
    pub fn from_grid(grid: &GridConfig, l_group: usize) -> Self {
        Self {
            n_p_t: grid.n_pilot_symbols(),
            n_p_f: grid.n_pilot_subcarriers(),
            n_t: grid.n_t,
            n_f: grid.n_f,
            l_group,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.n_p_t, self.n_p_f, self.n_t, self.n_f, self.l_group];
        if dims.contains(&0) {
            return Err(Error::invalid(format!("all dimensions must be positive: {self:?}")));
        }
        if !self.n_f.is_multiple_of(self.l_group) {
            return Err(Error::invalid(format!(
                "n_f = {} is not divisible by L = {}",
                self.n_f, self.l_group
            )));
        }
        Ok(())
    }

    pub fn matches_grid(&self, grid: &GridConfig) -> Result<()> {
        let ours = (self.n_p_t, self.n_p_f, self.n_t, self.n_f);
        let theirs = (grid.n_pilot_symbols(), grid.n_pilot_subcarriers(), grid.n_t, grid.n_f);
        if ours != theirs {
            return Err(Error::dims("model vs dataset (n_p_t, n_p_f, n_t, n_f)", ours, theirs));
        }
        Ok(())
    }

    pub fn n_groups(&self) -> usize {
        self.n_f / self.l_group
    }

    pub fn n_freq_blocks(&self) -> usize {
        if self.share_freq_blocks {
            1
        } else {
            self.n_p_t
        }
    }

    pub fn n_time_blocks(&self) -> usize {
        if self.share_time_blocks {
            1
        } else {
            self.n_groups()
        }
    }

    /// `[(in, hidden), (hidden, out)]` of a frequency block.
    pub fn freq_block_dims(&self) -> [(usize, usize, Activation); 2] {
        let (i, h, o) = (self.n_p_f * 2, self.n_p_f * 3, self.n_f * 2);
        [(i, h, Activation::Relu), (h, o, Activation::Identity)]
    }

    pub fn time_block_dims(&self) -> [(usize, usize, Activation); 2] {
        let i = self.n_p_t * self.l_group * 2;
        let o = self.n_t * self.l_group * 2;
        [(i, i, Activation::Relu), (i, o, Activation::Identity)]
    }
}

/// Parameters of a FreqTimeNet or AttenFreqTimeNet.
///
/// The same type doubles as the gradient container returned by
/// [`EstimatorModel::backward`].
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorModel {
    pub variant: Variant,
    pub config: FreqTimeConfig,
    pub freq_blocks: Vec<Mlp>,
    pub attention: Vec<AttentionBlock>,
    pub time_blocks: Vec<Mlp>,
}

impl EstimatorModel {
    /// Glorot-initialised model. Blocks are created in declaration order
    /// (frequency, attention, time) from a single seeded stream.
    pub fn new(variant: Variant, config: FreqTimeConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng_for(seed, stream::INIT, 0);
        Self::build(variant, config, &mut rng)
    }

    fn build<R: Rng>(variant: Variant, config: FreqTimeConfig, rng: &mut R) -> Result<Self> {
        let freq_blocks = (0..config.n_freq_blocks())
            .map(|_| Mlp::glorot(&config.freq_block_dims(), rng))
            .collect::<Result<Vec<_>>>()?;
        let attention = match variant {
            Variant::FreqTime => Vec::new(),
            Variant::AttenFreqTime => (0..config.n_p_t)
                .map(|_| AttentionBlock::glorot(config.n_f, rng))
                .collect::<Result<Vec<_>>>()?,
        };
        let time_blocks = (0..config.n_time_blocks())
            .map(|_| Mlp::glorot(&config.time_block_dims(), rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            variant,
            config,
            freq_blocks,
            attention,
            time_blocks,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            variant: self.variant,
            config: self.config.clone(),
            freq_blocks: self.freq_blocks.iter().map(Mlp::zeros_like).collect(),
            attention: self.attention.iter().map(AttentionBlock::zeros_like).collect(),
            time_blocks: self.time_blocks.iter().map(Mlp::zeros_like).collect(),
        }
    }

    /// Checks block counts and layer shapes against the config.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let check = |blocks: &[Mlp], count: usize, dims: [(usize, usize, Activation); 2], what: &'static str| {
            if blocks.len() != count {
                return Err(Error::dims(what, count, blocks.len()));
            }
            for b in blocks {
                let got: Vec<_> = b
                    .layers
                    .iter()
                    .map(|l| (l.in_dim(), l.out_dim(), l.activation))
                    .collect();
                if got != dims {
                    return Err(Error::dims(what, dims, got));
                }
            }
            Ok(())
        };
        check(
            &self.freq_blocks,
            self.config.n_freq_blocks(),
            self.config.freq_block_dims(),
            "frequency blocks",
        )?;
        check(
            &self.time_blocks,
            self.config.n_time_blocks(),
            self.config.time_block_dims(),
            "time blocks",
        )?;
        let expected_attention = match self.variant {
            Variant::FreqTime => 0,
            Variant::AttenFreqTime => self.config.n_p_t,
        };
        if self.attention.len() != expected_attention {
            return Err(Error::dims(
                "attention blocks",
                expected_attention,
                self.attention.len(),
            ));
        }
        for block in &self.attention {
            block.validate(self.config.n_f)?;
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    /// Parameter tensors in declaration order.
    pub fn param_slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for b in &self.freq_blocks {
            out.extend(b.param_slices());
        }
        for a in &self.attention {
            out.extend(a.snr_embed.param_slices());
            out.extend(a.factor_net.param_slices());
        }
        for b in &self.time_blocks {
            out.extend(b.param_slices());
        }
        out
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for b in &mut self.freq_blocks {
            out.extend(b.param_slices_mut());
        }
        for a in &mut self.attention {
            out.extend(a.snr_embed.param_slices_mut());
            out.extend(a.factor_net.param_slices_mut());
        }
        for b in &mut self.time_blocks {
            out.extend(b.param_slices_mut());
        }
        out
    }

    pub(crate) fn freq_block_for(&self, symbol: usize) -> usize {
        if self.config.share_freq_blocks {
            0
        } else {
            symbol
        }
    }

    pub(crate) fn time_block_for(&self, group: usize) -> usize {
        if self.config.share_time_blocks {
            0
        } else {
            group
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_parameter_count() {
        let m = EstimatorModel::new(Variant::FreqTime, FreqTimeConfig::default(), 0).unwrap();
        assert_eq!(m.param_count(), 102_432);
        assert_eq!(m.freq_blocks.len(), 2);
        assert_eq!(m.time_blocks.len(), 1);
        m.validate().unwrap();
    }

    #[test]
    fn shared_frequency_blocks() {
        let cfg = FreqTimeConfig {
            share_freq_blocks: true,
            ..FreqTimeConfig::default()
        };
        let m = EstimatorModel::new(Variant::FreqTime, cfg, 0).unwrap();
        assert_eq!(m.param_count(), 60_624);
    }

    #[test]
    fn separate_time_blocks() {
        let cfg = FreqTimeConfig {
            share_time_blocks: false,
            ..FreqTimeConfig::default()
        };
        let m = EstimatorModel::new(Variant::FreqTime, cfg, 0).unwrap();
        assert_eq!(m.time_blocks.len(), 8);
        assert_eq!(m.param_count(), 2 * 41_808 + 8 * 18_816);
    }

    #[test]
    fn atten_parameter_count() {
        let m = EstimatorModel::new(Variant::AttenFreqTime, FreqTimeConfig::default(), 0).unwrap();
        // Embedding 1->50->10, factor net (10+192)->96->192.
        let per_block = (50 + 50) + (50 * 10 + 10) + (202 * 96 + 96) + (96 * 192 + 192);
        assert_eq!(per_block, 38_722);
        assert_eq!(m.param_count(), 102_432 + 2 * per_block);
    }

    #[test]
    fn bad_configs() {
        let cfg = FreqTimeConfig {
            l_group: 7,
            ..FreqTimeConfig::default()
        };
        assert!(EstimatorModel::new(Variant::FreqTime, cfg, 0).is_err());
        let cfg = FreqTimeConfig {
            n_p_t: 0,
            ..FreqTimeConfig::default()
        };
        assert!(EstimatorModel::new(Variant::FreqTime, cfg, 0).is_err());
        assert!("conv".parse::<Variant>().is_err());
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let a = EstimatorModel::new(Variant::AttenFreqTime, FreqTimeConfig::default(), 4).unwrap();
        let b = EstimatorModel::new(Variant::AttenFreqTime, FreqTimeConfig::default(), 4).unwrap();
        let c = EstimatorModel::new(Variant::AttenFreqTime, FreqTimeConfig::default(), 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
