use ndarray::{concatenate, Array1, Array2, Array3, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp, MlpCache};

pub const SNR_EMBED_HIDDEN: usize = 50;
pub const SNR_EMBED_OUT: usize = 10;

/// SNR-conditioned gate for one frequency-block output `F^G`.
///
/// * context: `I = [snr_embed(snr_linear), F^G]`;
/// * factor: `S = factor_net(I)`, sigmoid so `S` lies in (0, 1);
/// * recalibration: `F^A = F^G * S` elementwise.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionBlock {
    /// 1 -> 50 (ReLU) -> 10 (identity).
    pub snr_embed: Mlp,
    /// (10 + 2 n_f) -> n_f (ReLU) -> 2 n_f (sigmoid).
    pub factor_net: Mlp,
}

pub(crate) struct AttentionCache {
    pub embed: MlpCache,
    pub factor: MlpCache,
}

impl AttentionBlock {
    pub fn glorot<R: Rng + ?Sized>(n_f: usize, rng: &mut R) -> Result<Self> {
        let [e, f] = Self::dims(n_f);
        Ok(Self {
            snr_embed: Mlp::glorot(&e, rng)?,
            factor_net: Mlp::glorot(&f, rng)?,
        })
    }

    fn dims(n_f: usize) -> [[(usize, usize, Activation); 2]; 2] {
        [
            [
                (1, SNR_EMBED_HIDDEN, Activation::Relu),
                (SNR_EMBED_HIDDEN, SNR_EMBED_OUT, Activation::Identity),
            ],
            [
                (SNR_EMBED_OUT + 2 * n_f, n_f, Activation::Relu),
                (n_f, 2 * n_f, Activation::Sigmoid),
            ],
        ]
    }

    pub(crate) fn validate(&self, n_f: usize) -> Result<()> {
        let [e, f] = Self::dims(n_f);
        let shape = |m: &Mlp| -> Vec<_> {
            m.layers
                .iter()
                .map(|l| (l.in_dim(), l.out_dim(), l.activation))
                .collect()
        };
        if shape(&self.snr_embed) != e {
            return Err(Error::dims("attention snr_embed", e, shape(&self.snr_embed)));
        }
        if shape(&self.factor_net) != f {
            return Err(Error::dims("attention factor_net", f, shape(&self.factor_net)));
        }
        Ok(())
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            snr_embed: self.snr_embed.zeros_like(),
            factor_net: self.factor_net.zeros_like(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.snr_embed.param_count() + self.factor_net.param_count()
    }

    pub fn flops(&self) -> usize {
        self.snr_embed.flops() + self.factor_net.flops()
    }

    /// Runs the gate on a batch: `f_g` is `(B, 2 n_f)`, `snr_linear` `(B)`.
    pub(crate) fn forward_cached(&self, f_g: ArrayView2<f64>, snr_linear: &Array1<f64>) -> Result<AttentionCache> {
        check_snr(snr_linear.iter().copied())?;
        let snr = snr_linear.view().insert_axis(Axis(1));
        let embed = self.snr_embed.forward_cached(snr)?;
        let context = concatenate(Axis(1), &[embed.output().view(), f_g]).expect("batch sizes agree");
        let factor = self.factor_net.forward_cached(context.view())?;
        Ok(AttentionCache { embed, factor })
    }

    /// Scaling factors `S` for a batch.
    pub fn scaling(&self, f_g: ArrayView2<f64>, snr_linear: &Array1<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(f_g, snr_linear)?.factor.output().clone())
    }
}

pub(crate) fn check_snr(values: impl IntoIterator<Item = f64>) -> Result<()> {
    for v in values {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::invalid(format!(
                "attention needs a positive finite linear SNR, got {v}"
            )));
        }
    }
    Ok(())
}

/// `F^A = F^G * S` for a single `(1, n_f, 2)` feature map.
pub fn attention_block_eval(block: &AttentionBlock, f_g: &Array3<f64>, snr_linear: f64) -> Result<Array3<f64>> {
    let dim = f_g.dim();
    let n_f = (block.factor_net.out_dim().unwrap_or(0)) / 2;
    if dim != (1, n_f, 2) {
        return Err(Error::dims("attention input F^G", (1, n_f, 2), dim));
    }
    let flat = f_g
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((1, 2 * n_f))
        .expect("contiguous");
    let s = block.scaling(flat.view(), &Array1::from_elem(1, snr_linear))?;
    let f_a = flat * s;
    Ok(f_a.into_shape_with_order(dim).expect("same size"))
}
