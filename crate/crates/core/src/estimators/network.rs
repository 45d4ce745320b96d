use ndarray::{s, Array1, Array2, Array3, Array4, ArrayView1, ArrayView4, Axis};

use super::attention::{check_snr, AttentionCache};
use super::{EstimatorModel, Variant};
use crate::error::{Error, Result};
use crate::link::PilotObservation;
use crate::nn::MlpCache;

/// Intermediate activations of a batched forward pass, consumed by
/// [`EstimatorModel::backward`].
pub struct ForwardCache {
    batch: usize,
    freq: Vec<MlpCache>,
    attention: Vec<AttentionCache>,
    /// One stacked cache when time blocks are shared, else one per group.
    time: Vec<MlpCache>,
}

fn to_matrix(a: ndarray::ArrayView3<f64>) -> Array2<f64> {
    let (b, r, c) = a.dim();
    a.as_standard_layout()
        .into_owned()
        .into_shape_with_order((b, r * c))
        .expect("contiguous")
}

impl EstimatorModel {
    fn check_input(&self, obs: &ArrayView4<f64>, snr: &ArrayView1<f64>) -> Result<()> {
        let c = &self.config;
        let (b, t, f, p) = obs.dim();
        if (t, f, p) != (c.n_p_t, c.n_p_f, 2) {
            return Err(Error::dims("estimator input", (c.n_p_t, c.n_p_f, 2), (t, f, p)));
        }
        if snr.len() != b {
            return Err(Error::dims("SNR batch", b, snr.len()));
        }
        Ok(())
    }

    /// Batched forward: `obs` is `(B, n_p_t, n_p_f, 2)`, `snr_linear` `(B)`;
    /// returns `(B, n_t, n_f, 2)`. The attention path is used iff the model
    /// has attention blocks.
    pub fn forward_batch(&self, obs: ArrayView4<f64>, snr_linear: ArrayView1<f64>) -> Result<Array4<f64>> {
        Ok(self.forward_impl(obs, snr_linear, self.uses_attention())?.0)
    }

    /// Forward pass that keeps what the backward pass needs.
    pub fn forward_train(
        &self,
        obs: ArrayView4<f64>,
        snr_linear: ArrayView1<f64>,
    ) -> Result<(Array4<f64>, ForwardCache)> {
        self.forward_impl(obs, snr_linear, self.uses_attention())
    }

    /// Forward for one observation, `(n_t, n_f, 2)`.
    pub fn forward(&self, obs: &PilotObservation) -> Result<Array3<f64>> {
        self.forward_single(obs, self.uses_attention())
    }

    fn uses_attention(&self) -> bool {
        self.variant == Variant::AttenFreqTime
    }

    fn forward_single(&self, obs: &PilotObservation, attention: bool) -> Result<Array3<f64>> {
        let batch = obs.h_p_ls.view().insert_axis(Axis(0));
        let snr = Array1::from_elem(1, obs.snr_linear);
        let (out, _) = self.forward_impl(batch, snr.view(), attention)?;
        Ok(out.index_axis_move(Axis(0), 0))
    }

    pub(crate) fn forward_impl(
        &self,
        obs: ArrayView4<f64>,
        snr_linear: ArrayView1<f64>,
        attention: bool,
    ) -> Result<(Array4<f64>, ForwardCache)> {
        self.check_input(&obs, &snr_linear)?;
        if attention {
            if self.attention.len() != self.config.n_p_t {
                return Err(Error::invalid("model has no attention blocks"));
            }
            check_snr(snr_linear.iter().copied())?;
        }
        let c = &self.config;
        let batch = obs.dim().0;
        let width = c.l_group * 2;
        let snr = snr_linear.to_owned();

        // Frequency stage: one block per pilot symbol, optionally gated.
        let mut freq = Vec::with_capacity(c.n_p_t);
        let mut gates = Vec::new();
        let mut features = Array3::<f64>::zeros((batch, c.n_p_t, c.n_f * 2));
        for k in 0..c.n_p_t {
            let x = to_matrix(obs.index_axis(Axis(1), k));
            let cache = self.freq_blocks[self.freq_block_for(k)].forward_cached(x.view())?;
            let f_g = cache.output();
            let mut slot = features.index_axis_mut(Axis(1), k);
            if attention {
                let gate = self.attention[k].forward_cached(f_g.view(), &snr)?;
                slot.assign(&(f_g * gate.factor.output()));
                gates.push(gate);
            } else {
                slot.assign(f_g);
            }
            freq.push(cache);
        }

        // Time stage over L-subcarrier groups.
        let groups = c.n_groups();
        let group_input = |g: usize| to_matrix(features.slice(s![.., .., g * width..(g + 1) * width]));
        let mut output = Array3::<f64>::zeros((batch, c.n_t, c.n_f * 2));
        let mut time = Vec::new();
        if c.share_time_blocks {
            let inputs: Vec<Array2<f64>> = (0..groups).map(group_input).collect();
            let views: Vec<_> = inputs.iter().map(|a| a.view()).collect();
            let stacked = ndarray::concatenate(Axis(0), &views).expect("equal widths");
            let cache = self.time_blocks[0].forward_cached(stacked.view())?;
            for g in 0..groups {
                let rows = cache.output().slice(s![g * batch..(g + 1) * batch, ..]);
                let slab = rows.to_shape((batch, c.n_t, width)).expect("row-major");
                output.slice_mut(s![.., .., g * width..(g + 1) * width]).assign(&slab);
            }
            time.push(cache);
        } else {
            for g in 0..groups {
                let cache = self.time_blocks[self.time_block_for(g)].forward_cached(group_input(g).view())?;
                let slab = cache.output().to_shape((batch, c.n_t, width)).expect("row-major");
                output.slice_mut(s![.., .., g * width..(g + 1) * width]).assign(&slab);
                time.push(cache);
            }
        }

        let output = output
            .into_shape_with_order((batch, c.n_t, c.n_f, 2))
            .expect("contiguous");
        Ok((
            output,
            ForwardCache {
                batch,
                freq,
                attention: gates,
                time,
            },
        ))
    }

    /// Reverse pass. `upstream` is the loss gradient w.r.t. the forward
    /// output. Returns parameter gradients (shaped like `self`) and the
    /// gradient w.r.t. the input observations.
    pub fn backward(&self, cache: &ForwardCache, upstream: ArrayView4<f64>) -> Result<(EstimatorModel, Array4<f64>)> {
        let c = &self.config;
        let batch = cache.batch;
        if upstream.dim() != (batch, c.n_t, c.n_f, 2) {
            return Err(Error::dims(
                "estimator upstream gradient",
                (batch, c.n_t, c.n_f, 2),
                upstream.dim(),
            ));
        }
        let mut grads = self.zeros_like();
        let width = c.l_group * 2;
        let groups = c.n_groups();
        let upstream = upstream
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((batch, c.n_t, c.n_f * 2))
            .expect("contiguous");
        let group_upstream = |g: usize| to_matrix(upstream.slice(s![.., .., g * width..(g + 1) * width]));

        let mut d_features = Array3::<f64>::zeros((batch, c.n_p_t, c.n_f * 2));
        if c.share_time_blocks {
            let ups: Vec<Array2<f64>> = (0..groups).map(group_upstream).collect();
            let views: Vec<_> = ups.iter().map(|a| a.view()).collect();
            let stacked = ndarray::concatenate(Axis(0), &views).expect("equal widths");
            let d_in = self.time_blocks[0].backward_into(&cache.time[0], stacked.view(), &mut grads.time_blocks[0])?;
            for g in 0..groups {
                let rows = d_in.slice(s![g * batch..(g + 1) * batch, ..]);
                let slab = rows.to_shape((batch, c.n_p_t, width)).expect("row-major");
                d_features
                    .slice_mut(s![.., .., g * width..(g + 1) * width])
                    .assign(&slab);
            }
        } else {
            for g in 0..groups {
                let b = self.time_block_for(g);
                let d_in = self.time_blocks[b].backward_into(
                    &cache.time[g],
                    group_upstream(g).view(),
                    &mut grads.time_blocks[b],
                )?;
                let slab = d_in.to_shape((batch, c.n_p_t, width)).expect("row-major");
                d_features
                    .slice_mut(s![.., .., g * width..(g + 1) * width])
                    .assign(&slab);
            }
        }

        let mut d_obs = Array4::<f64>::zeros((batch, c.n_p_t, c.n_p_f, 2));
        for k in 0..c.n_p_t {
            let d_fa = d_features.index_axis(Axis(1), k);
            let f_g = cache.freq[k].output();
            let d_fg = if let Some(gate) = cache.attention.get(k) {
                let s = gate.factor.output();
                let d_s = &d_fa * f_g;
                let block = &self.attention[k];
                let gblock = &mut grads.attention[k];
                let d_ctx = block
                    .factor_net
                    .backward_into(&gate.factor, d_s.view(), &mut gblock.factor_net)?;
                let embed_w = block.snr_embed.out_dim().expect("non-empty");
                let d_embed = d_ctx.slice(s![.., ..embed_w]);
                block
                    .snr_embed
                    .backward_into(&gate.embed, d_embed, &mut gblock.snr_embed)?;
                &d_fa * s + d_ctx.slice(s![.., embed_w..])
            } else {
                d_fa.to_owned()
            };
            let b = self.freq_block_for(k);
            let d_x = self.freq_blocks[b].backward_into(&cache.freq[k], d_fg.view(), &mut grads.freq_blocks[b])?;
            d_obs
                .index_axis_mut(Axis(1), k)
                .assign(&d_x.to_shape((batch, c.n_p_f, 2)).expect("row-major"));
        }
        Ok((grads, d_obs))
    }
}

/// FreqTimeNet forward: frequency blocks then time blocks, no gating. On an
/// AttenFreqTimeNet this evaluates the backbone alone.
pub fn freqtime_forward(model: &EstimatorModel, obs: &PilotObservation) -> Result<Array3<f64>> {
    model.forward_single(obs, false)
}

/// AttenFreqTimeNet forward: every frequency-block output is recalibrated
/// by its attention block before the time stage.
pub fn atten_forward(model: &EstimatorModel, obs: &PilotObservation) -> Result<Array3<f64>> {
    model.forward_single(obs, true)
}
