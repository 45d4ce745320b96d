use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }
}

/// `y = act(W x + b)` with `W` stored `out_dim x in_dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            weights: Array2::zeros((out_dim, in_dim)),
            biases: Array1::zeros(out_dim),
            activation,
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = Array2::from_shape_simple_fn((out_dim, in_dim), || rng.random_range(-limit..limit));
        Self {
            weights,
            biases: Array1::zeros(out_dim),
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    /// Two flops per multiply-accumulate; bias adds and activations are not
    /// counted.
    pub fn flops(&self) -> usize {
        2 * self.in_dim() * self.out_dim()
    }

    pub fn forward(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        if x.len() != self.in_dim() {
            return Err(Error::dims("dense input", self.in_dim(), x.len()));
        }
        let act = self.activation;
        Ok((self.weights.dot(&x) + &self.biases).mapv_into(|z| act.apply(z)))
    }

    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.in_dim() {
            return Err(Error::dims("dense batch input", self.in_dim(), x.ncols()));
        }
        let act = self.activation;
        Ok((x.dot(&self.weights.t()) + &self.biases).mapv_into(|z| act.apply(z)))
    }
}

/// A stack of dense layers. Gradients are returned in an `Mlp` of the same
/// shape, which keeps parameter and gradient enumeration in lockstep.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

/// Activations recorded by [`Mlp::forward_cached`]: the input followed by
/// every layer output.
#[derive(Clone, Debug)]
pub struct MlpCache {
    activations: Vec<Array2<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("cache holds the input")
    }
}

impl Mlp {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::dims("layer chaining", pair[0].out_dim(), pair[1].in_dim()));
            }
        }
        Ok(Self { layers })
    }

    /// Glorot-initialised stack from `(in, out, activation)` triples.
    pub fn glorot<R: Rng + ?Sized>(spec: &[(usize, usize, Activation)], rng: &mut R) -> Result<Self> {
        Self::new(spec.iter().map(|&(i, o, a)| DenseLayer::glorot(i, o, a, rng)).collect())
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| DenseLayer::zeros(l.in_dim(), l.out_dim(), l.activation))
                .collect(),
        }
    }

    pub fn in_dim(&self) -> Option<usize> {
        self.layers.first().map(DenseLayer::in_dim)
    }

    pub fn out_dim(&self) -> Option<usize> {
        self.layers.last().map(DenseLayer::out_dim)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    /// Flops for one forward application on one sample.
    pub fn flops(&self) -> usize {
        self.layers.iter().map(DenseLayer::flops).sum()
    }

    pub fn forward(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        let mut h = x.to_owned();
        for layer in &self.layers {
            h = layer.forward(h.view())?;
        }
        Ok(h)
    }

    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut h = x.to_owned();
        for layer in &self.layers {
            h = layer.forward_batch(h.view())?;
        }
        Ok(h)
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Result<MlpCache> {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_owned());
        for layer in &self.layers {
            let next = layer.forward_batch(activations.last().expect("non-empty").view())?;
            activations.push(next);
        }
        Ok(MlpCache { activations })
    }

    /// Backpropagates `upstream` (gradient w.r.t. the output) through the
    /// cached pass, adding parameter gradients into `grads` and returning the
    /// gradient w.r.t. the input.
    pub fn backward_into(&self, cache: &MlpCache, upstream: ArrayView2<f64>, grads: &mut Mlp) -> Result<Array2<f64>> {
        if cache.activations.len() != self.layers.len() + 1 || grads.layers.len() != self.layers.len() {
            return Err(Error::dims(
                "backward layer count",
                self.layers.len(),
                grads.layers.len(),
            ));
        }
        if upstream.dim() != cache.output().dim() {
            return Err(Error::dims("backward upstream", cache.output().dim(), upstream.dim()));
        }
        let mut delta = upstream.to_owned();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.activations[idx];
            let output = &cache.activations[idx + 1];
            let act = layer.activation;
            if act != Activation::Identity {
                ndarray::Zip::from(&mut delta)
                    .and(output)
                    .for_each(|d, &y| *d *= act.derivative_from_output(y));
            }
            let g = &mut grads.layers[idx];
            ndarray::linalg::general_mat_mul(1.0, &delta.t(), input, 1.0, &mut g.weights);
            g.biases += &delta.sum_axis(Axis(0));
            delta = delta.dot(&layer.weights);
        }
        Ok(delta)
    }

    pub fn backward(&self, cache: &MlpCache, upstream: ArrayView2<f64>) -> Result<(Array2<f64>, Mlp)> {
        let mut grads = self.zeros_like();
        let input_grad = self.backward_into(cache, upstream, &mut grads)?;
        Ok((input_grad, grads))
    }

    pub fn param_slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| {
                [
                    l.weights.as_slice().expect("standard layout"),
                    l.biases.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.weights.as_slice_mut().expect("standard layout"),
                    l.biases.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }
}
