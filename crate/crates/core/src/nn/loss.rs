use ndarray::{Array, ArrayView, Dimension};

use crate::error::{Error, Result};

/// Mean squared error over all elements and its gradient `2 (pred - target) / N`.
pub fn mse_loss<D: Dimension>(pred: ArrayView<f64, D>, target: ArrayView<f64, D>) -> Result<(f64, Array<f64, D>)> {
    if pred.shape() != target.shape() {
        return Err(Error::dims("mse_loss", target.shape(), pred.shape()));
    }
    if pred.is_empty() {
        return Err(Error::invalid("mse_loss on empty tensors"));
    }
    let n = pred.len() as f64;
    let diff = &pred - &target;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    let grad = diff.mapv_into(|d| 2.0 * d / n);
    Ok((loss, grad))
}
