use ndarray::{Array3, ArrayView3};

use crate::error::{Error, Result};
use crate::link::{GridConfig, PilotObservation, PilotPattern};

/// Linear interpolation through `(xs, ys)` evaluated at `x`, extrapolating
/// from the nearest end segment. A single support point gives a constant.
fn interp_line(xs: &[usize], ys: &[f64], x: usize) -> f64 {
    if xs.len() == 1 {
        return ys[0];
    }
    let j = match xs.binary_search(&x) {
        Ok(j) => return ys[j],
        Err(0) => 0,
        Err(j) if j >= xs.len() => xs.len() - 2,
        Err(j) => j - 1,
    };
    let (x0, x1) = (xs[j] as f64, xs[j + 1] as f64);
    let w = (x as f64 - x0) / (x1 - x0);
    ys[j] + w * (ys[j + 1] - ys[j])
}

/// LS + bilinear baseline on a raw `(n_p_t, n_p_f, 2)` tensor: linear
/// interpolation across subcarriers on each pilot symbol, then across
/// symbols on each subcarrier. Real and imaginary planes are independent.
pub fn interp_baseline_tensor(h_p: ArrayView3<f64>, pattern: &PilotPattern, grid: &GridConfig) -> Result<Array3<f64>> {
    let (rows, cols) = pattern.shape();
    if h_p.dim() != (rows, cols, 2) {
        return Err(Error::dims("interpolation input", (rows, cols, 2), h_p.dim()));
    }
    let max_symbol = pattern.symbols().last().copied().unwrap_or(0);
    let max_sc = pattern.subcarriers().last().copied().unwrap_or(0);
    if max_symbol >= grid.n_t || max_sc >= grid.n_f {
        return Err(Error::dims(
            "interpolation pattern vs grid",
            (grid.n_t, grid.n_f),
            (max_symbol + 1, max_sc + 1),
        ));
    }
    let mut along_freq = Array3::<f64>::zeros((rows, grid.n_f, 2));
    let mut line = vec![0.0; cols];
    for r in 0..rows {
        for p in 0..2 {
            for (c, v) in line.iter_mut().enumerate() {
                *v = h_p[[r, c, p]];
            }
            for i in 0..grid.n_f {
                along_freq[[r, i, p]] = interp_line(pattern.subcarriers(), &line, i);
            }
        }
    }
    let mut out = Array3::<f64>::zeros((grid.n_t, grid.n_f, 2));
    let mut column = vec![0.0; rows];
    for i in 0..grid.n_f {
        for p in 0..2 {
            for (r, v) in column.iter_mut().enumerate() {
                *v = along_freq[[r, i, p]];
            }
            for k in 0..grid.n_t {
                out[[k, i, p]] = interp_line(pattern.symbols(), &column, k);
            }
        }
    }
    Ok(out)
}

pub fn interp_baseline(obs: &PilotObservation, pattern: &PilotPattern, grid: &GridConfig) -> Result<Array3<f64>> {
    interp_baseline_tensor(obs.h_p_ls.view(), pattern, grid)
}
