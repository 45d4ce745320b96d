use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

/// Bias-corrected Adam over a fixed list of parameter tensors.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, shapes: &[usize]) -> Self {
        Self {
            config,
            step: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_params(config: AdamConfig, params: &[&[f64]]) -> Self {
        let shapes: Vec<usize> = params.iter().map(|p| p.len()).collect();
        Self::new(config, &shapes)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: Vec<&[f64]>) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::dims(
                "adam tensor count",
                self.m.len(),
                (params.len(), grads.len()),
            ));
        }
        for (i, (p, g)) in params.iter().zip(&grads).enumerate() {
            if p.len() != self.m[i].len() || g.len() != self.m[i].len() {
                return Err(Error::dims("adam tensor", self.m[i].len(), (p.len(), g.len())));
            }
        }
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_step(g: f64) -> f64 {
        let mut p = [0.0];
        let mut adam = AdamState::new(AdamConfig::default(), &[1]);
        adam.step(vec![&mut p[..]], vec![&[g][..]]).unwrap();
        p[0]
    }

    #[test]
    fn first_step_closed_form() {
        let update = one_step(1.0);
        let expected = -1e-3 / (1.0 + 1e-7);
        assert!((update - expected).abs() < 1e-18, "{update}");
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        assert_eq!(one_step(0.0), 0.0);
    }

    #[test]
    fn first_step_descends() {
        for g in [-3.0, -1e-4, 2e-6, 0.5, 40.0] {
            assert_eq!(one_step(g).signum(), -g.signum());
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut adam = AdamState::new(AdamConfig::default(), &[2]);
        let mut p = [0.0; 3];
        assert!(adam.step(vec![&mut p[..]], vec![&[0.0; 3][..]]).is_err());
        assert!(adam.step(vec![], vec![]).is_err());
        assert_eq!(adam.step_count(), 0);
    }
}
