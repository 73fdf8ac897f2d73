use serde::{Deserialize, Serialize};

use super::{Tensor, TensorError};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moment buffers are created lazily on the
/// first step and are tied to parameter order.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    t: u64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// Updates every parameter from its accumulated gradient.
    pub fn step(&mut self, params: &[Tensor]) -> Result<(), TensorError> {
        let grads = params
            .iter()
            .enumerate()
            .map(|(k, p)| p.grad().ok_or(TensorError::MissingGradient(k)))
            .collect::<Result<Vec<_>, _>>()?;
        let mut values: Vec<Matrix> = params.iter().map(|p| p.value().clone()).collect();
        self.step_raw(&mut values, &grads);
        for (p, v) in params.iter().zip(values) {
            p.set_value(v);
        }
        Ok(())
    }

    /// Same update on plain matrices.
    pub fn step_raw(&mut self, values: &mut [Matrix], grads: &[Matrix]) {
        assert_eq!(values.len(), grads.len());
        if self.m.is_empty() {
            self.m = values.iter().map(|v| Matrix::zeros(v.rows(), v.cols())).collect();
            self.v = self.m.clone();
        }
        assert_eq!(self.m.len(), values.len(), "parameter list changed between steps");
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for (k, (val, g)) in values.iter_mut().zip(grads).enumerate() {
            assert_eq!(val.shape(), g.shape());
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (((x, &g), m), v) in val
                .as_mut_slice()
                .iter_mut()
                .zip(g.as_slice())
                .zip(m.as_mut_slice())
                .zip(v.as_mut_slice())
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *x -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut adam = Adam::new(AdamConfig { lr: 0.1, ..Default::default() });
        let mut x = vec![Matrix::filled(1, 2, 1.0)];
        adam.step_raw(&mut x, &[Matrix::from_rows(&[vec![3.0, -0.5]])]);
        assert!((x[0][(0, 0)] - 0.9).abs() < 1e-7);
        assert!((x[0][(0, 1)] - 1.1).abs() < 1e-7);
    }

    #[test]
    fn zero_gradient_leaves_parameter() {
        let mut adam = Adam::new(AdamConfig::default());
        let mut x = vec![Matrix::filled(2, 2, 0.25)];
        adam.step_raw(&mut x, &[Matrix::zeros(2, 2)]);
        assert_eq!(x[0], Matrix::filled(2, 2, 0.25));
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn missing_gradient() {
        let p = Tensor::param(Matrix::zeros(1, 1));
        assert_eq!(
            Adam::new(AdamConfig::default()).step(&[p]).unwrap_err(),
            TensorError::MissingGradient(0)
        );
    }

    #[test]
    fn minimizes_a_quadratic() {
        let p = Tensor::param(Matrix::from_rows(&[vec![2.0, -3.0]]));
        let mut adam = Adam::new(AdamConfig { lr: 0.05, ..Default::default() });
        for _ in 0..2000 {
            p.zero_grad();
            p.hadamard(&p).unwrap().sum().backward().unwrap();
            adam.step(std::slice::from_ref(&p)).unwrap();
        }
        assert!(p.value().max_abs() < 1e-3, "{:?}", p.value());
    }
}
