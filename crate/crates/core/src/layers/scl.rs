use super::{Activation, GraphInputs, LayerError};
use crate::autodiff::{softmax_simplex, xavier_uniform, RngStream, Tensor};

/// Semantic convolution: propagates over `D^{-1/2} A D^{-1/2}` where
/// `A = Σ_m softmax(θ)_m S_m` is rebuilt inside the graph on every pass.
#[derive(Debug, Clone)]
pub struct SclLayer {
    theta: Tensor,
    weights: Vec<Tensor>,
    hidden_activation: Activation,
    output_activation: Activation,
}

impl SclLayer {
    /// `sublayers` weight matrices: `d_in x d_out`, then `d_out x d_out`.
    pub fn new(
        structures: usize,
        d_in: usize,
        d_out: usize,
        sublayers: usize,
        hidden_activation: Activation,
        output_activation: Activation,
        rng: &mut RngStream,
    ) -> Result<Self, LayerError> {
        if structures == 0 || sublayers == 0 {
            return Err(LayerError::Config("SCL needs at least one structure and one sublayer".into()));
        }
        let theta = Tensor::param(xavier_uniform(1, structures, rng));
        let weights = (0..sublayers)
            .map(|l| {
                let rows = if l == 0 { d_in } else { d_out };
                Tensor::param(xavier_uniform(rows, d_out, rng))
            })
            .collect();
        Ok(Self {
            theta,
            weights,
            hidden_activation,
            output_activation,
        })
    }

    /// Builds a layer from explicit parameter values.
    pub fn from_parts(
        theta: Tensor,
        weights: Vec<Tensor>,
        hidden_activation: Activation,
        output_activation: Activation,
    ) -> Result<Self, LayerError> {
        if theta.shape().0 != 1 || weights.is_empty() {
            return Err(LayerError::Config("theta must be a row and weights non-empty".into()));
        }
        for w in weights.windows(2) {
            if w[0].shape().1 != w[1].shape().0 {
                return Err(LayerError::Dimension(format!(
                    "sublayer widths {:?} and {:?} do not chain",
                    w[0].shape(),
                    w[1].shape()
                )));
            }
        }
        Ok(Self {
            theta,
            weights,
            hidden_activation,
            output_activation,
        })
    }

    pub fn theta(&self) -> &Tensor {
        &self.theta
    }

    pub fn weights(&self) -> &[Tensor] {
        &self.weights
    }

    pub fn d_in(&self) -> usize {
        self.weights[0].shape().0
    }

    pub fn d_out(&self) -> usize {
        self.weights.last().unwrap().shape().1
    }

    /// The structure weights `softmax(θ)`.
    pub fn omega(&self) -> Vec<f64> {
        softmax_simplex(self.theta.value().row(0))
    }

    pub fn forward(&self, inputs: &GraphInputs, h: &Tensor) -> Result<Tensor, LayerError> {
        let m = inputs.similarities().len();
        if self.theta.shape().1 != m {
            return Err(LayerError::Dimension(format!(
                "SCL has {} structure weights but inputs carry {m} similarities",
                self.theta.shape().1
            )));
        }
        if h.shape().1 != self.d_in() {
            return Err(LayerError::Dimension(format!(
                "SCL expects width {}, got {}",
                self.d_in(),
                h.shape().1
            )));
        }
        let omega = self.theta.row_softmax();
        let a = Tensor::weighted_sum(&omega, inputs.similarities().clone())?;
        let a_hat = a.sym_normalize()?;
        let mut h = h.clone();
        for (l, w) in self.weights.iter().enumerate() {
            let act = if l + 1 == self.weights.len() {
                self.output_activation
            } else {
                self.hidden_activation
            };
            h = act.apply(&a_hat.matmul(&h.matmul(w)?)?);
        }
        Ok(h)
    }
}
