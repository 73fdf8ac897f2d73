use super::{Activation, GraphInputs, LayerError};
use crate::autodiff::{dropout, xavier_uniform, RngStream, Tensor};
use crate::linalg::Matrix;

/// One attention head: projection `W` (`d x d'`) and attention vector `a`
/// (`2d' x 1`, source half first).
#[derive(Debug, Clone)]
pub struct CalHead {
    pub w: Tensor,
    pub a: Tensor,
}

/// Masked multi-head self-attention over the binary adjacency. Output width
/// equals input width.
#[derive(Debug, Clone)]
pub struct CalLayer {
    heads: Vec<CalHead>,
    dropout: f64,
    slope: f64,
    activation: Activation,
}

impl CalLayer {
    pub fn new(
        width: usize,
        heads: usize,
        dropout: f64,
        slope: f64,
        activation: Activation,
        rng: &mut RngStream,
    ) -> Result<Self, LayerError> {
        if heads == 0 || width % heads != 0 {
            return Err(LayerError::HeadDivisibility { width, heads });
        }
        let d = width / heads;
        let heads = (0..heads)
            .map(|_| CalHead {
                w: Tensor::param(xavier_uniform(width, d, rng)),
                a: Tensor::param(xavier_uniform(2 * d, 1, rng)),
            })
            .collect();
        Self::from_heads(heads, dropout, slope, activation)
    }

    pub fn from_heads(heads: Vec<CalHead>, dropout: f64, slope: f64, activation: Activation) -> Result<Self, LayerError> {
        let first = heads.first().ok_or(LayerError::HeadDivisibility { width: 0, heads: 0 })?;
        let (width, d) = first.w.shape();
        if heads.len() * d != width {
            return Err(LayerError::HeadDivisibility {
                width,
                heads: heads.len(),
            });
        }
        for h in &heads {
            if h.w.shape() != (width, d) || h.a.shape() != (2 * d, 1) {
                return Err(LayerError::Dimension(format!(
                    "head shapes {:?}/{:?}, expected ({width}, {d})/({}, 1)",
                    h.w.shape(),
                    h.a.shape(),
                    2 * d
                )));
            }
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(LayerError::Config(format!("dropout must lie in [0,1), got {dropout}")));
        }
        Ok(Self {
            heads,
            dropout,
            slope,
            activation,
        })
    }

    pub fn heads(&self) -> &[CalHead] {
        &self.heads
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    pub fn width(&self) -> usize {
        self.heads[0].w.shape().0
    }

    /// `rng` enables training mode (dropout on inputs and on attention).
    /// Normalized attention per head is pushed onto `trace` when given.
    pub fn forward(
        &self,
        inputs: &GraphInputs,
        h: &Tensor,
        mut rng: Option<&mut RngStream>,
        mut trace: Option<&mut Vec<Matrix>>,
    ) -> Result<Tensor, LayerError> {
        if h.shape().1 != self.width() {
            return Err(LayerError::Dimension(format!(
                "CAL expects width {}, got {}",
                self.width(),
                h.shape().1
            )));
        }
        let h = match rng.as_deref_mut() {
            Some(r) => dropout(h, self.dropout, r)?,
            None => h.clone(),
        };
        let d = self.width() / self.heads.len();
        let src: Vec<usize> = (0..d).collect();
        let dst: Vec<usize> = (d..2 * d).collect();
        let mut outs = Vec::with_capacity(self.heads.len());
        for head in &self.heads {
            let z = h.matmul(&head.w)?;
            let s = z.matmul(&head.a.select_rows(&src)?)?;
            let t = z.matmul(&head.a.select_rows(&dst)?)?;
            let mut alpha = Tensor::masked_attention(&s, &t, inputs.mask(), self.slope)?;
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(alpha.value().clone());
            }
            if let Some(r) = rng.as_deref_mut() {
                alpha = dropout(&alpha, self.dropout, r)?;
            }
            outs.push(self.activation.apply(&alpha.matmul(&z)?));
        }
        Ok(Tensor::concat_cols(&outs)?)
    }
}
