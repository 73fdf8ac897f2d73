//! Reverse-mode automatic differentiation over dense matrices, plus the
//! training utilities that sit directly on top of it: seeded randomness,
//! initialization, dropout, Adam, gradient checking and checkpoints.

mod checkpoint;
mod gradcheck;
mod init;
mod optim;
mod rng;
mod tensor;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointError};
pub use gradcheck::{finite_difference_check, GradCheckReport};
pub use init::{softmax_simplex, xavier_uniform};
pub use optim::{Adam, AdamConfig};
pub use rng::RngStream;
pub use tensor::Tensor;

use rand::RngCore;

use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TensorError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("row {0} has no unmasked entry")]
    EmptyMaskRow(usize),
    #[error("row {0} has zero degree")]
    ZeroDegree(usize),
    #[error("index {index} out of range for {len} rows")]
    Index { index: usize, len: usize },
    #[error("{0}")]
    Domain(&'static str),
    #[error("empty input to {0}")]
    Empty(&'static str),
    #[error("backward needs a scalar, got shape {0:?}")]
    NotScalar((usize, usize)),
    #[error("computation graph contains a cycle")]
    Cycle,
    #[error("parameter {0} has no gradient")]
    MissingGradient(usize),
}

/// Inverted dropout: zeroes each entry with probability `p` and rescales the
/// survivors by `1 / (1 − p)`. Identity when `p == 0`.
pub fn dropout(x: &Tensor, p: f64, rng: &mut RngStream) -> Result<Tensor, TensorError> {
    if !(0.0..1.0).contains(&p) {
        return Err(TensorError::Domain("dropout rate must lie in [0, 1)"));
    }
    if p == 0.0 {
        return Ok(x.clone());
    }
    let (r, c) = x.shape();
    let keep = 1.0 / (1.0 - p);
    // drop when a uniform u64 falls below p·2⁶⁴
    let threshold = (p * 2f64.powi(64)) as u64;
    let mask = Matrix::from_fn(r, c, |_, _| if rng.next_u64() < threshold { 0.0 } else { keep });
    x.mask(mask)
}
