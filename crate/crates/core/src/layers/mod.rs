//! Semantic convolution (SCL), content attention (CAL) and the composer that
//! stacks them under a classification head.

mod cal;
mod config;
mod model;
mod scl;

use std::sync::Arc;

pub use cal::{CalHead, CalLayer};
pub use config::{Activation, LayerKind, ModelConfig, Variant};
pub use model::{ForwardOutput, HaeModel, Layer, Mode};
pub use scl::SclLayer;

use crate::autodiff::{Tensor, TensorError};
use crate::hin::{HeteroGraph, HinError};
use crate::linalg::Matrix;
use crate::parallel::Execution;
use crate::semantics::{binary_adjacency, common_target, BinaryAdjacency, SemanticCache, SemanticStructure, SemanticsError};

#[derive(Debug, thiserror::Error)]
pub enum LayerError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("unknown variant `{0}`")]
    UnknownVariant(String),
    #[error("width {width} is not divisible by {heads} heads")]
    HeadDivisibility { width: usize, heads: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("parameter mismatch: {0}")]
    Parameters(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Graph(#[from] HinError),
}

impl Activation {
    pub fn apply(self, x: &Tensor) -> Tensor {
        match self {
            Activation::Identity => x.clone(),
            Activation::Relu => x.relu(),
            Activation::Elu => x.elu(1.0),
            Activation::Sigmoid => x.sigmoid(),
        }
    }
}

/// Everything a model reads from the graph: target-node features, one
/// similarity matrix per structure and the shared binary adjacency.
#[derive(Debug, Clone)]
pub struct GraphInputs {
    features: Matrix,
    structures: Vec<String>,
    similarities: Arc<Vec<Arc<Matrix>>>,
    adjacency: BinaryAdjacency,
    mask: Matrix,
}

impl GraphInputs {
    pub fn new(
        features: Matrix,
        structures: Vec<String>,
        similarities: Vec<Matrix>,
        adjacency: BinaryAdjacency,
    ) -> Result<Self, LayerError> {
        let n = features.rows();
        if adjacency.n() != n {
            return Err(LayerError::Dimension(format!(
                "adjacency covers {} nodes, features {n}",
                adjacency.n()
            )));
        }
        if structures.len() != similarities.len() {
            return Err(LayerError::Dimension(format!(
                "{} structure names for {} similarity matrices",
                structures.len(),
                similarities.len()
            )));
        }
        for (name, s) in structures.iter().zip(&similarities) {
            if s.shape() != (n, n) {
                return Err(LayerError::Dimension(format!(
                    "similarity for `{name}` is {:?}, expected ({n}, {n})",
                    s.shape()
                )));
            }
            if (0..n).any(|i| s[(i, i)] != 1.0) {
                return Err(LayerError::Dimension(format!("similarity for `{name}` has a diagonal entry != 1")));
            }
        }
        let mask = adjacency.mask();
        Ok(Self {
            features,
            structures,
            similarities: Arc::new(similarities.into_iter().map(Arc::new).collect()),
            adjacency,
            mask,
        })
    }

    /// Compiles `structures` on `g` and pairs them with the target type's
    /// features as given (`H⁰ = X`). A type without features gets width 0.
    pub fn from_graph(g: &HeteroGraph, structures: &[SemanticStructure], exec: Execution) -> Result<Self, LayerError> {
        let target = g.type_id(common_target(structures)?)?;
        let n = g.node_count(target);
        let features = g
            .features(target)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(n, 0));
        let cache = SemanticCache::build(g, structures, exec)?;
        let compiled: Vec<_> = structures.iter().map(|s| cache.get(s).expect("compiled above")).collect();
        let counts: Vec<_> = compiled.iter().map(|c| c.counts.clone()).collect();
        let adjacency = binary_adjacency(&counts)?;
        Self::new(
            features,
            structures.iter().map(ToString::to_string).collect(),
            compiled.iter().map(|c| c.similarity.values().clone()).collect(),
            adjacency,
        )
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn structures(&self) -> &[String] {
        &self.structures
    }

    pub fn similarities(&self) -> &Arc<Vec<Arc<Matrix>>> {
        &self.similarities
    }

    pub fn adjacency(&self) -> &BinaryAdjacency {
        &self.adjacency
    }

    /// Dense 0/1 form of the adjacency.
    pub fn mask(&self) -> &Matrix {
        &self.mask
    }

    /// Same graph with different features.
    pub fn with_features(&self, features: Matrix) -> Result<Self, LayerError> {
        if features.rows() != self.n() {
            return Err(LayerError::Dimension(format!(
                "{} feature rows for {} nodes",
                features.rows(),
                self.n()
            )));
        }
        Ok(Self {
            features,
            ..self.clone()
        })
    }

    /// Relabels nodes consistently everywhere: new node `perm[i]` is old `i`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n();
        let mut inv = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let features = self.features.select_rows(&inv);
        let sims = self
            .similarities
            .iter()
            .map(|s| Arc::new(Matrix::from_fn(n, n, |i, j| s[(inv[i], inv[j])])))
            .collect();
        let adjacency = self.adjacency.permuted(perm);
        let mask = adjacency.mask();
        Self {
            features,
            structures: self.structures.clone(),
            similarities: Arc::new(sims),
            adjacency,
            mask,
        }
    }
}
