//! Meta-path and meta-graph semantics over a [`HeteroGraph`]: parsing,
//! commuting matrices, per-structure similarities, the weighted similarity
//! adjacency and the binary "reachable by any structure" adjacency.

mod commuting;
mod oracle;
mod similarity;
mod structure;

use std::collections::BTreeMap;
use std::sync::Arc;

pub use commuting::{chain_product, commuting_matrix, commuting_matrix_with, ChainOrder, CommutingMatrix};
pub use oracle::brute_force_instance_count;
pub use similarity::{semsim_adjacency, structure_similarity, sym_normalize, SimilarityMatrix};
pub use structure::{parse_structure, Element, SemanticStructure, StructureError};

use crate::hin::{HeteroGraph, HinError};
use crate::linalg::Matrix;
use crate::parallel::{self, Execution};
use crate::sparse::Overflow;

#[derive(Debug, thiserror::Error)]
pub enum SemanticsError {
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Graph(#[from] HinError),
    #[error(transparent)]
    Overflow(#[from] Overflow),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("weights are not on the simplex: {0}")]
    Simplex(String),
    #[error("row {0} has zero degree")]
    ZeroDegree(usize),
    #[error("structures disagree on the target type: `{0}` vs `{1}`")]
    TargetMismatch(String, String),
}

/// Target-node adjacency where `i ~ j` iff some structure has an instance
/// between them; every node is its own neighbour.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryAdjacency {
    neighbors: Vec<Vec<usize>>,
}

impl BinaryAdjacency {
    /// Sorts, dedups and adds the self-loop to every list.
    pub fn from_neighbors(mut neighbors: Vec<Vec<usize>>) -> Self {
        for (i, row) in neighbors.iter_mut().enumerate() {
            row.push(i);
            row.sort_unstable();
            row.dedup();
        }
        Self { neighbors }
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum()
    }

    /// Dense 0/1 mask.
    pub fn mask(&self) -> Matrix {
        let n = self.n();
        let mut m = Matrix::zeros(n, n);
        for (i, row) in self.neighbors.iter().enumerate() {
            for &j in row {
                m[(i, j)] = 1.0;
            }
        }
        m
    }

    /// Breadth-first hop distances from `src`; `None` when unreachable.
    pub fn hop_distances(&self, src: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n()];
        dist[src] = Some(0);
        let mut queue = std::collections::VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap();
            for &v in &self.neighbors[u] {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Relabels nodes: new node `perm[i]` is old node `i`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut rows = vec![Vec::new(); self.n()];
        for (i, row) in self.neighbors.iter().enumerate() {
            rows[perm[i]] = row.iter().map(|&j| perm[j]).collect();
        }
        Self::from_neighbors(rows)
    }
}

pub fn binary_adjacency(cs: &[CommutingMatrix]) -> Result<BinaryAdjacency, SemanticsError> {
    let Some(first) = cs.first() else {
        return Err(SemanticsError::Shape("no commuting matrices".into()));
    };
    let n = first.n();
    if let Some(c) = cs.iter().find(|c| c.n() != n) {
        return Err(SemanticsError::Shape(format!(
            "commuting matrix for `{}` is {}x{}, expected {n}x{n}",
            c.structure(),
            c.n(),
            c.n()
        )));
    }
    let rows = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| i == j || cs.iter().any(|c| c.get(i, j) > 0))
                .collect()
        })
        .collect();
    Ok(BinaryAdjacency::from_neighbors(rows))
}

/// One compiled structure: its counts and normalized similarity.
#[derive(Debug, Clone)]
pub struct CompiledStructure {
    pub counts: CommutingMatrix,
    pub similarity: SimilarityMatrix,
}

/// Compiled structures for one graph, keyed by canonical structure string.
#[derive(Debug, Clone, Default)]
pub struct SemanticCache {
    entries: BTreeMap<String, Arc<CompiledStructure>>,
}

impl SemanticCache {
    /// Compiles every structure (in parallel across structures).
    pub fn build(g: &HeteroGraph, structures: &[SemanticStructure], exec: Execution) -> Result<Self, SemanticsError> {
        let mut cache = Self::default();
        cache.extend(g, structures, exec)?;
        Ok(cache)
    }

    pub fn extend(&mut self, g: &HeteroGraph, structures: &[SemanticStructure], exec: Execution) -> Result<(), SemanticsError> {
        let missing: Vec<&SemanticStructure> = structures
            .iter()
            .filter(|s| !self.entries.contains_key(&s.to_string()))
            .collect();
        let compiled = parallel::try_map_indices(exec, missing.len(), |k| {
            // each structure compiles sequentially; fan-out is across structures
            let counts = commuting_matrix_with(g, missing[k], ChainOrder::CostOptimized, Execution::Sequential)?;
            let similarity = structure_similarity(&counts);
            Ok::<_, SemanticsError>(CompiledStructure { counts, similarity })
        })?;
        for c in compiled {
            self.entries.insert(c.counts.structure().to_string(), Arc::new(c));
        }
        Ok(())
    }

    pub fn get(&self, s: &SemanticStructure) -> Option<Arc<CompiledStructure>> {
        self.entries.get(&s.to_string()).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Shared target type of a structure collection.
pub fn common_target(structures: &[SemanticStructure]) -> Result<&str, SemanticsError> {
    let first = structures
        .first()
        .ok_or_else(|| SemanticsError::Shape("no structures given".into()))?;
    for s in structures {
        if s.source_type() != first.source_type() {
            return Err(SemanticsError::TargetMismatch(
                first.source_type().to_string(),
                s.source_type().to_string(),
            ));
        }
    }
    Ok(first.source_type())
}
