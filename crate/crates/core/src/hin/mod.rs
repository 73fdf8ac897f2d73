//! Typed heterogeneous graphs.
//!
//! A [`HeteroGraph`] holds per-type node sets, one 0/1 biadjacency matrix per
//! ordered type pair (always stored together with its transpose), optional
//! dense features per type and optional class labels on a single type.
//! Graphs are immutable once built.

mod io;
mod split;
mod synthetic;

use std::collections::{BTreeMap, BTreeSet, HashMap};

pub use io::{load_hetero_graph, save_hetero_graph, DatasetPaths};
pub use split::{split_labels, LabelSplit};
pub use synthetic::{generate_synthetic_hin, SyntheticConfig};

use crate::linalg::Matrix;
use crate::sparse::CsrMatrix;

pub type TypeId = usize;

#[derive(Debug, thiserror::Error)]
pub enum HinError {
    #[error("{file}:{line}: {message}")]
    Malformed {
        file: String,
        line: usize,
        message: String,
    },
    #[error("{file}:{line}: edge references unknown node `{id}`")]
    UnknownNode { file: String, line: usize, id: String },
    #[error("{file}:{line}: duplicate node id `{id}`")]
    DuplicateNode { file: String, line: usize, id: String },
    #[error("unknown node type `{0}`")]
    UnknownType(String),
    #[error("relation absent: no `{0}`-`{1}` edges in the graph")]
    RelationAbsent(String, String),
    #[error("{0}")]
    Features(String),
    #[error("labels: {0}")]
    Labels(String),
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error("invalid split: {0}")]
    Split(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Class labels attached to the nodes of one type.
#[derive(Debug, Clone, PartialEq)]
pub struct Labels {
    pub node_type: TypeId,
    /// Class names; class id `c` is `classes[c]`.
    pub classes: Vec<String>,
    /// One entry per node of `node_type`.
    pub assignment: Vec<Option<usize>>,
}

impl Labels {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Indices of nodes that carry a label, ascending.
    pub fn labeled(&self) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.map(|_| i))
            .collect()
    }

    pub fn of(&self, node: usize) -> Option<usize> {
        self.assignment[node]
    }
}

/// External ids per type, in internal index order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IdMap {
    ids: Vec<Vec<String>>,
    lookup: HashMap<String, (TypeId, usize)>,
}

impl IdMap {
    pub fn external(&self, ty: TypeId, index: usize) -> &str {
        &self.ids[ty][index]
    }

    pub fn ids_of(&self, ty: TypeId) -> &[String] {
        &self.ids[ty]
    }

    pub fn resolve(&self, id: &str) -> Option<(TypeId, usize)> {
        self.lookup.get(id).copied()
    }
}

/// Node types plus the ordered type pairs that carry edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaSchema {
    pub types: BTreeSet<String>,
    pub relations: BTreeSet<(String, String)>,
}

impl MetaSchema {
    pub fn has_type(&self, name: &str) -> bool {
        self.types.contains(name)
    }

    pub fn has_relation(&self, a: &str, b: &str) -> bool {
        self.relations.contains(&(a.to_string(), b.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeteroGraph {
    types: Vec<String>,
    counts: Vec<usize>,
    ids: IdMap,
    biadjacency: BTreeMap<(TypeId, TypeId), CsrMatrix>,
    features: BTreeMap<TypeId, Matrix>,
    labels: Option<Labels>,
}

impl HeteroGraph {
    pub fn node_types(&self) -> &[String] {
        &self.types
    }

    pub fn type_id(&self, name: &str) -> Result<TypeId, HinError> {
        self.types
            .iter()
            .position(|t| t == name)
            .ok_or_else(|| HinError::UnknownType(name.to_string()))
    }

    pub fn type_name(&self, ty: TypeId) -> &str {
        &self.types[ty]
    }

    pub fn node_count(&self, ty: TypeId) -> usize {
        self.counts[ty]
    }

    pub fn total_nodes(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn ids(&self) -> &IdMap {
        &self.ids
    }

    pub fn labels(&self) -> Option<&Labels> {
        self.labels.as_ref()
    }

    pub fn features(&self, ty: TypeId) -> Option<&Matrix> {
        self.features.get(&ty)
    }

    pub fn schema(&self) -> MetaSchema {
        MetaSchema {
            types: self.types.iter().cloned().collect(),
            relations: self
                .biadjacency
                .keys()
                .map(|&(a, b)| (self.types[a].clone(), self.types[b].clone()))
                .collect(),
        }
    }

    /// Stored relations as `(src, dst, matrix)`.
    pub fn relations(&self) -> impl Iterator<Item = (TypeId, TypeId, &CsrMatrix)> {
        self.biadjacency.iter().map(|(&(a, b), m)| (a, b, m))
    }

    pub fn adjacency(&self, src: TypeId, dst: TypeId) -> Option<&CsrMatrix> {
        self.biadjacency.get(&(src, dst))
    }

    /// `W_{src,dst}`: the 0/1 biadjacency between two node types.
    pub fn typed_adjacency(&self, src_type: &str, dst_type: &str) -> Result<&CsrMatrix, HinError> {
        let a = self.type_id(src_type)?;
        let b = self.type_id(dst_type)?;
        self.adjacency(a, b)
            .ok_or_else(|| HinError::RelationAbsent(src_type.to_string(), dst_type.to_string()))
    }

    pub fn has_edge(&self, a: TypeId, i: usize, b: TypeId, j: usize) -> bool {
        self.adjacency(a, b).is_some_and(|m| m.get(i, j) != 0)
    }

    /// Undirected edge list `(type, index, type, index)` with each edge once.
    pub fn edges(&self) -> Vec<(TypeId, usize, TypeId, usize)> {
        let mut out = Vec::new();
        for (&(a, b), m) in &self.biadjacency {
            if a > b {
                continue;
            }
            for (i, j, _) in m.triplets() {
                if a == b && j < i {
                    continue;
                }
                out.push((a, i, b, j));
            }
        }
        out
    }
}

/// Incremental construction of a [`HeteroGraph`].
#[derive(Debug, Default)]
pub struct GraphBuilder {
    types: Vec<String>,
    counts: Vec<usize>,
    ids: IdMap,
    edges: BTreeMap<(TypeId, TypeId), Vec<(usize, usize)>>,
    features: BTreeMap<TypeId, Matrix>,
    raw_labels: Vec<(TypeId, usize, String)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn ensure_type(&mut self, name: &str) -> TypeId {
        if let Some(t) = self.types.iter().position(|t| t == name) {
            return t;
        }
        self.types.push(name.to_string());
        self.counts.push(0);
        self.ids.ids.push(Vec::new());
        self.types.len() - 1
    }

    /// Adds a node; returns its `(type, index)` or `None` if the id is taken.
    pub fn add_node(&mut self, id: &str, type_name: &str, label: Option<&str>) -> Option<(TypeId, usize)> {
        if self.ids.lookup.contains_key(id) {
            return None;
        }
        let ty = self.ensure_type(type_name);
        let idx = self.counts[ty];
        self.counts[ty] += 1;
        self.ids.ids[ty].push(id.to_string());
        self.ids.lookup.insert(id.to_string(), (ty, idx));
        if let Some(l) = label {
            self.raw_labels.push((ty, idx, l.to_string()));
        }
        Some((ty, idx))
    }

    pub fn resolve(&self, id: &str) -> Option<(TypeId, usize)> {
        self.ids.resolve(id)
    }

    pub fn add_edge(&mut self, a: (TypeId, usize), b: (TypeId, usize)) {
        self.edges.entry((a.0, b.0)).or_default().push((a.1, b.1));
        self.edges.entry((b.0, a.0)).or_default().push((b.1, a.1));
    }

    pub fn set_features(&mut self, ty: TypeId, features: Matrix) {
        self.features.insert(ty, features);
    }

    pub fn node_count(&self, ty: TypeId) -> usize {
        self.counts[ty]
    }

    pub fn build(self) -> Result<HeteroGraph, HinError> {
        let mut biadjacency = BTreeMap::new();
        for (&(a, b), pairs) in &self.edges {
            biadjacency.insert(
                (a, b),
                CsrMatrix::binary_from_pairs(self.counts[a], self.counts[b], pairs),
            );
        }
        for (&ty, m) in &self.features {
            if m.rows() != self.counts[ty] {
                return Err(HinError::Features(format!(
                    "type `{}` has {} nodes but {} feature rows",
                    self.types[ty],
                    self.counts[ty],
                    m.rows()
                )));
            }
        }
        let labels = build_labels(&self.types, &self.counts, self.raw_labels)?;
        Ok(HeteroGraph {
            types: self.types,
            counts: self.counts,
            ids: self.ids,
            biadjacency,
            features: self.features,
            labels,
        })
    }
}

fn build_labels(
    types: &[String],
    counts: &[usize],
    raw: Vec<(TypeId, usize, String)>,
) -> Result<Option<Labels>, HinError> {
    let Some(&(node_type, _, _)) = raw.first() else {
        return Ok(None);
    };
    if let Some((other, _, _)) = raw.iter().find(|(t, _, _)| *t != node_type) {
        return Err(HinError::Labels(format!(
            "labels found on types `{}` and `{}`; only one labeled type is supported",
            types[node_type], types[*other]
        )));
    }
    let mut classes: Vec<String> = raw
        .iter()
        .map(|(_, _, l)| l.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    // integer class names sort numerically
    if classes.iter().all(|c| c.parse::<i64>().is_ok()) {
        classes.sort_by_key(|c| c.parse::<i64>().unwrap());
    }
    let mut assignment = vec![None; counts[node_type]];
    for (_, idx, l) in &raw {
        assignment[*idx] = Some(classes.iter().position(|c| c == l).unwrap());
    }
    Ok(Some(Labels {
        node_type,
        classes,
        assignment,
    }))
}
