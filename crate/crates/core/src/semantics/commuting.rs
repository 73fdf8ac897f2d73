use super::structure::{Element, SemanticStructure};
use super::SemanticsError;
use crate::hin::HeteroGraph;
use crate::parallel::Execution;
use crate::sparse::{CsrMatrix, Overflow};

/// How a chain of sparse factors is associated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChainOrder {
    LeftToRight,
    /// Dynamic programming over split points, minimizing estimated work.
    #[default]
    CostOptimized,
}

/// Dense instance counts between every pair of target-type nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommutingMatrix {
    structure: SemanticStructure,
    n: usize,
    counts: Vec<u64>,
}

impl CommutingMatrix {
    pub fn new(structure: SemanticStructure, n: usize, counts: Vec<u64>) -> Self {
        assert_eq!(counts.len(), n * n);
        Self { structure, n, counts }
    }

    pub fn structure(&self) -> &SemanticStructure {
        &self.structure
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.n + j]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Nonzero `(i, j, count)` entries in row-major order.
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(move |(k, &c)| (k / self.n, k % self.n, c))
    }
}

fn relation<'g>(g: &'g HeteroGraph, a: &str, b: &str) -> Result<&'g CsrMatrix, SemanticsError> {
    Ok(g.typed_adjacency(a, b)?)
}

/// Multiplies `factors` in the requested association order.
pub fn chain_product(
    factors: &[CsrMatrix],
    order: ChainOrder,
    exec: Execution,
) -> Result<CsrMatrix, Overflow> {
    assert!(!factors.is_empty(), "empty chain");
    match order {
        ChainOrder::LeftToRight => {
            let mut acc = factors[0].clone();
            for f in &factors[1..] {
                acc = acc.matmul_with(f, exec)?;
            }
            Ok(acc)
        }
        ChainOrder::CostOptimized => {
            let split = plan_chain(factors);
            eval_plan(factors, &split, 0, factors.len() - 1, exec)
        }
    }
}

/// `split[i][j]` is the best split point for the product of factors `i..=j`.
fn plan_chain(factors: &[CsrMatrix]) -> Vec<Vec<usize>> {
    let n = factors.len();
    // (estimated nnz, accumulated cost)
    let mut est = vec![vec![(0.0f64, 0.0f64); n]; n];
    let mut split = vec![vec![0usize; n]; n];
    for (i, f) in factors.iter().enumerate() {
        est[i][i] = (f.nnz() as f64, 0.0);
    }
    for len in 2..=n {
        for i in 0..=n - len {
            let j = i + len - 1;
            let rows = factors[i].rows() as f64;
            let cols = factors[j].cols() as f64;
            let mut best = (f64::INFINITY, f64::INFINITY, i);
            for k in i..j {
                let inner = factors[k].cols().max(1) as f64;
                let (nl, cl) = est[i][k];
                let (nr, cr) = est[k + 1][j];
                let flops = nl * nr / inner;
                let cost = cl + cr + flops;
                if cost < best.1 {
                    best = (flops.min(rows * cols), cost, k);
                }
            }
            est[i][j] = (best.0, best.1);
            split[i][j] = best.2;
        }
    }
    split
}

fn eval_plan(
    factors: &[CsrMatrix],
    split: &[Vec<usize>],
    i: usize,
    j: usize,
    exec: Execution,
) -> Result<CsrMatrix, Overflow> {
    if i == j {
        return Ok(factors[i].clone());
    }
    let k = split[i][j];
    let left = eval_plan(factors, split, i, k, exec)?;
    let right = eval_plan(factors, split, k + 1, j, exec)?;
    left.matmul_with(&right, exec)
}

/// Sparse factors of a structure: one biadjacency per plain hop and one
/// Hadamard-merged matrix per parallel group.
fn factors(
    g: &HeteroGraph,
    s: &SemanticStructure,
    order: ChainOrder,
    exec: Execution,
) -> Result<Vec<CsrMatrix>, SemanticsError> {
    let els = s.elements();
    let mut out = Vec::new();
    let mut i = 0;
    while i + 1 < els.len() {
        let Element::Step(left) = &els[i] else { unreachable!("groups are flanked by steps") };
        match &els[i + 1] {
            Element::Step(right) => {
                out.push(relation(g, left, right)?.clone());
                i += 1;
            }
            Element::Group(branches) => {
                let Element::Step(right) = &els[i + 2] else { unreachable!() };
                let mut merged: Option<CsrMatrix> = None;
                for branch in branches {
                    let mut chain = Vec::with_capacity(branch.len() + 1);
                    let mut prev = left;
                    for t in branch.iter().chain(std::iter::once(right)) {
                        chain.push(relation(g, prev, t)?.clone());
                        prev = t;
                    }
                    let product = chain_product(&chain, order, exec)?;
                    merged = Some(match merged {
                        None => product,
                        Some(m) => m.hadamard(&product)?,
                    });
                }
                out.push(merged.unwrap());
                i += 2;
            }
        }
    }
    Ok(out)
}

pub fn commuting_matrix(g: &HeteroGraph, s: &SemanticStructure) -> Result<CommutingMatrix, SemanticsError> {
    commuting_matrix_with(g, s, ChainOrder::default(), Execution::default())
}

pub fn commuting_matrix_with(
    g: &HeteroGraph,
    s: &SemanticStructure,
    order: ChainOrder,
    exec: Execution,
) -> Result<CommutingMatrix, SemanticsError> {
    s.check_types(&g.schema())?;
    let target = g.type_id(s.source_type())?;
    let n = g.node_count(target);
    let fs = factors(g, s, order, exec)?;
    let product = chain_product(&fs, order, exec)?;
    Ok(CommutingMatrix::new(s.clone(), n, product.to_dense()))
}
