//! Small deterministic graphs shared by the test suites, the benches and the
//! acceptance harness.

use crate::autodiff::RngStream;
use crate::hin::{generate_synthetic_hin, GraphBuilder, HeteroGraph, SyntheticConfig};
use crate::linalg::Matrix;

/// The four bibliographic structures used throughout: two meta-paths and two
/// meta-graphs over author (A), paper (P), venue (C) and term (T) nodes.
pub const DEFAULT_STRUCTURES: [&str; 4] = ["A-P-C-P-A", "A-P-T-P-A", "A-P-(A|C)-P-A", "A-P-(C|T)-P-A"];

/// `a1 -> {p1, p2}`, `a2 -> {p2}`. Its A-P-A counts are `[[2, 1], [1, 1]]`.
pub fn toy() -> HeteroGraph {
    let mut b = GraphBuilder::new();
    let a1 = b.add_node("a1", "A", None).expect("fresh id");
    let a2 = b.add_node("a2", "A", None).expect("fresh id");
    let p1 = b.add_node("p1", "P", None).expect("fresh id");
    let p2 = b.add_node("p2", "P", None).expect("fresh id");
    b.add_edge(a1, p1);
    b.add_edge(a1, p2);
    b.add_edge(a2, p2);
    b.build().expect("toy graph is valid")
}

/// Five co-authorship-linked authors. Under A-P-A, `a2` and `a3` are one hop
/// from `a1`, `a4` two hops and `a5` three hops. Features are
/// `feature_dim` seeded uniform values in `[0.5, 1.5)` so no activation sits
/// on a kink; authors are labeled `x` (a1, a2) or `y` (a3..a5).
pub fn author_chain(feature_dim: usize, seed: u64) -> HeteroGraph {
    let mut b = GraphBuilder::new();
    let labels = ["x", "x", "y", "y", "y"];
    let authors: Vec<_> = (0..5)
        .map(|i| b.add_node(&format!("a{}", i + 1), "A", Some(labels[i])).expect("fresh id"))
        .collect();
    let papers: Vec<_> = (0..4)
        .map(|i| b.add_node(&format!("p{}", i + 1), "P", None).expect("fresh id"))
        .collect();
    for (p, (u, v)) in papers.iter().zip([(0, 1), (0, 2), (2, 3), (3, 4)]) {
        b.add_edge(authors[u], *p);
        b.add_edge(authors[v], *p);
    }
    let mut rng = RngStream::new(seed);
    let features = Matrix::from_fn(5, feature_dim, |_, _| rng.uniform_range(0.5, 1.5));
    b.set_features(authors[0].0, features);
    b.build().expect("chain graph is valid")
}

/// Random bibliographic graph: each of A, P, C and T gets `1..=max_per_type`
/// nodes and every possible A–P, P–C and P–T edge is present independently
/// with probability `density`. A relation that draws no edge at all gets one
/// random edge, so every relation exists. No features or labels.
pub fn random_hin(seed: u64, max_per_type: usize, density: f64) -> HeteroGraph {
    let mut rng = RngStream::new(seed);
    let mut b = GraphBuilder::new();
    let mut nodes = Vec::new();
    for ty in ["A", "P", "C", "T"] {
        let count = 1 + rng.below(max_per_type);
        let ids: Vec<_> = (0..count)
            .map(|i| b.add_node(&format!("{}{i}", ty.to_lowercase()), ty, None).expect("fresh id"))
            .collect();
        nodes.push(ids);
    }
    for (left, right) in [(0, 1), (1, 2), (1, 3)] {
        let mut any = false;
        for &u in &nodes[left] {
            for &v in &nodes[right] {
                if rng.bernoulli(density) {
                    b.add_edge(u, v);
                    any = true;
                }
            }
        }
        if !any {
            let u = nodes[left][rng.below(nodes[left].len())];
            let v = nodes[right][rng.below(nodes[right].len())];
            b.add_edge(u, v);
        }
    }
    b.build().expect("random graph is valid")
}

/// A twelve-author, two-community synthetic graph with 8-dimensional
/// features, sized for finite-difference checks.
pub fn small_synthetic(seed: u64) -> HeteroGraph {
    generate_synthetic_hin(&SyntheticConfig {
        communities: 2,
        authors: 12,
        papers: 20,
        venues: 4,
        terms: 8,
        feature_dim: 8,
        seed,
        ..Default::default()
    })
    .expect("fixture config is valid")
}
