//! Exhaustive instance enumeration, kept independent of the matrix route.

use super::structure::{Element, SemanticStructure};
use crate::hin::{HeteroGraph, TypeId};

struct Walker<'g> {
    g: &'g HeteroGraph,
    types: Vec<Option<TypeId>>,
}

impl Walker<'_> {
    fn ty(&self, name: &str) -> Option<TypeId> {
        self.g.type_id(name).ok()
    }

    /// Nodes of type `b` adjacent to node `i` of type `a`.
    fn neighbours(&self, a: TypeId, i: usize, b: TypeId) -> Vec<usize> {
        match self.g.adjacency(a, b) {
            Some(m) => m.row(i).map(|(v, _)| v).collect(),
            None => Vec::new(),
        }
    }

    /// Endpoints of type `to` reached by walking `branch` from `from`, one
    /// entry per path.
    fn branch_ends(&self, from: (TypeId, usize), branch: &[String], to: TypeId, out: &mut Vec<usize>) {
        match branch.split_first() {
            None => out.extend(self.neighbours(from.0, from.1, to)),
            Some((head, rest)) => {
                let Some(t) = self.ty(head) else { return };
                for v in self.neighbours(from.0, from.1, t) {
                    self.branch_ends((t, v), rest, to, out);
                }
            }
        }
    }

    /// Number of `from -> branch... -> to` paths.
    fn branch_paths(&self, from: (TypeId, usize), branch: &[String], to: (TypeId, usize)) -> u64 {
        let Some((head, rest)) = branch.split_first() else {
            return u64::from(self.g.has_edge(from.0, from.1, to.0, to.1));
        };
        let Some(t) = self.ty(head) else { return 0 };
        self.neighbours(from.0, from.1, t)
            .into_iter()
            .map(|v| self.branch_paths((t, v), rest, to))
            .sum()
    }

    fn count(&self, els: &[Element], pos: usize, node: usize, target: usize) -> u64 {
        let Some(here) = self.types[pos] else { return 0 };
        if pos == els.len() - 1 {
            return u64::from(node == target);
        }
        match &els[pos + 1] {
            Element::Step(_) => {
                let Some(next) = self.types[pos + 1] else { return 0 };
                self.neighbours(here, node, next)
                    .into_iter()
                    .map(|v| self.count(els, pos + 1, v, target))
                    .sum()
            }
            Element::Group(branches) => {
                let Some(right) = self.types[pos + 2] else { return 0 };
                // candidate merge nodes come from the first branch's walks
                let mut ends = Vec::new();
                self.branch_ends((here, node), &branches[0], right, &mut ends);
                ends.sort_unstable();
                ends.dedup();
                ends.into_iter()
                    .map(|y| {
                        let ways: u64 = branches
                            .iter()
                            .map(|b| self.branch_paths((here, node), b, (right, y)))
                            .product();
                        ways * self.count(els, pos + 2, y, target)
                    })
                    .sum()
            }
        }
    }
}

/// Counts the instances of `s` between target nodes `i` and `j` by walking
/// every consistent node assignment. Branches of a group share their flanking
/// nodes and are otherwise chosen independently. Exponential; test use only.
pub fn brute_force_instance_count(g: &HeteroGraph, s: &SemanticStructure, i: usize, j: usize) -> u64 {
    let els = s.elements();
    let types = els
        .iter()
        .map(|e| match e {
            Element::Step(t) => g.type_id(t).ok(),
            Element::Group(_) => None,
        })
        .collect();
    let w = Walker { g, types };
    w.count(els, 0, i, j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hin::GraphBuilder;

    #[test]
    fn apa_spot_values() {
        let mut b = GraphBuilder::new();
        let a1 = b.add_node("a1", "A", None).unwrap();
        let a2 = b.add_node("a2", "A", None).unwrap();
        let a3 = b.add_node("a3", "A", None).unwrap();
        let p1 = b.add_node("p1", "P", None).unwrap();
        let p2 = b.add_node("p2", "P", None).unwrap();
        b.add_edge(a1, p1);
        b.add_edge(a1, p2);
        b.add_edge(a2, p2);
        let _ = a3;
        let g = b.build().unwrap();
        let s = SemanticStructure::parse("A-P-A").unwrap();
        assert_eq!(brute_force_instance_count(&g, &s, 0, 0), 2);
        assert_eq!(brute_force_instance_count(&g, &s, 0, 1), 1);
        assert_eq!(brute_force_instance_count(&g, &s, 2, 0), 0);
        assert_eq!(brute_force_instance_count(&g, &s, 2, 2), 0);
    }

    #[test]
    fn single_shared_coauthor_and_venue() {
        // a0 and a1 share co-author a2 (through papers p0, p1) and venue c0;
        // a3 shares only a venue with a0.
        let mut b = GraphBuilder::new();
        let a: Vec<_> = (0..4).map(|i| b.add_node(&format!("a{i}"), "A", None).unwrap()).collect();
        let p: Vec<_> = (0..3).map(|i| b.add_node(&format!("p{i}"), "P", None).unwrap()).collect();
        let c0 = b.add_node("c0", "C", None).unwrap();
        b.add_edge(a[0], p[0]);
        b.add_edge(a[2], p[0]);
        b.add_edge(a[1], p[1]);
        b.add_edge(a[2], p[1]);
        b.add_edge(a[3], p[2]);
        for pi in &p {
            b.add_edge(*pi, c0);
        }
        let g = b.build().unwrap();
        let s = SemanticStructure::parse("A-P-(A|C)-P-A").unwrap();
        assert_eq!(brute_force_instance_count(&g, &s, 0, 1), 1);
        assert_eq!(brute_force_instance_count(&g, &s, 0, 3), 0);
    }
}
