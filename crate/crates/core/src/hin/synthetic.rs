//! Planted-community author/paper/venue/term networks.
//!
//! Authors are split evenly into `communities` blocks and labeled by block.
//! Every paper belongs to one community; each of its author, venue and term
//! draws comes from that community, except that each draw is independently
//! redirected to a uniformly random *other* community with the relation's
//! noise probability. Author features are the bag of words over the terms of
//! the author's papers with random bit flips.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GraphBuilder, HeteroGraph, HinError};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub communities: usize,
    pub authors: usize,
    pub papers: usize,
    pub venues: usize,
    pub terms: usize,
    pub authors_per_paper: usize,
    pub terms_per_paper: usize,
    /// Per-edge probability of redirecting a draw to another community.
    pub cross_community_noise: f64,
    /// Overrides `cross_community_noise` for paper–venue edges.
    pub venue_noise: Option<f64>,
    /// Overrides `cross_community_noise` for paper–term edges.
    pub term_noise: Option<f64>,
    pub feature_dim: usize,
    /// Per-bit flip probability applied to author features.
    pub feature_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            communities: 4,
            authors: 400,
            papers: 1200,
            venues: 8,
            terms: 200,
            authors_per_paper: 2,
            terms_per_paper: 3,
            cross_community_noise: 0.1,
            venue_noise: None,
            term_noise: None,
            feature_dim: 200,
            feature_noise: 0.1,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<(), HinError> {
        let bad = |m: String| Err(HinError::InvalidConfig(m));
        let k = self.communities;
        if k < 2 {
            return bad(format!("communities must be >= 2, got {k}"));
        }
        for (name, n) in [
            ("authors", self.authors),
            ("papers", self.papers),
            ("venues", self.venues),
            ("terms", self.terms),
        ] {
            if n < k {
                return bad(format!("{name} ({n}) must be at least communities ({k})"));
            }
        }
        if self.authors_per_paper == 0 || self.terms_per_paper == 0 {
            return bad("authors_per_paper and terms_per_paper must be positive".into());
        }
        if self.feature_dim < k {
            return bad(format!("feature_dim ({}) must be >= communities ({k})", self.feature_dim));
        }
        let probs = [
            ("cross_community_noise", Some(self.cross_community_noise)),
            ("venue_noise", self.venue_noise),
            ("term_noise", self.term_noise),
            ("feature_noise", Some(self.feature_noise)),
        ];
        for (name, p) in probs {
            if let Some(p) = p {
                if !(0.0..1.0).contains(&p) {
                    return bad(format!("{name} must lie in [0,1), got {p}"));
                }
            }
        }
        Ok(())
    }

    fn venue_p(&self) -> f64 {
        self.venue_noise.unwrap_or(self.cross_community_noise)
    }

    fn term_p(&self) -> f64 {
        self.term_noise.unwrap_or(self.cross_community_noise)
    }
}

/// Block index of item `i` when `n` items are split evenly into `k` blocks.
fn block_of(i: usize, n: usize, k: usize) -> usize {
    i * k / n
}

fn block_range(c: usize, n: usize, k: usize) -> std::ops::Range<usize> {
    // smallest i with i*k/n >= c
    let start = (c * n).div_ceil(k);
    let end = ((c + 1) * n).div_ceil(k);
    start..end
}

fn pick_community(rng: &mut ChaCha8Rng, home: usize, k: usize, noise: f64) -> usize {
    if noise > 0.0 && rng.random_bool(noise) {
        let other = rng.random_range(0..k - 1);
        if other >= home {
            other + 1
        } else {
            other
        }
    } else {
        home
    }
}

fn pick_in_block(rng: &mut ChaCha8Rng, c: usize, n: usize, k: usize) -> usize {
    rng.random_range(block_range(c, n, k))
}

pub fn generate_synthetic_hin(cfg: &SyntheticConfig) -> Result<HeteroGraph, HinError> {
    cfg.validate()?;
    let k = cfg.communities;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut paper_authors: Vec<Vec<usize>> = Vec::with_capacity(cfg.papers);
    let mut paper_venue: Vec<usize> = Vec::with_capacity(cfg.papers);
    let mut paper_terms: Vec<Vec<usize>> = Vec::with_capacity(cfg.papers);
    for p in 0..cfg.papers {
        let home = p % k;
        let mut authors = Vec::with_capacity(cfg.authors_per_paper);
        for _ in 0..cfg.authors_per_paper {
            let c = pick_community(&mut rng, home, k, cfg.cross_community_noise);
            let a = pick_in_block(&mut rng, c, cfg.authors, k);
            if !authors.contains(&a) {
                authors.push(a);
            }
        }
        paper_authors.push(authors);
        let c = pick_community(&mut rng, home, k, cfg.venue_p());
        paper_venue.push(pick_in_block(&mut rng, c, cfg.venues, k));
        let mut terms = Vec::with_capacity(cfg.terms_per_paper);
        for _ in 0..cfg.terms_per_paper {
            let c = pick_community(&mut rng, home, k, cfg.term_p());
            let t = pick_in_block(&mut rng, c, cfg.terms, k);
            if !terms.contains(&t) {
                terms.push(t);
            }
        }
        paper_terms.push(terms);
    }

    // every author gets at least one paper, taken from its own community
    let mut author_papers: Vec<Vec<usize>> = vec![Vec::new(); cfg.authors];
    for (p, authors) in paper_authors.iter().enumerate() {
        for &a in authors {
            author_papers[a].push(p);
        }
    }
    for a in 0..cfg.authors {
        if author_papers[a].is_empty() {
            let c = block_of(a, cfg.authors, k);
            let slots = (cfg.papers - c).div_ceil(k);
            let p = c + k * rng.random_range(0..slots);
            paper_authors[p].push(a);
            author_papers[a].push(p);
        }
    }

    let mut features = Matrix::zeros(cfg.authors, cfg.feature_dim);
    for (a, papers) in author_papers.iter().enumerate() {
        for &p in papers {
            for &t in &paper_terms[p] {
                features[(a, t * cfg.feature_dim / cfg.terms)] = 1.0;
            }
        }
    }
    if cfg.feature_noise > 0.0 {
        for x in features.as_mut_slice() {
            if rng.random_bool(cfg.feature_noise) {
                *x = 1.0 - *x;
            }
        }
    }

    let mut b = GraphBuilder::new();
    let mut authors = Vec::with_capacity(cfg.authors);
    for a in 0..cfg.authors {
        let label = block_of(a, cfg.authors, k).to_string();
        authors.push(b.add_node(&format!("a{a}"), "A", Some(&label)).unwrap());
    }
    let papers: Vec<_> = (0..cfg.papers)
        .map(|p| b.add_node(&format!("p{p}"), "P", None).unwrap())
        .collect();
    let venues: Vec<_> = (0..cfg.venues)
        .map(|v| b.add_node(&format!("c{v}"), "C", None).unwrap())
        .collect();
    let terms: Vec<_> = (0..cfg.terms)
        .map(|t| b.add_node(&format!("t{t}"), "T", None).unwrap())
        .collect();
    for p in 0..cfg.papers {
        for &a in &paper_authors[p] {
            b.add_edge(authors[a], papers[p]);
        }
        b.add_edge(papers[p], venues[paper_venue[p]]);
        for &t in &paper_terms[p] {
            b.add_edge(papers[p], terms[t]);
        }
    }
    b.set_features(authors[0].0, features);
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(k: usize, noise: f64) -> SyntheticConfig {
        SyntheticConfig {
            communities: k,
            authors: 40,
            papers: 80,
            venues: 4,
            terms: 20,
            cross_community_noise: noise,
            feature_dim: 10,
            feature_noise: 0.0,
            seed: 5,
            ..Default::default()
        }
    }

    #[test]
    fn zero_noise_is_block_diagonal() {
        let g = generate_synthetic_hin(&small(2, 0.0)).unwrap();
        let (a, p, c) = (g.type_id("A").unwrap(), g.type_id("P").unwrap(), g.type_id("C").unwrap());
        // paper community = p % k
        for (i, j, _) in g.adjacency(a, p).unwrap().triplets() {
            assert_eq!(block_of(i, 40, 2), j % 2);
        }
        for (i, j, _) in g.adjacency(p, c).unwrap().triplets() {
            assert_eq!(i % 2, block_of(j, 4, 2));
        }
    }

    #[test]
    fn deterministic() {
        let cfg = SyntheticConfig {
            feature_noise: 0.2,
            ..small(3, 0.3)
        };
        assert_eq!(generate_synthetic_hin(&cfg).unwrap(), generate_synthetic_hin(&cfg).unwrap());
        let other = SyntheticConfig { seed: 6, ..cfg.clone() };
        assert_ne!(generate_synthetic_hin(&cfg).unwrap(), generate_synthetic_hin(&other).unwrap());
    }

    #[test]
    fn even_labels_and_every_author_publishes() {
        let cfg = SyntheticConfig {
            communities: 4,
            authors: 400,
            papers: 150,
            ..Default::default()
        };
        let g = generate_synthetic_hin(&cfg).unwrap();
        let labels = g.labels().unwrap();
        for c in 0..4 {
            assert_eq!(labels.assignment.iter().filter(|&&l| l == Some(c)).count(), 100);
        }
        let ap = g.typed_adjacency("A", "P").unwrap();
        assert!((0..400).all(|a| ap.row(a).count() >= 1));
    }

    #[test]
    fn config_validation() {
        assert!(SyntheticConfig { communities: 1, ..Default::default() }.validate().is_err());
        assert!(SyntheticConfig { feature_dim: 3, ..Default::default() }.validate().is_err());
        assert!(SyntheticConfig { feature_noise: 1.0, ..Default::default() }.validate().is_err());
        assert!(SyntheticConfig { term_noise: Some(-0.1), ..Default::default() }.validate().is_err());
        assert!(SyntheticConfig::default().validate().is_ok());
    }

    #[test]
    fn block_ranges_partition() {
        for (n, k) in [(10, 3), (400, 4), (7, 7), (9, 2)] {
            let mut covered = 0;
            for c in 0..k {
                let r = block_range(c, n, k);
                assert!(r.clone().all(|i| block_of(i, n, k) == c));
                covered += r.len();
            }
            assert_eq!(covered, n);
        }
    }
}
