use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{HeteroGraph, HinError};

/// Disjoint train/validation/test partition of the labeled target nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSplit {
    pub train_ids: Vec<usize>,
    pub val_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
    pub train_ratio: f64,
}

/// Largest-remainder apportionment of `round(ratio * total)` items over
/// groups of the given sizes; every group gets floor or ceil of its share.
fn apportion(sizes: &[usize], ratio: f64) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    let target = (ratio * total as f64).round() as usize;
    let mut take: Vec<usize> = sizes
        .iter()
        .map(|&s| (ratio * s as f64).floor() as usize)
        .collect();
    let mut remainders: Vec<(f64, usize)> = sizes
        .iter()
        .enumerate()
        .map(|(c, &s)| (ratio * s as f64 - take[c] as f64, c))
        .collect();
    // largest fractional part first; ties by class id
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut missing = target.saturating_sub(take.iter().sum());
    for &(_, c) in &remainders {
        if missing == 0 {
            break;
        }
        if take[c] < sizes[c] {
            take[c] += 1;
            missing -= 1;
        }
    }
    take
}

/// Stratified split of the labeled nodes: every class contributes its
/// proportional share (within one node) to each part.
pub fn split_labels(
    g: &HeteroGraph,
    train_ratio: f64,
    val_ratio: f64,
    seed: u64,
) -> Result<LabelSplit, HinError> {
    let labels = g
        .labels()
        .ok_or_else(|| HinError::Split("graph has no labels".into()))?;
    if !(train_ratio > 0.0 && train_ratio <= 1.0) || !(0.0..1.0).contains(&val_ratio) {
        return Err(HinError::Split(format!(
            "ratios out of range: train {train_ratio}, val {val_ratio}"
        )));
    }
    if train_ratio + val_ratio > 1.0 || (val_ratio > 0.0 && train_ratio + val_ratio >= 1.0) {
        return Err(HinError::Split(format!(
            "train ratio {train_ratio} + val ratio {val_ratio} leaves no test nodes"
        )));
    }
    let parts = 1 + usize::from(val_ratio > 0.0) + usize::from(train_ratio + val_ratio < 1.0);

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); labels.num_classes()];
    for i in labels.labeled() {
        members[labels.of(i).unwrap()].push(i);
    }
    for (c, m) in members.iter().enumerate() {
        if m.len() < parts {
            return Err(HinError::Split(format!(
                "class `{}` has {} nodes, fewer than the {} splits requested",
                labels.classes[c],
                m.len(),
                parts
            )));
        }
    }

    let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
    let n_train = apportion(&sizes, train_ratio);
    let n_val = apportion(&sizes, val_ratio);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = LabelSplit {
        train_ids: Vec::new(),
        val_ids: Vec::new(),
        test_ids: Vec::new(),
        train_ratio,
    };
    for (c, mut m) in members.into_iter().enumerate() {
        m.shuffle(&mut rng);
        let t = n_train[c];
        let v = n_val[c].min(m.len() - t);
        split.train_ids.extend_from_slice(&m[..t]);
        split.val_ids.extend_from_slice(&m[t..t + v]);
        split.test_ids.extend_from_slice(&m[t + v..]);
    }
    split.train_ids.sort_unstable();
    split.val_ids.sort_unstable();
    split.test_ids.sort_unstable();
    Ok(split)
}
