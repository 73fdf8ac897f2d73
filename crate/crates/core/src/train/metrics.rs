use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::TrainError;

fn check_lengths(a: usize, b: usize) -> Result<(), TrainError> {
    if a != b {
        return Err(TrainError::LengthMismatch(a, b));
    }
    Ok(())
}

/// `(macro F1, micro F1)`. Classes absent from both inputs are ignored;
/// classes with zero precision and recall score 0.
pub fn macro_micro_f1(y_true: &[usize], y_pred: &[usize]) -> Result<(f64, f64), TrainError> {
    check_lengths(y_true.len(), y_pred.len())?;
    if y_true.is_empty() {
        return Ok((0.0, 0.0));
    }
    // class -> (tp, fp, fn)
    let mut counts: BTreeMap<usize, (u64, u64, u64)> = BTreeMap::new();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t == p {
            counts.entry(t).or_default().0 += 1;
        } else {
            counts.entry(p).or_default().1 += 1;
            counts.entry(t).or_default().2 += 1;
        }
    }
    let f1 = |tp: u64, fp: u64, fn_: u64| {
        let denom = 2 * tp + fp + fn_;
        if denom == 0 {
            0.0
        } else {
            (2 * tp) as f64 / denom as f64
        }
    };
    // summed in sorted order so renaming classes cannot change the rounding
    let mut scores: Vec<f64> = counts.values().map(|&(tp, fp, fn_)| f1(tp, fp, fn_)).collect();
    scores.sort_by(f64::total_cmp);
    let macro_f1 = scores.iter().sum::<f64>() / scores.len() as f64;
    let (tp, fp, fn_) = counts
        .values()
        .fold((0, 0, 0), |acc, c| (acc.0 + c.0, acc.1 + c.1, acc.2 + c.2));
    Ok((macro_f1, f1(tp, fp, fn_)))
}

/// Fraction of positions where the labels agree.
pub fn accuracy(y_true: &[usize], y_pred: &[usize]) -> Result<f64, TrainError> {
    check_lengths(y_true.len(), y_pred.len())?;
    if y_true.is_empty() {
        return Ok(0.0);
    }
    let hits = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / y_true.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterScores {
    pub nmi: f64,
    pub ari: f64,
    pub fmi: f64,
}

fn pairs(n: u64) -> u128 {
    let n = n as u128;
    n * n.saturating_sub(1) / 2
}

/// Entropy of a count multiset. Counts are sorted first so the result does
/// not depend on label ids.
fn entropy(mut counts: Vec<u64>, total: f64) -> f64 {
    counts.sort_unstable();
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            p * p.ln()
        })
        .sum::<f64>()
}

/// NMI (arithmetic-mean normalization), adjusted Rand index and
/// Fowlkes-Mallows index from the contingency table.
pub fn clustering_scores(y_true: &[usize], assignments: &[usize]) -> Result<ClusterScores, TrainError> {
    check_lengths(y_true.len(), assignments.len())?;
    let n = y_true.len() as u64;
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (&u, &v) in y_true.iter().zip(assignments) {
        *table.entry((u, v)).or_default() += 1;
        *rows.entry(u).or_default() += 1;
        *cols.entry(v).or_default() += 1;
    }
    let total = n as f64;
    let hu = entropy(rows.values().copied().collect(), total);
    let hv = entropy(cols.values().copied().collect(), total);
    let huv = entropy(table.values().copied().collect(), total);
    let nmi = if hu == 0.0 && hv == 0.0 {
        1.0
    } else {
        let mi = (hu + hv - huv).max(0.0);
        (mi / ((hu + hv) / 2.0)).clamp(0.0, 1.0)
    };

    let index: u128 = table.values().map(|&c| pairs(c)).sum();
    let a: u128 = rows.values().map(|&c| pairs(c)).sum();
    let b: u128 = cols.values().map(|&c| pairs(c)).sum();
    let all = pairs(n);
    let ari = if all == 0 || (a == b && a == index && (a == 0 || a == all)) {
        // trivial partitions (all singletons or one block) that agree
        1.0
    } else {
        let expected = a as f64 * b as f64 / all as f64;
        let max = (a + b) as f64 / 2.0;
        if max == expected {
            0.0
        } else {
            (index as f64 - expected) / (max - expected)
        }
    };
    let fmi = if a == 0 && b == 0 {
        // both all-singleton: the (empty) sets of co-clustered pairs agree
        1.0
    } else if a == 0 || b == 0 {
        0.0
    } else {
        index as f64 / (a as f64 * b as f64).sqrt()
    };
    Ok(ClusterScores { nmi, ari, fmi })
}
