//! Full-batch semi-supervised training, embedding extraction and the
//! classification and clustering evaluation protocol.

mod kmeans;
mod metrics;
mod probe;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use kmeans::{kmeans, KMeansResult};
pub use metrics::{accuracy, clustering_scores, macro_micro_f1, ClusterScores};
pub use probe::{logistic_probe, LogisticProbe};

use crate::autodiff::{Adam, AdamConfig, RngStream, Tensor, TensorError};
use crate::hin::{split_labels, HeteroGraph, HinError, LabelSplit, Labels};
use crate::layers::{GraphInputs, HaeModel, LayerError, Mode};
use crate::linalg::Matrix;
use crate::parallel::Execution;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid train config: {0}")]
    Config(String),
    #[error("empty {0}")]
    EmptySplit(&'static str),
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("label problem: {0}")]
    Labels(String),
    #[error("non-finite loss at epoch {epoch}")]
    NonFinite { epoch: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("cannot form {k} clusters from {n} points")]
    Clusters { k: usize, n: usize },
    #[error(transparent)]
    Layer(#[from] LayerError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Graph(#[from] HinError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Epochs without validation-loss improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Fraction of labeled nodes used for training (validation included).
    pub train_ratio: f64,
    /// Fraction of the training portion held out for validation.
    pub val_ratio: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            epochs: 100,
            patience: 30,
            seed: 0,
            train_ratio: 0.8,
            val_ratio: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if self.patience > self.epochs {
            return bad(format!("patience {} exceeds epochs {}", self.patience, self.epochs));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return bad(format!("train_ratio must lie in (0,1), got {}", self.train_ratio));
        }
        if !(0.0..1.0).contains(&self.val_ratio) {
            return bad(format!("val_ratio must lie in [0,1), got {}", self.val_ratio));
        }
        Ok(())
    }
}

/// Stratified split where validation is carved out of the training portion:
/// `train_ratio·(1 − val_ratio)` train, `train_ratio·val_ratio` validation,
/// the rest test.
pub fn protocol_split(g: &HeteroGraph, train_ratio: f64, val_ratio: f64, seed: u64) -> Result<LabelSplit, TrainError> {
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(TrainError::Config(format!("train ratio must lie in (0,1), got {train_ratio}")));
    }
    let mut split = split_labels(g, train_ratio * (1.0 - val_ratio), train_ratio * val_ratio, seed)?;
    split.train_ratio = train_ratio;
    Ok(split)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_macro_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureWeight {
    pub structure: String,
    pub weight: f64,
}

/// Learned `ω` of one SCL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaReport {
    pub layer: usize,
    pub weights: Vec<StructureWeight>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_clock_seconds: f64,
    /// Peak resident set size of the process; best effort, Linux only.
    pub peak_resident_bytes: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_val_loss: Option<f64>,
    pub stopped_early: bool,
    /// One entry per SCL; empty when the stack has none.
    pub omega: Vec<OmegaReport>,
    /// Remarks about the run, such as a stack without structure weights.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

fn one_hot(labels: &Labels, n: usize) -> Result<Matrix, TrainError> {
    if labels.assignment.len() != n {
        return Err(TrainError::Labels(format!(
            "{} label slots for {n} nodes",
            labels.assignment.len()
        )));
    }
    let mut y = Matrix::zeros(n, labels.num_classes());
    for (i, l) in labels.assignment.iter().enumerate() {
        if let Some(c) = l {
            y[(i, *c)] = 1.0;
        }
    }
    Ok(y)
}

fn require_labels(labels: &Labels, ids: &[usize]) -> Result<Vec<usize>, TrainError> {
    ids.iter()
        .map(|&i| {
            labels
                .assignment
                .get(i)
                .copied()
                .flatten()
                .ok_or_else(|| TrainError::Labels(format!("node {i} has no label")))
        })
        .collect()
}

/// Best-effort peak resident set size from `/proc/self/status`.
pub fn peak_resident_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

/// Trains `model` in place with Adam on the summed cross-entropy over the
/// training ids. After every step the parameters are scored in evaluation
/// mode on the validation ids (on the training ids when there are none);
/// the best-scoring parameters are restored at the end.
pub fn train(
    model: &HaeModel,
    inputs: &GraphInputs,
    labels: &Labels,
    split: &LabelSplit,
    cfg: &TrainConfig,
) -> Result<TrainReport, TrainError> {
    cfg.validate()?;
    let start = Instant::now();
    if split.train_ids.is_empty() {
        return Err(TrainError::EmptySplit("training split"));
    }
    if labels.num_classes() != model.classes() {
        return Err(TrainError::Labels(format!(
            "{} classes in the labels, {} in the model head",
            labels.num_classes(),
            model.classes()
        )));
    }
    let y = one_hot(labels, inputs.n())?;
    require_labels(labels, &split.train_ids)?;
    let val_truth = require_labels(labels, &split.val_ids)?;
    let monitor: &[usize] = if split.val_ids.is_empty() {
        &split.train_ids
    } else {
        &split.val_ids
    };

    let x = Tensor::constant(inputs.features().clone());
    let params = model.parameters();
    let mut adam = Adam::new(AdamConfig {
        lr: cfg.learning_rate,
        ..Default::default()
    });
    let mut dropout_rng = RngStream::with_stream(cfg.seed, 1);
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Vec<(String, Matrix)>)> = None;
    let mut since_best = 0;
    let mut stopped_early = false;

    for epoch in 0..cfg.epochs {
        model.zero_grad();
        let out = model.forward(inputs, &x, Mode::Train(&mut dropout_rng))?;
        let loss = out.logits.cross_entropy(&y, &split.train_ids)?;
        let train_loss = loss.item();
        if !train_loss.is_finite() {
            return Err(TrainError::NonFinite { epoch });
        }
        loss.backward()?;
        adam.step(&params)?;

        let eval = model.forward_eval(inputs)?;
        let score = eval.logits.cross_entropy(&y, monitor)?.item();
        if !score.is_finite() {
            return Err(TrainError::NonFinite { epoch });
        }
        let (val_loss, val_macro_f1) = if split.val_ids.is_empty() {
            (None, None)
        } else {
            let pred: Vec<usize> = split
                .val_ids
                .iter()
                .map(|&i| argmax(eval.logits.value().row(i)))
                .collect();
            (Some(score), Some(macro_micro_f1(&val_truth, &pred)?.0))
        };
        records.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_macro_f1,
        });
        if best.as_ref().is_none_or(|(b, _, _)| score < *b) {
            best = Some((score, epoch, model.snapshot()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                stopped_early = epoch + 1 < cfg.epochs;
                break;
            }
        }
    }

    let (best_score, best_epoch, snapshot) = best.expect("at least one epoch ran");
    model.restore(&snapshot)?;
    let omega = model
        .layers()
        .iter()
        .enumerate()
        .filter_map(|(i, l)| match l {
            crate::layers::Layer::Scl(s) => Some(OmegaReport {
                layer: i,
                weights: inputs
                    .structures()
                    .iter()
                    .zip(s.omega())
                    .map(|(name, w)| StructureWeight {
                        structure: name.clone(),
                        weight: w,
                    })
                    .collect(),
            }),
            crate::layers::Layer::Cal(_) => None,
        })
        .collect::<Vec<_>>();
    let mut notes = Vec::new();
    if omega.is_empty() {
        notes.push("no SCL layer in the stack, so no structure weights (omega) were learned".to_string());
    }
    Ok(TrainReport {
        epochs: records,
        best_epoch,
        best_val_loss: (!split.val_ids.is_empty()).then_some(best_score),
        stopped_early,
        omega,
        notes,
        timing: Some(Timing {
            wall_clock_seconds: start.elapsed().as_secs_f64(),
            peak_resident_bytes: peak_resident_bytes(),
        }),
    })
}

fn argmax(row: &[f64]) -> usize {
    row.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
        .0
}

/// Evaluation-mode embeddings (the last layer's output, before the head).
pub fn extract_embeddings(model: &HaeModel, inputs: &GraphInputs) -> Result<Matrix, TrainError> {
    let out = model.forward_eval(inputs)?;
    let emb = out.embeddings.value().clone();
    Ok(emb)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub nmi: f64,
    pub ari: f64,
    pub fmi: f64,
}

/// Probe trained on the split's train and validation ids and scored on its
/// test ids; k-means with one cluster per class over every labeled node.
pub fn evaluate_embeddings(
    emb: &Matrix,
    labels: &Labels,
    split: &LabelSplit,
    seed: u64,
    exec: Execution,
) -> Result<EvalMetrics, TrainError> {
    if split.test_ids.is_empty() {
        return Err(TrainError::EmptySplit("test split"));
    }
    let mut fit_ids: Vec<usize> = split.train_ids.iter().chain(&split.val_ids).copied().collect();
    fit_ids.sort_unstable();
    let fit_labels = require_labels(labels, &fit_ids)?;
    let truth = require_labels(labels, &split.test_ids)?;
    let pred = logistic_probe(emb, &fit_ids, &fit_labels, &split.test_ids, labels.num_classes(), seed)?;
    let (macro_f1, micro_f1) = macro_micro_f1(&truth, &pred)?;

    let labeled = labels.labeled();
    let all_truth = require_labels(labels, &labeled)?;
    let clusters = kmeans(&emb.select_rows(&labeled), labels.num_classes(), seed, exec)?;
    let ClusterScores { nmi, ari, fmi } = clustering_scores(&all_truth, &clusters.assignments)?;
    Ok(EvalMetrics {
        macro_f1,
        micro_f1,
        nmi,
        ari,
        fmi,
    })
}

/// Mean and sample standard deviation of every metric across runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub runs: usize,
    pub macro_f1_mean: f64,
    pub macro_f1_std: f64,
    pub micro_f1_mean: f64,
    pub micro_f1_std: f64,
    pub nmi_mean: f64,
    pub nmi_std: f64,
    pub ari_mean: f64,
    pub ari_std: f64,
    pub fmi_mean: f64,
    pub fmi_std: f64,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn summarize(runs: &[EvalMetrics]) -> MetricSummary {
    let stat = |f: fn(&EvalMetrics) -> f64| mean_std(&runs.iter().map(f).collect::<Vec<_>>());
    let (macro_f1_mean, macro_f1_std) = stat(|m| m.macro_f1);
    let (micro_f1_mean, micro_f1_std) = stat(|m| m.micro_f1);
    let (nmi_mean, nmi_std) = stat(|m| m.nmi);
    let (ari_mean, ari_std) = stat(|m| m.ari);
    let (fmi_mean, fmi_std) = stat(|m| m.fmi);
    MetricSummary {
        runs: runs.len(),
        macro_f1_mean,
        macro_f1_std,
        micro_f1_mean,
        micro_f1_std,
        nmi_mean,
        nmi_std,
        ari_mean,
        ari_std,
        fmi_mean,
        fmi_std,
    }
}
