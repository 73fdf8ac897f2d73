use super::TrainError;
use crate::autodiff::{Adam, AdamConfig, RngStream};
use crate::linalg::Matrix;

const L2: f64 = 1e-4;
const STEPS: usize = 500;
const LEARNING_RATE: f64 = 0.05;

/// Multinomial logistic regression on standardized features, fit with Adam
/// on the mean cross-entropy plus `λ/2·‖W‖²`.
#[derive(Debug, Clone)]
pub struct LogisticProbe {
    mean: Vec<f64>,
    scale: Vec<f64>,
    w: Matrix,
    b: Matrix,
}

impl LogisticProbe {
    /// `labels[k]` is the class of row `train[k]` of `x`. Only training rows
    /// and their labels are visible to the fit.
    pub fn fit(x: &Matrix, train: &[usize], labels: &[usize], classes: usize, seed: u64) -> Result<Self, TrainError> {
        if train.is_empty() || train.len() != labels.len() {
            return Err(TrainError::EmptySplit("probe training set"));
        }
        if let Some(&bad) = labels.iter().find(|&&c| c >= classes) {
            return Err(TrainError::Labels(format!("class {bad} out of range for {classes} classes")));
        }
        let first = labels[0];
        if labels.iter().all(|&c| c == first) {
            return Err(TrainError::SingleClass);
        }
        let xt = x.select_rows(train);
        let (n, d) = xt.shape();
        let mut mean = vec![0.0; d];
        for r in 0..n {
            for (m, v) in mean.iter_mut().zip(xt.row(r)) {
                *m += v / n as f64;
            }
        }
        let mut scale = vec![0.0; d];
        for r in 0..n {
            for ((s, v), m) in scale.iter_mut().zip(xt.row(r)).zip(&mean) {
                *s += (v - m) * (v - m) / n as f64;
            }
        }
        for s in &mut scale {
            *s = if *s > 1e-12 { 1.0 / s.sqrt() } else { 0.0 };
        }
        let mut probe = Self {
            mean,
            scale,
            w: Matrix::zeros(d, classes),
            b: Matrix::zeros(1, classes),
        };
        let z = probe.standardize(&xt);
        let mut rng = RngStream::new(seed);
        probe.w = Matrix::from_fn(d, classes, |_, _| 1e-3 * rng.uniform_range(-1.0, 1.0));
        let mut adam = Adam::new(AdamConfig {
            lr: LEARNING_RATE,
            ..Default::default()
        });
        for _ in 0..STEPS {
            let mut p = probe.logits_standardized(&z);
            softmax_rows(&mut p);
            for (r, &c) in labels.iter().enumerate() {
                p[(r, c)] -= 1.0;
            }
            let g = p.scale(1.0 / n as f64);
            let mut dw = z.t_matmul(&g);
            dw.axpy(L2, &probe.w);
            let db = Matrix::from_fn(1, classes, |_, c| (0..n).map(|r| g[(r, c)]).sum());
            let mut params = [std::mem::take(&mut probe.w), std::mem::take(&mut probe.b)];
            adam.step_raw(&mut params, &[dw, db]);
            let [w, b] = params;
            probe.w = w;
            probe.b = b;
        }
        Ok(probe)
    }

    fn standardize(&self, x: &Matrix) -> Matrix {
        Matrix::from_fn(x.rows(), x.cols(), |r, c| (x[(r, c)] - self.mean[c]) * self.scale[c])
    }

    fn logits_standardized(&self, z: &Matrix) -> Matrix {
        let mut out = z.matmul(&self.w);
        for r in 0..out.rows() {
            for (o, b) in out.row_mut(r).iter_mut().zip(self.b.row(0)) {
                *o += b;
            }
        }
        out
    }

    /// Class probabilities for every row of `x`.
    pub fn predict_proba(&self, x: &Matrix) -> Matrix {
        let mut p = self.logits_standardized(&self.standardize(x));
        softmax_rows(&mut p);
        p
    }

    pub fn predict(&self, x: &Matrix) -> Vec<usize> {
        self.logits_standardized(&self.standardize(x)).argmax_rows()
    }
}

fn softmax_rows(m: &mut Matrix) {
    for r in 0..m.rows() {
        let row = m.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
}

/// Fits a probe on `train` rows and predicts the `eval` rows.
pub fn logistic_probe(
    x: &Matrix,
    train: &[usize],
    train_labels: &[usize],
    eval: &[usize],
    classes: usize,
    seed: u64,
) -> Result<Vec<usize>, TrainError> {
    let probe = LogisticProbe::fit(x, train, train_labels, classes, seed)?;
    Ok(probe.predict(&x.select_rows(eval)))
}
