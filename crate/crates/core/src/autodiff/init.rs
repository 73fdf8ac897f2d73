use super::RngStream;
use crate::linalg::Matrix;

/// Glorot/Xavier uniform: entries in `±sqrt(6 / (rows + cols))`.
pub fn xavier_uniform(rows: usize, cols: usize, rng: &mut RngStream) -> Matrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.uniform_range(-bound, bound))
}

/// Numerically stable softmax of a weight vector.
pub fn softmax_simplex(theta: &[f64]) -> Vec<f64> {
    let max = theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = theta.iter().map(|t| (t - max).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xavier_bounds() {
        let mut rng = RngStream::new(0);
        let m = xavier_uniform(30, 20, &mut rng);
        let bound = (6.0f64 / 50.0).sqrt();
        assert!(m.max_abs() <= bound);
        assert!(m.max_abs() > bound * 0.8);
    }

    #[test]
    fn simplex() {
        let w = softmax_simplex(&[0.0, 1000.0, -3.0]);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.iter().all(|&v| v >= 0.0));
        assert_eq!(softmax_simplex(&[2.0]), vec![1.0]);
    }
}
