use super::{Tensor, TensorError};

/// Outcome of comparing backpropagated and finite-difference gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(parameter index, flat coordinate)` of the worst coordinate.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
    pub skipped: usize,
}

/// Central differences `(f(θ+ε) − f(θ−ε)) / 2ε` against the gradient from
/// one backward pass. `loss` must rebuild the graph from the current
/// parameter values on every call and be deterministic. Coordinates with
/// `|θ| < 10ε` are skipped so kinks at zero do not pollute the estimate.
/// The relative error is `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn finite_difference_check(
    mut loss: impl FnMut() -> Result<Tensor, TensorError>,
    params: &[Tensor],
    eps: f64,
) -> Result<GradCheckReport, TensorError> {
    params.iter().for_each(Tensor::zero_grad);
    loss()?.backward()?;
    let analytic = params
        .iter()
        .enumerate()
        .map(|(k, p)| p.grad().ok_or(TensorError::MissingGradient(k)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
        skipped: 0,
    };
    for (k, p) in params.iter().enumerate() {
        let len = p.value().len();
        for idx in 0..len {
            let x0 = p.value().as_slice()[idx];
            if x0.abs() < 10.0 * eps {
                report.skipped += 1;
                continue;
            }
            p.update_value(|m| m.as_mut_slice()[idx] = x0 + eps);
            let up = loss();
            p.update_value(|m| m.as_mut_slice()[idx] = x0 - eps);
            let down = loss();
            p.update_value(|m| m.as_mut_slice()[idx] = x0);
            let numeric = (up?.item() - down?.item()) / (2.0 * eps);
            let a = analytic[k].as_slice()[idx];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            report.checked += 1;
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(rel);
                report.worst = Some((k, idx));
            }
        }
    }
    Ok(report)
}
