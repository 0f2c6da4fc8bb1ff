//! Batch-mean losses and their gradients with respect to the predictions.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;


#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, shape, Result};
use crate::numerics::Matrix;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside log losses.
pub const PROB_CLAMP: f64 = 1e-12;

fn clamp_prob(p: f64) -> (f64, bool) {
    let c = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    (c, c == p)
}

/// Binary cross-entropy averaged over all entries.
pub fn bce(pred: &[f64], target: &[f64]) -> Result<f64> {
    Ok(bce_grad(pred, target)?.0)
}

/// Binary cross-entropy and its gradient with respect to `pred`.
///
/// Entries that hit the clamp receive zero gradient.
pub fn bce_grad(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() {
        return Err(shape(format!("{} targets", pred.len()), format!("{}", target.len())));
    }
    if pred.is_empty() {
        return Ok((0.0, Vec::new()));
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; pred.len()];
    for ((g, &p), &t) in grad.iter_mut().zip(pred).zip(target) {
        let (pc, inside) = clamp_prob(p);
        loss -= t * pc.ln() + (1.0 - t) * (1.0 - pc).ln();
        if inside {
            *g = (-t / pc + (1.0 - t) / (1.0 - pc)) / n;
        }
    }
    Ok((loss / n, grad))
}

/// Cross-entropy of probability rows against class indices, averaged over rows.
pub fn cross_entropy(pred: &Matrix, target: &[usize]) -> Result<f64> {
    Ok(cross_entropy_grad(pred, target)?.0)
}

pub fn cross_entropy_grad(pred: &Matrix, target: &[usize]) -> Result<(f64, Matrix)> {
    if pred.rows() != target.len() {
        return Err(shape(format!("{} class labels", pred.rows()), format!("{}", target.len())));
    }
    let mut grad = Matrix::zeros(pred.rows(), pred.cols());
    if pred.rows() == 0 {
        return Ok((0.0, grad));
    }
    let n = pred.rows() as f64;
    let mut loss = 0.0;
    for (r, &t) in target.iter().enumerate() {
        if t >= pred.cols() {
            return Err(invalid(format!("class index {t} out of range for {} classes", pred.cols())));
        }
        let (pc, inside) = clamp_prob(pred[(r, t)]);
        loss -= pc.ln();
        if inside {
            grad[(r, t)] = -1.0 / (pc * n);
        }
    }
    Ok((loss / n, grad))
}

/// Mean squared error over all entries.
pub fn mse(pred: &Matrix, target: &Matrix) -> Result<f64> {
    Ok(mse_grad(pred, target)?.0)
}

pub fn mse_grad(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    if pred.rows() != target.rows() || pred.cols() != target.cols() {
        return Err(shape(
            format!("{}x{}", pred.rows(), pred.cols()),
            format!("{}x{}", target.rows(), target.cols()),
        ));
    }
    let count = pred.as_slice().len();
    let mut grad = Matrix::zeros(pred.rows(), pred.cols());
    if count == 0 {
        return Ok((0.0, grad));
    }
    let n = count as f64;
    let mut loss = 0.0;
    for ((g, p), t) in grad.as_mut_slice().iter_mut().zip(pred.as_slice()).zip(target.as_slice()) {
        let d = p - t;
        loss += d * d;
        *g = 2.0 * d / n;
    }
    Ok((loss / n, grad))
}
