//! Complex least squares.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

#[allow(unused_imports)]
use num_traits::Float;

use super::cmatrix::ComplexMatrix;
use super::eig::hermitian_eig;
use crate::error::{invalid, Result};

/// Condition number above which a solution is flagged as unreliable.
pub const CONDITION_WARNING: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct LstsqSolution {
    pub x: ComplexMatrix,
    /// Ratio of the largest to the smallest pivot of the QR factorization.
    pub condition_estimate: f64,
    /// Set when the minimum-norm pseudo-inverse route was taken.
    pub rank_deficient: bool,
}

impl LstsqSolution {
    pub fn ill_conditioned(&self) -> bool {
        self.rank_deficient || self.condition_estimate > CONDITION_WARNING
    }
}

/// Solves `min ||A X - B||_F` for tall or square `A`.
///
/// Uses Householder QR with column pivoting. When a pivot collapses to
/// round-off level the minimum-norm solution is computed from the
/// eigendecomposition of `A^H A` instead.
pub fn lstsq(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<LstsqSolution> {
    let (m, n) = (a.rows(), a.cols());
    if m < n {
        return Err(invalid(format!("least squares needs rows >= cols, got {m}x{n}")));
    }
    if b.rows() != m {
        return Err(invalid(format!("right-hand side has {} rows, expected {m}", b.rows())));
    }
    let nrhs = b.cols();
    let mut r = a.clone();
    let mut qb = b.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut col_norms: Vec<f64> = (0..n).map(|j| (0..m).map(|i| r[(i, j)].norm_sqr()).sum()).collect();

    for k in 0..n {
        // Pivot on the remaining column with the largest norm.
        let p = (k..n)
            .max_by(|&i, &j| col_norms[i].partial_cmp(&col_norms[j]).unwrap_or(core::cmp::Ordering::Equal))
            .unwrap_or(k);
        if p != k {
            for i in 0..m {
                let t = r[(i, k)];
                r[(i, k)] = r[(i, p)];
                r[(i, p)] = t;
            }
            col_norms.swap(k, p);
            perm.swap(k, p);
        }
        let mut v: Vec<Complex64> = (k..m).map(|i| r[(i, k)]).collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            let phase = if v[0].norm() == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                v[0] / v[0].norm()
            };
            v[0] += phase * norm;
            let vn2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            for j in k..n {
                let dot: Complex64 = v.iter().enumerate().map(|(t, vt)| vt.conj() * r[(k + t, j)]).sum();
                let f = dot * (2.0 / vn2);
                for (t, vt) in v.iter().enumerate() {
                    r[(k + t, j)] -= vt * f;
                }
            }
            for j in 0..nrhs {
                let dot: Complex64 = v.iter().enumerate().map(|(t, vt)| vt.conj() * qb[(k + t, j)]).sum();
                let f = dot * (2.0 / vn2);
                for (t, vt) in v.iter().enumerate() {
                    qb[(k + t, j)] -= vt * f;
                }
            }
        }
        for j in k + 1..n {
            col_norms[j] = (k + 1..m).map(|i| r[(i, j)].norm_sqr()).sum();
        }
    }

    let pivots: Vec<f64> = (0..n).map(|k| r[(k, k)].norm()).collect();
    let largest = pivots.first().copied().unwrap_or(0.0);
    let smallest = pivots.iter().copied().fold(f64::INFINITY, f64::min);
    let condition_estimate = if smallest == 0.0 { f64::INFINITY } else { largest / smallest };
    let deficient = largest == 0.0 || smallest <= largest * f64::EPSILON * m as f64;

    if deficient {
        let x = min_norm_solution(a, b)?;
        return Ok(LstsqSolution {
            x,
            condition_estimate,
            rank_deficient: true,
        });
    }

    // Back substitution R y = Q^H b, then undo the column permutation.
    let mut x = ComplexMatrix::zeros(n, nrhs);
    for j in 0..nrhs {
        for i in (0..n).rev() {
            let mut s = qb[(i, j)];
            for k in i + 1..n {
                s -= r[(i, k)] * x[(perm[k], j)];
            }
            x[(perm[i], j)] = s / r[(i, i)];
        }
    }
    Ok(LstsqSolution {
        x,
        condition_estimate,
        rank_deficient: false,
    })
}

/// `X = (A^H A)^+ A^H B` with eigenvalues below `1e-14 * max` treated as zero.
fn min_norm_solution(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let ah = a.adjoint();
    let gram = ah.matmul(a)?;
    let rhs = ah.matmul(b)?;
    let eig = hermitian_eig(&gram)?;
    let n = a.cols();
    let top = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let cutoff = top * 1e-14;
    let vh = eig.vectors.adjoint();
    let mut proj = vh.matmul(&rhs)?;
    for i in 0..n {
        let lam = eig.values[i];
        let inv = if lam > cutoff && lam > 0.0 { 1.0 / lam } else { 0.0 };
        for j in 0..proj.cols() {
            proj[(i, j)] *= inv;
        }
    }
    eig.vectors.matmul(&proj)
}
