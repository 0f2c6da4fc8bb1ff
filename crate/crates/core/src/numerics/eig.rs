//! Eigenvalue routines.
//!
//! [`hermitian_eig`] is a cyclic complex Jacobi method; the matrices in this
//! crate are at most a few dozen rows, where Jacobi is accurate to working
//! precision and has no convergence corner cases. [`eigenvalues`] handles the
//! small non-Hermitian rotation matrices that ESPRIT produces, using a
//! Hessenberg reduction followed by Wilkinson-shifted QR sweeps.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

#[allow(unused_imports)]
use num_traits::Float;

use super::cmatrix::ComplexMatrix;
use crate::error::{invalid, Error, Result};

/// Relative tolerance on `max|A - A^H|` accepted as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues (descending) and matching orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

/// Eigendecomposition of a Hermitian matrix, `A V = V diag(values)`.
///
/// Eigenvalues are sorted in descending order; equal eigenvalues keep the
/// order in which the Jacobi iteration left them on the diagonal.
pub fn hermitian_eig(a: &ComplexMatrix) -> Result<HermitianEig> {
    let n = a.rows();
    if n != a.cols() {
        return Err(invalid(format!("eigendecomposition needs a square matrix, got {}x{}", n, a.cols())));
    }
    let scale = a.max_abs();
    let defect = a.hermitian_defect();
    if defect > HERMITIAN_TOL * scale {
        return Err(invalid(format!(
            "matrix is not Hermitian: max|A - A^H| = {defect:e} at scale {scale:e}"
        )));
    }

    // Work on the exactly Hermitian part.
    let mut w = ComplexMatrix::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5);
    let mut v = ComplexMatrix::identity(n);

    if scale > 0.0 {
        let target = f64::EPSILON * scale * n as f64;
        let mut converged = false;
        for _ in 0..MAX_SWEEPS {
            let off = off_diagonal_norm(&w);
            if off <= target {
                converged = true;
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    rotate(&mut w, &mut v, p, q);
                }
            }
        }
        if !converged && off_diagonal_norm(&w) > 1e3 * target {
            return Err(Error::NoConvergence(format!("Jacobi sweeps on {n}x{n} matrix")));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort: ties keep their diagonal index order.
    order.sort_by(|&i, &j| w[(j, j)].re.partial_cmp(&w[(i, i)].re).unwrap_or(core::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| w[(i, i)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(HermitianEig { values, vectors })
}

fn off_diagonal_norm(w: &ComplexMatrix) -> f64 {
    let n = w.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += w[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// One complex Jacobi rotation zeroing `w[p][q]`.
///
/// The phase of `w[p][q]` is first removed with a diagonal unitary, then the
/// resulting real symmetric 2x2 block is diagonalized by a plane rotation.
fn rotate(w: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = w[(p, q)];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let app = w[(p, p)].re;
    let aqq = w[(q, q)].re;
    let phase = (apq / mag).conj();
    let tau = (aqq - app) / (2.0 * mag);
    let t = if tau == 0.0 {
        1.0
    } else {
        tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    // U = D R with D = diag(1, phase) on (p, q).
    let upp = Complex64::new(c, 0.0);
    let upq = Complex64::new(s, 0.0);
    let uqp = phase * (-s);
    let uqq = phase * c;

    let n = w.rows();
    for k in 0..n {
        let akp = w[(k, p)];
        let akq = w[(k, q)];
        w[(k, p)] = akp * upp + akq * uqp;
        w[(k, q)] = akp * upq + akq * uqq;
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * upp + vkq * uqp;
        v[(k, q)] = vkp * upq + vkq * uqq;
    }
    for k in 0..n {
        let apk = w[(p, k)];
        let aqk = w[(q, k)];
        w[(p, k)] = upp.conj() * apk + uqp.conj() * aqk;
        w[(q, k)] = upq.conj() * apk + uqq.conj() * aqk;
    }
    w[(p, q)] = Complex64::new(0.0, 0.0);
    w[(q, p)] = Complex64::new(0.0, 0.0);
    w[(p, p)].im = 0.0;
    w[(q, q)].im = 0.0;
}

/// Eigenvalues of a general square complex matrix (no particular order).
pub fn eigenvalues(a: &ComplexMatrix) -> Result<Vec<Complex64>> {
    let n = a.rows();
    if n != a.cols() {
        return Err(invalid(format!("eigenvalues need a square matrix, got {}x{}", n, a.cols())));
    }
    let mut h = a.clone();
    hessenberg(&mut h);

    let mut out = Vec::with_capacity(n);
    let mut hi = n;
    let mut iter = 0usize;
    let limit = 100 * n.max(1);
    while hi > 0 {
        let end = hi - 1;
        if end == 0 {
            out.push(h[(0, 0)]);
            break;
        }
        // Find the start of the active unreduced block.
        let mut lo = end;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let diag = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
            let floor = if diag == 0.0 { f64::MIN_POSITIVE } else { diag };
            if sub <= f64::EPSILON * floor {
                h[(lo, lo - 1)] = Complex64::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == end {
            out.push(h[(end, end)]);
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        if iter > limit {
            return Err(Error::NoConvergence(format!("shifted QR on {n}x{n} matrix")));
        }
        let shift = if iter % 11 == 10 {
            // Exceptional shift to break cycles.
            h[(end, end)] + h[(end, end - 1)].norm() * 0.75
        } else {
            wilkinson_shift(&h, end)
        };
        qr_sweep(&mut h, lo, end, shift);
    }
    Ok(out)
}

fn wilkinson_shift(h: &ComplexMatrix, end: usize) -> Complex64 {
    let a = h[(end - 1, end - 1)];
    let b = h[(end - 1, end)];
    let c = h[(end, end - 1)];
    let d = h[(end, end)];
    let tr = a + d;
    let det = a * d - b * c;
    let disc = (tr * tr * 0.25 - det).sqrt();
    let l1 = tr * 0.5 + disc;
    let l2 = tr * 0.5 - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Reduces `h` in place to upper Hessenberg form with Householder reflections.
fn hessenberg(h: &mut ComplexMatrix) {
    let n = h.rows();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let mut x: Vec<Complex64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = x[0];
        let phase = if x0.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        x[0] += phase * norm;
        let vnorm2: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // H <- P H P with P = I - 2 v v^H / (v^H v).
        for j in 0..n {
            let dot: Complex64 = x.iter().enumerate().map(|(r, vr)| vr.conj() * h[(k + 1 + r, j)]).sum();
            let f = dot * (2.0 / vnorm2);
            for (r, vr) in x.iter().enumerate() {
                h[(k + 1 + r, j)] -= vr * f;
            }
        }
        for i in 0..n {
            let dot: Complex64 = x.iter().enumerate().map(|(r, vr)| h[(i, k + 1 + r)] * vr).sum();
            let f = dot * (2.0 / vnorm2);
            for (r, vr) in x.iter().enumerate() {
                h[(i, k + 1 + r)] -= f * vr.conj();
            }
        }
    }
}

/// One shifted QR step on the Hessenberg block `lo..=end` using Givens rotations.
fn qr_sweep(h: &mut ComplexMatrix, lo: usize, end: usize, shift: Complex64) {
    let n = h.rows();
    for i in lo..=end {
        h[(i, i)] -= shift;
    }
    let mut rots: Vec<(f64, Complex64)> = Vec::with_capacity(end - lo);
    for k in lo..end {
        let a = h[(k, k)];
        let b = h[(k + 1, k)];
        let (c, s) = givens(a, b);
        // Apply G = [[c, s], [-conj(s), c]] to rows k, k+1.
        for j in k..n {
            let x = h[(k, j)];
            let y = h[(k + 1, j)];
            h[(k, j)] = x * c + s * y;
            h[(k + 1, j)] = -s.conj() * x + y * c;
        }
        rots.push((c, s));
    }
    for (idx, k) in (lo..end).enumerate() {
        let (c, s) = rots[idx];
        // Multiply by G^H on the right: columns k, k+1.
        let top = (k + 2).min(end + 1);
        for i in 0..top.max(lo) {
            let x = h[(i, k)];
            let y = h[(i, k + 1)];
            h[(i, k)] = x * c + y * s.conj();
            h[(i, k + 1)] = -x * s + y * c;
        }
    }
    for i in lo..=end {
        h[(i, i)] += shift;
    }
}

/// Complex Givens rotation with `c` real such that `[c, s; -s*, c] [a; b] = [r; 0]`.
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    let na = a.norm();
    let nb = b.norm();
    if nb == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    if na == 0.0 {
        return (0.0, (b / nb).conj());
    }
    let r = (na * na + nb * nb).sqrt();
    let c = na / r;
    let s = (a / na) * b.conj() / r;
    (c, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn residual(a: &ComplexMatrix, e: &HermitianEig) -> f64 {
        let av = a.matmul(&e.vectors).unwrap();
        let n = a.rows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((av[(i, j)] - e.vectors[(i, j)] * e.values[j]).norm());
            }
        }
        worst
    }

    #[test]
    fn identity_has_unit_eigenvalues() {
        let e = hermitian_eig(&ComplexMatrix::identity(3)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
        let g = e.vectors.adjoint().matmul(&e.vectors).unwrap();
        assert!(g.sub(&ComplexMatrix::identity(3)).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn diagonal_is_sorted_with_permuted_basis() {
        let a = ComplexMatrix::from_fn(3, 3, |i, j| if i == j { c([3.0, 1.0, 2.0][i], 0.0) } else { c(0.0, 0.0) });
        let e = hermitian_eig(&a).unwrap();
        assert_eq!(e.values, vec![3.0, 2.0, 1.0]);
        // Columns are e0, e2, e1.
        assert_eq!(e.vectors[(0, 0)].norm(), 1.0);
        assert_eq!(e.vectors[(2, 1)].norm(), 1.0);
        assert_eq!(e.vectors[(1, 2)].norm(), 1.0);
    }

    #[test]
    fn rank_one_outer_product() {
        let a: Vec<Complex64> = vec![c(0.3, 0.1), c(-0.2, 0.5), c(0.4, -0.4), c(0.1, 0.2)];
        let n = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let a: Vec<Complex64> = a.iter().map(|z| z / n).collect();
        let m = ComplexMatrix::from_fn(4, 4, |i, j| a[i] * a[j].conj());
        let e = hermitian_eig(&m).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-12);
        for v in &e.values[1..] {
            assert!(v.abs() < 1e-12);
        }
        let first = e.vectors.column(0);
        let overlap: Complex64 = first.iter().zip(&a).map(|(x, y)| x.conj() * y).sum();
        assert!((overlap.norm() - 1.0).abs() < 1e-12);
        assert!(residual(&m, &e) < 1e-12);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut a = ComplexMatrix::identity(2);
        a[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(hermitian_eig(&a), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn general_eigenvalues_of_triangular_and_rotation() {
        let a = ComplexMatrix::from_vec(2, 2, vec![c(2.0, 1.0), c(5.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]).unwrap();
        let mut ev = eigenvalues(&a).unwrap();
        ev.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap());
        assert!((ev[0] - c(-1.0, 0.0)).norm() < 1e-12);
        assert!((ev[1] - c(2.0, 1.0)).norm() < 1e-12);

        // Real rotation by 0.3 rad has eigenvalues exp(+-0.3j).
        let (s, co) = (0.3f64.sin(), 0.3f64.cos());
        let r = ComplexMatrix::from_vec(2, 2, vec![c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)]).unwrap();
        let ev = eigenvalues(&r).unwrap();
        for z in ev {
            assert!((z.norm() - 1.0).abs() < 1e-12);
            assert!((z.arg().abs() - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn general_eigenvalues_of_similarity_transform() {
        // T diag(l) T^-1 with a unit upper-triangular T.
        let l = [c(0.5, 0.5), c(-0.2, 0.9), c(1.0, -0.3), c(0.1, 0.0)];
        let n = l.len();
        let t = ComplexMatrix::from_fn(n, n, |i, j| if i == j { c(1.0, 0.0) } else if j > i { c(0.3 * (i + j) as f64, -0.2) } else { c(0.0, 0.0) });
        // Inverse of unit upper-triangular by back substitution.
        let mut tinv = ComplexMatrix::identity(n);
        for col in 0..n {
            for i in (0..n).rev() {
                let mut s = if i == col { c(1.0, 0.0) } else { c(0.0, 0.0) };
                for k in i + 1..n {
                    s -= t[(i, k)] * tinv[(k, col)];
                }
                tinv[(i, col)] = s;
            }
        }
        let d = ComplexMatrix::from_fn(n, n, |i, j| if i == j { l[i] } else { c(0.0, 0.0) });
        let a = t.matmul(&d).unwrap().matmul(&tinv).unwrap();
        let ev = eigenvalues(&a).unwrap();
        for want in l {
            let best = ev.iter().map(|z| (z - want).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-10, "missing eigenvalue {want}: {ev:?}");
        }
    }
}
