//! Subspace ESPRIT angle estimation for a uniform linear array.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

#[allow(unused_imports)]
use num_traits::Float;

use crate::channel::ArrayConfig;
use crate::error::{invalid, Result};
use crate::numerics::{eigenvalues, hankel, hermitian_eig, lstsq, ComplexMatrix};

/// Angle estimates with a flag per entry whose arcsine argument left `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EspritEstimate {
    /// Radians, ascending.
    pub angles: Vec<f64>,
    pub clamped: Vec<bool>,
    /// Set when the rotational least-squares problem was ill-conditioned.
    pub ill_conditioned: bool,
}

/// `R = Z Z^H / u`, exactly Hermitian.
pub fn sample_covariance(z: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (k, u) = (z.rows(), z.cols());
    if u == 0 || k == 0 {
        return Err(invalid("covariance needs at least one snapshot"));
    }
    let scale = 1.0 / u as f64;
    let mut data = alloc::vec![Complex64::new(0.0, 0.0); k * k];
    for i in 0..k {
        let ri = z.row(i);
        for j in i..k {
            let rj = z.row(j);
            let s: Complex64 = ri.iter().zip(rj).map(|(a, b)| a * b.conj()).sum::<Complex64>() * scale;
            if i == j {
                data[i * k + i] = Complex64::new(s.re, 0.0);
            } else {
                data[i * k + j] = s;
                data[j * k + i] = s.conj();
            }
        }
    }
    ComplexMatrix::from_vec(k, k, data)
}

/// Covariance ESPRIT with `t` assumed sources and maximum-overlap subarrays.
pub fn esprit(r: &ComplexMatrix, t: usize, cfg: &ArrayConfig) -> Result<EspritEstimate> {
    let k = r.rows();
    if r.cols() != k {
        return Err(invalid(format!("covariance must be square, got {}x{}", k, r.cols())));
    }
    if t >= k {
        return Err(invalid(format!("ESPRIT needs fewer sources ({t}) than array elements ({k})")));
    }
    if t == 0 {
        return Ok(EspritEstimate::default());
    }
    let eig = hermitian_eig(r)?;
    let es = eig.vectors.column_block(0, t);
    let e1 = es.row_block(0, k - 1);
    let e2 = es.row_block(1, k);
    let sol = lstsq(&e1, &e2)?;
    let psi = eigenvalues(&sol.x)?;
    let mut pairs: Vec<(f64, bool)> = psi
        .iter()
        .map(|p| {
            let s = p.arg() / (2.0 * PI * cfg.spacing);
            if s.abs() > 1.0 {
                (s.signum().asin(), true)
            } else {
                (s.asin(), false)
            }
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(EspritEstimate {
        angles: pairs.iter().map(|p| p.0).collect(),
        clamped: pairs.iter().map(|p| p.1).collect(),
        ill_conditioned: sol.ill_conditioned(),
    })
}

/// Default Hankel row count `ceil(K / 2)`.
pub fn default_hankel_rows(antennas: usize) -> usize {
    antennas.div_ceil(2)
}

/// Single-snapshot ESPRIT on the `l`-row Hankel matrix of `z`.
pub fn esprit_single_snapshot(z: &[Complex64], t: usize, l: usize, cfg: &ArrayConfig) -> Result<EspritEstimate> {
    let k = z.len();
    if l == 0 || l > k {
        return Err(invalid(format!("Hankel row count {l} outside 1..={k}")));
    }
    let cols = k - l + 1;
    if t >= l.min(cols) {
        return Err(invalid(format!("single-snapshot ESPRIT needs fewer sources ({t}) than min({l}, {cols})")));
    }
    let h = hankel(z, l)?;
    let r = sample_covariance(&h)?;
    esprit(&r, t, cfg)
}

/// Hankel ESPRIT for one snapshot, covariance ESPRIT otherwise.
pub fn esprit_scan(z: &ComplexMatrix, t: usize, cfg: &ArrayConfig) -> Result<EspritEstimate> {
    if t == 0 {
        return Ok(EspritEstimate::default());
    }
    if z.cols() == 1 {
        let v = z.column(0);
        esprit_single_snapshot(&v, t, default_hankel_rows(v.len()), cfg)
    } else {
        esprit(&sample_covariance(z)?, t, cfg)
    }
}
