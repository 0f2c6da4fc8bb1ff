//! Complex linear algebra and sampling shared by the rest of the crate.

mod cmatrix;
pub mod eig;
mod lstsq;
mod matrix;
mod rng;

pub use cmatrix::{ComplexMatrix, ComplexVector};
pub use eig::{eigenvalues, hermitian_eig, HermitianEig};
pub use lstsq::{lstsq, LstsqSolution, CONDITION_WARNING};
pub use matrix::Matrix;
pub use rng::{SimRng, Stream};

use alloc::format;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Result};

/// One circularly symmetric complex normal sample, `CN(0, variance)`.
///
/// Real and imaginary parts are independent `N(0, variance / 2)`.
pub fn cnormal<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> Complex64 {
    let sd = (variance * 0.5).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(sd * re, sd * im)
}

/// `n` i.i.d. samples from `CN(0, variance)`.
pub fn cnormal_sample<R: Rng + ?Sized>(n: usize, variance: f64, rng: &mut R) -> Result<ComplexVector> {
    if !(variance >= 0.0) {
        return Err(invalid(format!("variance must be non-negative, got {variance}")));
    }
    Ok((0..n).map(|_| cnormal(variance, rng)).collect())
}

/// Hankel matrix `H[i][j] = v[i + j]` with `l` rows and `len - l + 1` columns.
pub fn hankel(v: &[Complex64], l: usize) -> Result<ComplexMatrix> {
    let k = v.len();
    if l == 0 || l > k {
        return Err(invalid(format!("Hankel row count {l} outside 1..={k}")));
    }
    Ok(ComplexMatrix::from_fn(l, k - l + 1, |i, j| v[i + j]))
}

/// Element-wise mean of squared magnitudes.
pub fn mean_power(v: &[Complex64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().map(|z| z.norm_sqr()).sum::<f64>() / v.len() as f64
}

/// Converts decibels to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a linear power ratio to decibels.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn zero_variance_gives_zeros() {
        let mut rng = SimRng::new(1, Stream::Custom(0));
        let v = cnormal_sample(4, 0.0, &mut rng).unwrap();
        assert!(v.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn negative_variance_rejected() {
        let mut rng = SimRng::new(1, Stream::Custom(0));
        assert!(cnormal_sample(4, -1.0, &mut rng).is_err());
        assert!(cnormal_sample(4, f64::NAN, &mut rng).is_err());
    }

    #[test]
    fn unit_variance_power() {
        let mut rng = SimRng::new(2, Stream::Custom(0));
        let v = cnormal_sample(1_000_000, 1.0, &mut rng).unwrap();
        let p = mean_power(&v);
        assert!((p - 1.0).abs() < 0.01, "mean |x|^2 = {p}");
    }

    #[test]
    fn real_part_variance_is_half() {
        let mut rng = SimRng::new(3, Stream::Custom(0));
        let v = cnormal_sample(1_000_000, 4.0, &mut rng).unwrap();
        let n = v.len() as f64;
        let mean = v.iter().map(|z| z.re).sum::<f64>() / n;
        let var = v.iter().map(|z| (z.re - mean) * (z.re - mean)).sum::<f64>() / (n - 1.0);
        assert!((var - 2.0).abs() < 0.04, "var(re) = {var}");
    }

    #[test]
    fn hankel_layout() {
        let v = vec![c(1.0), c(2.0), c(3.0), c(4.0)];
        let h = hankel(&v, 2).unwrap();
        assert_eq!((h.rows(), h.cols()), (2, 3));
        let want = [[1.0, 2.0, 3.0], [2.0, 3.0, 4.0]];
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(h[(i, j)], c(want[i][j]));
            }
        }
        let row = hankel(&v, 1).unwrap();
        assert_eq!((row.rows(), row.cols()), (1, 4));
        assert_eq!(row.row(0), v.as_slice());
        let col = hankel(&v, 4).unwrap();
        assert_eq!((col.rows(), col.cols()), (4, 1));
        assert_eq!(col.column(0), v);
        assert!(hankel(&v, 0).is_err());
        assert!(hankel(&v, 5).is_err());
    }
}
