use crate::error::{Error, Result};
use crate::linalg::CscMatrix;
use crate::scalar::Real;

/// Precision of a stationary AR(1) series with unit innovation variance.
///
/// Tridiagonal with diagonal `(1, 1+α², …, 1+α², 1)` and off-diagonal `-α`;
/// for a single time point it is the scalar `1 - α²`. The off-diagonal is
/// stored even when `α = 0`, so the pattern depends only on `weeks`.
pub fn ar1_precision<T: Real>(alpha: T, weeks: usize) -> Result<CscMatrix<T>> {
    if !(alpha.abs() < T::one()) {
        return Err(Error::Parameter(format!("AR1 coefficient must satisfy |alpha| < 1, got {alpha}")));
    }
    if weeks == 0 {
        return Err(Error::Parameter("AR1 needs at least one time point".into()));
    }
    if weeks == 1 {
        return Ok(CscMatrix::from_diagonal(&[T::one() - alpha * alpha]));
    }
    let inner = T::one() + alpha * alpha;
    let mut trip = Vec::with_capacity(3 * weeks);
    for t in 0..weeks {
        let d = if t == 0 || t == weeks - 1 { T::one() } else { inner };
        trip.push((t, t, d));
        if t + 1 < weeks {
            trip.push((t, t + 1, -alpha));
            trip.push((t + 1, t, -alpha));
        }
    }
    Ok(CscMatrix::from_triplets(weeks, weeks, &trip))
}

/// `log det` of [`ar1_precision`]; equals `ln(1 - α²)` for every length.
pub fn ar1_log_det<T: Real>(alpha: T) -> T {
    (T::one() - alpha * alpha).ln()
}

/// Space-time precision `Q_time(α) ⊗ Q_s`, indexed week-major (`t·m + node`).
///
/// Realizes `ξ_t = α ξ_{t-1} + ω_t` with `ω_t ~ N(0, Q_s⁻¹)` and the
/// stationary start `ξ_1 ~ N(0, Q_s⁻¹ / (1 - α²))`.
pub fn st_precision<T: Real>(q_spatial: &CscMatrix<T>, alpha: T, weeks: usize) -> Result<CscMatrix<T>> {
    if q_spatial.nrows() != q_spatial.ncols() {
        return Err(Error::Parameter("spatial precision must be square".into()));
    }
    Ok(ar1_precision(alpha, weeks)?.kron(q_spatial))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_alpha_is_identity() {
        let q = ar1_precision(0.0f64, 4).unwrap().to_dense();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(q[i][j], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn three_weeks_half() {
        let q = ar1_precision(0.5f64, 3).unwrap().to_dense();
        assert_eq!(q[0], vec![1.0, -0.5, 0.0]);
        assert_eq!(q[1], vec![-0.5, 1.25, -0.5]);
        assert_eq!(q[2], vec![0.0, -0.5, 1.0]);
        assert_eq!(ar1_precision(0.5f64, 1).unwrap().to_dense(), vec![vec![0.75]]);
    }

    #[test]
    fn inverse_is_ar1_covariance() {
        // Stationary AR1 with unit innovations: Cov(x_i, x_j) = α^|i-j| / (1 - α²).
        let alpha = 0.9f64;
        let q = ar1_precision(alpha, 4).unwrap().to_dense();
        let q = nalgebra::DMatrix::from_fn(4, 4, |i, j| q[i][j]);
        let cov = q.try_inverse().unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = alpha.powi((i as i32 - j as i32).abs()) / (1.0 - alpha * alpha);
                assert!((cov[(i, j)] - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_unit_root() {
        assert!(ar1_precision(1.0f64, 3).is_err());
        assert!(ar1_precision(-1.2f64, 3).is_err());
    }

    #[test]
    fn log_det_closed_form() {
        let q = ar1_precision(0.7f64, 6).unwrap();
        let chol = crate::linalg::SparseCholesky::new(&q).unwrap();
        assert!((chol.log_det() - ar1_log_det(0.7)).abs() < 1e-12);
    }
}
