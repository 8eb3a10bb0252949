//! Thin dense linear-algebra helpers shared by the estimators.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Least-squares solution of `a x = y` via QR, with residuals.
///
/// Errors with the indices of near-collinear columns when the triangular
/// factor has a relatively tiny diagonal entry.
pub fn lstsq(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    let (n, k) = a.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if n < k {
        return Err(Error::InvalidInput(format!(
            "need more rows than columns: {n} x {k}"
        )));
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let max_diag = (0..k).map(|i| r[(i, i)].abs()).fold(0.0f64, f64::max);
    let bad: Vec<usize> = (0..k)
        .filter(|&i| r[(i, i)].abs() <= max_diag * 1e-10 || r[(i, i)] == 0.0)
        .collect();
    if !bad.is_empty() || max_diag == 0.0 {
        let cols = bad
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(", ");
        return Err(Error::RankDeficient(cols));
    }
    let qty = qr.q().transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Numerical("upper-triangular solve failed".into()))?;
    let resid = y - a * &beta;
    Ok((beta, resid))
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted
/// ascending. Returns `(eigenvalues, eigenvectors)` with vectors in columns
/// matching the sorted order.
pub fn symmetric_eigen_sorted(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let se = m.clone().symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let values: Vec<f64> = idx.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (out_col, &in_col) in idx.iter().enumerate() {
        vectors.set_column(out_col, &se.eigenvectors.column(in_col));
    }
    (values, vectors)
}

/// Symmetric square root of a positive semidefinite matrix, clipping small
/// negative eigenvalues at zero. Used for multivariate-normal sampling from
/// a covariance that may be singular.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let (vals, vecs) = symmetric_eigen_sorted(&sym);
    let n = m.nrows();
    let mut scaled = vecs.clone();
    for j in 0..n {
        let s = vals[j].max(0.0).sqrt();
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    &scaled * vecs.transpose()
}

/// Solve `m x = b` by LU with partial pivoting.
pub fn lu_solve(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    m.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Numerical("singular system".into()))
}

/// Matrix inverse with an optional ridge retry for near-singular input.
/// Returns the inverse and whether the ridge was applied.
pub fn inverse_with_ridge(m: &DMatrix<f64>, ridge: f64) -> Result<(DMatrix<f64>, bool)> {
    if let Some(inv) = m.clone().try_inverse() {
        if inv.iter().all(|v| v.is_finite()) {
            return Ok((inv, false));
        }
    }
    let n = m.nrows();
    let ridged = m + DMatrix::identity(n, n) * ridge;
    let inv = ridged
        .try_inverse()
        .filter(|inv| inv.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Numerical("matrix not invertible even with ridge".into()))?;
    Ok((inv, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lstsq_recovers_exact_solution() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0]);
        let (beta, resid) = lstsq(&a, &y).unwrap();
        assert_relative_eq!(beta[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(beta[1], 2.0, epsilon = 1e-12);
        assert!(resid.amax() < 1e-12);
    }

    #[test]
    fn lstsq_flags_collinear_columns() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0, 4.0, 8.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        match lstsq(&a, &y) {
            Err(Error::RankDeficient(_)) => {}
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn eigen_sorted_ascending() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0]);
        let (vals, vecs) = symmetric_eigen_sorted(&m);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        // reconstruct
        let lam = DMatrix::from_diagonal(&DVector::from_vec(vals.clone()));
        let rec = &vecs * lam * vecs.transpose();
        assert!((rec - m).abs().max() < 1e-10);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let s = psd_sqrt(&m);
        let rec = &s * s.transpose();
        assert!((rec - m).abs().max() < 1e-10);
    }
}
