//! OLS baseline and spatial diagnostics: Moran's I with permutation
//! inference plus Lagrange multiplier lag/error tests.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::lstsq;
use crate::rng::stream;
use crate::stats::chi2_sf;
use crate::weights::SpatialWeights;

/// Gaussian ML log-likelihood with sigma^2 profiled out at e'e/n.
pub(crate) fn gaussian_profile_loglik(n: usize, ssr: f64) -> f64 {
    let n = n as f64;
    -0.5 * n * ((2.0 * std::f64::consts::PI).ln() + 1.0) - 0.5 * n * (ssr / n).ln()
}

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: DVector<f64>,
    pub residuals: DVector<f64>,
    /// ML variance estimate, divisor n.
    pub sigma2: f64,
    pub loglik: f64,
    /// Counts sigma^2 as an estimated parameter so the value is comparable
    /// with the spatial fits.
    pub aic: f64,
    pub n: usize,
}

/// Least-squares fit of y on a design that already carries its intercept.
pub fn ols_fit(y: &DVector<f64>, z: &DMatrix<f64>) -> Result<OlsFit> {
    let n = z.nrows();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if n <= z.ncols() {
        return Err(Error::InvalidInput(format!(
            "need more rows than columns: n = {n}, k = {}",
            z.ncols()
        )));
    }
    let (coefficients, residuals) = lstsq(z, y)?;
    let ssr = residuals.norm_squared();
    let sigma2 = ssr / n as f64;
    let loglik = gaussian_profile_loglik(n, ssr);
    let params = z.ncols() as f64 + 1.0;
    Ok(OlsFit {
        coefficients,
        residuals,
        sigma2,
        loglik,
        aic: 2.0 * params - 2.0 * loglik,
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticMethod {
    MoranPermutation,
    LmLag,
    LmError,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticResult {
    pub method: DiagnosticMethod,
    pub statistic: f64,
    pub null_expectation: f64,
    pub p_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub permutations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Moran numerator/denominator on t = n*x - sum(x). The centering scale
/// cancels in the ratio, and t is exact for integer-valued x, which keeps
/// hand-checkable inputs free of rounding.
fn moran_ratio_parts(x: &[f64]) -> (Vec<f64>, f64) {
    let n = x.len() as f64;
    let sum: f64 = x.iter().sum();
    let t: Vec<f64> = x.iter().map(|&v| n * v - sum).collect();
    let den = t.iter().map(|&v| v * v).sum();
    (t, den)
}

/// Global Moran's I with a one-sided upper permutation test. Permutation
/// streams depend only on (seed, index), so the p-value is reproducible and
/// order-independent.
pub fn morans_i(
    x: &DVector<f64>,
    w: &SpatialWeights,
    permutations: usize,
    seed: u64,
) -> Result<DiagnosticResult> {
    let n = w.n();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    if permutations < 99 {
        return Err(Error::InvalidInput(format!(
            "need at least 99 permutations, got {permutations}"
        )));
    }
    let (t, den) = moran_ratio_parts(x.as_slice());
    if den == 0.0 {
        return Err(Error::ConstantColumn("moran input".into()));
    }
    let s0 = w.s0();
    if s0 == 0.0 {
        return Err(Error::EmptyWeights);
    }
    let scale = n as f64 / (s0 * den);
    let cross = |v: &[f64]| -> Result<f64> {
        let lag = w.spatial_lag_slice(v)?;
        Ok(v.iter().zip(&lag).map(|(a, b)| a * b).sum())
    };

    let observed_cross = cross(&t)?;
    let statistic = scale * observed_cross;

    let mut at_least = 0usize;
    let mut perm = t.clone();
    for idx in 0..permutations {
        let mut rng = stream(seed, idx as u64 + 1);
        perm.copy_from_slice(&t);
        perm.shuffle(&mut rng);
        // scale > 0, so comparing cross terms orders the same as the I's.
        if cross(&perm)? >= observed_cross {
            at_least += 1;
        }
    }
    let p_value = (1.0 + at_least as f64) / (1.0 + permutations as f64);

    Ok(DiagnosticResult {
        method: DiagnosticMethod::MoranPermutation,
        statistic,
        null_expectation: -1.0 / (n as f64 - 1.0),
        p_value,
        permutations: Some(permutations),
        seed: Some(seed),
    })
}

/// LM lag score test on OLS residuals:
/// [e'Wy / s2]^2 / { (W y_hat)' M (W y_hat) / s2 + T } with T = tr(W'W + WW).
pub fn lm_lag_test(
    ols: &OlsFit,
    w: &SpatialWeights,
    y: &DVector<f64>,
    z: &DMatrix<f64>,
) -> Result<DiagnosticResult> {
    if w.n() != ols.n || y.len() != ols.n || z.nrows() != ols.n {
        return Err(Error::DimensionMismatch {
            expected: w.n(),
            got: ols.n,
        });
    }
    let e = &ols.residuals;
    let wy = w.spatial_lag(y)?;
    let score = e.dot(&wy) / ols.sigma2;

    let y_hat = z * &ols.coefficients;
    let w_y_hat = w.spatial_lag(&y_hat)?;
    // M projects off the column space of Z, so M(Wy_hat) is the residual of
    // regressing Wy_hat on Z and the quadratic form is its squared norm.
    let (_, m_w_y_hat) = lstsq(z, &w_y_hat)?;
    let denom = m_w_y_hat.norm_squared() / ols.sigma2 + w.trace_pair();
    if denom <= 0.0 {
        return Err(Error::Numerical(
            "degenerate LM-lag denominator (weights carry no information)".into(),
        ));
    }
    let statistic = score * score / denom;
    Ok(DiagnosticResult {
        method: DiagnosticMethod::LmLag,
        statistic,
        null_expectation: 1.0,
        p_value: chi2_sf(statistic, 1.0),
        permutations: None,
        seed: None,
    })
}

/// LM error score test on OLS residuals: [e'We / s2]^2 / T.
pub fn lm_error_test(ols: &OlsFit, w: &SpatialWeights) -> Result<DiagnosticResult> {
    if w.n() != ols.n {
        return Err(Error::DimensionMismatch {
            expected: w.n(),
            got: ols.n,
        });
    }
    let e = &ols.residuals;
    let we = w.spatial_lag(e)?;
    let score = e.dot(&we) / ols.sigma2;
    let t = w.trace_pair();
    if t <= 0.0 {
        return Err(Error::Numerical(
            "degenerate LM-error denominator (weights carry no information)".into(),
        ));
    }
    let statistic = score * score / t;
    Ok(DiagnosticResult {
        method: DiagnosticMethod::LmError,
        statistic,
        null_expectation: 1.0,
        p_value: chi2_sf(statistic, 1.0),
        permutations: None,
        seed: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    Ols,
    Sdm,
    Sdem,
}

impl ModelChoice {
    /// Sdem is a recommendation only; the estimator is not implemented.
    pub fn warning(self) -> Option<&'static str> {
        match self {
            ModelChoice::Sdem => Some(
                "spatial error model recommended by the diagnostics but not \
                 supported by this engine; interpret lag-family output with care",
            ),
            _ => None,
        }
    }
}

impl std::fmt::Display for ModelChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelChoice::Ols => "ols",
            ModelChoice::Sdm => "sdm",
            ModelChoice::Sdem => "sdem",
        })
    }
}

/// Decision rule: a significant lag test always selects the lag family; a
/// significant error test alone points at the (unsupported) error family.
pub fn select_model(lm_lag: &DiagnosticResult, lm_error: &DiagnosticResult, alpha: f64) -> ModelChoice {
    let lag_sig = lm_lag.p_value < alpha;
    let err_sig = lm_error.p_value < alpha;
    match (lag_sig, err_sig) {
        (true, _) => ModelChoice::Sdm,
        (false, true) => ModelChoice::Sdem,
        (false, false) => ModelChoice::Ols,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::Adjacency;
    use crate::rng::stream;
    use crate::simulate::{lattice_adjacency, simulate_sdm, standard_normal_matrix, standard_normal_vector};
    use crate::weights::build_weights;
    use approx::assert_relative_eq;

    fn path3_weights() -> SpatialWeights {
        build_weights(&Adjacency::from_edges(3, [(0, 1), (1, 2)])).unwrap()
    }

    fn design_with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = DMatrix::zeros(x.nrows(), x.ncols() + 1);
        z.column_mut(0).fill(1.0);
        z.view_mut((0, 1), (x.nrows(), x.ncols())).copy_from(x);
        z
    }

    #[test]
    fn ols_exact_line() {
        let x = DMatrix::from_column_slice(5, 1, &[0.0, 1.0, 2.0, 3.0, 4.0]);
        let z = design_with_intercept(&x);
        let y = DVector::from_vec(vec![0.0, 2.0, 4.0, 6.0, 8.0]);
        let fit = ols_fit(&y, &z).unwrap();
        assert_relative_eq!(fit.coefficients[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(fit.coefficients[1], 2.0, epsilon = 1e-12);
        for e in fit.residuals.iter() {
            assert_relative_eq!(*e, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ols_matches_normal_equations() {
        let mut rng = stream(42, 0);
        let x = standard_normal_matrix(10, 2, &mut rng);
        let z = design_with_intercept(&x);
        let y = standard_normal_vector(10, &mut rng);
        let fit = ols_fit(&y, &z).unwrap();

        let ztz = z.transpose() * &z;
        let beta = ztz.lu().solve(&(z.transpose() * &y)).unwrap();
        for i in 0..3 {
            assert_relative_eq!(fit.coefficients[i], beta[i], epsilon = 1e-10);
        }
        // Normal equations: design orthogonal to residuals.
        let zt_e = z.transpose() * &fit.residuals;
        for v in zt_e.iter() {
            assert_relative_eq!(*v, 0.0, epsilon = 1e-8);
        }
        assert_relative_eq!(fit.aic, 2.0 * 4.0 - 2.0 * fit.loglik, epsilon = 1e-12);
    }

    #[test]
    fn ols_profile_loglik_is_maximized_at_fit() {
        let mut rng = stream(7, 0);
        let x = standard_normal_matrix(40, 2, &mut rng);
        let z = design_with_intercept(&x);
        let y = standard_normal_vector(40, &mut rng);
        let fit = ols_fit(&y, &z).unwrap();
        for _ in 0..100 {
            let noise = standard_normal_vector(3, &mut rng);
            let beta = &fit.coefficients + 0.05 * noise;
            let e = &y - &z * beta;
            let ll = gaussian_profile_loglik(40, e.norm_squared());
            assert!(ll <= fit.loglik + 1e-12);
        }
    }

    #[test]
    fn moran_checkerboard_is_exactly_minus_one() {
        let w = path3_weights();
        let x = DVector::from_vec(vec![1.0, -1.0, 1.0]);
        let d = morans_i(&x, &w, 99, 1).unwrap();
        assert_eq!(d.statistic, -1.0);
        assert_eq!(d.null_expectation, -0.5);
    }

    #[test]
    fn moran_affine_invariance() {
        let w = build_weights(&lattice_adjacency(5, 5)).unwrap();
        let mut rng = stream(3, 0);
        let x = standard_normal_vector(25, &mut rng);
        let base = morans_i(&x, &w, 99, 9).unwrap();
        for (a, b) in [(7.25, -3.0), (-0.125, 11.0), (1e6, 1e-6)] {
            let y = x.map(|v| a * v + b);
            let d = morans_i(&y, &w, 99, 9).unwrap();
            assert_relative_eq!(d.statistic, base.statistic, epsilon = 1e-12);
            assert_eq!(d.p_value, base.p_value);
        }
    }

    #[test]
    fn moran_null_mean_matches_expectation() {
        let w = build_weights(&lattice_adjacency(7, 11)).unwrap();
        let mut sum = 0.0;
        let draws = 500;
        for s in 0..draws {
            let mut rng = stream(1000 + s, 0);
            let x = standard_normal_vector(77, &mut rng);
            sum += morans_i(&x, &w, 99, 0).unwrap().statistic;
        }
        let mean = sum / draws as f64;
        assert!(
            (mean - (-1.0 / 76.0)).abs() < 0.01,
            "mean I = {mean}, expected about {}",
            -1.0 / 76.0
        );
    }

    #[test]
    fn moran_permutation_p_reproducible_and_well_formed() {
        let w = build_weights(&lattice_adjacency(4, 4)).unwrap();
        let mut rng = stream(8, 0);
        let x = standard_normal_vector(16, &mut rng);
        let a = morans_i(&x, &w, 999, 77).unwrap();
        let b = morans_i(&x, &w, 999, 77).unwrap();
        assert_eq!(a.statistic, b.statistic);
        assert_eq!(a.p_value, b.p_value);
        assert!(a.p_value > 0.0 && a.p_value <= 1.0);
        let count = a.p_value * 1000.0 - 1.0;
        assert_relative_eq!(count, count.round(), epsilon = 1e-9);
    }

    #[test]
    fn moran_rejects_constant_and_few_permutations() {
        let w = path3_weights();
        let c = DVector::from_element(3, 2.0);
        assert!(matches!(
            morans_i(&c, &w, 99, 0),
            Err(Error::ConstantColumn(_))
        ));
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!(matches!(
            morans_i(&x, &w, 50, 0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn lm_error_zero_when_residuals_orthogonal_to_lag() {
        // Intercept-only residuals (1, 0, -1) on the path graph have lag
        // (0, 0, 0), so the score is exactly zero.
        let w = path3_weights();
        let y = DVector::from_vec(vec![6.0, 5.0, 4.0]);
        let z = DMatrix::from_element(3, 1, 1.0);
        let fit = ols_fit(&y, &z).unwrap();
        let d = lm_error_test(&fit, &w).unwrap();
        assert_eq!(d.statistic, 0.0);
        assert_eq!(d.p_value, 1.0);
    }

    #[test]
    fn lm_statistics_nonnegative_on_random_data() {
        let w = build_weights(&lattice_adjacency(5, 6)).unwrap();
        for s in 0..50 {
            let mut rng = stream(300 + s, 0);
            let x = standard_normal_matrix(30, 2, &mut rng);
            let z = design_with_intercept(&x);
            let y = standard_normal_vector(30, &mut rng);
            let fit = ols_fit(&y, &z).unwrap();
            let lag = lm_lag_test(&fit, &w, &y, &z).unwrap();
            let err = lm_error_test(&fit, &w).unwrap();
            assert!(lag.statistic >= 0.0);
            assert!(err.statistic >= 0.0);
            assert!(lag.p_value > 0.0 && lag.p_value <= 1.0);
            assert!(err.p_value > 0.0 && err.p_value <= 1.0);
        }
    }

    #[test]
    fn lm_lag_detects_strong_spatial_lag() {
        let w = build_weights(&lattice_adjacency(10, 10)).unwrap();
        let mut hits = 0;
        for s in 0..10 {
            let mut rng = stream(900 + s, 0);
            let x = standard_normal_matrix(100, 2, &mut rng);
            let y = simulate_sdm(&w, &x, &[], &[0.5, 1.0, -0.5], 0.6, 0.5, &mut rng).unwrap();
            let z = design_with_intercept(&x);
            let fit = ols_fit(&y, &z).unwrap();
            if lm_lag_test(&fit, &w, &y, &z).unwrap().p_value < 0.05 {
                hits += 1;
            }
        }
        assert!(hits >= 9, "LM-lag fired only {hits}/10 times at rho = 0.6");
    }

    #[test]
    fn select_model_rule_table() {
        let diag = |method, p| DiagnosticResult {
            method,
            statistic: 1.0,
            null_expectation: 1.0,
            p_value: p,
            permutations: None,
            seed: None,
        };
        let lag_sig = diag(DiagnosticMethod::LmLag, 0.001);
        let lag_ns = diag(DiagnosticMethod::LmLag, 0.30);
        let err_sig = diag(DiagnosticMethod::LmError, 0.001);
        let err_ns = diag(DiagnosticMethod::LmError, 0.60);

        assert_eq!(select_model(&lag_sig, &err_sig, 0.05), ModelChoice::Sdm);
        assert_eq!(select_model(&lag_sig, &err_ns, 0.05), ModelChoice::Sdm);
        assert_eq!(select_model(&lag_ns, &err_sig, 0.05), ModelChoice::Sdem);
        assert_eq!(select_model(&lag_ns, &err_ns, 0.05), ModelChoice::Ols);
        assert!(ModelChoice::Sdem.warning().is_some());
        assert!(ModelChoice::Sdm.warning().is_none());
    }
}
