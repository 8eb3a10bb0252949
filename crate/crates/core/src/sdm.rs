//! Maximum-likelihood estimation of the spatial Durbin model
//!
//! ```text
//! y = rho*W*y + Z*delta + eps,   Z = [1, X, W*X_lagged]
//! ```
//!
//! The spatial coefficient is found by maximizing the concentrated
//! log-likelihood over the admissible interval (grid scan plus golden-section
//! refinement); the log-determinant term comes from the cached spectrum of W,
//! which is exact and cheap at the scale this engine targets.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::econometrics::gaussian_profile_loglik;
use crate::error::{Error, Result};
use crate::ingest::{AreaPanel, Dependent};
use crate::linalg::{inverse_with_ridge, lstsq};
use crate::weights::SpatialWeights;

fn default_true() -> bool {
    true
}

/// Which column is the dependent and which covariates enter, with the
/// subset that also appears spatially lagged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub dependent: String,
    pub covariates: Vec<String>,
    #[serde(default)]
    pub lagged: Vec<String>,
    #[serde(default = "default_true")]
    pub include_intercept: bool,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.include_intercept {
            return Err(Error::InvalidInput(
                "the estimator requires an intercept".into(),
            ));
        }
        for lag in &self.lagged {
            if !self.covariates.contains(lag) {
                return Err(Error::InvalidInput(format!(
                    "lagged column `{lag}` is not among the model covariates"
                )));
            }
        }
        Ok(())
    }
}

/// Fitted spatial Durbin model. `param_cov` rows/columns are ordered
/// intercept, covariates, lagged terms, rho.
#[derive(Debug, Clone)]
pub struct SdmFit {
    pub rho: f64,
    pub beta: Vec<(String, f64)>,
    pub gamma: Vec<(String, f64)>,
    pub sigma2: f64,
    pub loglik: f64,
    pub aic: f64,
    pub pseudo_r2_nagelkerke: f64,
    pub param_cov: DMatrix<f64>,
    pub n: usize,
    pub spec: ModelSpec,
    pub w_fingerprint: u64,
    pub residuals: DVector<f64>,
}

impl SdmFit {
    /// Mean-equation coefficients followed by rho; matches `param_cov`.
    pub fn theta(&self) -> Vec<f64> {
        self.beta
            .iter()
            .chain(&self.gamma)
            .map(|&(_, v)| v)
            .chain(std::iter::once(self.rho))
            .collect()
    }

    pub fn std_errors(&self) -> Vec<f64> {
        (0..self.param_cov.nrows())
            .map(|i| self.param_cov[(i, i)].max(0.0).sqrt())
            .collect()
    }
}

/// Z = [1, X, W*X_lagged] with lagged columns given by index into X.
pub fn build_design(x: &DMatrix<f64>, lagged: &[usize], w: &SpatialWeights) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    if w.n() != n {
        return Err(Error::DimensionMismatch {
            expected: w.n(),
            got: n,
        });
    }
    if let Some(&bad) = lagged.iter().find(|&&c| c >= x.ncols()) {
        return Err(Error::InvalidInput(format!(
            "lagged column {bad} out of range for {} covariates",
            x.ncols()
        )));
    }
    let k = x.ncols();
    let mut z = DMatrix::zeros(n, 1 + k + lagged.len());
    z.column_mut(0).fill(1.0);
    z.view_mut((0, 1), (n, k)).copy_from(x);
    for (j, &c) in lagged.iter().enumerate() {
        let wx = w.spatial_lag(&x.column(c).into_owned())?;
        z.set_column(1 + k + j, &wx);
    }
    Ok(z)
}

/// Residual pair that concentrates delta and sigma^2 out of the likelihood:
/// the SSR at any rho is ||e0 - rho*eL||^2.
struct Concentrated {
    n: usize,
    e0: DVector<f64>,
    el: DVector<f64>,
}

impl Concentrated {
    fn new(y: &DVector<f64>, z: &DMatrix<f64>, w: &SpatialWeights) -> Result<Concentrated> {
        let wy = w.spatial_lag(y)?;
        let (_, e0) = lstsq(z, y)?;
        let (_, el) = lstsq(z, &wy)?;
        Ok(Concentrated {
            n: y.len(),
            e0,
            el,
        })
    }

    fn loglik(&self, rho: f64, w: &SpatialWeights) -> Result<f64> {
        let log_det = w.log_det(rho)?;
        let d = &self.e0 - rho * &self.el;
        Ok(gaussian_profile_loglik(self.n, d.norm_squared()) + log_det)
    }
}

/// Concentrated log-likelihood of the model at `rho` for y on the augmented
/// design Z (which must already include intercept and lag columns).
pub fn concentrated_loglik(
    rho: f64,
    y: &DVector<f64>,
    z: &DMatrix<f64>,
    w: &SpatialWeights,
) -> Result<f64> {
    Concentrated::new(y, z, w)?.loglik(rho, w)
}

/// Nagelkerke pseudo R^2 against an intercept-only non-spatial null.
pub fn nagelkerke_pseudo_r2(loglik: f64, null_loglik: f64, n: usize) -> f64 {
    let n = n as f64;
    let num = 1.0 - ((2.0 / n) * (null_loglik - loglik)).exp();
    let den = 1.0 - ((2.0 / n) * null_loglik).exp();
    num / den
}

fn golden_max<F>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    const INV: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV * (b - a);
    let mut d = a + INV * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, f(x)?))
}

/// Replace column indices in a rank-deficiency error with design names.
fn name_rank_error(err: Error, column_names: &[String]) -> Error {
    match err {
        Error::RankDeficient(s) => {
            let named: Vec<String> = s
                .split(',')
                .filter_map(|t| t.trim().parse::<usize>().ok())
                .map(|i| {
                    column_names
                        .get(i)
                        .cloned()
                        .unwrap_or_else(|| format!("column {i}"))
                })
                .collect();
            Error::RankDeficient(named.join(", "))
        }
        other => other,
    }
}

const GRID_POINTS: usize = 256;
const RHO_TOL: f64 = 1e-8;
const BOUNDARY_MARGIN: f64 = 1e-6;

/// Fit on explicit matrices: `names` label the columns of `x`, `lagged`
/// indexes into them.
pub fn fit_sdm_matrices(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    names: &[String],
    lagged: &[usize],
    w: &SpatialWeights,
) -> Result<SdmFit> {
    if names.len() != x.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            got: names.len(),
        });
    }
    let spec = ModelSpec {
        dependent: "y".into(),
        covariates: names.to_vec(),
        lagged: lagged
            .iter()
            .map(|&i| {
                names
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::InvalidInput(format!("lagged column {i} out of range")))
            })
            .collect::<Result<_>>()?,
        include_intercept: true,
    };
    fit_sdm_design(y, x, names, lagged, w, spec)
}

/// Fit the model described by `spec` on a panel. The weights must already
/// match the rows this dependent keeps (rebuild W on the subset when the
/// panel excludes zero-trip areas).
pub fn fit_sdm(panel: &AreaPanel, spec: &ModelSpec, w: &SpatialWeights) -> Result<SdmFit> {
    spec.validate()?;
    let dep: Dependent = spec.dependent.parse()?;
    let design = panel.design(dep, &spec.covariates, &spec.lagged)?;
    if w.n() != design.y.len() {
        return Err(Error::DimensionMismatch {
            expected: design.y.len(),
            got: w.n(),
        });
    }
    fit_sdm_design(
        &design.y,
        &design.x,
        &design.names,
        &design.lagged,
        w,
        spec.clone(),
    )
}

fn fit_sdm_design(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    names: &[String],
    lagged: &[usize],
    w: &SpatialWeights,
    spec: ModelSpec,
) -> Result<SdmFit> {
    let n = y.len();
    if x.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.nrows(),
        });
    }
    if w.s0() == 0.0 {
        return Err(Error::EmptyWeights);
    }
    let z = build_design(x, lagged, w)?;
    let p = z.ncols();
    if n <= p + 1 {
        return Err(Error::InvalidInput(format!(
            "need more observations than parameters: n = {n}, parameters = {}",
            p + 1
        )));
    }
    let mut column_names: Vec<String> = Vec::with_capacity(p);
    column_names.push("intercept".into());
    column_names.extend(names.iter().cloned());
    column_names.extend(lagged.iter().map(|&i| format!("W_{}", names[i])));

    let conc =
        Concentrated::new(y, &z, w).map_err(|e| name_rank_error(e, &column_names))?;
    let spectrum = w.spectrum().ok_or(Error::MissingSpectrum)?;
    let (lo, hi) = spectrum.admissible_rho();
    let glo = lo + BOUNDARY_MARGIN;
    let ghi = hi - BOUNDARY_MARGIN;
    if !(glo < ghi) {
        return Err(Error::Numerical(format!(
            "admissible rho interval ({lo}, {hi}) too narrow to search"
        )));
    }

    let step = (ghi - glo) / (GRID_POINTS - 1) as f64;
    let mut best_idx = 0usize;
    let mut best_val = f64::NEG_INFINITY;
    for i in 0..GRID_POINTS {
        let rho = glo + step * i as f64;
        let val = conc.loglik(rho, w)?;
        if val > best_val {
            best_val = val;
            best_idx = i;
        }
    }
    let bracket_lo = glo + step * best_idx.saturating_sub(1) as f64;
    let bracket_hi = glo + step * (best_idx + 1).min(GRID_POINTS - 1) as f64;
    let (rho, loglik) = golden_max(|r| conc.loglik(r, w), bracket_lo, bracket_hi, RHO_TOL)?;
    if rho - glo < BOUNDARY_MARGIN || ghi - rho < BOUNDARY_MARGIN {
        return Err(Error::BoundaryMaximizer(rho));
    }

    let wy = w.spatial_lag(y)?;
    let target = y - rho * &wy;
    let (delta, residuals) =
        lstsq(&z, &target).map_err(|e| name_rank_error(e, &column_names))?;
    let sigma2 = residuals.norm_squared() / n as f64;

    let param_cov = fd_hessian_cov(&delta, rho, y, &z, &wy, w, (lo, hi))?;

    let centered = y - DVector::from_element(n, y.mean());
    let null_loglik = gaussian_profile_loglik(n, centered.norm_squared());
    let pseudo_r2 = nagelkerke_pseudo_r2(loglik, null_loglik, n);

    let k = x.ncols();
    let beta = std::iter::once(("intercept".to_owned(), delta[0]))
        .chain((0..k).map(|i| (names[i].clone(), delta[1 + i])))
        .collect();
    let gamma = lagged
        .iter()
        .enumerate()
        .map(|(j, &c)| (names[c].clone(), delta[1 + k + j]))
        .collect();

    // p mean parameters plus rho plus sigma^2.
    let aic = 2.0 * (p as f64 + 2.0) - 2.0 * loglik;

    Ok(SdmFit {
        rho,
        beta,
        gamma,
        sigma2,
        loglik,
        aic,
        pseudo_r2_nagelkerke: pseudo_r2,
        param_cov,
        n,
        spec,
        w_fingerprint: w.fingerprint(),
        residuals,
    })
}

/// Covariance of (delta, rho) from a central finite-difference Hessian of
/// the sigma^2-profiled log-likelihood.
fn fd_hessian_cov(
    delta: &DVector<f64>,
    rho: f64,
    y: &DVector<f64>,
    z: &DMatrix<f64>,
    wy: &DVector<f64>,
    w: &SpatialWeights,
    (lo, hi): (f64, f64),
) -> Result<DMatrix<f64>> {
    let p = z.ncols();
    let dim = p + 1;
    let mut theta = DVector::zeros(dim);
    theta.rows_mut(0, p).copy_from(delta);
    theta[p] = rho;

    let f = |t: &DVector<f64>| -> Result<f64> {
        let r = t[p];
        let log_det = w.log_det(r)?;
        let resid = y - r * wy - z * t.rows(0, p);
        Ok(gaussian_profile_loglik(y.len(), resid.norm_squared()) + log_det)
    };

    let mut h = DVector::zeros(dim);
    for i in 0..dim {
        h[i] = 1e-5 * theta[i].abs().max(1.0);
    }
    // Keep rho perturbations strictly inside the admissible interval.
    h[p] = h[p].min((hi - rho) / 4.0).min((rho - lo) / 4.0);
    if h[p] <= 0.0 {
        return Err(Error::BoundaryMaximizer(rho));
    }

    let f0 = f(&theta)?;
    let mut hess = DMatrix::zeros(dim, dim);
    let mut probe = theta.clone();
    for i in 0..dim {
        probe.copy_from(&theta);
        probe[i] = theta[i] + h[i];
        let fp = f(&probe)?;
        probe[i] = theta[i] - h[i];
        let fm = f(&probe)?;
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
    }
    for i in 0..dim {
        for j in (i + 1)..dim {
            probe.copy_from(&theta);
            probe[i] = theta[i] + h[i];
            probe[j] = theta[j] + h[j];
            let fpp = f(&probe)?;
            probe[j] = theta[j] - h[j];
            let fpm = f(&probe)?;
            probe[i] = theta[i] - h[i];
            probe[j] = theta[j] + h[j];
            let fmp = f(&probe)?;
            probe[j] = theta[j] - h[j];
            let fmm = f(&probe)?;
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }

    let neg = -hess;
    let scale = (0..dim).map(|i| neg[(i, i)].abs()).fold(1.0f64, f64::max);
    let (inv, _) = inverse_with_ridge(&neg, 1e-10 * scale)?;
    Ok((&inv + inv.transpose()) * 0.5)
}

/// Recompute e = (I - rho*W)y - Z*theta from a stored fit and the panel it
/// was estimated on.
pub fn sdm_residuals(fit: &SdmFit, panel: &AreaPanel, w: &SpatialWeights) -> Result<DVector<f64>> {
    let dep: Dependent = fit.spec.dependent.parse()?;
    let design = panel.design(dep, &fit.spec.covariates, &fit.spec.lagged)?;
    if w.n() != design.y.len() {
        return Err(Error::DimensionMismatch {
            expected: design.y.len(),
            got: w.n(),
        });
    }
    let z = build_design(&design.x, &design.lagged, w)?;
    let mut theta = DVector::zeros(z.ncols());
    for (i, &(_, v)) in fit.beta.iter().chain(&fit.gamma).enumerate() {
        theta[i] = v;
    }
    let wy = w.spatial_lag(&design.y)?;
    Ok(&design.y - fit.rho * wy - z * theta)
}
