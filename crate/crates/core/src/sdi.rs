//! Single-factor exploratory factor analysis over a panel of deprivation
//! indicators, producing a per-area disadvantage score plus Cronbach's
//! alpha reliability.
//!
//! Extraction is iterated principal-axis factoring on the item correlation
//! matrix; scores use the regression (Thomson) method. Items loading below
//! 0.30 in absolute value are flagged but kept, so dropping stays a caller
//! decision.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen_sorted;
use crate::stats::sample_variance;

pub const LOADING_FLAG_THRESHOLD: f64 = 0.30;
const COMMUNALITY_TOL: f64 = 1e-6;
const MAX_ITERATIONS: usize = 200;
const CORRELATION_RIDGE: f64 = 1e-8;

/// Areas by items, fully observed.
#[derive(Debug, Clone)]
pub struct ItemMatrix {
    names: Vec<String>,
    data: DMatrix<f64>,
}

impl ItemMatrix {
    pub fn new(names: Vec<String>, data: DMatrix<f64>) -> Result<ItemMatrix> {
        if names.len() != data.ncols() {
            return Err(Error::DimensionMismatch {
                expected: data.ncols(),
                got: names.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "item matrix contains non-finite cells".into(),
            ));
        }
        Ok(ItemMatrix { names, data })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn k(&self) -> usize {
        self.data.ncols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.data.column(j).iter().copied().collect()
    }

    /// Copy without the named items, for drop-and-refit after flag review.
    pub fn without(&self, drop: &[String]) -> Result<ItemMatrix> {
        for d in drop {
            if !self.names.contains(d) {
                return Err(Error::UnknownCovariate(d.clone()));
            }
        }
        let keep: Vec<usize> = (0..self.k())
            .filter(|&j| !drop.contains(&self.names[j]))
            .collect();
        if keep.is_empty() {
            return Err(Error::InvalidInput("dropping every item".into()));
        }
        let names = keep.iter().map(|&j| self.names[j].clone()).collect();
        let cols: Vec<_> = keep.iter().map(|&j| self.data.column(j)).collect();
        Ok(ItemMatrix {
            names,
            data: DMatrix::from_columns(&cols),
        })
    }
}

/// Column-wise z-scores (sample sd, n - 1 denominator).
pub fn standardize(items: &ItemMatrix) -> Result<ItemMatrix> {
    let n = items.n();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 rows to standardize, got {n}"
        )));
    }
    let mut data = items.data.clone();
    for j in 0..items.k() {
        let col = items.column(j);
        let sd = sample_variance(&col).sqrt();
        if sd == 0.0 {
            return Err(Error::ConstantColumn(items.names[j].clone()));
        }
        let m = crate::stats::mean(&col);
        for i in 0..n {
            data[(i, j)] = (data[(i, j)] - m) / sd;
        }
    }
    Ok(ItemMatrix {
        names: items.names.clone(),
        data,
    })
}

/// Correlation matrix of already-standardized columns: Z'Z / (n - 1).
fn correlation(z: &DMatrix<f64>) -> DMatrix<f64> {
    (z.transpose() * z) / (z.nrows() as f64 - 1.0)
}

/// Eigenvalue-space inverse of a symmetric PSD matrix, adding the ridge to
/// every eigenvalue when the smallest is at or below it. An LU inverse of a
/// barely-ridged rank-deficient correlation matrix loses the small
/// eigencomponents to cancellation; inverting per eigenvalue does not.
fn symmetric_inverse_with_ridge(m: &DMatrix<f64>, ridge: f64) -> (DMatrix<f64>, bool) {
    let (vals, vecs) = symmetric_eigen_sorted(m);
    let ridged = vals[0] <= ridge;
    let inverted: Vec<f64> = vals
        .iter()
        .map(|&d| 1.0 / if ridged { d.max(0.0) + ridge } else { d })
        .collect();
    let scaled = &vecs * DMatrix::from_diagonal(&DVector::from_vec(inverted));
    (scaled * vecs.transpose(), ridged)
}

#[derive(Debug, Clone, Serialize)]
pub struct FactorModel {
    pub item_names: Vec<String>,
    pub loadings: Vec<f64>,
    pub uniquenesses: Vec<f64>,
    /// Per-area factor scores, in input row order; mean 0.
    pub scores: Vec<f64>,
    pub alpha: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Items with |loading| below 0.30, kept in the solution.
    pub flagged: Vec<String>,
    /// The reduced correlation matrix went non-positive and the leading
    /// eigenvalue was clipped at 0 during some iteration.
    pub eigenvalue_clipped: bool,
    /// Inverting the correlation matrix needed a 1e-8 ridge.
    pub ridged_correlation: bool,
}

/// Index of the sign-anchor item: the one named like a poverty share if
/// present, otherwise the strongest loader.
fn anchor_index(names: &[String], loadings: &[f64]) -> usize {
    names
        .iter()
        .position(|n| n.to_lowercase().contains("poverty"))
        .unwrap_or_else(|| {
            loadings
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .map_or(0, |(j, _)| j)
        })
}

/// Iterated principal-axis factoring, one factor. Communalities start at
/// squared multiple correlations and are refined until they move less than
/// 1e-6, or 200 iterations pass (then `converged` is false).
pub fn fit_single_factor(items: &ItemMatrix) -> Result<FactorModel> {
    let k = items.k();
    if k < 3 {
        return Err(Error::InvalidInput(format!(
            "single-factor extraction needs at least 3 items, got {k}"
        )));
    }
    if items.n() <= k {
        return Err(Error::InvalidInput(format!(
            "need more rows than items ({} rows, {k} items)",
            items.n()
        )));
    }
    let z = standardize(items)?;
    let r = correlation(&z.data);

    let (r_inv, mut ridged) = symmetric_inverse_with_ridge(&r, CORRELATION_RIDGE);
    let mut communalities: Vec<f64> = (0..k)
        .map(|j| (1.0 - 1.0 / r_inv[(j, j)]).clamp(0.0, 1.0))
        .collect();

    let mut loadings = vec![0.0; k];
    let mut iterations = 0;
    let mut converged = false;
    let mut clipped = false;
    let mut reduced = r.clone();
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        for j in 0..k {
            reduced[(j, j)] = communalities[j];
        }
        let (vals, vecs) = symmetric_eigen_sorted(&reduced);
        let mut lambda = vals[k - 1];
        if lambda < 0.0 {
            lambda = 0.0;
            clipped = true;
        }
        let scale = lambda.sqrt();
        let v = vecs.column(k - 1);
        let mut delta = 0.0f64;
        for j in 0..k {
            loadings[j] = scale * v[j];
            let h = loadings[j] * loadings[j];
            delta = delta.max((h - communalities[j]).abs());
            communalities[j] = h;
        }
        if delta < COMMUNALITY_TOL {
            converged = true;
            break;
        }
    }

    if loadings[anchor_index(&items.names, &loadings)] < 0.0 {
        for l in &mut loadings {
            *l = -*l;
        }
    }
    let uniquenesses: Vec<f64> = loadings.iter().map(|l| (1.0 - l * l).max(0.0)).collect();
    let flagged = items
        .names
        .iter()
        .zip(&loadings)
        .filter(|(_, l)| l.abs() < LOADING_FLAG_THRESHOLD)
        .map(|(n, _)| n.clone())
        .collect();

    let mut model = FactorModel {
        item_names: items.names.clone(),
        loadings,
        uniquenesses,
        scores: Vec::new(),
        alpha: cronbach_alpha(items)?,
        iterations,
        converged,
        flagged,
        eigenvalue_clipped: clipped,
        ridged_correlation: ridged,
    };
    let (scores, score_ridged) = factor_scores(&model, items)?;
    ridged |= score_ridged;
    model.scores = scores;
    model.ridged_correlation = ridged;
    Ok(model)
}

/// alpha = k/(k-1) * (1 - sum_j var_j / var(sum_j x_j)) on standardized
/// items.
pub fn cronbach_alpha(items: &ItemMatrix) -> Result<f64> {
    let k = items.k();
    if k < 2 {
        return Err(Error::InvalidInput(format!(
            "Cronbach's alpha needs at least 2 items, got {k}"
        )));
    }
    let z = standardize(items)?;
    let n = z.n();
    let mut item_var_sum = 0.0;
    for j in 0..k {
        item_var_sum += sample_variance(&z.column(j));
    }
    let totals: Vec<f64> = (0..n).map(|i| z.data.row(i).sum()).collect();
    let total_var = sample_variance(&totals);
    if total_var == 0.0 {
        return Err(Error::InvalidInput(
            "item sum has zero variance; alpha is undefined".into(),
        ));
    }
    Ok(k as f64 / (k as f64 - 1.0) * (1.0 - item_var_sum / total_var))
}

/// Regression (Thomson) scores s = Z R^-1 lambda. The flag reports whether
/// R needed a ridge to invert.
pub fn factor_scores(model: &FactorModel, items: &ItemMatrix) -> Result<(Vec<f64>, bool)> {
    if model.loadings.len() != items.k() {
        return Err(Error::DimensionMismatch {
            expected: model.loadings.len(),
            got: items.k(),
        });
    }
    let z = standardize(items)?;
    let r = correlation(&z.data);
    let (r_inv, ridged) = symmetric_inverse_with_ridge(&r, CORRELATION_RIDGE);
    let lambda = DVector::from_column_slice(&model.loadings);
    let scores = &z.data * (r_inv * lambda);
    Ok((scores.iter().copied().collect(), ridged))
}
