//! Row-standardized spatial weight matrices with a cached spectrum.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geo::Adjacency;
use crate::linalg::symmetric_eigen_sorted;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    RowStandardized,
    Binary,
}

/// Real eigenvalues of W, sorted ascending. Available whenever W was built
/// by row-standardizing a symmetric adjacency: W = D^-1 A is then similar to
/// the symmetric D^-1/2 A D^-1/2, so the spectrum is real.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl Spectrum {
    fn from_adjacency(adj: &Adjacency) -> Spectrum {
        let n = adj.n();
        let mut sim = DMatrix::zeros(n, n);
        let scale: Vec<f64> = (0..n)
            .map(|i| 1.0 / (adj.degree(i).max(1) as f64).sqrt())
            .collect();
        for i in 0..n {
            for &j in adj.neighbors(i) {
                sim[(i, j)] = scale[i] * scale[j];
            }
        }
        let (eigenvalues, _) = symmetric_eigen_sorted(&sim);
        let lambda_min = eigenvalues[0];
        let lambda_max = eigenvalues[n - 1];
        Spectrum {
            eigenvalues,
            lambda_min,
            lambda_max,
        }
    }

    /// Open interval of rho where I - rho*W stays nonsingular with a
    /// positive determinant.
    pub fn admissible_rho(&self) -> (f64, f64) {
        let lo = if self.lambda_min < -1e-12 {
            1.0 / self.lambda_min
        } else {
            f64::NEG_INFINITY
        };
        let hi = if self.lambda_max > 1e-12 {
            1.0 / self.lambda_max
        } else {
            f64::INFINITY
        };
        (lo, hi)
    }
}

/// Sparse n x n spatial weight matrix, rows indexed like the region.
#[derive(Debug, Clone)]
pub struct SpatialWeights {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
    row_kind: RowKind,
    spectrum: Option<Spectrum>,
}

/// Row-standardize a symmetric adjacency: w_ij = 1/deg(i) for each neighbor
/// j. Isolated areas keep an all-zero row.
pub fn build_weights(adj: &Adjacency) -> Result<SpatialWeights> {
    if adj.n() == 0 {
        return Err(Error::EmptyWeights);
    }
    let rows = (0..adj.n())
        .map(|i| {
            let deg = adj.degree(i);
            adj.neighbors(i)
                .iter()
                .map(|&j| (j, 1.0 / deg as f64))
                .collect()
        })
        .collect();
    Ok(SpatialWeights {
        n: adj.n(),
        rows,
        row_kind: RowKind::RowStandardized,
        spectrum: Some(Spectrum::from_adjacency(adj)),
    })
}

impl SpatialWeights {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row_kind(&self) -> RowKind {
        self.row_kind
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn spectrum(&self) -> Option<&Spectrum> {
        self.spectrum.as_ref()
    }

    /// Sum of all weights; equals n for a row-standardized matrix with no
    /// isolated areas.
    pub fn s0(&self) -> f64 {
        self.rows.iter().flatten().map(|&(_, w)| w).sum()
    }

    pub fn nonzero_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Row sums (1 for every non-isolated row of a standardized matrix).
    pub fn row_sums(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(_, w)| w).sum())
            .collect()
    }

    pub fn isolated(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.rows[i].is_empty()).collect()
    }

    /// (Wx)_i: the weighted neighbor average of x at i; 0 for isolated rows.
    pub fn spatial_lag(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(DVector::from_iterator(
            self.n,
            self.rows
                .iter()
                .map(|row| row.iter().map(|&(j, w)| w * x[j]).sum()),
        ))
    }

    pub fn spatial_lag_slice(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(self
            .rows
            .iter()
            .map(|row| row.iter().map(|&(j, w)| w * x[j]).sum())
            .collect())
    }

    /// ln|I - rho W| via the cached spectrum.
    pub fn log_det(&self, rho: f64) -> Result<f64> {
        let spectrum = self.spectrum.as_ref().ok_or(Error::MissingSpectrum)?;
        let (lo, hi) = spectrum.admissible_rho();
        if !(rho > lo && rho < hi) {
            return Err(Error::RhoOutOfRange { rho, lo, hi });
        }
        Ok(spectrum
            .eigenvalues
            .iter()
            .map(|&lam| (1.0 - rho * lam).ln())
            .sum())
    }

    /// tr(W'W + W W); the "T" term of the LM diagnostics.
    pub fn trace_pair(&self) -> f64 {
        let mut t = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                t += w * w + w * self.weight_at(j, i);
            }
        }
        t
    }

    fn weight_at(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |&(col, _)| col)
            .map(|k| self.rows[i][k].1)
            .unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                m[(i, j)] = w;
            }
        }
        m
    }

    /// Stable identifier of the matrix content, recorded in fit reports.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.n.hash(&mut h);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                i.hash(&mut h);
                j.hash(&mut h);
                w.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }

    /// Sparse triplet export: a `# n=...` header comment, then `i,j,w`
    /// records with full round-trip precision.
    pub fn write_triplet_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# n={}", self.n)?;
        writeln!(out, "i,j,w")?;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                writeln!(out, "{i},{j},{w}")?;
            }
        }
        Ok(())
    }

    /// Inverse of [`write_triplet_csv`]. The spectrum is recomputed from the
    /// support pattern when it is symmetric.
    pub fn read_triplet_csv<R: Read>(input: R) -> Result<SpatialWeights> {
        let reader = BufReader::new(input);
        let mut n: Option<usize> = None;
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (ln, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line == "i,j,w" {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                for kv in rest.split_whitespace() {
                    if let Some(v) = kv.strip_prefix("n=") {
                        n = Some(v.parse().map_err(|_| Error::CsvRow {
                            row: ln as u64 + 1,
                            message: format!("bad n in header: {v}"),
                        })?);
                    }
                }
                continue;
            }
            let mut parts = line.split(',');
            let bad = || Error::CsvRow {
                row: ln as u64 + 1,
                message: format!("expected i,j,w: {line}"),
            };
            let i: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let j: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let w: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            entries.push((i, j, w));
        }
        let n = n.ok_or_else(|| Error::Csv("triplet csv missing `# n=` header".into()))?;
        if n == 0 {
            return Err(Error::EmptyWeights);
        }
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, j, w) in entries {
            if i >= n || j >= n {
                return Err(Error::Csv(format!("triplet index ({i},{j}) out of range for n={n}")));
            }
            rows[i].push((j, w));
        }
        for row in &mut rows {
            row.sort_unstable_by_key(|&(j, _)| j);
        }

        let sums: Vec<f64> = rows
            .iter()
            .map(|r| r.iter().map(|&(_, w)| w).sum())
            .collect();
        let standardized = sums
            .iter()
            .all(|&s| s == 0.0 || (s - 1.0).abs() <= 1e-12);
        let row_kind = if standardized {
            RowKind::RowStandardized
        } else {
            RowKind::Binary
        };

        let symmetric_support = (0..n).all(|i| {
            rows[i].iter().all(|&(j, _)| {
                rows[j]
                    .binary_search_by_key(&i, |&(col, _)| col)
                    .is_ok()
            })
        });
        let spectrum = if symmetric_support && standardized {
            let adj = Adjacency::from_edges(
                n,
                rows.iter()
                    .enumerate()
                    .flat_map(|(i, row)| row.iter().map(move |&(j, _)| (i, j)))
                    .collect::<Vec<_>>(),
            );
            Some(Spectrum::from_adjacency(&adj))
        } else {
            None
        };

        Ok(SpatialWeights {
            n,
            rows,
            row_kind,
            spectrum,
        })
    }
}
