//! Variance-based dimensionality reduction, refitted on every harvesting
//! iteration.
//!
//! PCA and truncated SVD share one decomposition path: the leading right
//! singular vectors of the (optionally centered) data matrix. When the matrix
//! is wide (`n <= d`, the usual case for CNN activations) they are recovered
//! from the `n x n` Gram matrix, so the `d x d` covariance is never formed.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::distance::dot;
use crate::error::{IchError, Result};

/// Eigenvalues at or below this fraction of the largest are treated as null
/// directions; their components are filled in by basis completion.
const NULL_EIGEN_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReductionKind {
    Pca,
    TruncatedSvd,
    None,
}

impl fmt::Display for ReductionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReductionKind::Pca => "pca",
            ReductionKind::TruncatedSvd => "truncated-svd",
            ReductionKind::None => "none",
        })
    }
}

/// A fitted linear projection `x -> (x - mean) * components^T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionModel {
    pub method: ReductionKind,
    pub k: usize,
    pub n_dims: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
    /// `k` orthonormal rows of width `n_dims`. Absent for the identity model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<Vec<f64>>>,
    pub explained_variance: Vec<f64>,
    /// Sum of per-dimension sample variances of the fitting data (second
    /// moments for truncated SVD), for explained-variance ratios.
    pub total_variance: f64,
}

impl ProjectionModel {
    pub fn identity(n_dims: usize) -> Self {
        ProjectionModel {
            method: ReductionKind::None,
            k: n_dims,
            n_dims,
            mean: None,
            components: None,
            explained_variance: Vec::new(),
            total_variance: 0.0,
        }
    }

    /// Fraction of total variance captured by the retained components.
    pub fn explained_ratio(&self) -> Option<f64> {
        if self.method == ReductionKind::None || self.total_variance <= 0.0 {
            return None;
        }
        Some(self.explained_variance.iter().sum::<f64>() / self.total_variance)
    }

    pub fn project(&self, data: &FeatureMatrix) -> Result<FeatureMatrix> {
        if data.n_dims() != self.n_dims {
            return Err(IchError::DimensionMismatch {
                expected: self.n_dims,
                got: data.n_dims(),
            });
        }
        let Some(components) = &self.components else {
            return Ok(data.clone());
        };
        let k = self.k;
        let mut out = vec![0.0; data.n_samples() * k];
        out.par_chunks_mut(k)
            .zip(data.values().par_chunks(self.n_dims))
            .for_each(|(dst, row)| {
                let centered: Vec<f64>;
                let row = match &self.mean {
                    Some(mean) => {
                        centered = row.iter().zip(mean).map(|(x, m)| x - m).collect();
                        &centered[..]
                    }
                    None => row,
                };
                for (slot, comp) in dst.iter_mut().zip(components) {
                    *slot = dot(row, comp);
                }
            });
        FeatureMatrix::new(data.n_samples(), k, out)
    }

    /// A copy without the (potentially very wide) mean and components, for
    /// compact logs.
    pub fn summary(&self) -> ProjectionModel {
        ProjectionModel {
            mean: None,
            components: None,
            ..self.clone()
        }
    }
}

/// A dimensionality-reduction strategy.
pub trait Reducer: Send + Sync {
    fn name(&self) -> &'static str;

    /// Fits on `data`; the effective component count is
    /// `min(k_requested, n_samples, n_dims)`.
    fn fit(&self, data: &FeatureMatrix, k_requested: usize) -> Result<ProjectionModel>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Pca;

#[derive(Debug, Default, Clone, Copy)]
pub struct TruncatedSvd;

/// Pass-through; realizes clustering directly on the ingested features.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoReduction;

impl Reducer for Pca {
    fn name(&self) -> &'static str {
        "pca"
    }

    fn fit(&self, data: &FeatureMatrix, k_requested: usize) -> Result<ProjectionModel> {
        fit_projection(data, ReductionKind::Pca, k_requested)
    }
}

impl Reducer for TruncatedSvd {
    fn name(&self) -> &'static str {
        "truncated-svd"
    }

    fn fit(&self, data: &FeatureMatrix, k_requested: usize) -> Result<ProjectionModel> {
        fit_projection(data, ReductionKind::TruncatedSvd, k_requested)
    }
}

impl Reducer for NoReduction {
    fn name(&self) -> &'static str {
        "none"
    }

    fn fit(&self, data: &FeatureMatrix, k_requested: usize) -> Result<ProjectionModel> {
        fit_projection(data, ReductionKind::None, k_requested)
    }
}

pub fn fit_projection(
    data: &FeatureMatrix,
    method: ReductionKind,
    k_requested: usize,
) -> Result<ProjectionModel> {
    let n = data.n_samples();
    let d = data.n_dims();
    if n == 0 {
        return Err(IchError::EmptyDataset);
    }
    if method == ReductionKind::None {
        return Ok(ProjectionModel::identity(d));
    }
    if k_requested == 0 {
        return Err(IchError::InvalidConfig(
            "component count must be at least 1".into(),
        ));
    }
    let k = k_requested.min(n).min(d);

    let mean = (method == ReductionKind::Pca).then(|| data.column_mean());
    let centered: Vec<f64> = match &mean {
        Some(mean) => data
            .rows()
            .flat_map(|row| row.iter().zip(mean).map(|(x, m)| x - m))
            .collect(),
        None => data.values().to_vec(),
    };
    let rows: Vec<&[f64]> = centered.chunks_exact(d).collect();

    let divisor = if n > 1 { (n - 1) as f64 } else { f64::INFINITY };
    let total_variance = centered.iter().map(|x| x * x).sum::<f64>() / divisor;

    let (eigvals, mut components) = if n <= d {
        wide_decomposition(&rows, d, k)
    } else {
        tall_decomposition(&rows, d, k)
    };

    let lambda_max = eigvals.first().copied().unwrap_or(0.0).max(0.0);
    let cutoff = lambda_max * NULL_EIGEN_RTOL;
    let mut explained_variance = Vec::with_capacity(k);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    for (lambda, comp) in eigvals.iter().zip(components.drain(..)) {
        if *lambda > cutoff && lambda_max > 0.0 {
            if let Some(v) = orthonormalize(comp, &basis) {
                explained_variance.push(*lambda / divisor);
                basis.push(v);
                continue;
            }
        }
        break;
    }
    complete_basis(&mut basis, d, k);
    explained_variance.resize(k, 0.0);
    for comp in &mut basis {
        fix_sign(comp);
    }

    Ok(ProjectionModel {
        method,
        k,
        n_dims: d,
        mean,
        components: Some(basis),
        explained_variance,
        total_variance,
    })
}

/// Top-`k` eigenpairs of `X X^T`, mapped to right singular vectors via
/// `v = X^T u / sigma`. Vectors for null eigenvalues are returned unscaled
/// and get discarded by the caller.
fn wide_decomposition(rows: &[&[f64]], d: usize, k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = rows.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| dot(rows[i], rows[j])).collect())
        .collect();
    let gram = DMatrix::from_fn(n, n, |i, j| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        upper[a][b - a]
    });
    let (vals, vecs) = sorted_eigen(gram, k);
    let comps = vals
        .iter()
        .zip(&vecs)
        .map(|(&lambda, u)| {
            let sigma = lambda.max(0.0).sqrt();
            let mut v = vec![0.0; d];
            for (row, &ui) in rows.iter().zip(u) {
                for (vj, x) in v.iter_mut().zip(*row) {
                    *vj += ui * x;
                }
            }
            if sigma > 0.0 {
                v.iter_mut().for_each(|x| *x /= sigma);
            }
            v
        })
        .collect();
    (vals, comps)
}

/// Top-`k` eigenpairs of `X^T X` (only used when `n > d`).
fn tall_decomposition(rows: &[&[f64]], d: usize, k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut scatter = DMatrix::<f64>::zeros(d, d);
    for row in rows {
        for a in 0..d {
            for b in a..d {
                scatter[(a, b)] += row[a] * row[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            scatter[(a, b)] = scatter[(b, a)];
        }
    }
    sorted_eigen(scatter, k)
}

/// Eigenpairs sorted by decreasing eigenvalue (ties by original position).
fn sorted_eigen(m: DMatrix<f64>, k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    order.truncate(k);
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    (vals, vecs)
}

/// Modified Gram-Schmidt step against `basis`; `None` if the vector is
/// (numerically) inside its span.
fn orthonormalize(mut v: Vec<f64>, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    let original = dot(&v, &v).sqrt();
    if original == 0.0 {
        return None;
    }
    for _ in 0..2 {
        for b in basis {
            let p = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
    }
    let len = dot(&v, &v).sqrt();
    if len <= original * 1e-6 {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= len);
    Some(v)
}

/// Extends `basis` to `k` orthonormal rows using standard basis vectors in
/// index order.
fn complete_basis(basis: &mut Vec<Vec<f64>>, d: usize, k: usize) {
    let mut axis = 0;
    while basis.len() < k && axis < d {
        let mut e = vec![0.0; d];
        e[axis] = 1.0;
        if let Some(v) = orthonormalize(e, basis) {
            basis.push(v);
        }
        axis += 1;
    }
}

/// Flips `v` so that its largest-magnitude entry (first on ties) is positive.
pub(crate) fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}
