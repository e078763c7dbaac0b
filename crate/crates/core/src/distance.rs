//! Pairwise distances in double precision.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::error::IchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Cosine,
    Euclidean,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Cosine => "cosine",
            Metric::Euclidean => "euclidean",
        }
    }

    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => sq_euclidean(a, b).sqrt(),
            Metric::Cosine => cosine_distance(a, b, norm(a), norm(b)),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = IchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cosine" => Ok(Metric::Cosine),
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(IchError::InvalidConfig(format!(
                "unknown silhouette metric {other:?}"
            ))),
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn sq_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// `1 - cos`, clamped to `[0, 2]`. A zero vector is at distance 1 from
/// everything, itself included.
#[inline]
fn cosine_distance(a: &[f64], b: &[f64], na: f64, nb: f64) -> f64 {
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    (1.0 - dot(a, b) / (na * nb)).clamp(0.0, 2.0)
}

/// Full symmetric `n x n` distance matrix, row-major. Each entry is computed
/// by a single sequential reduction, so the result does not depend on the
/// number of worker threads.
pub fn pairwise(data: &FeatureMatrix, metric: Metric) -> Vec<f64> {
    let n = data.n_samples();
    let norms: Vec<f64> = match metric {
        Metric::Cosine => data.rows().map(norm).collect(),
        Metric::Euclidean => Vec::new(),
    };
    let mut out = vec![0.0; n * n];
    out.par_chunks_mut(n.max(1))
        .take(n)
        .enumerate()
        .for_each(|(i, row_out)| {
            let a = data.row(i);
            for (j, slot) in row_out.iter_mut().enumerate() {
                let b = data.row(j);
                // Compute each unordered pair with the lower index first so
                // that d(i, j) and d(j, i) are bit-identical.
                let (x, y, nx, ny) = if i <= j { (a, b, i, j) } else { (b, a, j, i) };
                *slot = match metric {
                    Metric::Euclidean => {
                        if i == j {
                            0.0
                        } else {
                            sq_euclidean(x, y).sqrt()
                        }
                    }
                    Metric::Cosine => cosine_distance(x, y, norms[nx], norms[ny]),
                };
            }
        });
    out
}
