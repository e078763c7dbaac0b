//! Silhouette scoring, homogeneity and majority-label confusion matrices.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{encode_labels, ClusterAssignment, FeatureMatrix};
use crate::distance::{pairwise, sq_euclidean, Metric};
use crate::error::{IchError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteReport {
    /// Aligned with the assignment's member list.
    pub per_sample: Vec<f64>,
    /// Mean per-sample score of each cluster id.
    pub per_cluster: Vec<f64>,
    pub best_cluster: usize,
}

impl SilhouetteReport {
    pub fn best_score(&self) -> f64 {
        self.per_cluster[self.best_cluster]
    }

    pub fn mean(&self) -> f64 {
        if self.per_sample.is_empty() {
            return 0.0;
        }
        self.per_sample.iter().sum::<f64>() / self.per_sample.len() as f64
    }
}

/// Per-sample silhouette `(b - a) / max(a, b)` over the rows of `data`
/// referenced by `assignment`.
///
/// `a` is the mean distance to the other members of the own cluster, `b` the
/// smallest mean distance to the members of any other cluster. Members of
/// singleton clusters score 0, as does any sample with `max(a, b) = 0`.
pub fn silhouette(
    data: &FeatureMatrix,
    assignment: &ClusterAssignment,
    metric: Metric,
) -> Result<SilhouetteReport> {
    let k = assignment.k();
    if k < 2 {
        return Err(IchError::TooFewClusters(k));
    }
    assignment.members().check_bound(data.n_samples())?;
    let rows = data.select_rows(assignment.members().as_slice())?;
    let labels = assignment.cluster_of();
    let sizes = assignment.cluster_sizes();
    let n = rows.n_samples();
    let dist = pairwise(&rows, metric);

    let per_sample: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = labels[i];
            if sizes[own] <= 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            let row = &dist[i * n..(i + 1) * n];
            for (j, &d) in row.iter().enumerate() {
                if j != i {
                    sums[labels[j]] += d;
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom == 0.0 {
                0.0
            } else {
                ((b - a) / denom).clamp(-1.0, 1.0)
            }
        })
        .collect();

    let mut totals = vec![0.0; k];
    for (s, &c) in per_sample.iter().zip(labels) {
        totals[c] += s;
    }
    let per_cluster: Vec<f64> = totals
        .iter()
        .zip(&sizes)
        .map(|(t, &s)| t / s as f64)
        .collect();
    let mut best_cluster = 0;
    for (c, &v) in per_cluster.iter().enumerate() {
        if v > per_cluster[best_cluster] {
            best_cluster = c;
        }
    }
    Ok(SilhouetteReport {
        per_sample,
        per_cluster,
        best_cluster,
    })
}

/// Class x cluster count matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub classes: Vec<String>,
    pub clusters: Vec<usize>,
    pub counts: Vec<Vec<u64>>,
    pub n: u64,
    pub class_totals: Vec<u64>,
    pub cluster_totals: Vec<u64>,
}

impl ContingencyTable {
    /// Rows follow sorted class names, columns sorted cluster ids.
    pub fn from_labels(true_labels: &[String], cluster_ids: &[usize]) -> Result<Self> {
        if true_labels.len() != cluster_ids.len() {
            return Err(IchError::DimensionMismatch {
                expected: true_labels.len(),
                got: cluster_ids.len(),
            });
        }
        let (classes, codes) = encode_labels(true_labels);
        let mut clusters: Vec<usize> = cluster_ids.to_vec();
        clusters.sort_unstable();
        clusters.dedup();
        let col: BTreeMap<usize, usize> =
            clusters.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mut counts = vec![vec![0u64; clusters.len()]; classes.len()];
        for (&r, c) in codes.iter().zip(cluster_ids) {
            counts[r][col[c]] += 1;
        }
        Ok(Self::assemble(classes, clusters, counts))
    }

    /// Builds a table from raw counts; `counts[class][cluster]`.
    pub fn from_counts(classes: Vec<String>, counts: Vec<Vec<i64>>) -> Result<Self> {
        if counts.len() != classes.len() {
            return Err(IchError::DimensionMismatch {
                expected: classes.len(),
                got: counts.len(),
            });
        }
        let width = counts.first().map_or(0, Vec::len);
        let mut out = Vec::with_capacity(counts.len());
        for row in counts {
            if row.len() != width {
                return Err(IchError::InvalidData("ragged contingency table".into()));
            }
            let row = row
                .into_iter()
                .map(|v| {
                    u64::try_from(v)
                        .map_err(|_| IchError::InvalidData(format!("negative count {v}")))
                })
                .collect::<Result<Vec<u64>>>()?;
            out.push(row);
        }
        Ok(Self::assemble(classes, (0..width).collect(), out))
    }

    fn assemble(classes: Vec<String>, clusters: Vec<usize>, counts: Vec<Vec<u64>>) -> Self {
        let class_totals: Vec<u64> = counts.iter().map(|r| r.iter().sum()).collect();
        let cluster_totals: Vec<u64> = (0..clusters.len())
            .map(|j| counts.iter().map(|r| r[j]).sum())
            .collect();
        let n = class_totals.iter().sum();
        ContingencyTable {
            classes,
            clusters,
            counts,
            n,
            class_totals,
            cluster_totals,
        }
    }

    /// `H(C)`, natural log.
    pub fn class_entropy(&self) -> f64 {
        let n = self.n as f64;
        -self
            .class_totals
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                p * p.ln()
            })
            .sum::<f64>()
    }

    /// `H(C|K)`, natural log.
    pub fn conditional_entropy(&self) -> f64 {
        let n = self.n as f64;
        let mut h = 0.0;
        for row in &self.counts {
            for (&nck, &nk) in row.iter().zip(&self.cluster_totals) {
                if nck > 0 {
                    h -= nck as f64 / n * (nck as f64 / nk as f64).ln();
                }
            }
        }
        h
    }
}

/// `h = 1 - H(C|K) / H(C)`; 1 when there is a single class.
pub fn homogeneity(table: &ContingencyTable) -> Result<f64> {
    if table.n == 0 {
        return Err(IchError::EmptyDataset);
    }
    let hc = table.class_entropy();
    if hc <= 0.0 {
        return Ok(1.0);
    }
    Ok((1.0 - table.conditional_entropy() / hc).clamp(0.0, 1.0))
}

pub fn homogeneity_of(true_labels: &[String], cluster_ids: &[usize]) -> Result<f64> {
    homogeneity(&ContingencyTable::from_labels(true_labels, cluster_ids)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajorityConfusion {
    pub classes: Vec<String>,
    /// `matrix[true][predicted]`, rows normalized by true-class totals.
    pub matrix: Vec<Vec<f64>>,
    /// Number of clusters whose majority label is each class.
    pub clusters_per_class: Vec<usize>,
    /// Predicted (majority) class index of each table column.
    pub predicted: Vec<usize>,
}

/// Labels every cluster by its majority true class (ties to the
/// lexicographically smallest class name) and aggregates per true class.
pub fn majority_confusion(table: &ContingencyTable) -> Result<MajorityConfusion> {
    let n_classes = table.classes.len();
    let mut predicted = Vec::with_capacity(table.clusters.len());
    for (j, &total) in table.cluster_totals.iter().enumerate() {
        if total == 0 {
            return Err(IchError::InvalidData(format!(
                "cluster {} is empty",
                table.clusters[j]
            )));
        }
        let mut best = 0;
        for c in 1..n_classes {
            if table.counts[c][j] > table.counts[best][j] {
                best = c;
            }
        }
        predicted.push(best);
    }
    let mut matrix = vec![vec![0.0; n_classes]; n_classes];
    for (t, row) in table.counts.iter().enumerate() {
        for (j, &count) in row.iter().enumerate() {
            matrix[t][predicted[j]] += count as f64;
        }
        let total = table.class_totals[t];
        if total > 0 {
            matrix[t].iter_mut().for_each(|v| *v /= total as f64);
        }
    }
    let mut clusters_per_class = vec![0; n_classes];
    for &p in &predicted {
        clusters_per_class[p] += 1;
    }
    Ok(MajorityConfusion {
        classes: table.classes.clone(),
        matrix,
        clusters_per_class,
        predicted,
    })
}

/// For every orphan row, the cluster of its nearest anchor (Euclidean). Ties
/// go to the anchor that comes first.
pub fn nearest_neighbor_assign(
    anchors: &FeatureMatrix,
    anchor_clusters: &[usize],
    orphans: &FeatureMatrix,
) -> Result<Vec<usize>> {
    if anchors.n_samples() == 0 {
        return Err(IchError::InvalidData("no anchors to assign to".into()));
    }
    if anchor_clusters.len() != anchors.n_samples() {
        return Err(IchError::DimensionMismatch {
            expected: anchors.n_samples(),
            got: anchor_clusters.len(),
        });
    }
    if orphans.n_samples() > 0 && orphans.n_dims() != anchors.n_dims() {
        return Err(IchError::DimensionMismatch {
            expected: anchors.n_dims(),
            got: orphans.n_dims(),
        });
    }
    Ok((0..orphans.n_samples())
        .into_par_iter()
        .map(|o| {
            let row = orphans.row(o);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (a, anchor) in anchors.rows().enumerate() {
                let d = sq_euclidean(row, anchor);
                if d < best_d {
                    best_d = d;
                    best = a;
                }
            }
            anchor_clusters[best]
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionSummary {
    pub classes: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
    pub clusters_per_class: Vec<usize>,
}

/// Homogeneity, confusion and optional per-cluster silhouette of one
/// clustering against true labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub homogeneity: f64,
    pub n_samples: usize,
    pub n_clusters: usize,
    #[serde(default)]
    pub per_cluster_silhouette: Option<BTreeMap<usize, f64>>,
    pub confusion: ConfusionSummary,
}

pub fn evaluate(true_labels: &[String], cluster_ids: &[usize]) -> Result<EvaluationReport> {
    let table = ContingencyTable::from_labels(true_labels, cluster_ids)?;
    let h = homogeneity(&table)?;
    let conf = majority_confusion(&table)?;
    Ok(EvaluationReport {
        homogeneity: h,
        n_samples: true_labels.len(),
        n_clusters: table.clusters.len(),
        per_cluster_silhouette: None,
        confusion: ConfusionSummary {
            classes: conf.classes,
            matrix: conf.matrix,
            clusters_per_class: conf.clusters_per_class,
        },
    })
}
