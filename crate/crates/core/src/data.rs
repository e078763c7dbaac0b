//! Dataset model shared by every stage of the pipeline.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{IchError, Result};

/// Dense row-major matrix of per-sample feature vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    n_samples: usize,
    n_dims: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(n_samples: usize, n_dims: usize, values: Vec<f64>) -> Result<Self> {
        if n_dims == 0 {
            return Err(IchError::InvalidData("n_dims must be at least 1".into()));
        }
        if values.len() != n_samples * n_dims {
            return Err(IchError::DimensionMismatch {
                expected: n_samples * n_dims,
                got: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(IchError::NonFinite {
                row: pos / n_dims,
                col: pos % n_dims,
            });
        }
        Ok(FeatureMatrix {
            n_samples,
            n_dims,
            values,
        })
    }

    /// Builds a matrix from equally sized rows. `n_dims` is required so that
    /// an empty row list still yields a well-formed matrix.
    pub fn from_rows<R: AsRef<[f64]>>(n_dims: usize, rows: &[R]) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * n_dims);
        for row in rows {
            let row = row.as_ref();
            if row.len() != n_dims {
                return Err(IchError::DimensionMismatch {
                    expected: n_dims,
                    got: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), n_dims, values)
    }

    pub fn zeros(n_samples: usize, n_dims: usize) -> Self {
        assert!(n_dims >= 1);
        FeatureMatrix {
            n_samples,
            n_dims,
            values: vec![0.0; n_samples * n_dims],
        }
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_dims(&self) -> usize {
        self.n_dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_dims..(i + 1) * self.n_dims]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.n_dims).take(self.n_samples)
    }

    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(indices.len() * self.n_dims);
        for &i in indices {
            if i >= self.n_samples {
                return Err(IchError::IndexOutOfRange {
                    index: i,
                    len: self.n_samples,
                });
            }
            values.extend_from_slice(self.row(i));
        }
        Ok(FeatureMatrix {
            n_samples: indices.len(),
            n_dims: self.n_dims,
            values,
        })
    }

    /// Column-wise mean. Empty matrices yield a zero vector.
    pub fn column_mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.n_dims];
        if self.n_samples == 0 {
            return mean;
        }
        for row in self.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let n = self.n_samples as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }
}

/// Strictly increasing list of row indices into a parent dataset.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndexSubset(Vec<usize>);

impl IndexSubset {
    pub fn full(n: usize) -> Self {
        IndexSubset((0..n).collect())
    }

    pub fn empty() -> Self {
        IndexSubset(Vec::new())
    }

    /// Validates strict monotonicity; use [`IndexSubset::from_unsorted`] for
    /// arbitrary input.
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(IchError::InvalidData(
                "index subset must be strictly increasing".into(),
            ));
        }
        Ok(IndexSubset(indices))
    }

    pub fn from_unsorted(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        IndexSubset(indices)
    }

    pub fn check_bound(&self, n: usize) -> Result<()> {
        match self.0.last() {
            Some(&last) if last >= n => Err(IchError::IndexOutOfRange {
                index: last,
                len: n,
            }),
            _ => Ok(()),
        }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    /// Maps positions within this subset back through a parent subset:
    /// `parent.compose(self)[i] = parent[self[i]]`.
    pub fn compose(&self, inner: &IndexSubset) -> Result<IndexSubset> {
        inner.check_bound(self.len())?;
        Ok(IndexSubset(inner.iter().map(|i| self.0[i]).collect()))
    }

    /// Indices of `self` not present in `other`.
    pub fn difference(&self, other: &IndexSubset) -> IndexSubset {
        IndexSubset(
            self.0
                .iter()
                .copied()
                .filter(|i| !other.contains(*i))
                .collect(),
        )
    }
}

/// Feature matrix plus mandatory sample ids and optional class labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    features: FeatureMatrix,
    sample_ids: Vec<String>,
    labels: Option<Vec<String>>,
}

impl LabeledDataset {
    pub fn new(
        features: FeatureMatrix,
        sample_ids: Vec<String>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let n = features.n_samples();
        if sample_ids.len() != n {
            return Err(IchError::DimensionMismatch {
                expected: n,
                got: sample_ids.len(),
            });
        }
        let mut seen = HashSet::with_capacity(n);
        for id in &sample_ids {
            if !seen.insert(id.as_str()) {
                return Err(IchError::DuplicateId(id.clone()));
            }
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(IchError::DimensionMismatch {
                    expected: n,
                    got: labels.len(),
                });
            }
        }
        Ok(LabeledDataset {
            features,
            sample_ids,
            labels,
        })
    }

    /// Generates `sample_{i}` ids.
    pub fn with_generated_ids(
        features: FeatureMatrix,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let ids = (0..features.n_samples())
            .map(|i| format!("sample_{i}"))
            .collect();
        Self::new(features, ids, labels)
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn n_samples(&self) -> usize {
        self.features.n_samples()
    }

    pub fn n_dims(&self) -> usize {
        self.features.n_dims()
    }

    /// Sorted distinct class names and the dense code of each sample.
    pub fn label_codes(&self) -> Option<(Vec<String>, Vec<usize>)> {
        self.labels.as_ref().map(|labels| encode_labels(labels))
    }

    pub fn subset_rows(&self, subset: &IndexSubset) -> Result<Self> {
        subset.check_bound(self.n_samples())?;
        let features = self.features.select_rows(subset.as_slice())?;
        let sample_ids = subset.iter().map(|i| self.sample_ids[i].clone()).collect();
        let labels = self
            .labels
            .as_ref()
            .map(|l| subset.iter().map(|i| l[i].clone()).collect());
        Ok(LabeledDataset {
            features,
            sample_ids,
            labels,
        })
    }

    pub fn index_of(&self) -> BTreeMap<&str, usize> {
        self.sample_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect()
    }
}

pub fn encode_labels(labels: &[String]) -> (Vec<String>, Vec<usize>) {
    let mut classes: Vec<String> = labels.to_vec();
    classes.sort();
    classes.dedup();
    let codes = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label present"))
        .collect();
    (classes, codes)
}

/// Partition of a set of sample indices into `k` non-empty clusters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    members: IndexSubset,
    cluster_of: Vec<usize>,
    k: usize,
}

impl ClusterAssignment {
    /// `cluster_of[i]` is the cluster of `members[i]`.
    pub fn new(members: IndexSubset, cluster_of: Vec<usize>, k: usize) -> Result<Self> {
        if cluster_of.len() != members.len() {
            return Err(IchError::DimensionMismatch {
                expected: members.len(),
                got: cluster_of.len(),
            });
        }
        let mut used = vec![false; k];
        for &c in &cluster_of {
            if c >= k {
                return Err(IchError::InvalidData(format!(
                    "cluster id {c} outside [0, {k})"
                )));
            }
            used[c] = true;
        }
        if let Some(c) = used.iter().position(|u| !u) {
            return Err(IchError::InvalidData(format!("cluster {c} is empty")));
        }
        Ok(ClusterAssignment {
            members,
            cluster_of,
            k,
        })
    }

    /// Relabels arbitrary cluster tags so that ids follow the order of each
    /// cluster's smallest member position.
    pub fn canonical(members: IndexSubset, raw: &[usize]) -> Self {
        let mut remap: BTreeMap<usize, usize> = BTreeMap::new();
        let mut cluster_of = Vec::with_capacity(raw.len());
        for &tag in raw {
            let next = remap.len();
            cluster_of.push(*remap.entry(tag).or_insert(next));
        }
        let k = remap.len();
        ClusterAssignment {
            members,
            cluster_of,
            k,
        }
    }

    pub fn members(&self) -> &IndexSubset {
        &self.members
    }

    pub fn cluster_of(&self) -> &[usize] {
        &self.cluster_of
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Member positions (not parent indices) of every cluster.
    pub fn cluster_positions(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (pos, &c) in self.cluster_of.iter().enumerate() {
            out[c].push(pos);
        }
        out
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.cluster_of {
            sizes[c] += 1;
        }
        sizes
    }
}
