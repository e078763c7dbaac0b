//! Per-iteration clustering: Ward agglomeration and seeded k-means.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ClusterAssignment, FeatureMatrix, IndexSubset};
use crate::distance::sq_euclidean;
use crate::error::{IchError, Result};

/// A clustering strategy producing exactly `k` non-empty clusters.
pub trait Clusterer: Send + Sync {
    fn name(&self) -> &'static str;

    /// `seed` is ignored by deterministic methods.
    fn cluster(&self, data: &FeatureMatrix, k: usize, seed: u64) -> Result<ClusterAssignment>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct WardClusterer;

impl Clusterer for WardClusterer {
    fn name(&self) -> &'static str {
        "ward"
    }

    fn cluster(&self, data: &FeatureMatrix, k: usize, _seed: u64) -> Result<ClusterAssignment> {
        ward_cluster(data, k)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KMeansClusterer {
    pub max_iter: usize,
    pub n_init: usize,
}

impl Default for KMeansClusterer {
    fn default() -> Self {
        KMeansClusterer {
            max_iter: 300,
            n_init: 10,
        }
    }
}

impl Clusterer for KMeansClusterer {
    fn name(&self) -> &'static str {
        "kmeans"
    }

    fn cluster(&self, data: &FeatureMatrix, k: usize, seed: u64) -> Result<ClusterAssignment> {
        kmeans_cluster_with(data, k, seed, self.max_iter, self.n_init)
    }
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if n == 0 {
        return Err(IchError::EmptyDataset);
    }
    if k == 0 || k > n {
        return Err(IchError::ClusterCountOutOfRange { k, n });
    }
    Ok(())
}

/// One agglomeration step. Node ids follow the usual linkage convention:
/// `0..n` are the input samples, `n + s` is the node created at step `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeStep {
    pub left_cluster: usize,
    pub right_cluster: usize,
    /// Increase of the within-cluster sum of squares caused by the merge.
    pub merge_cost: f64,
    pub new_node: usize,
    pub new_size: usize,
}

/// Condensed upper-triangular storage of Ward dissimilarities.
struct Condensed {
    n: usize,
    data: Vec<f64>,
}

impl Condensed {
    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.data[self.idx(a, b)]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let idx = self.idx(a, b);
        self.data[idx] = v;
    }
}

/// Ward agglomeration with Lance-Williams updates and per-row nearest
/// neighbour caches.
///
/// Clusters live in slots; a merged cluster takes the lower slot, so a slot
/// index is always its cluster's smallest member. Dissimilarities are
/// `2 * |A||B| / (|A| + |B|) * ||c_A - c_B||^2`, which equals the squared
/// Euclidean distance between singletons. Among equal costs the pair with
/// the lexicographically smallest `(slot_a, slot_b)` merges first.
struct WardState {
    dist: Condensed,
    size: Vec<usize>,
    node: Vec<usize>,
    active: Vec<bool>,
    nn: Vec<usize>,
    nn_dist: Vec<f64>,
    slot_of: Vec<usize>,
    next_node: usize,
}

impl WardState {
    fn new(data: &FeatureMatrix) -> Self {
        let n = data.n_samples();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let a = data.row(i);
                (i + 1..n).map(|j| sq_euclidean(a, data.row(j))).collect()
            })
            .collect();
        let dist = Condensed {
            n,
            data: rows.into_iter().flatten().collect(),
        };
        let mut st = WardState {
            dist,
            size: vec![1; n],
            node: (0..n).collect(),
            active: vec![true; n],
            nn: vec![usize::MAX; n],
            nn_dist: vec![f64::INFINITY; n],
            slot_of: (0..n).collect(),
            next_node: n,
        };
        for i in 0..n {
            st.refresh_nn(i);
        }
        st
    }

    fn refresh_nn(&mut self, i: usize) {
        let n = self.dist.n;
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for j in i + 1..n {
            if self.active[j] {
                let d = self.dist.get(i, j);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
        }
        self.nn[i] = best;
        self.nn_dist[i] = best_d;
    }

    fn merge_once(&mut self) -> MergeStep {
        let n = self.dist.n;
        let mut a = usize::MAX;
        let mut best = f64::INFINITY;
        for i in 0..n {
            if self.active[i] && self.nn[i] != usize::MAX && self.nn_dist[i] < best {
                best = self.nn_dist[i];
                a = i;
            }
        }
        let b = self.nn[a];
        let d_ab = best;
        let (sa, sb) = (self.size[a], self.size[b]);

        for k in 0..n {
            if !self.active[k] || k == a || k == b {
                continue;
            }
            let sk = self.size[k] as f64;
            let updated = ((sk + sa as f64) * self.dist.get(k, a)
                + (sk + sb as f64) * self.dist.get(k, b)
                - sk * d_ab)
                / (sk + (sa + sb) as f64);
            self.dist.set(k, a, updated.max(0.0));
        }

        let step = MergeStep {
            left_cluster: self.node[a].min(self.node[b]),
            right_cluster: self.node[a].max(self.node[b]),
            merge_cost: d_ab / 2.0,
            new_node: self.next_node,
            new_size: sa + sb,
        };
        self.next_node += 1;
        self.active[b] = false;
        self.size[a] = sa + sb;
        self.node[a] = step.new_node;

        self.refresh_nn(a);
        for k in 0..a {
            if !self.active[k] {
                continue;
            }
            if self.nn[k] == a || self.nn[k] == b {
                self.refresh_nn(k);
            } else {
                let d = self.dist.get(k, a);
                if d < self.nn_dist[k] || (d == self.nn_dist[k] && a < self.nn[k]) {
                    self.nn[k] = a;
                    self.nn_dist[k] = d;
                }
            }
        }
        for k in a + 1..b {
            if self.active[k] && self.nn[k] == b {
                self.refresh_nn(k);
            }
        }
        for s in self.slot_of.iter_mut() {
            if *s == b {
                *s = a;
            }
        }
        step
    }
}

/// Agglomerates `data` until `k` clusters remain. Cluster ids are ordered by
/// each cluster's smallest member index.
pub fn ward_cluster(data: &FeatureMatrix, k: usize) -> Result<ClusterAssignment> {
    let n = data.n_samples();
    check_k(n, k)?;
    let mut st = WardState::new(data);
    for _ in 0..n - k {
        st.merge_once();
    }
    Ok(ClusterAssignment::canonical(
        IndexSubset::full(n),
        &st.slot_of,
    ))
}

/// Full dendrogram: `n - 1` merge steps in merge order.
pub fn ward_dendrogram(data: &FeatureMatrix) -> Result<Vec<MergeStep>> {
    let n = data.n_samples();
    check_k(n, 1)?;
    let mut st = WardState::new(data);
    Ok((0..n - 1).map(|_| st.merge_once()).collect())
}

/// Seeded k-means: k-means++ seeding then Lloyd iterations (at most 300 or
/// until assignments stop changing), best of 10 seeded restarts.
pub fn kmeans_cluster(data: &FeatureMatrix, k: usize, seed: u64) -> Result<ClusterAssignment> {
    let km = KMeansClusterer::default();
    kmeans_cluster_with(data, k, seed, km.max_iter, km.n_init)
}

pub fn kmeans_cluster_with(
    data: &FeatureMatrix,
    k: usize,
    seed: u64,
    max_iter: usize,
    n_init: usize,
) -> Result<ClusterAssignment> {
    let n = data.n_samples();
    check_k(n, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..n_init.max(1) {
        let (inertia, labels) = lloyd_run(data, k, max_iter, &mut rng);
        if best.as_ref().is_none_or(|(b, _)| inertia < *b) {
            best = Some((inertia, labels));
        }
    }
    let (_, labels) = best.expect("at least one run");
    Ok(ClusterAssignment::canonical(IndexSubset::full(n), &labels))
}

/// Within-cluster sum of squared distances to cluster means.
pub fn inertia(data: &FeatureMatrix, assignment: &ClusterAssignment) -> f64 {
    let centroids = centroids(data, assignment.cluster_of(), assignment.k());
    assignment
        .members()
        .iter()
        .zip(assignment.cluster_of())
        .map(|(i, &c)| sq_euclidean(data.row(i), &centroids[c]))
        .sum()
}

fn centroids(data: &FeatureMatrix, labels: &[usize], k: usize) -> Vec<Vec<f64>> {
    let d = data.n_dims();
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (row, &c) in data.rows().zip(labels) {
        counts[c] += 1;
        sums[c].iter_mut().zip(row).for_each(|(s, x)| *s += x);
    }
    for (s, &cnt) in sums.iter_mut().zip(&counts) {
        if cnt > 0 {
            s.iter_mut().for_each(|x| *x /= cnt as f64);
        }
    }
    sums
}

fn nearest(row: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = sq_euclidean(row, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init(data: &FeatureMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = data.n_samples();
    let mut centers = vec![data.row(rng.gen_range(0..n)).to_vec()];
    let mut closest: Vec<f64> = data.rows().map(|r| sq_euclidean(r, &centers[0])).collect();
    while centers.len() < k {
        let next = match WeightedIndex::new(&closest) {
            Ok(dist) => dist.sample(rng),
            // All remaining mass is zero: duplicates only, pick uniformly.
            Err(_) => rng.gen_range(0..n),
        };
        let c = data.row(next).to_vec();
        for (slot, row) in closest.iter_mut().zip(data.rows()) {
            *slot = slot.min(sq_euclidean(row, &c));
        }
        centers.push(c);
    }
    centers
}

fn lloyd_run(
    data: &FeatureMatrix,
    k: usize,
    max_iter: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, Vec<usize>) {
    let n = data.n_samples();
    let mut centers = plus_plus_init(data, k, rng);
    let mut labels = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, row) in data.rows().enumerate() {
            let (c, _) = nearest(row, &centers);
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }
        repair_empty(data, &mut labels, &centers, k);
        if !changed {
            break;
        }
        centers = centroids(data, &labels, k);
    }
    repair_empty(data, &mut labels, &centers, k);
    let centers = centroids(data, &labels, k);
    let total = data
        .rows()
        .zip(&labels)
        .map(|(r, &c)| sq_euclidean(r, &centers[c]))
        .sum();
    (total, labels)
}

/// Moves the point farthest from its center into each empty cluster.
fn repair_empty(data: &FeatureMatrix, labels: &mut [usize], centers: &[Vec<f64>], k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&c| counts[c] += 1);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let mut far = None;
        let mut far_d = -1.0;
        for (i, row) in data.rows().enumerate() {
            if counts[labels[i]] <= 1 {
                continue;
            }
            let d = sq_euclidean(row, &centers[labels[i]]);
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        match far {
            Some(i) => labels[i] = empty,
            None => return,
        }
    }
}
