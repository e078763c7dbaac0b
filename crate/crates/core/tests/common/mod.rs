//! Independent reference implementations used to check the library. None of
//! these share code paths with `ich_core` beyond the data types.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeMap;

use ich_core::{FeatureMatrix, LabeledDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> FeatureMatrix {
    let values = (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    FeatureMatrix::new(n, d, values).unwrap()
}

pub fn rows_of(m: &FeatureMatrix) -> Vec<Vec<f64>> {
    m.rows().map(|r| r.to_vec()).collect()
}

/// Cyclic Jacobi eigensolver for a symmetric matrix. Returns eigenvalues in
/// decreasing order and matching unit eigenvectors.
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let total: f64 = a.iter().flatten().map(|x| x * x).sum();
        if off <= 1e-30 * total.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap());
    let vals = order.iter().map(|&i| a[i][i]).collect();
    let vecs = order
        .iter()
        .map(|&i| (0..n).map(|k| v[k][i]).collect())
        .collect();
    (vals, vecs)
}

/// Sample covariance (divisor n - 1) of the rows.
pub fn covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let mut c = vec![vec![0.0; d]; d];
    for r in rows {
        for a in 0..d {
            for b in 0..d {
                c[a][b] += (r[a] - mean[a]) * (r[b] - mean[b]);
            }
        }
    }
    for row in c.iter_mut() {
        for x in row.iter_mut() {
            *x /= (n - 1) as f64;
        }
    }
    c
}

/// Distance between two vectors up to a global sign flip.
pub fn sign_free_gap(a: &[f64], b: &[f64]) -> f64 {
    let plus = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let minus = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x + y).abs())
        .fold(0.0, f64::max);
    plus.min(minus)
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn centroid(rows: &[Vec<f64>], members: &[usize]) -> Vec<f64> {
    let d = rows[0].len();
    let mut c = vec![0.0; d];
    for &m in members {
        for j in 0..d {
            c[j] += rows[m][j];
        }
    }
    c.iter_mut().for_each(|x| *x /= members.len() as f64);
    c
}

/// Ward agglomeration that recomputes every pairwise merge cost
/// `|A||B| / (|A| + |B|) * ||c_A - c_B||^2` from scratch at each step.
/// Returns canonical labels (ids by smallest member).
pub fn naive_ward(rows: &[Vec<f64>], k: usize) -> Vec<usize> {
    let n = rows.len();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    while clusters.len() > k {
        let mut best = (f64::INFINITY, 0, 0);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let (na, nb) = (clusters[a].len() as f64, clusters[b].len() as f64);
                let cost = na * nb / (na + nb)
                    * sq(&centroid(rows, &clusters[a]), &centroid(rows, &clusters[b]));
                if cost < best.0 {
                    best = (cost, a, b);
                }
            }
        }
        let (_, a, b) = best;
        let moved = clusters.remove(b);
        clusters[a].extend(moved);
        clusters[a].sort_unstable();
        clusters.sort_by_key(|c| c[0]);
    }
    let mut labels = vec![0; n];
    for (id, c) in clusters.iter().enumerate() {
        for &m in c {
            labels[m] = id;
        }
    }
    labels
}

/// Plain Lloyd from `restarts` random distinct-point initializations; best
/// within-cluster sum of squares.
pub fn multi_restart_lloyd(rows: &[Vec<f64>], k: usize, restarts: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let n = rows.len();
    let mut best = f64::INFINITY;
    for _ in 0..restarts {
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = r.gen_range(i..n);
            idx.swap(i, j);
        }
        let mut centers: Vec<Vec<f64>> = idx[..k].iter().map(|&i| rows[i].clone()).collect();
        let mut labels = vec![usize::MAX; n];
        for _ in 0..500 {
            let new: Vec<usize> = rows
                .iter()
                .map(|row| {
                    (0..k)
                        .min_by(|&a, &b| {
                            sq(row, &centers[a])
                                .partial_cmp(&sq(row, &centers[b]))
                                .unwrap()
                        })
                        .unwrap()
                })
                .collect();
            if new == labels {
                break;
            }
            labels = new;
            for (c, center) in centers.iter_mut().enumerate() {
                let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
                if !members.is_empty() {
                    *center = centroid(rows, &members);
                }
            }
        }
        let sse: f64 = rows
            .iter()
            .zip(&labels)
            .map(|(row, &c)| sq(row, &centers[c]))
            .sum();
        best = best.min(sse);
    }
    best
}

pub fn wcss(rows: &[Vec<f64>], labels: &[usize]) -> f64 {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    (0..k)
        .map(|c| {
            let members: Vec<usize> = (0..rows.len()).filter(|&i| labels[i] == c).collect();
            if members.is_empty() {
                return 0.0;
            }
            let cen = centroid(rows, &members);
            members.iter().map(|&m| sq(&rows[m], &cen)).sum::<f64>()
        })
        .sum()
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    sq(a, b).sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        1.0
    } else {
        1.0 - dot / (na * nb)
    }
}

/// Direct per-sample evaluation of `(b - a) / max(a, b)`.
pub fn brute_silhouette(
    rows: &[Vec<f64>],
    labels: &[usize],
    dist: fn(&[f64], &[f64]) -> f64,
) -> Vec<f64> {
    let n = rows.len();
    let k = labels.iter().max().unwrap() + 1;
    (0..n)
        .map(|i| {
            let own: Vec<usize> = (0..n)
                .filter(|&j| j != i && labels[j] == labels[i])
                .collect();
            if own.is_empty() {
                return 0.0;
            }
            let a = own.iter().map(|&j| dist(&rows[i], &rows[j])).sum::<f64>() / own.len() as f64;
            let mut b = f64::INFINITY;
            for c in 0..k {
                if c == labels[i] {
                    continue;
                }
                let other: Vec<usize> = (0..n).filter(|&j| labels[j] == c).collect();
                if other.is_empty() {
                    continue;
                }
                let m = other.iter().map(|&j| dist(&rows[i], &rows[j])).sum::<f64>()
                    / other.len() as f64;
                b = b.min(m);
            }
            let denom = a.max(b);
            if denom == 0.0 {
                0.0
            } else {
                (b - a) / denom
            }
        })
        .collect()
}

/// `1 - H(C|K) / H(C)` from raw label pairs.
pub fn brute_homogeneity(classes: &[usize], clusters: &[usize]) -> f64 {
    let n = classes.len() as f64;
    let mut nc: BTreeMap<usize, f64> = BTreeMap::new();
    let mut nk: BTreeMap<usize, f64> = BTreeMap::new();
    let mut nck: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (&c, &k) in classes.iter().zip(clusters) {
        *nc.entry(c).or_default() += 1.0;
        *nk.entry(k).or_default() += 1.0;
        *nck.entry((c, k)).or_default() += 1.0;
    }
    let hc: f64 = -nc.values().map(|&v| v / n * (v / n).ln()).sum::<f64>();
    if hc == 0.0 {
        return 1.0;
    }
    let hck: f64 = -nck
        .iter()
        .map(|(&(_, k), &v)| v / n * (v / nk[&k]).ln())
        .sum::<f64>();
    1.0 - hck / hc
}

/// Re-aggregates a majority-label confusion matrix from raw pairs by
/// explicitly arg-maxing each cluster's label counts.
pub fn brute_confusion(
    classes: &[String],
    clusters: &[usize],
) -> (Vec<String>, Vec<Vec<f64>>, Vec<usize>) {
    let mut names: Vec<String> = classes.to_vec();
    names.sort();
    names.dedup();
    let mut per_cluster: BTreeMap<usize, BTreeMap<&str, usize>> = BTreeMap::new();
    for (c, &k) in classes.iter().zip(clusters) {
        *per_cluster
            .entry(k)
            .or_default()
            .entry(c.as_str())
            .or_default() += 1;
    }
    let mut predicted: BTreeMap<usize, String> = BTreeMap::new();
    for (k, counts) in &per_cluster {
        let max = counts.values().max().unwrap();
        // BTreeMap iterates names in order, so the first hit is the smallest.
        let label = counts.iter().find(|(_, &v)| v == *max).unwrap().0;
        predicted.insert(*k, label.to_string());
    }
    let pos = |s: &str| names.iter().position(|n| n == s).unwrap();
    let mut matrix = vec![vec![0.0; names.len()]; names.len()];
    let mut totals = vec![0.0; names.len()];
    for (c, k) in classes.iter().zip(clusters) {
        matrix[pos(c)][pos(&predicted[k])] += 1.0;
        totals[pos(c)] += 1.0;
    }
    for (row, t) in matrix.iter_mut().zip(&totals) {
        row.iter_mut().for_each(|x| *x /= t);
    }
    let mut per_class = vec![0; names.len()];
    for p in predicted.values() {
        per_class[pos(p)] += 1;
    }
    (names, matrix, per_class)
}

pub fn exhaustive_nn(anchors: &[Vec<f64>], clusters: &[usize], orphans: &[Vec<f64>]) -> Vec<usize> {
    orphans
        .iter()
        .map(|o| {
            let mut best = 0;
            for a in 1..anchors.len() {
                if sq(o, &anchors[a]) < sq(o, &anchors[best]) {
                    best = a;
                }
            }
            clusters[best]
        })
        .collect()
}

/// Isotropic Gaussian blobs (Box-Muller) with known labels.
pub fn blob_dataset(
    per_blob: usize,
    centers: &[[f64; 2]],
    sigma: f64,
    seed: u64,
) -> LabeledDataset {
    let mut r = rng(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (b, c) in centers.iter().enumerate() {
        for _ in 0..per_blob {
            let u1: f64 = 1.0 - r.gen::<f64>();
            let u2: f64 = r.gen();
            let rad = (-2.0 * u1.ln()).sqrt();
            let theta = std::f64::consts::TAU * u2;
            rows.push([
                c[0] + sigma * rad * theta.cos(),
                c[1] + sigma * rad * theta.sin(),
            ]);
            labels.push(format!("blob{b}"));
        }
    }
    let m = FeatureMatrix::from_rows(2, &rows).unwrap();
    LabeledDataset::with_generated_ids(m, Some(labels)).unwrap()
}
