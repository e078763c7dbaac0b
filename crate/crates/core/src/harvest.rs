//! Iterative cluster harvesting and the one-time clustering baselines.
//!
//! Each iteration refits the reducer on the samples still in play, clusters
//! the projected rows, and moves the cluster with the highest mean
//! silhouette out of the working set. The loop runs while more than
//! `n_pca` samples remain.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{ClusterAssignment, FeatureMatrix, IndexSubset, LabeledDataset};
use crate::dimred::ProjectionModel;
use crate::distance::Metric;
use crate::error::{IchError, Result};
use crate::quality::{
    evaluate, homogeneity_of, nearest_neighbor_assign, silhouette, EvaluationReport,
};
use crate::strategy::StrategyRegistry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarvestConfig {
    pub n_pca: usize,
    /// Clusters requested from the clusterer in every iteration.
    pub n_c: usize,
    /// Harvested clusters smaller than this end up in the small set.
    pub n_min: usize,
    pub silhouette_metric: Metric,
    pub dimred: String,
    pub cluster: String,
    pub seed: u64,
    /// Attach rest and small samples to surviving clusters by nearest
    /// neighbour in the original feature space.
    #[serde(default)]
    pub full_assign: bool,
    /// Keep every iteration's fitted projection in the outcome.
    #[serde(default)]
    pub trace: bool,
}

impl Default for HarvestConfig {
    fn default() -> Self {
        HarvestConfig {
            n_pca: 20,
            n_c: 15,
            n_min: 5,
            silhouette_metric: Metric::Cosine,
            dimred: "pca".into(),
            cluster: "ward".into(),
            seed: 0,
            full_assign: false,
            trace: false,
        }
    }
}

impl HarvestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_pca < 1 {
            return Err(IchError::InvalidConfig("n_pca must be at least 1".into()));
        }
        if self.n_c < 2 {
            return Err(IchError::InvalidConfig("n_c must be at least 2".into()));
        }
        if self.n_min < 1 {
            return Err(IchError::InvalidConfig("n_min must be at least 1".into()));
        }
        Ok(())
    }

    fn iteration_seed(&self, iteration: usize) -> u64 {
        self.seed ^ (iteration as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarvestedCluster {
    pub members: IndexSubset,
    /// 1-based iteration that harvested the cluster.
    pub iteration: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub n_remaining: usize,
    /// Effective number of components after degrading to the data size.
    pub n_components: usize,
    pub n_clusters: usize,
    pub chosen_cluster: usize,
    /// `None` when only a single cluster could be formed.
    pub s_max: Option<f64>,
    pub harvested_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarvestState {
    /// Surviving clusters (size >= n_min) in harvest order.
    pub harvested_clusters: Vec<HarvestedCluster>,
    pub rest: IndexSubset,
    /// Harvested clusters that failed the size filter, in harvest order.
    pub small: Vec<HarvestedCluster>,
    pub iteration_log: Vec<IterationRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssignedStage {
    Harvest,
    NnRest,
    NnSmall,
}

impl AssignedStage {
    pub fn as_str(self) -> &'static str {
        match self {
            AssignedStage::Harvest => "harvest",
            AssignedStage::NnRest => "nn-rest",
            AssignedStage::NnSmall => "nn-small",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarvestOutcome {
    pub state: HarvestState,
    /// Sample index -> final cluster id; present iff full assignment ran.
    pub final_assignment: Option<BTreeMap<usize, usize>>,
    pub config: HarvestConfig,
    pub per_iteration_models: Option<Vec<ProjectionModel>>,
}

impl HarvestOutcome {
    pub fn n_clusters(&self) -> usize {
        self.state.harvested_clusters.len()
    }

    /// Sample index -> cluster id over the surviving clusters only.
    pub fn partial_assignment(&self) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        for (c, cl) in self.state.harvested_clusters.iter().enumerate() {
            for i in cl.members.iter() {
                out.insert(i, c);
            }
        }
        out
    }

    /// `(sample index, cluster id, stage)` rows sorted by sample index. Rest
    /// and small samples appear only when full assignment ran.
    pub fn assignment_rows(&self) -> Vec<(usize, usize, AssignedStage)> {
        let mut rows: Vec<(usize, usize, AssignedStage)> = self
            .partial_assignment()
            .into_iter()
            .map(|(i, c)| (i, c, AssignedStage::Harvest))
            .collect();
        if let Some(full) = &self.final_assignment {
            for i in self.state.rest.iter() {
                rows.push((i, full[&i], AssignedStage::NnRest));
            }
            for cl in &self.state.small {
                for i in cl.members.iter() {
                    rows.push((i, full[&i], AssignedStage::NnSmall));
                }
            }
        }
        rows.sort_unstable_by_key(|r| r.0);
        rows
    }
}

/// Runs the harvesting loop with the built-in strategies.
pub fn run_ich(dataset: &LabeledDataset, config: &HarvestConfig) -> Result<HarvestOutcome> {
    run_ich_with(&StrategyRegistry::builtin(), dataset, config)
}

pub fn run_ich_with(
    registry: &StrategyRegistry,
    dataset: &LabeledDataset,
    config: &HarvestConfig,
) -> Result<HarvestOutcome> {
    config.validate()?;
    let reducer = registry.reducer(&config.dimred)?;
    let clusterer = registry.clusterer(&config.cluster)?;
    let n = dataset.n_samples();
    if n == 0 {
        return Err(IchError::EmptyDataset);
    }
    let features = dataset.features();

    let mut remaining = IndexSubset::full(n);
    let mut harvested = Vec::new();
    let mut log = Vec::new();
    let mut models = config.trace.then(Vec::new);

    while remaining.len() > config.n_pca {
        let iteration = log.len() + 1;
        let subset = features.select_rows(remaining.as_slice())?;
        let model = reducer.fit(&subset, config.n_pca)?;
        let projected = model.project(&subset)?;
        let k = config.n_c.min(remaining.len());
        let assignment = clusterer.cluster(&projected, k, config.iteration_seed(iteration))?;

        let (chosen, s_max) = if assignment.k() >= 2 {
            let report = silhouette(&projected, &assignment, config.silhouette_metric)?;
            (report.best_cluster, Some(report.best_score()))
        } else {
            (0, None)
        };
        let positions: Vec<usize> = assignment
            .cluster_of()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == chosen)
            .map(|(p, _)| p)
            .collect();
        let members = remaining.compose(&IndexSubset::new(positions)?)?;

        log.push(IterationRecord {
            iteration,
            n_remaining: remaining.len(),
            n_components: model.k,
            n_clusters: assignment.k(),
            chosen_cluster: chosen,
            s_max,
            harvested_size: members.len(),
        });
        if let Some(models) = models.as_mut() {
            models.push(model);
        }
        remaining = remaining.difference(&members);
        harvested.push(HarvestedCluster { members, iteration });
    }

    let (survivors, small): (Vec<_>, Vec<_>) = harvested
        .into_iter()
        .partition(|c| c.members.len() >= config.n_min);
    let state = HarvestState {
        harvested_clusters: survivors,
        rest: remaining,
        small,
        iteration_log: log,
    };

    let final_assignment = if config.full_assign {
        Some(full_assignment(features, &state)?)
    } else {
        None
    };

    Ok(HarvestOutcome {
        state,
        final_assignment,
        config: config.clone(),
        per_iteration_models: models,
    })
}

/// Nearest-neighbour attachment of rest and small samples to the members of
/// surviving clusters, in the original feature space.
fn full_assignment(
    features: &FeatureMatrix,
    state: &HarvestState,
) -> Result<BTreeMap<usize, usize>> {
    if state.harvested_clusters.is_empty() {
        return Err(IchError::NoSurvivingClusters);
    }
    let mut anchor_map: BTreeMap<usize, usize> = BTreeMap::new();
    for (c, cl) in state.harvested_clusters.iter().enumerate() {
        for i in cl.members.iter() {
            anchor_map.insert(i, c);
        }
    }
    let anchor_idx: Vec<usize> = anchor_map.keys().copied().collect();
    let anchor_cluster: Vec<usize> = anchor_map.values().copied().collect();
    let mut orphans: Vec<usize> = state.rest.iter().collect();
    for cl in &state.small {
        orphans.extend(cl.members.iter());
    }
    orphans.sort_unstable();
    let assigned = nearest_neighbor_assign(
        &features.select_rows(&anchor_idx)?,
        &anchor_cluster,
        &features.select_rows(&orphans)?,
    )?;
    let mut out = anchor_map;
    out.extend(orphans.into_iter().zip(assigned));
    Ok(out)
}

/// One-time clustering: a single fit/project/cluster pass over all samples.
pub fn run_otc(
    dataset: &LabeledDataset,
    config: &HarvestConfig,
    k_total: usize,
) -> Result<ClusterAssignment> {
    run_otc_with(
        &StrategyRegistry::builtin(),
        dataset.features(),
        config,
        k_total,
    )
}

pub fn run_otc_with(
    registry: &StrategyRegistry,
    features: &FeatureMatrix,
    config: &HarvestConfig,
    k_total: usize,
) -> Result<ClusterAssignment> {
    config.validate()?;
    let n = features.n_samples();
    if n == 0 {
        return Err(IchError::EmptyDataset);
    }
    if k_total == 0 || k_total > n {
        return Err(IchError::ClusterCountOutOfRange { k: k_total, n });
    }
    let reducer = registry.reducer(&config.dimred)?;
    let clusterer = registry.clusterer(&config.cluster)?;
    let model = reducer.fit(features, config.n_pca)?;
    let projected = model.project(features)?;
    clusterer.cluster(&projected, k_total, config.seed)
}

/// A one-time clustering method to compare against.
#[derive(Debug, Clone)]
pub struct Baseline {
    pub name: String,
    /// Reducer override; `None` keeps the harvest configuration's reducer.
    pub dimred: Option<String>,
    pub cluster: Option<String>,
    /// Alternative feature matrix (same rows, same order), e.g. raw pixels.
    pub features: Option<FeatureMatrix>,
}

impl Baseline {
    /// Same reducer and clusterer as the harvest, applied once.
    pub fn otc() -> Self {
        Baseline {
            name: "OTC".into(),
            dimred: None,
            cluster: None,
            features: None,
        }
    }

    /// Clustering directly on the ingested features.
    pub fn features_ac() -> Self {
        Baseline {
            name: "CNN+AC".into(),
            dimred: Some("none".into()),
            cluster: Some("ward".into()),
            features: None,
        }
    }

    /// PCA and Ward on an alternative representation such as raw pixels.
    pub fn pca_ac(pixels: FeatureMatrix) -> Self {
        Baseline {
            name: "PCA+AC".into(),
            dimred: Some("pca".into()),
            cluster: Some("ward".into()),
            features: Some(pixels),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    /// Homogeneity over the samples ICH placed in surviving clusters.
    pub partial: f64,
    /// Homogeneity over every sample.
    pub full: f64,
    /// `(h_ich - h_method) / h_method`; absent on the ICH row.
    pub delta_rel_partial: Option<f64>,
    pub delta_rel_full: Option<f64>,
    pub report_partial: EvaluationReport,
    pub report_full: EvaluationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub n_clusters: usize,
    pub n_samples: usize,
    pub n_partial: usize,
    pub config: HarvestConfig,
    pub rows: Vec<MethodRow>,
}

impl ComparisonReport {
    pub fn row(&self, method: &str) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    /// `method,partial,full,delta_rel_partial,delta_rel_full` lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,partial,full,delta_rel_partial,delta_rel_full\n");
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.6},{:.6},{},{}\n",
                r.method,
                r.partial,
                r.full,
                fmt(r.delta_rel_partial),
                fmt(r.delta_rel_full)
            ));
        }
        out
    }
}

/// Relative improvement `(h_ich - h_other) / h_other`.
pub fn delta_rel(h_ich: f64, h_other: f64) -> Option<f64> {
    (h_other > 0.0).then(|| (h_ich - h_other) / h_other)
}

/// Runs ICH (with full assignment), then every baseline with the number of
/// clusters ICH produced, and scores all of them on the partial (ICH
/// surviving samples) and full sample sets.
pub fn compare_runs(
    dataset: &LabeledDataset,
    config: &HarvestConfig,
    baselines: &[Baseline],
) -> Result<ComparisonReport> {
    compare_runs_with(&StrategyRegistry::builtin(), dataset, config, baselines)
}

pub fn compare_runs_with(
    registry: &StrategyRegistry,
    dataset: &LabeledDataset,
    config: &HarvestConfig,
    baselines: &[Baseline],
) -> Result<ComparisonReport> {
    let labels = dataset.labels().ok_or(IchError::Unlabeled)?;
    let ich_config = HarvestConfig {
        full_assign: true,
        ..config.clone()
    };
    let outcome = run_ich_with(registry, dataset, &ich_config)?;
    let k = outcome.n_clusters();
    let partial = outcome.partial_assignment();
    let partial_idx: Vec<usize> = partial.keys().copied().collect();
    let full = outcome
        .final_assignment
        .as_ref()
        .expect("full assignment requested");

    let score = |cluster_of: &dyn Fn(usize) -> usize, idx: &[usize]| -> Result<EvaluationReport> {
        let l: Vec<String> = idx.iter().map(|&i| labels[i].clone()).collect();
        let c: Vec<usize> = idx.iter().map(|&i| cluster_of(i)).collect();
        evaluate(&l, &c)
    };
    let all: Vec<usize> = (0..dataset.n_samples()).collect();

    let ich_partial = score(&|i| partial[&i], &partial_idx)?;
    let ich_full = score(&|i| full[&i], &all)?;
    let mut rows = vec![MethodRow {
        method: "ICH".into(),
        partial: ich_partial.homogeneity,
        full: ich_full.homogeneity,
        delta_rel_partial: None,
        delta_rel_full: None,
        report_partial: ich_partial,
        report_full: ich_full,
    }];

    for b in baselines {
        let cfg = HarvestConfig {
            dimred: b.dimred.clone().unwrap_or_else(|| config.dimred.clone()),
            cluster: b.cluster.clone().unwrap_or_else(|| config.cluster.clone()),
            ..config.clone()
        };
        let features = b.features.as_ref().unwrap_or(dataset.features());
        if features.n_samples() != dataset.n_samples() {
            return Err(IchError::DimensionMismatch {
                expected: dataset.n_samples(),
                got: features.n_samples(),
            });
        }
        let assignment = run_otc_with(registry, features, &cfg, k)?;
        let ids = assignment.cluster_of();
        let rp = score(&|i| ids[i], &partial_idx)?;
        let rf = score(&|i| ids[i], &all)?;
        rows.push(MethodRow {
            method: b.name.clone(),
            partial: rp.homogeneity,
            full: rf.homogeneity,
            delta_rel_partial: delta_rel(rows[0].partial, rp.homogeneity),
            delta_rel_full: delta_rel(rows[0].full, rf.homogeneity),
            report_partial: rp,
            report_full: rf,
        });
    }

    Ok(ComparisonReport {
        n_clusters: k,
        n_samples: dataset.n_samples(),
        n_partial: partial_idx.len(),
        config: config.clone(),
        rows,
    })
}

/// Homogeneity of the surviving clusters against true labels.
pub fn partial_homogeneity(dataset: &LabeledDataset, outcome: &HarvestOutcome) -> Result<f64> {
    let labels = dataset.labels().ok_or(IchError::Unlabeled)?;
    let partial = outcome.partial_assignment();
    if partial.is_empty() {
        return Err(IchError::NoSurvivingClusters);
    }
    let l: Vec<String> = partial.keys().map(|&i| labels[i].clone()).collect();
    let c: Vec<usize> = partial.values().copied().collect();
    homogeneity_of(&l, &c)
}

/// Majority label of a set of samples (ties to the smallest name).
pub fn majority_label(labels: &[String], members: &IndexSubset) -> Option<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for i in members.iter() {
        *counts.entry(labels[i].as_str()).or_default() += 1;
    }
    let mut best: Option<(&str, usize)> = None;
    for (label, count) in counts {
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((label, count));
        }
    }
    best.map(|(l, _)| l.to_string())
}
