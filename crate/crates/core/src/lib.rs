//! Iterative cluster harvesting (ICH).
//!
//! A dataset of feature vectors is reduced and clustered over and over; each
//! round the cluster with the best mean silhouette is taken out ("harvested")
//! and the rest is processed again with a freshly fitted reduction. The crate
//! also holds the one-time clustering baselines, homogeneity evaluation, a
//! synthetic wafer-map generator and the binary feature file format.

pub mod cluster;
pub mod data;
pub mod dimred;
pub mod distance;
pub mod error;
pub mod export;
pub mod harvest;
pub mod io;
pub mod quality;
pub mod report;
pub mod strategy;
pub mod synthgen;

pub use cluster::{kmeans_cluster, ward_cluster, ward_dendrogram, Clusterer, MergeStep};
pub use data::{ClusterAssignment, FeatureMatrix, IndexSubset, LabeledDataset};
pub use dimred::{fit_projection, ProjectionModel, Reducer, ReductionKind};
pub use distance::Metric;
pub use error::{IchError, Result};
pub use harvest::{
    compare_runs, run_ich, run_otc, Baseline, ComparisonReport, HarvestConfig, HarvestOutcome,
    HarvestState,
};
pub use io::{read_feature_file, write_feature_file};
pub use quality::{
    homogeneity, homogeneity_of, majority_confusion, nearest_neighbor_assign, silhouette,
    ContingencyTable, EvaluationReport, SilhouetteReport,
};
pub use strategy::StrategyRegistry;
