//! JSON and CSV forms of harvest results, keyed by sample id.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{ClusterAssignment, LabeledDataset};
use crate::dimred::ProjectionModel;
use crate::error::{IchError, Result};
use crate::harvest::{majority_label, AssignedStage, HarvestConfig, HarvestOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationEntry {
    pub iteration: usize,
    pub remaining: usize,
    pub n_components: usize,
    pub n_clusters: usize,
    pub harvested_size: usize,
    pub s_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub majority_label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterEntry {
    /// Final cluster id; `None` for clusters moved to the small set.
    pub id: Option<usize>,
    pub iteration: usize,
    pub members: Vec<String>,
}

/// Serialized harvest outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDocument {
    pub method: String,
    pub config: HarvestConfig,
    pub n_samples: usize,
    pub iterations: Vec<IterationEntry>,
    pub clusters: Vec<ClusterEntry>,
    pub small: Vec<ClusterEntry>,
    pub rest: Vec<String>,
    pub final_assignment: Option<BTreeMap<String, usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub models: Option<Vec<ProjectionModel>>,
}

impl OutcomeDocument {
    pub fn from_outcome(outcome: &HarvestOutcome, dataset: &LabeledDataset) -> Self {
        let ids = dataset.sample_ids();
        let labels = dataset.labels();
        let names = |s: &crate::data::IndexSubset| s.iter().map(|i| ids[i].clone()).collect();
        let mut by_iter = BTreeMap::new();
        for c in outcome
            .state
            .harvested_clusters
            .iter()
            .chain(&outcome.state.small)
        {
            by_iter.insert(c.iteration, &c.members);
        }
        let iterations = outcome
            .state
            .iteration_log
            .iter()
            .map(|r| IterationEntry {
                iteration: r.iteration,
                remaining: r.n_remaining,
                n_components: r.n_components,
                n_clusters: r.n_clusters,
                harvested_size: r.harvested_size,
                s_max: r.s_max,
                majority_label: labels
                    .and_then(|l| by_iter.get(&r.iteration).and_then(|m| majority_label(l, m))),
            })
            .collect();
        let clusters = outcome
            .state
            .harvested_clusters
            .iter()
            .enumerate()
            .map(|(id, c)| ClusterEntry {
                id: Some(id),
                iteration: c.iteration,
                members: names(&c.members),
            })
            .collect();
        let small = outcome
            .state
            .small
            .iter()
            .map(|c| ClusterEntry {
                id: None,
                iteration: c.iteration,
                members: names(&c.members),
            })
            .collect();
        OutcomeDocument {
            method: "ich".into(),
            config: outcome.config.clone(),
            n_samples: dataset.n_samples(),
            iterations,
            clusters,
            small,
            rest: names(&outcome.state.rest),
            final_assignment: outcome
                .final_assignment
                .as_ref()
                .map(|m| m.iter().map(|(&i, &c)| (ids[i].clone(), c)).collect()),
            models: outcome.per_iteration_models.clone(),
        }
    }

    /// Document for a one-time clustering of every sample.
    pub fn from_otc(
        assignment: &ClusterAssignment,
        dataset: &LabeledDataset,
        config: &HarvestConfig,
    ) -> Self {
        let ids = dataset.sample_ids();
        let mut members = vec![Vec::new(); assignment.k()];
        for (i, &c) in assignment.members().iter().zip(assignment.cluster_of()) {
            members[c].push(ids[i].clone());
        }
        OutcomeDocument {
            method: "otc".into(),
            config: config.clone(),
            n_samples: dataset.n_samples(),
            iterations: Vec::new(),
            clusters: members
                .into_iter()
                .enumerate()
                .map(|(id, members)| ClusterEntry {
                    id: Some(id),
                    iteration: 1,
                    members,
                })
                .collect(),
            small: Vec::new(),
            rest: Vec::new(),
            final_assignment: None,
            models: None,
        }
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = File::create(path).map_err(|e| IchError::io(path, e))?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n").map_err(|e| IchError::io(path, e))
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut s = String::new();
        File::open(path)
            .and_then(|mut f| f.read_to_string(&mut s))
            .map_err(|e| IchError::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }
}

/// Provenance of a row in an assignment CSV. `Direct` marks one-time
/// clustering, where every sample is clustered in a single pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Harvest,
    NnRest,
    NnSmall,
    Direct,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Harvest => "harvest",
            Stage::NnRest => "nn-rest",
            Stage::NnSmall => "nn-small",
            Stage::Direct => "direct",
        }
    }

    /// Whether the row belongs to the partial (directly clustered) set.
    pub fn is_primary(self) -> bool {
        matches!(self, Stage::Harvest | Stage::Direct)
    }
}

impl std::str::FromStr for Stage {
    type Err = IchError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "harvest" => Ok(Stage::Harvest),
            "nn-rest" => Ok(Stage::NnRest),
            "nn-small" => Ok(Stage::NnSmall),
            "direct" => Ok(Stage::Direct),
            other => Err(IchError::InvalidData(format!(
                "unknown assigned_stage {other:?}"
            ))),
        }
    }
}

impl From<AssignedStage> for Stage {
    fn from(s: AssignedStage) -> Self {
        match s {
            AssignedStage::Harvest => Stage::Harvest,
            AssignedStage::NnRest => Stage::NnRest,
            AssignedStage::NnSmall => Stage::NnSmall,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentRow {
    pub sample_id: String,
    pub cluster_id: usize,
    pub stage: Stage,
}

pub fn outcome_rows(outcome: &HarvestOutcome, dataset: &LabeledDataset) -> Vec<AssignmentRow> {
    outcome
        .assignment_rows()
        .into_iter()
        .map(|(i, c, s)| AssignmentRow {
            sample_id: dataset.sample_ids()[i].clone(),
            cluster_id: c,
            stage: s.into(),
        })
        .collect()
}

pub fn otc_rows(assignment: &ClusterAssignment, dataset: &LabeledDataset) -> Vec<AssignmentRow> {
    assignment
        .members()
        .iter()
        .zip(assignment.cluster_of())
        .map(|(i, &c)| AssignmentRow {
            sample_id: dataset.sample_ids()[i].clone(),
            cluster_id: c,
            stage: Stage::Direct,
        })
        .collect()
}

pub fn write_assignment_csv<W: Write>(rows: &[AssignmentRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["sample_id", "cluster_id", "assigned_stage"])?;
    for r in rows {
        wtr.write_record([
            r.sample_id.as_str(),
            &r.cluster_id.to_string(),
            r.stage.as_str(),
        ])?;
    }
    wtr.flush().map_err(|e| IchError::io("<csv>", e))
}

/// Reads `sample_id,cluster_id[,assigned_stage]`; a missing stage column
/// means every row was clustered directly.
pub fn read_assignment_csv<R: Read>(r: R) -> Result<Vec<AssignmentRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let has_stage = rdr.headers()?.len() >= 3;
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cluster_id = rec
            .get(1)
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| IchError::InvalidData(format!("row {line}: bad cluster_id")))?;
        let stage = if has_stage {
            rec.get(2).unwrap_or("").parse()?
        } else {
            Stage::Direct
        };
        out.push(AssignmentRow {
            sample_id: rec.get(0).unwrap_or("").trim().to_string(),
            cluster_id,
            stage,
        });
    }
    Ok(out)
}
