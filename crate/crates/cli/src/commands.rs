use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use ich_core::export::{
    otc_rows, outcome_rows, read_assignment_csv, write_assignment_csv, OutcomeDocument,
};
use ich_core::io::read_any;
use ich_core::quality::{evaluate as evaluate_labels, EvaluationReport};
use ich_core::report::{component_histograms, image_side, mean_image, mean_image_png};
use ich_core::synthgen::{generate_dataset, parse_class_counts};
use ich_core::{
    compare_runs, run_ich, run_otc, write_feature_file, Baseline, HarvestConfig, IchError,
    LabeledDataset, Result,
};
use serde::Serialize;
use serde_json::json;

use crate::manifest::ManifestBuilder;
use crate::{CompareArgs, EvaluateArgs, GenerateArgs, HarvestFlags, Method, ReportArgs, RunArgs};

fn harvest_config(flags: &HarvestFlags, full_assign: bool, trace: bool) -> HarvestConfig {
    HarvestConfig {
        n_pca: flags.n_pca,
        n_c: flags.n_c,
        n_min: flags.n_min,
        silhouette_metric: flags.silhouette_metric.into(),
        dimred: flags.dimred.clone(),
        cluster: flags.cluster.clone(),
        seed: flags.seed,
        full_assign,
        trace,
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| IchError::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| IchError::io(path, e))
}

pub fn generate(a: &GenerateArgs) -> Result<()> {
    let counts = parse_class_counts(&a.classes)?;
    let synth = generate_dataset(&counts, a.size, a.seed)?;
    let mut manifest = ManifestBuilder::new("generate", &a.out)?;
    write_feature_file(&synth.dataset, manifest.output("features.ichf"))?;
    let images = Path::new("images");
    for name in synth.write_image_archive(a.out.join(images))? {
        manifest.output(images.join(name));
    }
    manifest.output(images.join("manifest.csv"));
    println!(
        "wrote {} maps of size {} ({} classes) to {}",
        synth.dataset.n_samples(),
        a.size,
        counts.len(),
        a.out.display()
    );
    let classes: BTreeMap<String, usize> = counts
        .iter()
        .map(|(c, &n)| (c.name().to_string(), n))
        .collect();
    manifest.finish(
        json!({ "classes": classes, "size": a.size, "seed": a.seed }),
        Some(a.seed),
    )
}

pub fn run(a: &RunArgs) -> Result<()> {
    let dataset = read_any(&a.input)?;
    let config = harvest_config(&a.flags, a.full_assign, a.trace);
    let mut manifest = ManifestBuilder::new("run", &a.out)?;
    manifest.input(&a.input);
    let (doc, rows, k) = match a.method {
        Method::Ich => {
            let outcome = run_ich(&dataset, &config)?;
            let doc = OutcomeDocument::from_outcome(&outcome, &dataset);
            for it in &doc.iterations {
                println!(
                    "iter {}: remaining {}, harvested size {}, s_max {}, majority {}",
                    it.iteration,
                    it.remaining,
                    it.harvested_size,
                    it.s_max.map_or("n/a".into(), |s| format!("{s:.4}")),
                    it.majority_label.as_deref().unwrap_or("-")
                );
            }
            println!(
                "{} clusters kept, {} small, {} rest",
                doc.clusters.len(),
                doc.small.len(),
                doc.rest.len()
            );
            (doc, outcome_rows(&outcome, &dataset), None)
        }
        Method::Otc => {
            let k = a.k.unwrap_or(config.n_c);
            let assignment = run_otc(&dataset, &config, k)?;
            println!("{k} clusters over {} samples", dataset.n_samples());
            (
                OutcomeDocument::from_otc(&assignment, &dataset, &config),
                otc_rows(&assignment, &dataset),
                Some(k),
            )
        }
    };
    doc.write_json(manifest.output("outcome.json"))?;
    write_assignment_csv(&rows, create(&manifest.output("assignments.csv"))?)?;
    let method = match a.method {
        Method::Ich => "ich",
        Method::Otc => "otc",
    };
    manifest.finish(
        json!({ "method": method, "k": k, "harvest": config }),
        Some(config.seed),
    )
}

#[derive(Serialize)]
struct EvaluationDocument {
    n_samples: usize,
    n_assigned: usize,
    /// Rows clustered directly (`harvest` or `direct`).
    partial: EvaluationReport,
    /// Every row in the assignment file.
    full: EvaluationReport,
}

fn confusion_csv(report: &EvaluationReport) -> String {
    let c = &report.confusion;
    let mut out = String::from("true_class");
    for name in &c.classes {
        let _ = write!(out, ",{name}");
    }
    out.push_str(",clusters\n");
    for (i, name) in c.classes.iter().enumerate() {
        out.push_str(name);
        for v in &c.matrix[i] {
            let _ = write!(out, ",{v:.6}");
        }
        let _ = writeln!(out, ",{}", c.clusters_per_class[i]);
    }
    out
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let dataset = read_any(&a.features)?;
    let labels = dataset.labels().ok_or(IchError::Unlabeled)?;
    let file = File::open(&a.assignments).map_err(|e| IchError::io(&a.assignments, e))?;
    let rows = read_assignment_csv(file)?;
    let index = dataset.index_of();
    let mut seen = BTreeSet::new();
    let (mut part_l, mut part_c, mut all_l, mut all_c) = (vec![], vec![], vec![], vec![]);
    for row in &rows {
        let &i = index.get(row.sample_id.as_str()).ok_or_else(|| {
            IchError::InvalidData(format!("unknown sample id {:?}", row.sample_id))
        })?;
        if !seen.insert(i) {
            return Err(IchError::InvalidData(format!(
                "sample {:?} assigned twice",
                row.sample_id
            )));
        }
        if row.stage.is_primary() {
            part_l.push(labels[i].clone());
            part_c.push(row.cluster_id);
        }
        all_l.push(labels[i].clone());
        all_c.push(row.cluster_id);
    }
    if part_l.is_empty() {
        return Err(IchError::InvalidData(
            "no directly clustered rows to evaluate".into(),
        ));
    }
    let doc = EvaluationDocument {
        n_samples: dataset.n_samples(),
        n_assigned: rows.len(),
        partial: evaluate_labels(&part_l, &part_c)?,
        full: evaluate_labels(&all_l, &all_c)?,
    };
    println!(
        "homogeneity: partial {:.6} ({} samples), full {:.6} ({} samples)",
        doc.partial.homogeneity, doc.partial.n_samples, doc.full.homogeneity, doc.full.n_samples
    );
    let mut manifest = ManifestBuilder::new("evaluate", &a.out)?;
    manifest.input(&a.assignments);
    manifest.input(&a.features);
    write_json(&manifest.output("evaluation.json"), &doc)?;
    write_text(
        &manifest.output("confusion.csv"),
        &confusion_csv(&doc.partial),
    )?;
    write_text(
        &manifest.output("confusion_full.csv"),
        &confusion_csv(&doc.full),
    )?;
    manifest.finish(json!({}), None)
}

fn indices_of(dataset: &LabeledDataset, ids: &[String]) -> Result<Vec<usize>> {
    let index = dataset.index_of();
    ids.iter()
        .map(|id| {
            index
                .get(id.as_str())
                .copied()
                .ok_or_else(|| IchError::InvalidData(format!("unknown sample id {id:?}")))
        })
        .collect()
}

pub fn report(a: &ReportArgs) -> Result<()> {
    let doc = OutcomeDocument::read_json(&a.outcome)?;
    let dataset = read_any(&a.features)?;
    let mut manifest = ManifestBuilder::new("report", &a.out)?;
    manifest.input(&a.outcome);
    manifest.input(&a.features);

    let clusters: Vec<(Option<usize>, usize, Vec<usize>)> = doc
        .clusters
        .iter()
        .chain(&doc.small)
        .map(|c| Ok((c.id, c.iteration, indices_of(&dataset, &c.members)?)))
        .collect::<Result<_>>()?;
    let mut summary = String::from("cluster_id,iteration,size,majority_label\n");
    for (id, iteration, members) in &clusters {
        let majority = dataset.labels().and_then(|l| {
            let subset = ich_core::IndexSubset::from_unsorted(members.clone());
            ich_core::harvest::majority_label(l, &subset)
        });
        let _ = writeln!(
            summary,
            "{},{},{},{}",
            id.map(|i| i.to_string()).unwrap_or_default(),
            iteration,
            members.len(),
            majority.unwrap_or_default()
        );
    }
    write_text(&manifest.output("summary.csv"), &summary)?;

    match doc.models.as_ref().and_then(|m| m.first()) {
        Some(model) => {
            let projected = model.project(dataset.features())?;
            let first = clusters
                .iter()
                .filter(|c| c.0.is_some() || doc.clusters.is_empty())
                .min_by_key(|c| c.1)
                .map(|c| c.2.as_slice());
            let panels = component_histograms(&projected, dataset.labels(), first, a.bins)?;
            write_text(&manifest.output("histograms.csv"), &panels.to_csv())?;
            write_text(&manifest.output("histograms.svg"), &panels.to_svg())?;
            println!("{} component panels", panels.panels.len());
        }
        None => eprintln!("note: outcome has no trace models; component histograms skipped"),
    }

    let features = dataset.features();
    let image_backed = features.values().iter().all(|v| (0.0..=1.0).contains(v));
    match image_side(features.n_dims()).filter(|_| image_backed) {
        Some(side) => {
            let dir = Path::new("mean_images");
            std::fs::create_dir_all(a.out.join(dir))
                .map_err(|e| IchError::io(a.out.join(dir), e))?;
            for (id, _, members) in clusters.iter().filter(|c| c.0.is_some()) {
                let mean = mean_image(features, members)?;
                let png = mean_image_png(&mean, side)?;
                let path = manifest.output(dir.join(format!("cluster_{:03}.png", id.unwrap())));
                std::fs::write(&path, png).map_err(|e| IchError::io(&path, e))?;
            }
            println!("{} mean images", doc.clusters.len());
        }
        None => eprintln!("note: features are not image-backed; mean images skipped"),
    }
    manifest.finish(json!({ "bins": a.bins }), Some(doc.config.seed))
}

pub fn compare(a: &CompareArgs) -> Result<()> {
    let dataset = read_any(&a.input)?;
    let config = harvest_config(&a.flags, true, false);
    let mut manifest = ManifestBuilder::new("compare", &a.out)?;
    manifest.input(&a.input);
    let mut baselines = vec![Baseline::otc(), Baseline::features_ac()];
    if let Some(p) = &a.pixels {
        manifest.input(p);
        baselines.push(Baseline::pca_ac(read_any(p)?.features().clone()));
    }
    let report = compare_runs(&dataset, &config, &baselines)?;
    print!("{}", report.to_csv());
    write_json(&manifest.output("comparison.json"), &report)?;
    write_text(&manifest.output("comparison.csv"), &report.to_csv())?;
    manifest.finish(json!({ "harvest": config }), Some(config.seed))
}
