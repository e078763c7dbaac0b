mod common;

use std::collections::BTreeSet;

use common::*;
use ich_core::harvest::{delta_rel, partial_homogeneity};
use ich_core::{
    compare_runs, run_ich, run_otc, silhouette, ward_cluster, Baseline, FeatureMatrix,
    HarvestConfig, HarvestOutcome, IchError, IndexSubset, LabeledDataset, Metric,
};

fn three_blobs(seed: u64) -> LabeledDataset {
    blob_dataset(40, &[[0.0, 0.0], [10.0, 0.0], [5.0, 8.66]], 0.5, seed)
}

fn blob_config() -> HarvestConfig {
    HarvestConfig {
        n_pca: 2,
        n_c: 5,
        n_min: 5,
        ..HarvestConfig::default()
    }
}

fn check_partition(outcome: &HarvestOutcome, n: usize) {
    let mut seen = BTreeSet::new();
    let s = &outcome.state;
    for cl in s.harvested_clusters.iter().chain(&s.small) {
        for i in cl.members.iter() {
            assert!(seen.insert(i), "sample {i} appears twice");
        }
    }
    for i in s.rest.iter() {
        assert!(seen.insert(i), "sample {i} appears twice");
    }
    assert_eq!(seen.len(), n);
    assert!(seen.iter().all(|&i| i < n));
    assert!(s.rest.len() <= outcome.config.n_pca);
    assert!(s
        .harvested_clusters
        .iter()
        .all(|c| c.members.len() >= outcome.config.n_min));
    assert!(s
        .small
        .iter()
        .all(|c| c.members.len() < outcome.config.n_min));
    assert_eq!(
        s.iteration_log.len(),
        s.harvested_clusters.len() + s.small.len()
    );
}

#[test]
fn separated_blobs_are_harvested_purely() {
    for seed in 0..3 {
        let ds = three_blobs(seed);
        let outcome = run_ich(&ds, &blob_config()).unwrap();
        check_partition(&outcome, ds.n_samples());
        assert!(outcome.n_clusters() >= 3, "seed {seed}");
        let h = partial_homogeneity(&ds, &outcome).unwrap();
        assert_eq!(h, 1.0, "seed {seed}");
    }
}

#[test]
fn output_is_deterministic_across_thread_counts() {
    let ds = three_blobs(9);
    let config = HarvestConfig {
        full_assign: true,
        trace: true,
        ..blob_config()
    };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let outcome = pool.install(|| run_ich(&ds, &config)).unwrap();
        serde_json::to_vec(&outcome).unwrap()
    };
    let one = run(1);
    assert_eq!(one, run(1));
    assert_eq!(one, run(4));
}

#[test]
fn kmeans_runs_are_reproducible_for_a_seed() {
    let ds = three_blobs(2);
    let config = HarvestConfig {
        cluster: "kmeans".into(),
        seed: 17,
        ..blob_config()
    };
    let a = run_ich(&ds, &config).unwrap();
    let b = run_ich(&ds, &config).unwrap();
    assert_eq!(a, b);
    check_partition(&a, ds.n_samples());
}

#[test]
fn identical_rows_terminate() {
    let m = FeatureMatrix::new(30, 4, vec![1.5; 120]).unwrap();
    let ds = LabeledDataset::with_generated_ids(m, None).unwrap();
    let config = HarvestConfig {
        n_pca: 3,
        n_c: 4,
        n_min: 2,
        ..HarvestConfig::default()
    };
    let outcome = run_ich(&ds, &config).unwrap();
    check_partition(&outcome, 30);
    assert!(outcome.state.iteration_log.len() <= 30 - 3);
}

#[test]
fn one_sample_per_cluster_terminates() {
    let mut r = rng(4);
    let ds = LabeledDataset::with_generated_ids(random_matrix(&mut r, 10, 3), None).unwrap();
    let config = HarvestConfig {
        n_pca: 2,
        n_c: 15,
        n_min: 5,
        ..HarvestConfig::default()
    };
    let outcome = run_ich(&ds, &config).unwrap();
    check_partition(&outcome, 10);
    assert_eq!(outcome.state.iteration_log.len(), 8);
    assert!(outcome
        .state
        .iteration_log
        .iter()
        .all(|r| r.harvested_size == 1));
    assert_eq!(outcome.n_clusters(), 0);
    assert_eq!(outcome.state.rest.len(), 2);

    let full = HarvestConfig {
        full_assign: true,
        ..config
    };
    assert!(matches!(
        run_ich(&ds, &full),
        Err(IchError::NoSurvivingClusters)
    ));
}

#[test]
fn silhouette_is_taken_in_the_projected_space() {
    let ds = three_blobs(5);
    let config = HarvestConfig {
        trace: true,
        silhouette_metric: Metric::Euclidean,
        ..blob_config()
    };
    let outcome = run_ich(&ds, &config).unwrap();
    let models = outcome.per_iteration_models.as_ref().unwrap();
    let s = &outcome.state;
    let mut by_iter: Vec<&IndexSubset> = vec![&s.rest; s.iteration_log.len()];
    for cl in s.harvested_clusters.iter().chain(&s.small) {
        by_iter[cl.iteration - 1] = &cl.members;
    }
    let mut remaining = IndexSubset::full(ds.n_samples());
    for (rec, model) in s.iteration_log.iter().zip(models) {
        let sub = ds.features().select_rows(remaining.as_slice()).unwrap();
        let projected = model.project(&sub).unwrap();
        assert_eq!(projected.n_dims(), rec.n_components);
        let a = ward_cluster(&projected, rec.n_clusters).unwrap();
        let harvested = by_iter[rec.iteration - 1];
        if a.k() >= 2 {
            let rep = silhouette(&projected, &a, Metric::Euclidean).unwrap();
            assert!((rep.best_score() - rec.s_max.unwrap()).abs() < 1e-12);
            // The harvested cluster has the highest mean silhouette.
            let oracle = brute_silhouette(&rows_of(&projected), a.cluster_of(), euclid);
            let chosen: Vec<usize> = (0..a.len())
                .filter(|&p| a.cluster_of()[p] == rec.chosen_cluster)
                .collect();
            let mean = chosen.iter().map(|&p| oracle[p]).sum::<f64>() / chosen.len() as f64;
            assert!((mean - rec.s_max.unwrap()).abs() < 1e-9);
            for c in 0..a.k() {
                let members: Vec<usize> =
                    (0..a.len()).filter(|&p| a.cluster_of()[p] == c).collect();
                let m = members.iter().map(|&p| oracle[p]).sum::<f64>() / members.len() as f64;
                assert!(m <= mean + 1e-9);
            }
        }
        let expected = remaining
            .compose(&IndexSubset::new(a.cluster_positions()[rec.chosen_cluster].clone()).unwrap())
            .unwrap();
        assert_eq!(&expected, harvested);
        remaining = remaining.difference(harvested);
    }
}

#[test]
fn full_assignment_keeps_harvest_and_uses_nearest_member() {
    let ds = blob_dataset(
        30,
        &[[0.0, 0.0], [6.0, 0.0], [3.0, 5.0], [9.0, 6.0]],
        1.2,
        3,
    );
    let config = HarvestConfig {
        n_pca: 2,
        n_c: 6,
        n_min: 8,
        full_assign: true,
        ..HarvestConfig::default()
    };
    let outcome = run_ich(&ds, &config).unwrap();
    check_partition(&outcome, ds.n_samples());
    let full = outcome.final_assignment.as_ref().unwrap();
    assert_eq!(full.len(), ds.n_samples());
    let partial = outcome.partial_assignment();
    for (i, c) in &partial {
        assert_eq!(full[i], *c);
    }
    let anchors: Vec<usize> = partial.keys().copied().collect();
    let anchor_rows: Vec<Vec<f64>> = anchors
        .iter()
        .map(|&i| ds.features().row(i).to_vec())
        .collect();
    let anchor_clusters: Vec<usize> = partial.values().copied().collect();
    let orphans: Vec<usize> = (0..ds.n_samples())
        .filter(|i| !partial.contains_key(i))
        .collect();
    let orphan_rows: Vec<Vec<f64>> = orphans
        .iter()
        .map(|&i| ds.features().row(i).to_vec())
        .collect();
    let expected = exhaustive_nn(&anchor_rows, &anchor_clusters, &orphan_rows);
    for (i, c) in orphans.iter().zip(expected) {
        assert_eq!(full[i], c);
    }
    let rows = outcome.assignment_rows();
    assert_eq!(rows.len(), ds.n_samples());
}

#[test]
fn comparison_uses_the_harvested_cluster_count() {
    let ds = blob_dataset(25, &[[0.0, 0.0], [6.0, 0.0], [3.0, 5.0]], 1.5, 8);
    let config = blob_config();
    let report = compare_runs(&ds, &config, &[Baseline::otc(), Baseline::features_ac()]).unwrap();
    let k = report.n_clusters;
    let outcome = run_ich(
        &ds,
        &HarvestConfig {
            full_assign: true,
            ..config.clone()
        },
    )
    .unwrap();
    assert_eq!(k, outcome.n_clusters());
    assert_eq!(report.n_partial, outcome.partial_assignment().len());
    let ich = report.row("ICH").unwrap();
    assert!((ich.partial - partial_homogeneity(&ds, &outcome).unwrap()).abs() < 1e-12);
    for name in ["OTC", "CNN+AC"] {
        let row = report.row(name).unwrap();
        assert_eq!(row.report_full.n_clusters, k, "{name}");
        assert_eq!(row.report_full.n_samples, ds.n_samples());
        assert_eq!(row.report_partial.n_samples, report.n_partial);
        let expect = (ich.partial - row.partial) / row.partial;
        assert!((row.delta_rel_partial.unwrap() - expect).abs() < 1e-12);
        assert!(
            (row.delta_rel_full.unwrap() - delta_rel(ich.full, row.full).unwrap()).abs() < 1e-12
        );
    }
    let otc = run_otc(&ds, &config, k).unwrap();
    assert_eq!(otc.k(), k);
    assert_eq!(
        report.to_csv().lines().next().unwrap(),
        "method,partial,full,delta_rel_partial,delta_rel_full"
    );
    assert_eq!(report.to_csv().lines().count(), 4);
}

#[test]
fn kmeans_ablation_produces_a_report() {
    let ds = three_blobs(1);
    let config = HarvestConfig {
        cluster: "kmeans".into(),
        ..blob_config()
    };
    let report = compare_runs(&ds, &config, &[Baseline::otc()]).unwrap();
    assert!(report.row("ICH").unwrap().partial > 0.99);
    assert_eq!(
        report.row("OTC").unwrap().report_full.n_clusters,
        report.n_clusters
    );
}

#[test]
fn bad_configuration_is_rejected() {
    let ds = three_blobs(0);
    let bad = [
        HarvestConfig {
            n_c: 1,
            ..blob_config()
        },
        HarvestConfig {
            n_pca: 0,
            ..blob_config()
        },
        HarvestConfig {
            n_min: 0,
            ..blob_config()
        },
        HarvestConfig {
            cluster: "dbscan".into(),
            ..blob_config()
        },
    ];
    for config in bad {
        assert!(run_ich(&ds, &config).unwrap_err().is_usage());
    }
    assert!(matches!(
        run_otc(&ds, &blob_config(), ds.n_samples() + 1),
        Err(IchError::ClusterCountOutOfRange { .. })
    ));
    let unlabeled = LabeledDataset::with_generated_ids(ds.features().clone(), None).unwrap();
    assert!(matches!(
        compare_runs(&unlabeled, &blob_config(), &[]),
        Err(IchError::Unlabeled)
    ));
}
