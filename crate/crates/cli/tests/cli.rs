use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ich_core::synthgen::{in_disc, weighted_mean_radius};
use serde_json::Value;
use tempfile::TempDir;

fn ich(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    ich_env(args, &[])
}

fn ich_env(args: &[&dyn AsRef<std::ffi::OsStr>], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ich"));
    for a in args {
        cmd.arg(a);
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn ok(out: Output) -> String {
    assert_eq!(
        code(&out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Labeled CSV of three well-separated 2-D blobs.
fn blob_csv(dir: &Path) -> PathBuf {
    let mut s = String::from("id,label,x,y\n");
    let centers = [(0.0, 0.0), (10.0, 0.0), (5.0, 8.0)];
    for (b, (cx, cy)) in centers.iter().enumerate() {
        for i in 0..20 {
            let t = i as f64;
            let (dx, dy) = ((t * 0.37).sin() * 0.4, (t * 0.61).cos() * 0.4);
            s.push_str(&format!("b{b}_{i},blob{b},{},{}\n", cx + dx, cy + dy));
        }
    }
    let path = dir.join("blobs.csv");
    fs::write(&path, s).unwrap();
    path
}

fn labeled_csv(dir: &Path, name: &str, labels: &[&str]) -> PathBuf {
    let mut s = String::from("id,label,f0\n");
    for (i, l) in labels.iter().enumerate() {
        s.push_str(&format!("s{i},{l},{i}\n"));
    }
    let path = dir.join(name);
    fs::write(&path, s).unwrap();
    path
}

fn assignment_csv(dir: &Path, name: &str, clusters: &[usize]) -> PathBuf {
    let mut s = String::from("sample_id,cluster_id\n");
    for (i, c) in clusters.iter().enumerate() {
        s.push_str(&format!("s{i},{c}\n"));
    }
    let path = dir.join(name);
    fs::write(&path, s).unwrap();
    path
}

#[test]
fn generate_writes_features_images_and_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        ok(ich(&[
            &"generate",
            &"--classes",
            &"Center=40,Ring=40",
            &"--size",
            &"64",
            &"--seed",
            &"0",
            &"--out",
            out,
        ]));
    }
    let fa = fs::read(a.join("features.ichf")).unwrap();
    assert_eq!(fa, fs::read(b.join("features.ichf")).unwrap());
    let pngs = fs::read_dir(a.join("images"))
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "png")
        })
        .count();
    assert_eq!(pngs, 80);
    let ds = ich_core::read_feature_file(a.join("features.ichf")).unwrap();
    assert_eq!((ds.n_samples(), ds.n_dims()), (80, 4096));

    let (ma, mb) = (json(a.join("manifest.json")), json(b.join("manifest.json")));
    assert_eq!(ma["outputs"], mb["outputs"]);
    assert_eq!(ma["command"], "generate");
    assert_eq!(ma["seed"], 0);
    assert_eq!(ma["outputs"].as_array().unwrap().len(), 82);
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&ich(&[&"generate", &"--classes", &"Center=4"])), 2);
    assert_eq!(
        code(&ich(&[
            &"generate",
            &"--classes",
            &"Center=x",
            &"--out",
            &tmp.path()
        ])),
        2
    );
    assert_eq!(code(&ich(&[&"frobnicate"])), 2);

    let blobs = blob_csv(tmp.path());
    let out = tmp.path().join("otc");
    assert_eq!(
        code(&ich(&[
            &"run", &"otc", &blobs, &"--n-pca", &"2", &"--k", &"61", &"--out", &out
        ])),
        2
    );
    assert_eq!(
        code(&ich(&[
            &"run",
            &"ich",
            &blobs,
            &"--n-clusters",
            &"1",
            &"--out",
            &out
        ])),
        2
    );
    assert_eq!(
        code(&ich(&[
            &"run",
            &"ich",
            &blobs,
            &"--cluster",
            &"dbscan",
            &"--out",
            &out
        ])),
        2
    );
    let bad_threads = ich_env(
        &[&"run", &"ich", &blobs, &"--out", &out],
        &[("ICH_THREADS", "zero")],
    );
    assert_eq!(code(&bad_threads), 2);
}

#[test]
fn data_errors_exit_with_one() {
    let tmp = TempDir::new().unwrap();
    let empty = tmp.path().join("empty.csv");
    fs::write(&empty, "id,label,x\n").unwrap();
    let out = tmp.path().join("out");
    assert_eq!(code(&ich(&[&"run", &"ich", &empty, &"--out", &out])), 1);
    let garbage = tmp.path().join("garbage.ichf");
    fs::write(&garbage, b"not a feature file").unwrap();
    assert_eq!(code(&ich(&[&"run", &"ich", &garbage, &"--out", &out])), 1);
    assert_eq!(
        code(&ich(&[
            &"run",
            &"ich",
            &tmp.path().join("missing.ichf"),
            &"--out",
            &out
        ])),
        1
    );
}

#[test]
fn ich_run_on_blobs() {
    let tmp = TempDir::new().unwrap();
    let blobs = blob_csv(tmp.path());
    let out = tmp.path().join("ich");
    let stdout = ok(ich(&[
        &"run",
        &"ich",
        &blobs,
        &"--n-pca",
        &"2",
        &"--n-clusters",
        &"5",
        &"--full-assign",
        &"--out",
        &out,
    ]));
    let first = stdout.lines().next().unwrap();
    assert!(
        first.starts_with("iter 1: remaining 60, harvested size "),
        "{first}"
    );
    assert!(
        first.contains(", s_max ") && first.contains(", majority blob"),
        "{first}"
    );

    let doc = json(out.join("outcome.json"));
    assert_eq!(doc["method"], "ich");
    assert!(!doc["clusters"].as_array().unwrap().is_empty());
    assert_eq!(doc["final_assignment"].as_object().unwrap().len(), 60);
    let csv = fs::read_to_string(out.join("assignments.csv")).unwrap();
    assert!(csv.starts_with("sample_id,cluster_id,assigned_stage\n"));
    assert_eq!(csv.lines().count(), 61);

    let eval = tmp.path().join("eval");
    ok(ich(&[
        &"evaluate",
        &out.join("assignments.csv"),
        &blobs,
        &"--out",
        &eval,
    ]));
    let report = json(eval.join("evaluation.json"));
    assert_eq!(report["partial"]["homogeneity"], 1.0);

    // Same outputs with a different worker count.
    let again = tmp.path().join("ich2");
    ok(ich_env(
        &[
            &"run",
            &"ich",
            &blobs,
            &"--n-pca",
            &"2",
            &"--n-clusters",
            &"5",
            &"--full-assign",
            &"--out",
            &again,
        ],
        &[("ICH_THREADS", "1")],
    ));
    assert_eq!(
        json(out.join("manifest.json"))["outputs"],
        json(again.join("manifest.json"))["outputs"]
    );
}

#[test]
fn otc_then_compare_on_blobs() {
    let tmp = TempDir::new().unwrap();
    let blobs = blob_csv(tmp.path());
    let out = tmp.path().join("otc");
    ok(ich(&[
        &"run", &"otc", &blobs, &"--n-pca", &"2", &"--k", &"3", &"--out", &out,
    ]));
    let csv = fs::read_to_string(out.join("assignments.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| l.ends_with(",direct")).count(), 60);

    let cmp = tmp.path().join("cmp");
    let stdout = ok(ich(&[
        &"compare",
        &blobs,
        &"--n-pca",
        &"2",
        &"--n-clusters",
        &"5",
        &"--out",
        &cmp,
    ]));
    assert!(stdout.starts_with("method,partial,full,delta_rel_partial,delta_rel_full\n"));
    let report = json(cmp.join("comparison.json"));
    let rows = report["rows"].as_array().unwrap();
    let methods: Vec<&str> = rows.iter().map(|r| r["method"].as_str().unwrap()).collect();
    assert_eq!(methods, ["ICH", "OTC", "CNN+AC"]);
}

#[test]
fn evaluate_reference_cases() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let two = labeled_csv(d, "two.csv", &["a", "a", "b", "b"]);
    let cases = [
        ("perfect", vec![0, 0, 1, 1], two.clone(), 1.0),
        ("single", vec![0, 0, 0, 0], two.clone(), 0.0),
        (
            "contingency",
            vec![0, 0, 0, 1],
            labeled_csv(d, "c.csv", &["c0", "c0", "c1", "c1"]),
            0.311_278_124_459_132_8,
        ),
    ];
    for (name, clusters, features, expected) in cases {
        let assignments = assignment_csv(d, &format!("{name}.csv"), &clusters);
        let out = d.join(name);
        ok(ich(&[&"evaluate", &assignments, &features, &"--out", &out]));
        let h = json(out.join("evaluation.json"))["partial"]["homogeneity"]
            .as_f64()
            .unwrap();
        assert!((h - expected).abs() < 1e-9, "{name}: {h}");
        let confusion = fs::read_to_string(out.join("confusion.csv")).unwrap();
        assert!(confusion.starts_with("true_class,"));
    }

    let mut unlabeled = String::from("id,f0\n");
    for i in 0..4 {
        unlabeled.push_str(&format!("s{i},{i}\n"));
    }
    fs::write(d.join("unlabeled.csv"), unlabeled).unwrap();
    let assignments = assignment_csv(d, "u.csv", &[0, 0, 1, 1]);
    assert_eq!(
        code(&ich(&[
            &"evaluate",
            &assignments,
            &d.join("unlabeled.csv"),
            &"--out",
            &d.join("u")
        ])),
        2
    );
}

#[test]
fn evaluate_splits_partial_and_full_rows() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let features = labeled_csv(d, "f.csv", &["a", "a", "b", "b"]);
    let assignments = d.join("staged.csv");
    fs::write(
        &assignments,
        "sample_id,cluster_id,assigned_stage\ns0,0,harvest\ns1,0,harvest\ns2,1,harvest\ns3,0,nn-rest\n",
    )
    .unwrap();
    ok(ich(&[
        &"evaluate",
        &assignments,
        &features,
        &"--out",
        &d.join("e"),
    ]));
    let report = json(d.join("e/evaluation.json"));
    assert_eq!(report["partial"]["n_samples"], 3);
    assert_eq!(report["partial"]["homogeneity"], 1.0);
    assert_eq!(report["full"]["n_samples"], 4);
    assert!(report["full"]["homogeneity"].as_f64().unwrap() < 1.0);
}

fn svg_panels(svg: &str) -> usize {
    svg.matches(r#"class="panel""#).count()
}

#[test]
fn report_panels_and_degradation() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let data = d.join("data");
    ok(ich(&[
        &"generate",
        &"--classes",
        &"Center=12,Scratch=12",
        &"--size",
        &"32",
        &"--out",
        &data,
    ]));
    let features = data.join("features.ichf");

    let traced = d.join("traced");
    ok(ich(&[
        &"run",
        &"ich",
        &features,
        &"--n-pca",
        &"9",
        &"--n-clusters",
        &"4",
        &"--n-min",
        &"3",
        &"--trace",
        &"--out",
        &traced,
    ]));
    let rep = d.join("rep");
    ok(ich(&[
        &"report",
        &traced.join("outcome.json"),
        &features,
        &"--out",
        &rep,
    ]));
    let svg = fs::read_to_string(rep.join("histograms.svg")).unwrap();
    assert_eq!(svg_panels(&svg), 7);
    assert!(svg.contains("#ff7f0e"), "two labels get two colours");
    assert!(rep.join("histograms.csv").exists());
    assert!(rep.join("summary.csv").exists());

    // Same features without labels.
    let ds = ich_core::read_feature_file(&features).unwrap();
    let bare = ich_core::LabeledDataset::new(ds.features().clone(), ds.sample_ids().to_vec(), None)
        .unwrap();
    let bare_path = d.join("bare.ichf");
    ich_core::write_feature_file(&bare, &bare_path).unwrap();
    let rep2 = d.join("rep2");
    ok(ich(&[
        &"report",
        &traced.join("outcome.json"),
        &bare_path,
        &"--out",
        &rep2,
    ]));
    let svg = fs::read_to_string(rep2.join("histograms.svg")).unwrap();
    assert_eq!(svg_panels(&svg), 7);
    assert!(!svg.contains("#ff7f0e"));

    // Without trace data only the summary and mean images remain.
    let plain = d.join("plain");
    ok(ich(&[
        &"run",
        &"ich",
        &features,
        &"--n-pca",
        &"9",
        &"--n-clusters",
        &"4",
        &"--n-min",
        &"3",
        &"--out",
        &plain,
    ]));
    let rep3 = d.join("rep3");
    ok(ich(&[
        &"report",
        &plain.join("outcome.json"),
        &features,
        &"--out",
        &rep3,
    ]));
    assert!(!rep3.join("histograms.svg").exists());
    assert!(rep3.join("summary.csv").exists());
}

#[test]
fn center_mean_images_are_central() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let data = d.join("data");
    ok(ich(&[
        &"generate",
        &"--classes",
        &"Center=30",
        &"--size",
        &"32",
        &"--seed",
        &"3",
        &"--out",
        &data,
    ]));
    let features = data.join("features.ichf");
    let run = d.join("run");
    ok(ich(&[
        &"run",
        &"ich",
        &features,
        &"--n-pca",
        &"5",
        &"--n-clusters",
        &"3",
        &"--n-min",
        &"3",
        &"--out",
        &run,
    ]));
    let rep = d.join("rep");
    ok(ich(&[
        &"report",
        &run.join("outcome.json"),
        &features,
        &"--out",
        &rep,
    ]));

    let uniform = weighted_mean_radius(32, |_, _| 1.0);
    let images: Vec<PathBuf> = fs::read_dir(rep.join("mean_images"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert!(!images.is_empty());
    for path in images {
        let img = image::open(&path).unwrap().into_luma8();
        assert_eq!(img.dimensions(), (32, 32));
        // Pass cells are mid-gray, so the excess over 0.5 is the defect rate.
        let r = weighted_mean_radius(32, |row, col| {
            let v = f64::from(img.get_pixel(col as u32, row as u32).0[0]) / 255.0;
            if in_disc(32, row, col) {
                (2.0 * (v - 0.5)).max(0.0)
            } else {
                0.0
            }
        });
        // Same bound the generator tests apply to single Center maps.
        assert!(r < 0.45, "{}: {r} vs uniform {uniform}", path.display());
    }
}
