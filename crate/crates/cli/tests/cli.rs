use std::path::Path;
use std::process::{Command, Output};

use granlab::data::{generate_circles, CircleSpec, DatasetBundle, LabeledDataset};
use granlab::Matrix;

fn granlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_granlab"))
        .args(args)
        .env_remove("GRANLAB_DATA_DIR")
        .output()
        .expect("spawn granlab")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn circles_doc(dir: &Path, n: usize) -> std::path::PathBuf {
    let path = dir.join("circles.json");
    let out = granlab(&[
        "generate",
        "--circles",
        "4",
        "--n",
        &n.to_string(),
        "--rho",
        "0.5",
        "--seed",
        "2",
        "--out",
        p(&path),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    path
}

#[test]
fn generate_reports_dataset_shape() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    let out = granlab(&[
        "generate",
        "--circles",
        "8",
        "--n",
        "800",
        "--rho",
        "0.75",
        "--test-n",
        "80",
        "--out",
        p(&path),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let line = stdout(&out);
    assert!(line.starts_with("K=8 P=800 d=2 redundancy="), "{line}");
    let bundle = DatasetBundle::load(&path).unwrap();
    assert_eq!(bundle.test.unwrap().len(), 80);
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let out = granlab(&[
            "generate",
            "--circles",
            "4",
            "--n",
            "100",
            "--seed",
            "9",
            "--out",
            p(path),
        ]);
        assert_eq!(code(&out), 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn redundancy_above_bound_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = granlab(&[
        "generate",
        "--circles",
        "8",
        "--rho",
        "0.8",
        "--out",
        p(&dir.path().join("x.json")),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("0.75"), "{}", stderr(&out));
}

#[test]
fn conflicting_sources_are_a_usage_error() {
    let out = granlab(&[
        "generate",
        "--circles",
        "4",
        "--dataset",
        "mnist",
        "--out",
        "x.json",
    ]);
    assert_eq!(code(&out), 2);
    let out = granlab(&["generate", "--out", "x.json"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn benchmark_without_data_dir_is_a_usage_error() {
    let out = granlab(&[
        "generate",
        "--dataset",
        "kmnist",
        "--grouping",
        "kmnist_default",
        "--out",
        "x.json",
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    let out = granlab(&[
        "generate",
        "--dataset",
        "kmnist",
        "--grouping",
        "no_such_preset",
        "--data-dir",
        ".",
        "--out",
        "x.json",
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn missing_benchmark_files_are_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = granlab(&[
        "generate",
        "--dataset",
        "kmnist",
        "--grouping",
        "kmnist_default",
        "--data-dir",
        p(dir.path()),
        "--out",
        p(&dir.path().join("k.json")),
    ]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
}

#[test]
fn run_prints_summary_and_writes_record() {
    let dir = tempfile::tempdir().unwrap();
    let data = circles_doc(dir.path(), 400);
    let out_dir = dir.path().join("run");
    let out = granlab(&[
        "run",
        "--data",
        p(&data),
        "--fine-hidden",
        "8",
        "--match-capacity",
        "--train-size",
        "200",
        "--test-size",
        "100",
        "--optimizer",
        "adam",
        "--max-epochs",
        "20",
        "--seed",
        "4",
        "--out",
        p(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let line = stdout(&out);
    for key in ["acc_fine=", "acc_coarse=", "delta=", "epochs="] {
        assert!(line.contains(key), "{line}");
    }
    let doc: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("run.json")).unwrap()).unwrap();
    assert_eq!(doc["record"]["train_size"], 200);
    assert_eq!(
        doc["point"]["coarse_hidden"],
        granlab::nn::match_capacity(8, 2, 4)
    );
}

#[test]
fn run_flag_errors_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let data = circles_doc(dir.path(), 100);
    let out_dir = dir.path().join("run");
    let base = [
        "run",
        "--data",
        p(&data),
        "--fine-hidden",
        "4",
        "--test-size",
        "20",
        "--out",
        p(&out_dir),
    ];

    let too_big = granlab(&[&base[..], &["--train-size", "500"]].concat());
    assert_eq!(code(&too_big), 2);
    assert!(stderr(&too_big).contains("500"), "{}", stderr(&too_big));

    let bad_opt = granlab(&[&base[..], &["--train-size", "50", "--optimizer", "rmsprop"]].concat());
    assert_eq!(code(&bad_opt), 2);

    let both = granlab(
        &[
            &base[..],
            &[
                "--train-size",
                "50",
                "--coarse-hidden",
                "3",
                "--match-capacity",
            ],
        ]
        .concat(),
    );
    assert_eq!(code(&both), 2);

    let missing = granlab(&["run", "--data", p(&data), "--out", p(&out_dir)]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn run_divergence_is_a_runtime_failure() {
    // Features this large overflow the forward pass.
    let dir = tempfile::tempdir().unwrap();
    let mut data = generate_circles(&CircleSpec::new(4, 60, 0.0, 1)).unwrap();
    let rows: Vec<Vec<f64>> = data
        .features()
        .iter_rows()
        .map(|r| r.iter().map(|v| v.signum() * 1.5e308).collect())
        .collect();
    data = LabeledDataset::new(
        "huge",
        Matrix::from_rows(&rows).unwrap(),
        data.fine_labels().to_vec(),
        data.hierarchy().clone(),
        data.fine_names().to_vec(),
    )
    .unwrap();
    let path = dir.path().join("huge.json");
    DatasetBundle::new(serde_json::Value::Null, data, None)
        .save(&path)
        .unwrap();
    let out = granlab(&[
        "run",
        "--data",
        p(&path),
        "--fine-hidden",
        "4",
        "--train-size",
        "40",
        "--test-size",
        "10",
        "--out",
        p(&dir.path().join("run")),
    ]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    assert!(stderr(&out).contains("diverged"), "{}", stderr(&out));
}

fn write_spec(dir: &Path, data: &Path, train_size: usize) -> std::path::PathBuf {
    let spec = serde_json::json!({
        "name": "cli-test",
        "source": { "kind": "file", "path": data },
        "axis": "train_size",
        "values": [train_size],
        "fine_hidden": 4,
        "train": { "optimizer": "adam", "lr_start": 0.001, "lr_end": 0.001, "max_epochs": 5 },
        "replicates": 2,
        "test_size": 40,
        "aggregate": "quartiles"
    });
    let path = dir.join("spec.json");
    std::fs::write(&path, spec.to_string()).unwrap();
    path
}

#[test]
fn sweep_writes_csv_and_archive() {
    let dir = tempfile::tempdir().unwrap();
    let data = circles_doc(dir.path(), 200);
    let spec = write_spec(dir.path(), &data, 100);
    let out_dir = dir.path().join("sweep");
    let out = granlab(&["sweep", "--spec", p(&spec), "--out", p(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(
        stdout(&out).contains("[1/1] train_size=100"),
        "{}",
        stdout(&out)
    );
    let csv = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert!(csv.starts_with("# granlab-sweep v1 axis=train_size aggregate=quartiles"));
    assert_eq!(csv.lines().count(), 3);
    let archive = granlab::harness::load_archive(&out_dir.join("sweep.json")).unwrap();
    assert_eq!(archive.points[0].replicates.len(), 2);

    let svg = dir.path().join("acc.svg");
    let out = granlab(&[
        "plot",
        "--csv",
        p(&out_dir.join("sweep.csv")),
        "--style",
        "accuracy_vs_size",
        "--out",
        p(&svg),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(std::fs::read_to_string(&svg)
        .unwrap()
        .contains("fine-trained"));
}

#[test]
fn sweep_with_all_replicates_failing_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let data = circles_doc(dir.path(), 100);
    // 60 training samples remain after holding out 40 for testing.
    let spec = write_spec(dir.path(), &data, 80);
    let out = granlab(&[
        "sweep",
        "--spec",
        p(&spec),
        "--out",
        p(&dir.path().join("s")),
    ]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    assert!(stdout(&out).contains("ok=0 failed=2"), "{}", stdout(&out));
}

#[test]
fn invalid_spec_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"axis": "train_size"}"#).unwrap();
    let out = granlab(&["sweep", "--spec", p(&path), "--out", p(dir.path())]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn plot_handles_empty_and_malformed_tables() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(
        &empty,
        "# granlab-sweep v1 axis=beta aggregate=standard_error\n\
         axis_value,acc_fine_mean,acc_coarse_mean,delta,spread_low,spread_high,n_over_p,replicates,fine_low,fine_high,coarse_low,coarse_high,failures\n",
    )
    .unwrap();
    let svg = dir.path().join("e.svg");
    let out = granlab(&[
        "plot",
        "--csv",
        p(&empty),
        "--style",
        "delta_vs_axis",
        "--out",
        p(&svg),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.contains("class=\"axes\"") && text.contains("zero-line"));

    let bad = dir.path().join("bad.csv");
    let mut content = std::fs::read_to_string(&empty).unwrap();
    content.push_str("0.5,0.9,0.8,oops,0,0,1,30,0,0,0,0,0\n");
    std::fs::write(&bad, content).unwrap();
    let out = granlab(&[
        "plot",
        "--csv",
        p(&bad),
        "--style",
        "delta_vs_axis",
        "--out",
        p(&svg),
    ]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("bad.csv:3:"), "{}", stderr(&out));

    let out = granlab(&["plot", "--csv", p(&bad), "--style", "pie", "--out", p(&svg)]);
    assert_eq!(code(&out), 2);
}
