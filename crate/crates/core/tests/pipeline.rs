use std::io::Write;
use std::path::Path;

use flate2::write::GzEncoder;
use granlab::data::{
    apply_grouping, subsample, write_cifar10, write_idx, DatasetBundle, GroupingSpec, RawDataset,
    SourceRegistry, SplitKind,
};
use granlab::harness::{
    load_archive, persist, read_csv, sweep, sweep_table, AggregateMode, ExperimentSpec, Registries,
    SweepAxis,
};

fn raw(n: usize, shape: Vec<usize>) -> RawDataset {
    let d: usize = shape.iter().product();
    RawDataset {
        name: String::new(),
        image_shape: shape,
        pixels: (0..n * d).map(|i| (i * 37 % 256) as u8).collect(),
        labels: (0..n).map(|i| (i % 10) as u8).collect(),
        class_names: Vec::new(),
    }
}

fn gzip(path: &Path, bytes: &[u8]) {
    let mut enc = GzEncoder::new(std::fs::File::create(path).unwrap(), Default::default());
    enc.write_all(bytes).unwrap();
    enc.finish().unwrap();
}

fn write_mnist_like(root: &Path, name: &str, n_train: usize, n_test: usize) {
    let dir = root.join(name);
    std::fs::create_dir_all(&dir).unwrap();
    for (prefix, n) in [("train", n_train), ("t10k", n_test)] {
        let (images, labels) = write_idx(&raw(n, vec![28, 28])).unwrap();
        // Mix plain and compressed files.
        gzip(&dir.join(format!("{prefix}-images-idx3-ubyte.gz")), &images);
        std::fs::write(dir.join(format!("{prefix}-labels-idx1-ubyte")), labels).unwrap();
    }
}

#[test]
fn idx_source_grouping_and_bundle_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    write_mnist_like(tmp.path(), "kmnist", 200, 50);
    let source = SourceRegistry::builtin().get("kmnist").unwrap();
    let train = source.load(tmp.path(), SplitKind::Train).unwrap();
    assert_eq!((train.len(), train.dim()), (200, 784));
    assert_eq!(train.class_names[0], "o");

    let grouping = GroupingSpec::resolve("kmnist_default").unwrap();
    let data = apply_grouping(&train, &grouping).unwrap();
    assert_eq!(data.k(), 8);
    assert_eq!(data.len(), 160);
    assert!(data
        .features()
        .as_slice()
        .iter()
        .all(|&v| (0.0..=1.0).contains(&v)));
    // Samples of the first four kana fall in C0, i.e. coarse label 1.
    for (&fine, &y) in data.fine_labels().iter().zip(&data.coarse_labels()) {
        assert_eq!(y, u8::from(fine < 4));
    }

    let small = subsample(&data, 80, 3, true).unwrap();
    assert!(small.class_counts().iter().all(|&c| c == 10));

    let test = apply_grouping(
        &source.load(tmp.path(), SplitKind::Test).unwrap(),
        &grouping,
    )
    .unwrap();
    let bundle = DatasetBundle::new(
        serde_json::json!({"grouping": "kmnist_default"}),
        small,
        Some(test),
    );
    let path = tmp.path().join("out/bundle.json");
    bundle.save(&path).unwrap();
    assert_eq!(DatasetBundle::load(&path).unwrap(), bundle);
}

#[test]
fn cifar_source_reads_batches_from_either_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("cifar10/cifar-10-batches-bin");
    std::fs::create_dir_all(&dir).unwrap();
    for i in 1..=5 {
        let bytes = write_cifar10(&raw(4, vec![3, 32, 32])).unwrap();
        std::fs::write(dir.join(format!("data_batch_{i}.bin")), bytes).unwrap();
    }
    std::fs::write(
        dir.join("test_batch.bin"),
        write_cifar10(&raw(3, vec![3, 32, 32])).unwrap(),
    )
    .unwrap();
    let source = SourceRegistry::builtin().get("cifar10").unwrap();
    let train = source.load(tmp.path(), SplitKind::Train).unwrap();
    assert_eq!((train.len(), train.dim()), (20, 3072));
    let grouped = apply_grouping(
        &train,
        &GroupingSpec::resolve("cifar_vehicles_vs_animals").unwrap(),
    )
    .unwrap();
    assert_eq!(grouped.k(), 8);
    assert_eq!(source.load(tmp.path(), SplitKind::Test).unwrap().len(), 3);
}

#[test]
fn unknown_source_and_missing_files_are_reported() {
    assert!(SourceRegistry::builtin()
        .get("imagenet")
        .err()
        .unwrap()
        .is_usage());
    let tmp = tempfile::tempdir().unwrap();
    let err = SourceRegistry::builtin()
        .get("mnist")
        .unwrap()
        .load(tmp.path(), SplitKind::Train)
        .unwrap_err();
    assert!(!err.is_usage());
    assert!(err.to_string().contains("train-images-idx3-ubyte"), "{err}");
}

fn spec_json(extra: serde_json::Value) -> serde_json::Value {
    let mut base = serde_json::json!({
        "name": "pipeline",
        "source": { "kind": "circles", "k": 4, "redundancy": 0.25 },
        "axis": "train_size",
        "values": [40, 80],
        "fine_hidden": 4,
        "train": { "optimizer": "adam", "lr_start": 0.001, "lr_end": 0.001, "max_epochs": 4 },
        "replicates": 3,
        "test_size": 60,
        "seed": 11
    });
    for (k, v) in extra.as_object().unwrap() {
        base[k] = v.clone();
    }
    base
}

#[test]
fn spec_documents_are_validated() {
    let spec: ExperimentSpec = serde_json::from_value(spec_json(serde_json::json!({}))).unwrap();
    spec.validate().unwrap();
    assert_eq!(spec.aggregate, AggregateMode::StandardError);
    assert!(spec.stratified);

    let bad = |extra| {
        let spec: ExperimentSpec = serde_json::from_value(spec_json(extra)).unwrap();
        spec.validate().unwrap_err()
    };
    assert!(bad(serde_json::json!({"replicates": 0})).is_usage());
    assert!(bad(serde_json::json!({"values": [80, 40]})).is_usage());
    assert!(
        bad(serde_json::json!({"axis": "beta", "values": [0.5, 1.5], "train_size": 40})).is_usage()
    );
    assert!(bad(serde_json::json!({"axis": "hidden_neurons", "values": [2, 4]})).is_usage());
    let rho = bad(serde_json::json!({"source": {"kind": "circles", "k": 4, "redundancy": 0.6}}));
    assert!(rho.to_string().contains("0.5"), "{rho}");

    let unknown =
        serde_json::from_value::<ExperimentSpec>(spec_json(serde_json::json!({"epochs": 3})));
    assert!(unknown.is_err());
}

#[test]
fn sweep_persists_and_reloads() {
    let spec: ExperimentSpec = serde_json::from_value(spec_json(serde_json::json!({}))).unwrap();
    let result = sweep(
        &spec,
        &Registries::builtin(),
        &SourceRegistry::builtin(),
        |_| {},
    )
    .unwrap();
    assert_eq!(result.spec.axis, SweepAxis::TrainSize);
    let tmp = tempfile::tempdir().unwrap();
    persist(tmp.path(), &result).unwrap();
    assert_eq!(
        load_archive(&tmp.path().join("sweep.json")).unwrap(),
        result
    );

    let table = read_csv(&tmp.path().join("sweep.csv")).unwrap();
    let expected = sweep_table(&result);
    assert_eq!(table.rows.len(), 2);
    for (got, want) in table.rows.iter().zip(&expected.rows) {
        // Nine significant digits survive the text round trip.
        for (a, b) in [
            (got.acc_fine, want.acc_fine),
            (got.delta, want.delta),
            (got.n_over_p, want.n_over_p),
            (got.spread_high, want.spread_high),
        ] {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0), "{a} vs {b}");
        }
        assert_eq!(got.replicates, 3);
    }
    // Fine model: 4·(2+1) + 4·(4+1) = 32 parameters.
    assert_eq!(table.rows[0].n_over_p, 32.0 / 40.0);
}

#[test]
fn file_source_holds_out_a_test_set() {
    let tmp = tempfile::tempdir().unwrap();
    let data =
        granlab::data::generate_circles(&granlab::data::CircleSpec::new(4, 200, 0.0, 5)).unwrap();
    let path = tmp.path().join("c.json");
    DatasetBundle::new(serde_json::Value::Null, data, None)
        .save(&path)
        .unwrap();
    let spec: ExperimentSpec = serde_json::from_value(spec_json(serde_json::json!({
        "source": {"kind": "file", "path": path},
        "values": [100],
        "replicates": 2
    })))
    .unwrap();
    let result = sweep(
        &spec,
        &Registries::builtin(),
        &SourceRegistry::builtin(),
        |_| {},
    )
    .unwrap();
    let digests: Vec<&str> = result.points[0]
        .records()
        .map(|r| r.train_digest.as_str())
        .collect();
    assert_eq!(digests.len(), 2);
    assert_ne!(digests[0], digests[1]);
}
