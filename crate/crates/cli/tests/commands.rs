//! Command plumbing: IDX files, checkpoints, configuration, run artifacts
//! and exit codes of the `qfcn` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Stdio};

use qfcn_cli::idx::{encode_images, encode_labels, load_idx, write_idx, MnistSet, SIDE};
use qfcn_cli::output::{CHECKPOINT_FILE, CONFIG_FILE, METRICS_FILE, SUMMARY_FILE};
use qfcn_cli::{checkpoint, train_mnist, train_ts, CliError};

fn fixture(count: usize) -> MnistSet {
    let images = (0..count * SIDE * SIDE).map(|i| ((i * 37 + i / 7) % 256) as u8).collect();
    let labels = (0..count).map(|i| (i % 10) as u8).collect();
    MnistSet::new(images, labels).unwrap()
}

fn write_fixture(dir: &Path, train: usize, test: usize) {
    write_idx(
        &fixture(train),
        &dir.join("train-images-idx3-ubyte"),
        &dir.join("train-labels-idx1-ubyte"),
    )
    .unwrap();
    write_idx(
        &fixture(test),
        &dir.join("t10k-images-idx3-ubyte"),
        &dir.join("t10k-labels-idx1-ubyte"),
    )
    .unwrap();
}

#[test]
fn idx_fixture_round_trips_to_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let set = fixture(3);
    let (img, lbl) = (dir.path().join("img"), dir.path().join("lbl"));
    write_idx(&set, &img, &lbl).unwrap();
    let back = load_idx(&img, &lbl).unwrap();
    assert_eq!(back, set);
    assert_eq!(back.len(), 3);
    assert_eq!(fs::read(&img).unwrap(), encode_images(&back));
    assert_eq!(fs::read(&lbl).unwrap(), encode_labels(&back));
}

#[test]
fn idx_errors_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let set = fixture(2);
    let (img, lbl) = (dir.path().join("img"), dir.path().join("lbl"));
    write_idx(&set, &img, &lbl).unwrap();

    let err = load_idx(&lbl, &lbl).unwrap_err();
    assert!(matches!(err, CliError::Format { .. }), "{err}");
    assert!(err.to_string().contains("lbl"));

    let bytes = fs::read(&img).unwrap();
    fs::write(&img, &bytes[..bytes.len() - 5]).unwrap();
    match load_idx(&img, &lbl).unwrap_err() {
        CliError::Truncated { expected, actual, .. } => assert_eq!(expected, actual + 5),
        other => panic!("unexpected {other}"),
    }

    write_idx(&fixture(3), &img, &dir.path().join("other")).unwrap();
    assert!(load_idx(&img, &lbl).is_err());
}

#[test]
fn checkpoint_file_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.bin");
    let params = vec![0.0, -0.0, 1.0 / 3.0, f64::MIN_POSITIVE, -1e300, std::f64::consts::PI];
    checkpoint::save(&path, &params).unwrap();
    let back = checkpoint::load(&path).unwrap();
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back), bits(&params));
    let bytes = fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], b"QFCN");
    assert_eq!(bytes.len(), 16 + 8 * params.len());
}

#[test]
fn config_file_and_overrides_layer() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.cfg");
    fs::write(&file, "# comment\nepochs = 7\nlr = 0.5\n").unwrap();
    let cfg = train_ts::resolve_config(Some(&file), &["lr=0.25".into()]).unwrap();
    assert_eq!(cfg.get::<usize>("epochs").unwrap(), 7);
    assert_eq!(cfg.get::<f64>("lr").unwrap(), 0.25);
    let default_batch = train_ts::DEFAULTS.iter().find(|(k, _)| *k == "batch").unwrap().1;
    assert_eq!(cfg.raw("batch").unwrap(), default_batch);

    fs::write(&file, "epochz = 7\n").unwrap();
    assert!(matches!(
        train_ts::resolve_config(Some(&file), &[]).unwrap_err(),
        CliError::Config(_)
    ));
}

fn ts_overrides(out: &Path, epochs: usize) -> Vec<String> {
    vec![
        "nodes=4".into(),
        "steps=120".into(),
        format!("epochs={epochs}"),
        format!("output_dir={}", out.display()),
    ]
}

#[test]
fn ts_zero_epochs_writes_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = train_ts::resolve_config(None, &ts_overrides(dir.path(), 0)).unwrap();
    let s = train_ts::cmd_train_ts(&cfg, &mut std::io::sink()).unwrap();
    assert!(s.curve.is_empty());
    assert_eq!(s.mae, s.untrained_mae);
    let csv = fs::read_to_string(dir.path().join(METRICS_FILE)).unwrap();
    assert_eq!(csv, "epoch,loss,train_mae,mae,mse\n");
    let summary = fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap();
    assert!(summary.starts_with("summary: nodes=4 steps=120 epochs=0"));
    assert!(dir.path().join(CONFIG_FILE).is_file());
    assert!(dir.path().join(CHECKPOINT_FILE).is_file());
}

#[test]
fn ts_runs_with_same_seed_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let cfg = train_ts::resolve_config(None, &ts_overrides(dir.path(), 3)).unwrap();
        train_ts::cmd_train_ts(&cfg, &mut std::io::sink()).unwrap();
    }
    for f in [METRICS_FILE, CHECKPOINT_FILE, "series.csv", "adjacency.csv"] {
        let (x, y) = (fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
        assert_eq!(x, y, "{f} differs");
    }
    let csv = fs::read_to_string(a.path().join(METRICS_FILE)).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

fn mnist_overrides(data: &Path, out: &Path, epochs: usize) -> Vec<String> {
    vec![
        format!("data_dir={}", data.display()),
        format!("output_dir={}", out.display()),
        "train_count=16".into(),
        "test_count=8".into(),
        "batch=8".into(),
        "conv1_channels=2".into(),
        "conv2_channels=2".into(),
        format!("epochs={epochs}"),
    ]
}

#[test]
fn mnist_runs_are_deterministic_and_zero_epochs_is_header_only() {
    let data = tempfile::tempdir().unwrap();
    write_fixture(data.path(), 16, 8);

    let empty = tempfile::tempdir().unwrap();
    let cfg = train_mnist::resolve_config(None, &mnist_overrides(data.path(), empty.path(), 0))
        .unwrap();
    let s = train_mnist::cmd_train_mnist(&cfg, &mut std::io::sink()).unwrap();
    assert!(s.curve.is_empty());
    assert_eq!(
        fs::read_to_string(empty.path().join(METRICS_FILE)).unwrap(),
        "epoch,loss,accuracy,test_loss,test_accuracy\n"
    );

    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let cfg =
            train_mnist::resolve_config(None, &mnist_overrides(data.path(), dir.path(), 2)).unwrap();
        train_mnist::cmd_train_mnist(&cfg, &mut std::io::sink()).unwrap();
    }
    assert_eq!(
        fs::read(a.path().join(METRICS_FILE)).unwrap(),
        fs::read(b.path().join(METRICS_FILE)).unwrap()
    );
}

#[test]
fn missing_mnist_reports_download_instructions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = train_mnist::resolve_config(
        None,
        &[format!("data_dir={}", dir.path().display()), format!("output_dir={}", dir.path().display())],
    )
    .unwrap();
    let err = train_mnist::cmd_train_mnist(&cfg, &mut std::io::sink()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("train-images-idx3-ubyte"));
}

fn qfcn() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qfcn"))
}

#[test]
fn binary_exit_codes() {
    let out = qfcn().args(["verify", "--suite", "conv"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("PASS conv"));

    let out = qfcn().args(["train-ts", "no_such_key=1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let out = qfcn()
        .args(["train-mnist", &format!("data_dir={}", dir.path().display())])
        .env("QFCN_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_dir_env_sits_below_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let (env_dir, cli_dir) = (dir.path().join("env"), dir.path().join("cli"));
    let args = ["train-ts", "nodes=3", "steps=80", "epochs=1"];
    let status =
        qfcn().args(args).env("QFCN_OUTPUT_DIR", &env_dir).stdout(Stdio::null()).status().unwrap();
    assert!(status.success());
    assert!(env_dir.join(METRICS_FILE).is_file());

    let status = qfcn()
        .args(args)
        .arg(format!("output_dir={}", cli_dir.display()))
        .env("QFCN_OUTPUT_DIR", &env_dir)
        .stdout(Stdio::null())
        .status()
        .unwrap();
    assert!(status.success());
    assert!(cli_dir.join(METRICS_FILE).is_file());
}

#[test]
fn bench_tiny_scale_reports_only() {
    let out = qfcn().args(["bench-conv", "--scale", "tiny", "--reps", "5"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("ratio fft/direct"));
    assert!(!text.contains("FAIL"));
}
