//! `qfcn train-mnist`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use qfcn_core::encode::NoiseModel;
use qfcn_core::fourier_conv::Simulator;
use qfcn_core::models::{ClassifierConfig, ImageSample, QfcnClassifier};
use qfcn_core::train::{train_epoch, GradMode, SgdState, TrainConfig, Trainable};

use crate::checkpoint;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::idx::{load_idx, MnistSet};
use crate::output::{self, CsvLog};

pub const MNIST_DIR_ENV: &str = "QFCN_MNIST_DIR";
const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// Full-dataset reference accuracy and tolerance reported by full runs.
pub const REFERENCE_ACCURACY: f64 = 0.963;
pub const REFERENCE_TOLERANCE: f64 = 0.015;

/// Seed tag for the evaluation noise, distinct from every batch tag.
const EVAL_NOISE_TAG: u64 = u64::MAX;

pub fn defaults() -> Vec<(&'static str, String)> {
    let data_dir = std::env::var(MNIST_DIR_ENV).unwrap_or_else(|_| "data/mnist".into());
    [
        ("data_dir", data_dir.as_str()),
        ("train_images", TRAIN_IMAGES),
        ("train_labels", TRAIN_LABELS),
        ("test_images", TEST_IMAGES),
        ("test_labels", TEST_LABELS),
        ("train_count", "2000"),
        ("test_count", "1000"),
        ("full_run", "false"),
        ("eps", "0.01"),
        ("cap_c", "10"),
        ("shots", "none"),
        ("lr", "0.02"),
        ("lr_decay", "0.8"),
        ("momentum", "0.9"),
        ("epochs", "10"),
        ("batch", "16"),
        ("seed", "0"),
        ("grad_mode", "analytic"),
        ("simulator", "fft"),
        ("conv1_channels", "8"),
        ("conv2_channels", "16"),
        ("kernel_size", "5"),
        ("output_dir", "runs/mnist"),
    ]
    .into_iter()
    .map(|(k, v)| (k, v.to_string()))
    .collect()
}

pub fn resolve_config(file: Option<&Path>, overrides: &[String]) -> CliResult<RunConfig> {
    let owned = defaults();
    let borrowed: Vec<(&str, &str)> = owned.iter().map(|(k, v)| (*k, v.as_str())).collect();
    RunConfig::resolve(&borrowed, file, overrides)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub test_loss: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MnistSummary {
    pub train_images: usize,
    pub test_images: usize,
    pub epochs: usize,
    pub test_loss: f64,
    pub test_accuracy: f64,
    pub curve: Vec<EpochRow>,
    pub wall_seconds: f64,
    pub output_dir: PathBuf,
}

impl MnistSummary {
    pub fn line(&self) -> String {
        format!(
            "summary: train_images={} test_images={} epochs={} test_loss={:.6} \
             test_accuracy={:.4} wall_seconds={:.1}",
            self.train_images,
            self.test_images,
            self.epochs,
            self.test_loss,
            self.test_accuracy,
            self.wall_seconds
        )
    }
}

fn data_path(cfg: &RunConfig, key: &str) -> CliResult<PathBuf> {
    let p = cfg.path(key)?;
    Ok(if p.is_absolute() { p } else { cfg.path("data_dir")?.join(p) })
}

fn missing_data_message(paths: &[PathBuf]) -> String {
    let list: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
    format!(
        "MNIST IDX files not found: {}. Download train-images-idx3-ubyte, \
         train-labels-idx1-ubyte, t10k-images-idx3-ubyte and t10k-labels-idx1-ubyte \
         (uncompressed) into one directory and point data_dir (or {MNIST_DIR_ENV}) at it, \
         or build a subset with scripts/mnist_from_npm.py.",
        list.join(", ")
    )
}

pub fn to_samples(set: &MnistSet, count: usize) -> Vec<ImageSample> {
    (0..count.min(set.len()))
        .map(|i| ImageSample {
            pixels: set.image(i).iter().map(|&p| f64::from(p) / 255.0).collect(),
            label: usize::from(set.labels[i]),
        })
        .collect()
}

fn train_config(cfg: &RunConfig) -> CliResult<TrainConfig> {
    let tc = TrainConfig {
        learning_rate: cfg.get("lr")?,
        momentum: cfg.get("momentum")?,
        batch_size: cfg.get("batch")?,
        epochs: cfg.get("epochs")?,
        seed: cfg.get("seed")?,
        grad_mode: cfg.get::<GradMode>("grad_mode")?,
        lr_decay: cfg.get("lr_decay")?,
        frozen_params: 0,
    };
    tc.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(tc)
}

pub fn noise_model(cfg: &RunConfig) -> CliResult<NoiseModel> {
    let mut noise = NoiseModel::new(cfg.get("eps")?, cfg.get("cap_c")?, cfg.get("seed")?)
        .map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(shots) = cfg.optional::<u64>("shots")? {
        noise = noise.with_shots(shots);
        noise.validate().map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(noise)
}

pub fn cmd_train_mnist(cfg: &RunConfig, log: &mut dyn std::io::Write) -> CliResult<MnistSummary> {
    let paths: Vec<PathBuf> = ["train_images", "train_labels", "test_images", "test_labels"]
        .iter()
        .map(|k| data_path(cfg, k))
        .collect::<CliResult<_>>()?;
    let missing: Vec<PathBuf> = paths.iter().filter(|p| !p.is_file()).cloned().collect();
    if !missing.is_empty() {
        return Err(CliError::DatasetMissing(missing_data_message(&missing)));
    }
    let tc = train_config(cfg)?;
    let noise = noise_model(cfg)?;
    let full_run: bool = cfg.get("full_run")?;
    let simulator: Simulator = cfg.get("simulator")?;
    let model_cfg = ClassifierConfig {
        conv1_channels: cfg.get("conv1_channels")?,
        conv2_channels: cfg.get("conv2_channels")?,
        kernel_size: cfg.get("kernel_size")?,
        cap_c: noise.cap_c,
        seed: tc.seed,
        simulator,
        ..ClassifierConfig::default()
    };
    let dir = output::prepare_run_dir(&cfg.path("output_dir")?, cfg)?;

    let train_set = load_idx(&paths[0], &paths[1])?;
    let test_set = load_idx(&paths[2], &paths[3])?;
    let (n_train, n_test) = if full_run {
        (train_set.len(), test_set.len())
    } else {
        (cfg.get("train_count")?, cfg.get("test_count")?)
    };
    let train = to_samples(&train_set, n_train);
    let test = to_samples(&test_set, n_test);
    if train.is_empty() || test.is_empty() {
        return Err(CliError::Config("train and test sets must be nonempty".into()));
    }

    let mut model = QfcnClassifier::new(&model_cfg)?.with_noise(noise);
    let mut state = SgdState::new(model.params().len());
    let mut metrics = CsvLog::create(
        &dir.join(output::METRICS_FILE),
        &["epoch", "loss", "accuracy", "test_loss", "test_accuracy"],
    )?;
    let mut timing = CsvLog::create(&dir.join(output::TIMING_FILE), &["epoch", "wall_seconds"])?;
    let ckpt = dir.join(output::CHECKPOINT_FILE);
    checkpoint::save(&ckpt, &model.params())?;
    let eval_noise = noise.derive(EVAL_NOISE_TAG);
    let start = Instant::now();
    let mut curve = Vec::with_capacity(tc.epochs);
    for epoch in 0..tc.epochs {
        let m = train_epoch(&mut model, &train, &tc, epoch, &mut state, &noise).map_err(|e| {
            CliError::Assertion(format!(
                "training aborted in epoch {}: {e}; last good checkpoint kept at {}",
                epoch + 1,
                ckpt.display()
            ))
        })?;
        let (test_loss, test_accuracy) = model.evaluate(&test, &eval_noise)?;
        checkpoint::save(&ckpt, &model.params())?;
        let row = EpochRow {
            epoch: epoch + 1,
            loss: m.mean_loss,
            accuracy: m.metric,
            test_loss,
            test_accuracy,
        };
        metrics.row(row.epoch, &[row.loss, row.accuracy, row.test_loss, row.test_accuracy])?;
        timing.row(row.epoch, &[start.elapsed().as_secs_f64()])?;
        writeln!(
            log,
            "epoch {:>3}  loss {:.4}  accuracy {:.4}  test_loss {:.4}  test_accuracy {:.4}",
            row.epoch, row.loss, row.accuracy, row.test_loss, row.test_accuracy
        )
        .map_err(|e| CliError::io("<stdout>", e))?;
        curve.push(row);
    }
    let (test_loss, test_accuracy) = match curve.last() {
        Some(r) => (r.test_loss, r.test_accuracy),
        None => model.evaluate(&test, &eval_noise)?,
    };
    let summary = MnistSummary {
        train_images: train.len(),
        test_images: test.len(),
        epochs: tc.epochs,
        test_loss,
        test_accuracy,
        curve,
        wall_seconds: start.elapsed().as_secs_f64(),
        output_dir: dir.clone(),
    };
    let mut text = summary.line();
    if full_run {
        let gap = test_accuracy - REFERENCE_ACCURACY;
        text.push_str(&format!(
            "\nfull run: accuracy {test_accuracy:.4} vs reference {REFERENCE_ACCURACY:.3} \
             (difference {gap:+.4}, {} the ±{REFERENCE_TOLERANCE} band)",
            if gap.abs() <= REFERENCE_TOLERANCE { "inside" } else { "outside" }
        ));
    }
    writeln!(log, "{text}").map_err(|e| CliError::io("<stdout>", e))?;
    output::write_summary(&dir, &text)?;
    Ok(summary)
}
