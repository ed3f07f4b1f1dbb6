//! `qfcn train-ts`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use qfcn_core::fourier_conv::Simulator;
use qfcn_core::models::{
    load_series_dataset, synth_st_dataset, write_adjacency_csv, write_series_csv,
    ForecasterConfig, QfTemporalForecaster,
};
use qfcn_core::train::{train_epoch, GradMode, SgdState, TrainConfig, Trainable};

use crate::checkpoint;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{self, CsvLog};
use crate::train_mnist::noise_model;

const EVAL_NOISE_TAG: u64 = u64::MAX;

pub const DEFAULTS: &[(&str, &str)] = &[
    ("series_csv", ""),
    ("adjacency_csv", ""),
    ("nodes", "20"),
    ("steps", "2000"),
    ("data_seed", "0"),
    ("window", "12"),
    ("kernel_width", "3"),
    ("channels", "8"),
    ("eps", "0.01"),
    ("cap_c", "10"),
    ("shots", "none"),
    ("lr", "0.03"),
    ("lr_decay", "0.9"),
    ("momentum", "0.9"),
    ("epochs", "20"),
    ("batch", "8"),
    ("seed", "0"),
    ("grad_mode", "analytic"),
    ("simulator", "fft"),
    ("output_dir", "runs/ts"),
];

pub fn resolve_config(file: Option<&Path>, overrides: &[String]) -> CliResult<RunConfig> {
    RunConfig::resolve(DEFAULTS, file, overrides)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsEpochRow {
    pub epoch: usize,
    pub loss: f64,
    pub train_mae: f64,
    pub mae: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsSummary {
    pub nodes: usize,
    pub steps: usize,
    pub epochs: usize,
    pub untrained_mae: f64,
    pub untrained_mse: f64,
    pub persistence_mae: f64,
    pub mae: f64,
    pub mse: f64,
    pub curve: Vec<TsEpochRow>,
    pub wall_seconds: f64,
    pub output_dir: PathBuf,
}

impl TsSummary {
    pub fn line(&self) -> String {
        format!(
            "summary: nodes={} steps={} epochs={} mae={:.6} mse={:.6} untrained_mae={:.6} \
             persistence_mae={:.6} wall_seconds={:.1}",
            self.nodes,
            self.steps,
            self.epochs,
            self.mae,
            self.mse,
            self.untrained_mae,
            self.persistence_mae,
            self.wall_seconds
        )
    }
}

pub fn cmd_train_ts(cfg: &RunConfig, log: &mut dyn std::io::Write) -> CliResult<TsSummary> {
    let series: PathBuf = cfg.path("series_csv")?;
    let adjacency: PathBuf = cfg.path("adjacency_csv")?;
    let from_files = !series.as_os_str().is_empty() || !adjacency.as_os_str().is_empty();
    if from_files {
        for p in [&series, &adjacency] {
            if !p.is_file() {
                return Err(CliError::DatasetMissing(format!(
                    "{} not found; set both series_csv and adjacency_csv, or leave both \
                     empty to use the synthetic dataset",
                    p.display()
                )));
            }
        }
    }
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
    let noise = noise_model(cfg)?;
    let simulator: Simulator = cfg.get("simulator")?;
    let window: usize = cfg.get("window")?;
    let dir = output::prepare_run_dir(&cfg.path("output_dir")?, cfg)?;

    let raw = if from_files {
        load_series_dataset(&series, &adjacency)?
    } else {
        let d = synth_st_dataset(cfg.get("nodes")?, cfg.get("steps")?, cfg.get("data_seed")?)?;
        write_series_csv(&d, &dir.join("series.csv"))?;
        write_adjacency_csv(&d, &dir.join("adjacency.csv"))?;
        d
    };
    let data = raw.standardized();
    let train = data.windows(data.train_range(), window)?;
    let val = data.windows(data.val_range(), window)?;
    if train.is_empty() || val.is_empty() {
        return Err(CliError::Config(format!(
            "{} steps leave no windows of length {window} in both splits",
            data.steps()
        )));
    }
    let persistence_mae = data.persistence_mae(&val)?;

    let model_cfg = ForecasterConfig {
        window,
        kernel_width: cfg.get("kernel_width")?,
        channels: cfg.get("channels")?,
        seed: tc.seed,
        simulator,
        ..ForecasterConfig::new(data.nodes(), data.adjacency().to_vec())
    };
    let mut model = QfTemporalForecaster::new(&model_cfg)
        .map_err(|e| CliError::Config(e.to_string()))?
        .with_noise(noise);
    let eval_noise = noise.derive(EVAL_NOISE_TAG);
    let (untrained_mae, untrained_mse) = model.evaluate(&val, &eval_noise)?;
    writeln!(
        log,
        "untrained mae {untrained_mae:.4}  mse {untrained_mse:.4}  persistence mae {persistence_mae:.4}"
    )
    .map_err(|e| CliError::io("<stdout>", e))?;

    let mut state = SgdState::new(model.params().len());
    let mut metrics =
        CsvLog::create(&dir.join(output::METRICS_FILE), &["epoch", "loss", "train_mae", "mae", "mse"])?;
    let mut timing = CsvLog::create(&dir.join(output::TIMING_FILE), &["epoch", "wall_seconds"])?;
    let ckpt = dir.join(output::CHECKPOINT_FILE);
    checkpoint::save(&ckpt, &model.params())?;
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
        let (mae, mse) = model.evaluate(&val, &eval_noise)?;
        checkpoint::save(&ckpt, &model.params())?;
        let row = TsEpochRow { epoch: epoch + 1, loss: m.mean_loss, train_mae: m.metric, mae, mse };
        metrics.row(row.epoch, &[row.loss, row.train_mae, row.mae, row.mse])?;
        timing.row(row.epoch, &[start.elapsed().as_secs_f64()])?;
        writeln!(
            log,
            "epoch {:>3}  loss {:.4}  train_mae {:.4}  mae {:.4}  mse {:.4}",
            row.epoch, row.loss, row.train_mae, row.mae, row.mse
        )
        .map_err(|e| CliError::io("<stdout>", e))?;
        curve.push(row);
    }
    let (mae, mse) = curve.last().map_or((untrained_mae, untrained_mse), |r| (r.mae, r.mse));
    let summary = TsSummary {
        nodes: data.nodes(),
        steps: data.steps(),
        epochs: tc.epochs,
        untrained_mae,
        untrained_mse,
        persistence_mae,
        mae,
        mse,
        curve,
        wall_seconds: start.elapsed().as_secs_f64(),
        output_dir: dir.clone(),
    };
    let text = summary.line();
    writeln!(log, "{text}").map_err(|e| CliError::io("<stdout>", e))?;
    output::write_summary(&dir, &text)?;
    Ok(summary)
}
