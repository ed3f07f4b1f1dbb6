//! Run directories and CSV curve files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const CONFIG_FILE: &str = "effective_config.txt";
pub const METRICS_FILE: &str = "metrics.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const SUMMARY_FILE: &str = "summary.txt";

/// Creates `dir` and echoes the effective configuration into it.
pub fn prepare_run_dir(dir: &Path, config: &RunConfig) -> CliResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(CONFIG_FILE);
    fs::write(&path, config.render()).map_err(|e| CliError::io(&path, e))?;
    Ok(dir.to_path_buf())
}

/// Line-oriented CSV written row by row and flushed after each row, so a
/// run that aborts still leaves every completed epoch on disk.
pub struct CsvLog {
    path: PathBuf,
    out: BufWriter<File>,
}

impl CsvLog {
    pub fn create(path: &Path, header: &[&str]) -> CliResult<Self> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut log = Self { path: path.to_path_buf(), out: BufWriter::new(file) };
        log.line(&header.join(","))?;
        Ok(log)
    }

    fn line(&mut self, text: &str) -> CliResult<()> {
        writeln!(self.out, "{text}")
            .and_then(|_| self.out.flush())
            .map_err(|e| CliError::io(&self.path, e))
    }

    /// Writes the epoch followed by `values` with six decimals.
    pub fn row(&mut self, epoch: usize, values: &[f64]) -> CliResult<()> {
        let mut text = epoch.to_string();
        for v in values {
            text.push_str(&format!(",{v:.6}"));
        }
        self.line(&text)
    }
}

pub fn write_summary(dir: &Path, text: &str) -> CliResult<()> {
    let path = dir.join(SUMMARY_FILE);
    fs::write(&path, format!("{text}\n")).map_err(|e| CliError::io(&path, e))
}
