//! `key = value` run configuration with layered overrides.
//!
//! Precedence, highest first: command-line `key=value` arguments, the
//! `QFCN_OUTPUT_DIR` environment variable (for `output_dir` only), the
//! config file, built-in defaults.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{CliError, CliResult};

pub const OUTPUT_DIR_ENV: &str = "QFCN_OUTPUT_DIR";

/// Effective settings for one command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

fn parse_line(line: &str, origin: &str, number: usize) -> CliResult<Option<(String, String)>> {
    let line = line.split('#').next().unwrap_or("").trim();
    if line.is_empty() {
        return Ok(None);
    }
    let (key, value) = line.split_once('=').ok_or_else(|| {
        CliError::Config(format!("{origin}:{number}: expected 'key = value', got '{line}'"))
    })?;
    let key = key.trim();
    if key.is_empty() {
        return Err(CliError::Config(format!("{origin}:{number}: empty key")));
    }
    Ok(Some((key.to_string(), value.trim().to_string())))
}

impl RunConfig {
    /// Defaults overlaid with `file` (if any), the environment and then
    /// `overrides`. Keys absent from `defaults` are rejected.
    pub fn resolve(
        defaults: &[(&str, &str)],
        file: Option<&Path>,
        overrides: &[String],
    ) -> CliResult<Self> {
        let mut values: BTreeMap<String, String> =
            defaults.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        let mut set = |key: String, value: String, origin: &str| -> CliResult<()> {
            match values.get_mut(&key) {
                Some(slot) => {
                    *slot = value;
                    Ok(())
                }
                None => Err(CliError::Config(format!("{origin}: unknown key '{key}'"))),
            }
        };
        if let Some(path) = file {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let origin = path.display().to_string();
            for (i, line) in text.lines().enumerate() {
                if let Some((k, v)) = parse_line(line, &origin, i + 1)? {
                    set(k, v, &origin)?;
                }
            }
        }
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !dir.is_empty() && defaults.iter().any(|(k, _)| *k == "output_dir") {
                set("output_dir".into(), dir, OUTPUT_DIR_ENV)?;
            }
        }
        for (i, arg) in overrides.iter().enumerate() {
            if let Some((k, v)) = parse_line(arg, "override", i + 1)? {
                set(k, v, "command line")?;
            }
        }
        Ok(Self { values })
    }

    pub fn raw(&self, key: &str) -> CliResult<&str> {
        self.values
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| CliError::Config(format!("missing key '{key}'")))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(key)?;
        raw.parse()
            .map_err(|e| CliError::Config(format!("key '{key}': cannot parse '{raw}': {e}")))
    }

    /// `None` for an empty value or `none`.
    pub fn optional<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(key)?;
        if raw.is_empty() || raw.eq_ignore_ascii_case("none") {
            Ok(None)
        } else {
            self.get(key).map(Some)
        }
    }

    pub fn path(&self, key: &str) -> CliResult<PathBuf> {
        Ok(PathBuf::from(self.raw(key)?))
    }

    /// One `key = value` line per entry, sorted by key.
    pub fn render(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
