//! Stage file names and small read/write helpers.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rampkit_core::csv_io::{load_csv_inferred, save_csv};
use rampkit_core::series::FeatureTable;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::UsageError;

pub const SCENARIO: &str = "scenario.csv";
pub const ANNOTATIONS: &str = "annotations.json";
pub const HISTORY: &str = "history.csv";
pub const MODES: &str = "modes.csv";
pub const POLES: &str = "poles.csv";
pub const RECON: &str = "recon.csv";
pub const DECOMPOSE: &str = "decompose.json";
pub const RAMPS_CSV: &str = "ramps.csv";
pub const RAMPS_JSON: &str = "ramps.json";
pub const HISTORY_RECON: &str = "history_recon.csv";
pub const MATCHES_CSV: &str = "matches.csv";
pub const MATCHES_JSON: &str = "matches.json";
pub const FORECAST_CSV: &str = "forecast.csv";
pub const FORECAST_JSON: &str = "forecast.json";
pub const EVAL: &str = "eval.json";

/// An input file that an earlier stage should have written.
pub fn prerequisite(path: PathBuf, stage: &str) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(UsageError(format!("missing {}; run `rampkit {stage}` first", path.display())).into())
    }
}

pub fn input(explicit: Option<&PathBuf>, out: &Path, name: &str, stage: &str) -> Result<PathBuf> {
    prerequisite(explicit.cloned().unwrap_or_else(|| out.join(name)), stage)
}

pub fn load_table(path: &Path) -> Result<FeatureTable> {
    load_csv_inferred(path).with_context(|| format!("reading {}", path.display()))
}

pub fn save_table(table: &FeatureTable, path: &Path) -> Result<()> {
    save_csv(table, path).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let raw = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&raw).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_rows<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .with_context(|| format!("parsing {}", path.display()))
}

pub fn create_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}
