//! CSV tables and run manifests, written atomically.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::experiments::CapacityStats;
use crate::Error;

/// Exact header of capacity tables.
pub const CAPACITY_HEADER: &str = "sweep_value,frequency_hz,distance_m,mode,scheme,capacity_mean_bpshz,capacity_std,capacity_se,k_factor_db,rank_mean,cond_db,trials,seed";

/// One row of a capacity table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityRow {
    pub sweep_value: f64,
    pub frequency_hz: f64,
    pub distance_m: f64,
    pub mode: String,
    pub scheme: String,
    pub capacity_mean_bpshz: f64,
    pub capacity_std: f64,
    pub capacity_se: f64,
    /// `inf` for a pure line-of-sight channel.
    pub k_factor_db: f64,
    pub rank_mean: f64,
    pub cond_db: f64,
    pub trials: usize,
    pub seed: u64,
}

impl From<&CapacityStats> for CapacityRow {
    fn from(s: &CapacityStats) -> Self {
        Self {
            sweep_value: s.sweep_value,
            frequency_hz: s.frequency_hz,
            distance_m: s.distance_m,
            mode: s.mode.to_string(),
            scheme: s.scheme.to_string(),
            capacity_mean_bpshz: s.capacity_mean,
            capacity_std: s.capacity_std,
            capacity_se: s.capacity_se,
            k_factor_db: s.k_factor_db,
            rank_mean: s.rank_mean,
            cond_db: s.cond_db,
            trials: s.trials,
            seed: s.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    pub k_factor: f64,
    pub k_factor_db: f64,
    pub n_tx: usize,
    pub n_rx: usize,
    pub snr_db: f64,
    pub upper_bound: f64,
    pub lower_bound: f64,
    pub lower_bound_se: f64,
    pub limit_high_absorption: f64,
    pub limit_no_absorption: f64,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub density: f64,
    pub quarter_circle: f64,
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Error::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Serializes rows with a header derived from the row type.
pub fn csv_bytes<T: Serialize>(rows: &[T], path: &Path) -> Result<Vec<u8>, Error> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), Error> {
    write_atomic(path, &csv_bytes(rows, path)?)
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, Error> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

pub fn sha256_file(path: &Path) -> Result<String, Error> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Provenance record written next to every result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<InputDigest>,
    pub output: String,
    pub summary: serde_json::Value,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// `results.csv` -> `results.csv.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}
