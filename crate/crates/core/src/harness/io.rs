//! CSV results and run manifests, written atomically.

use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use tempfile::NamedTempFile;

use super::{ResultRow, SweepSpec};
use crate::error::Result;

/// Writes `bytes` to `path` via a temporary file in the same directory,
/// so readers never observe a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Serializes rows with a header line.
pub fn rows_to_csv(rows: &[ResultRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

pub fn write_rows_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    write_atomic(path, &rows_to_csv(rows)?)
}

pub fn read_rows_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?;
    Ok(rows)
}

/// Timing for one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointTiming {
    pub coding: String,
    pub axis_value: f64,
    pub wall_time_s: f64,
}

/// Provenance written next to the CSV files of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub spec: SweepSpec,
    pub version: String,
    pub started_unix_s: u64,
    pub workers: Option<usize>,
    pub outputs: Vec<String>,
    pub timings: Vec<PointTiming>,
}

impl RunManifest {
    pub fn new(spec: &SweepSpec, workers: Option<usize>, rows: &[ResultRow], outputs: Vec<String>) -> Self {
        let started_unix_s = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        RunManifest {
            spec: spec.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix_s,
            workers,
            outputs,
            timings: rows
                .iter()
                .map(|r| PointTiming {
                    coding: r.coding.to_string(),
                    axis_value: r.axis_value,
                    wall_time_s: r.wall_time_s,
                })
                .collect(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &serde_json::to_vec_pretty(self)?)
    }
}
