use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};

/// Relative gap of `objective` to `reference`.
pub fn gap(objective: f64, reference: f64) -> f64 {
    (objective - reference) / reference
}

pub fn format_percent(fraction: f64) -> String {
    format!("{:.4}", 100.0 * fraction)
}

#[derive(Debug, Deserialize)]
struct ReferenceRow {
    instance: String,
    objective: f64,
}

/// Reference objectives keyed by instance name (file stem or id).
pub fn read_reference(path: &Path) -> Result<BTreeMap<String, f64>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for row in r.deserialize::<ReferenceRow>() {
        let row = row.map_err(|e| usage(format!("{}: {e}", path.display())))?;
        out.insert(row.instance, row.objective);
    }
    Ok(out)
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Record of one invocation, sufficient to rerun it.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub artifacts: Vec<PathBuf>,
    pub exit_status: i32,
    pub error: Option<String>,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_of_reference_is_zero() {
        for r in [1.0, 15.57, 36.57, 1234.5] {
            assert_eq!(gap(r, r), 0.0);
        }
        assert!((gap(11.0, 10.0) - 0.1).abs() < 1e-15);
        assert_eq!(format_percent(gap(11.0, 10.0)), "10.0000");
    }

    #[test]
    fn reference_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ref.csv");
        std::fs::write(&p, "instance,objective\na,1.5\nb,2\n").unwrap();
        let m = read_reference(&p).unwrap();
        assert_eq!(m["a"], 1.5);
        assert_eq!(m["b"], 2.0);
        std::fs::write(&p, "instance,value\na,1\n").unwrap();
        assert!(read_reference(&p).is_err());
    }
}
