use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::sampler::EntropyRow;
use crate::{Error, Result};

/// Cumulative distributions of per-identity entropy: `(entropy, fraction of
/// identities at or below it)`, sorted by entropy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyCurve {
    pub before: Vec<[f64; 2]>,
    pub after: Vec<[f64; 2]>,
}

pub fn cumulative_curve(values: &[f64]) -> Vec<[f64; 2]> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &e)| [e, (i + 1) as f64 / n])
        .collect()
}

/// Writes `entropy_report.csv` (identity, e_before, e_after) and
/// `entropy_curve.json` into `dir`.
pub fn emit_entropy_report(rows: &[EntropyRow], dir: &Path) -> Result<EntropyCurve> {
    let csv_path = dir.join("entropy_report.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(["identity", "e_before", "e_after"])?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;

    let curve = EntropyCurve {
        before: cumulative_curve(&rows.iter().map(|r| r.e_before).collect::<Vec<_>>()),
        after: cumulative_curve(&rows.iter().map(|r| r.e_after).collect::<Vec<_>>()),
    };
    let json_path = dir.join("entropy_curve.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&curve)? + "\n")
        .map_err(|e| Error::io(&json_path, e))?;
    Ok(curve)
}
