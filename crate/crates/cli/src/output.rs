//! Atomic file output and CSV series.

use std::io::Write;
use std::path::Path;

use serde_json::Value;
use socpos::lti::ResponseSeries;

use crate::error::CliError;

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let shown = path.display().to_string();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(&shown, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(&shown, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(&shown, e))?;
    tmp.persist(path).map_err(|e| CliError::io(&shown, e.error))?;
    Ok(())
}

pub fn json_bytes(v: &Value) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(v)?;
    out.push(b'\n');
    Ok(out)
}

pub fn write_json(path: &Path, v: &Value) -> Result<(), CliError> {
    write_atomic(path, &json_bytes(v)?)
}

/// `t, {prefix}_11, {prefix}_12, …` with 1-based output/input indices.
pub fn series_csv(series: &ResponseSeries, prefix: &str) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let (p, m) = series.direct.shape();
    let mut header = vec!["t".to_string()];
    for i in 0..p {
        for j in 0..m {
            header.push(format!("{prefix}_{}{}", i + 1, j + 1));
        }
    }
    w.write_record(&header)?;
    for (t, v) in series.times.iter().zip(&series.values) {
        let mut rec = vec![t.to_string()];
        for i in 0..p {
            for j in 0..m {
                rec.push(v[(i, j)].to_string());
            }
        }
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| CliError::io("csv buffer", e.into_error()))
}
