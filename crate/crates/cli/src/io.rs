//! CSV trajectories: a `t` column plus named observable columns.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use vidssm_core::embedding::TimeSeries;

use crate::error::{CliError, Stage};

/// A trajectory read from CSV, with its original timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTrajectory {
    pub times: Vec<f64>,
    pub series: TimeSeries,
}

/// Reads the `t` column and the named `channels` of a CSV file.
/// Timestamps must be uniformly spaced.
pub fn read_trajectory(path: &Path, channels: &[String], stage: Stage) -> Result<CsvTrajectory, CliError> {
    let fail = |m: String| CliError::file(stage, path, m);
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| fail(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| fail(e.to_string()))?.clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| fail(format!("missing column '{name}'")))
    };
    let t_col = column("t")?;
    let cols = channels.iter().map(|c| column(c)).collect::<Result<Vec<_>, _>>()?;

    let mut times = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); cols.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| fail(e.to_string()))?;
        let num = |c: usize| -> Result<f64, CliError> {
            let raw = rec.get(c).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| fail(format!("row {}: '{raw}' is not a finite number", row + 1)))
        };
        times.push(num(t_col)?);
        for (v, &c) in values.iter_mut().zip(&cols) {
            v.push(num(c)?);
        }
    }
    if times.len() < 2 {
        return Err(fail(format!("need at least 2 samples, found {}", times.len())));
    }
    let n = times.len();
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    if !(dt > 0.0) {
        return Err(fail("timestamps must increase".into()));
    }
    let tol = 1e-3 * dt + 1e-6;
    if let Some(k) = (0..n).find(|&k| (times[k] - times[0] - k as f64 * dt).abs() > tol) {
        return Err(fail(format!("row {}: timestamps are not uniformly spaced (dt {dt})", k + 1)));
    }
    let series = TimeSeries::from_channels(dt, &values).map_err(|source| CliError::Stage { stage, source })?;
    Ok(CsvTrajectory { times, series })
}

/// Writes `t` followed by one column per `(name, row)` pair of `columns`.
pub fn write_columns(path: &Path, times: &[f64], columns: &[(String, Vec<f64>)]) -> Result<(), CliError> {
    let fail = |e: String| CliError::file(Stage::Output, path, e);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| fail(e.to_string()))?;
    let mut header = vec!["t".to_string()];
    header.extend(columns.iter().map(|(n, _)| n.clone()));
    w.write_record(&header).map_err(|e| fail(e.to_string()))?;
    for (k, t) in times.iter().enumerate() {
        let mut rec = vec![t.to_string()];
        rec.extend(columns.iter().map(|(_, v)| v[k].to_string()));
        w.write_record(&rec).map_err(|e| fail(e.to_string()))?;
    }
    w.flush().map_err(|e| fail(e.to_string()))
}

/// Rows of `m` as named columns.
pub fn named_rows(m: &DMatrix<f64>, names: impl IntoIterator<Item = String>) -> Vec<(String, Vec<f64>)> {
    names.into_iter().zip(m.row_iter()).map(|(n, r)| (n, r.iter().copied().collect())).collect()
}

/// Creates `path` and hands a buffered writer to `body`.
pub fn write_with<F>(path: &Path, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut std::io::BufWriter<File>) -> std::io::Result<()>,
{
    let fail = |e: std::io::Error| CliError::file(Stage::Output, path, e);
    let mut w = std::io::BufWriter::new(File::create(path).map_err(fail)?);
    body(&mut w).map_err(fail)?;
    w.flush().map_err(fail)
}
