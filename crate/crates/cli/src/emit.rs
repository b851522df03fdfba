//! Report files: one JSON envelope, a `quantity,value,error` table and, when
//! the command produces one, a series table for plotting.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::Format;
use crate::error::{CliError, Result};
use crate::run::ReportEnvelope;

/// Shortest round-trip form, exponent notation for extreme magnitudes.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn to_json(report: &ReportEnvelope) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn scalars_csv(report: &ReportEnvelope) -> Vec<u8> {
    csv_bytes(
        &["quantity", "value", "error"],
        report
            .estimates
            .iter()
            .map(|e| vec![e.quantity.clone(), opt(e.value), opt(e.error)]),
    )
}

pub fn series_csv(report: &ReportEnvelope) -> Option<Vec<u8>> {
    report.series.as_ref().map(|s| {
        let header: Vec<&str> = s.columns.iter().map(String::as_str).collect();
        csv_bytes(
            &header,
            s.rows.iter().map(|r| r.iter().map(|x| num(*x)).collect()),
        )
    })
}

/// Renders every file first, then writes them; returns the written paths.
pub fn emit(report: &ReportEnvelope, format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    let stem = &report.config.output.name;
    let mut files: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    if matches!(format, Format::Json | Format::Both) {
        files.push((
            dir.join(format!("{stem}.json")),
            to_json(report).into_bytes(),
        ));
    }
    if matches!(format, Format::Csv | Format::Both) {
        files.push((dir.join(format!("{stem}.csv")), scalars_csv(report)));
        if let Some(s) = series_csv(report) {
            files.push((dir.join(format!("{stem}_series.csv")), s));
        }
    }
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    for (path, bytes) in &files {
        fs::write(path, bytes).map_err(|e| CliError::io(path, e))?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}
