//! CSV and JSON rendering of a [`Report`], written atomically.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::bench::Report;
use crate::error::{io_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format {other:?}, expected csv or json")),
        }
    }
}

/// `method,K,mean_tokens_per_loop,std_tokens_per_loop,acceptance_rate_pos1..posK,
/// modeled_ms_per_token,modeled_speedup,wallclock_tokens_per_sec`.
pub fn csv_header(k: usize) -> String {
    let mut cols = vec!["method".to_string(), "K".into(), "mean_tokens_per_loop".into(), "std_tokens_per_loop".into()];
    cols.extend((1..=k).map(|i| format!("acceptance_rate_pos{i}")));
    cols.extend(["modeled_ms_per_token", "modeled_speedup", "wallclock_tokens_per_sec"].map(String::from));
    cols.join(",")
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn render(report: &Report, format: Format) -> Result<String> {
    if report.rows().iter().any(|r| r.loops == 0) {
        return Err(Error::EmptyStats);
    }
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
        Format::Csv => {
            let k = report.config.k;
            let mut out = csv_header(k);
            out.push('\n');
            for row in report.rows() {
                let mut fields = vec![
                    row.method.clone(),
                    row.k.to_string(),
                    row.mean_tokens_per_loop.to_string(),
                    row.std_tokens_per_loop.to_string(),
                ];
                fields.extend((0..k).map(|i| cell(row.acceptance_rate_per_position.get(i).copied().flatten())));
                fields.push(row.modeled_ms_per_token.to_string());
                fields.push(row.modeled_speedup.to_string());
                fields.push(cell(row.wallclock_tokens_per_sec));
                let _ = writeln!(out, "{}", fields.join(","));
            }
            Ok(out)
        }
    }
}

/// Renders and writes through a temporary file in the destination directory,
/// so a failure leaves no partial output.
pub fn emit_report(report: &Report, format: Format, destination: &Path) -> Result<()> {
    let text = render(report, format)?;
    let dir = match destination.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(text.as_bytes()).map_err(io_err(tmp.path()))?;
    tmp.persist(destination).map_err(|e| Error::Io { path: destination.into(), source: e.error })?;
    Ok(())
}
