//! Input files (tabulated pulses, initial states) and table output.
//!
//! Every CSV table starts with a `# fockfilter <command> v<N>` line naming
//! its schema. JSON output is an array of records with the CSV field names.

use std::io::Write;
use std::path::{Path, PathBuf};

use fockfilter_core::pulse::Normalization;
use fockfilter_core::{Operator2, PulseEnvelope, C64};
use serde::Serialize;

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

fn format_error(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Numeric rows of a small CSV file. `#` lines are comments and a first row
/// that does not parse as numbers is taken as a header.
fn numeric_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| format_error(path, e.to_string()))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if i == 0 => continue,
            Err(e) => {
                let line = record.position().map_or(i as u64 + 1, |p| p.line());
                return Err(format_error(path, format!("line {line}: {e}")));
            }
        }
    }
    Ok(rows)
}

/// Tabulated envelope from columns `t, re ξ[, im ξ]`.
pub fn read_pulse_csv(path: &Path, norm: Normalization) -> Result<PulseEnvelope> {
    let rows = numeric_rows(path)?;
    let mut times = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        match row.as_slice() {
            [t, re] => {
                times.push(*t);
                values.push(C64::new(*re, 0.0));
            }
            [t, re, im] => {
                times.push(*t);
                values.push(C64::new(*re, *im));
            }
            _ => return Err(format_error(path, format!("row {}: expected 2 or 3 columns", i + 1))),
        }
    }
    PulseEnvelope::tabulated(times, values, norm).map_err(|e| format_error(path, e.to_string()))
}

/// Initial density operator from two rows `re c₀, im c₀, re c₁, im c₁`,
/// row `g` first.
pub fn read_rho0(path: &Path) -> Result<Operator2> {
    let rows = numeric_rows(path)?;
    if rows.len() != 2 || rows.iter().any(|r| r.len() != 4) {
        return Err(format_error(path, "expected two rows of four numbers (re, im, re, im)"));
    }
    let c = |r: usize, col: usize| C64::new(rows[r][2 * col], rows[r][2 * col + 1]);
    Ok(Operator2::new(c(0, 0), c(0, 1), c(1, 0), c(1, 1)))
}

/// Serialize `rows` as a table in `format` under the schema of `command`.
pub fn render<T: Serialize>(command: &str, format: Format, rows: &[T]) -> Result<Vec<u8>> {
    let to_io = |e: std::io::Error| CliError::io("<memory>", e);
    match format {
        Format::Csv => {
            let mut buf = format!("# fockfilter {command} v{SCHEMA_VERSION}\n").into_bytes();
            let mut w = csv::Writer::from_writer(&mut buf);
            for row in rows {
                w.serialize(row).map_err(|e| to_io(e.into()))?;
            }
            w.flush().map_err(to_io)?;
            drop(w);
            Ok(buf)
        }
        Format::Json => {
            let mut buf = serde_json::to_vec_pretty(rows).map_err(|e| to_io(e.into()))?;
            buf.push(b'\n');
            Ok(buf)
        }
    }
}

/// Replace `path` with `bytes` through a temporary file in the same
/// directory, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| CliError::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// Write to `out`, or to standard output when no path is given.
pub fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, bytes),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::io("<stdout>", e))
        }
    }
}
