//! File formats.
//!
//! | file        | structured (`.json`)         | tabular (`.csv`)                          |
//! |-------------|------------------------------|-------------------------------------------|
//! | config      | TOML document                | –                                         |
//! | measurement | [`MeasurementSet`] as JSON   | long format, one row per complex voltage  |
//! | results     | [`ResultsFile`] as JSON      | one row per (AUT, method) + JSON metadata |
//! | pattern     | –                            | θ-major grid                              |
//! | scatter     | –                            | one row per sensor subset + footers       |
//!
//! Every CSV starts with a `# schema_version=N` line; further `# key=value`
//! lines carry metadata. Complex numbers are `(re, im)` pairs, angles are
//! degrees, and an exact-recovery RMSE is the string `-inf`.
//!
//! [`MeasurementSet`]: crate::dataset::MeasurementSet

mod measurement;
mod pattern;
mod results;
mod scatter;

pub use measurement::{measurement_from_csv, measurement_to_csv, read_measurements, write_measurements};
pub use pattern::{
    pattern_from_csv, pattern_grid, pattern_rms_deviation, pattern_to_csv, GridSpec, Metadata, PatternPoint,
    PATTERN_HEADER,
};
pub use results::{
    read_results, reproduce, results_from_csv, results_to_csv, write_results, Provenance, ResultsFile,
    RESULTS_SCHEMA_VERSION,
};
pub use scatter::{ranked_subsets_to_csv, scatter_from_csv, scatter_to_csv, ScatterRow, ScatterTable};

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::ConfigDocument;

pub const CSV_SCHEMA_VERSION: u32 = 1;

/// File, parse and schema failures. Messages carry the file and, where the
/// parser knows it, the line and field.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error(transparent)]
    Numerical(#[from] crate::error::Error),
}

impl FormatError {
    pub(crate) fn schema(path: &Path, message: impl Into<String>) -> Self {
        FormatError::Schema { path: path.to_path_buf(), message: message.into() }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        FormatError::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn json(path: &Path, e: serde_json::Error) -> Self {
        FormatError::Parse { path: path.to_path_buf(), line: e.line(), column: e.column(), message: e.to_string() }
    }

    pub(crate) fn csv_at(path: &Path, line: u64, message: impl Into<String>) -> Self {
        FormatError::Parse { path: path.to_path_buf(), line: line as usize, column: 0, message: message.into() }
    }
}

pub type FormatResult<T> = std::result::Result<T, FormatError>;

/// Writes `contents` to a temporary file beside `path`, then renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> FormatResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| FormatError::io(path, e))?;
    tmp.write_all(contents).map_err(|e| FormatError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| FormatError::io(path, e))?;
    tmp.persist(path).map_err(|e| FormatError::io(path, e.error))?;
    Ok(())
}

pub(crate) fn read_text(path: &Path) -> FormatResult<String> {
    fs::read_to_string(path).map_err(|e| FormatError::io(path, e))
}

pub(crate) fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Parses a TOML configuration document. Unknown keys are errors.
pub fn parse_config(text: &str, path: &Path) -> FormatResult<ConfigDocument> {
    let doc: ConfigDocument = toml::from_str(text).map_err(|e| {
        let (line, column) = e
            .span()
            .map(|s| line_col(text, s.start))
            .unwrap_or((0, 0));
        FormatError::Parse { path: path.to_path_buf(), line, column, message: e.message().to_string() }
    })?;
    doc.campaign_config()
        .validate()
        .map_err(|e| FormatError::schema(path, e.to_string()))?;
    if doc.study.aggregate_seeds == 0 {
        return Err(FormatError::schema(path, "study.aggregate_seeds must be positive"));
    }
    Ok(doc)
}

pub fn read_config(path: &Path) -> FormatResult<ConfigDocument> {
    parse_config(&read_text(path)?, path)
}

pub fn config_to_toml(doc: &ConfigDocument) -> String {
    toml::to_string(doc).expect("config documents serialize")
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, column)
}

/// Splits leading `# key=value` metadata lines from the CSV body. Returns the
/// metadata, the body and the number of lines consumed.
pub(crate) fn split_metadata(text: &str) -> (Vec<(String, String)>, &str, usize) {
    let mut meta = Vec::new();
    let mut offset = 0;
    let mut lines = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim_end_matches(['\n', '\r']);
        let Some(rest) = trimmed.strip_prefix('#') else { break };
        if let Some((k, v)) = rest.trim_start().split_once('=') {
            meta.push((k.trim().to_string(), v.to_string()));
        }
        offset += line.len();
        lines += 1;
    }
    (meta, &text[offset..], lines)
}

pub(crate) fn meta_value<'a>(meta: &'a [(String, String)], key: &str) -> Option<&'a str> {
    meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

pub(crate) fn check_csv_version(meta: &[(String, String)], path: &Path) -> FormatResult<()> {
    match meta_value(meta, "schema_version") {
        Some(v) if v.trim() == CSV_SCHEMA_VERSION.to_string() => Ok(()),
        Some(v) => Err(FormatError::schema(path, format!("schema_version: unsupported version {v}"))),
        None => Err(FormatError::schema(path, "schema_version: missing `# schema_version=` line")),
    }
}

pub(crate) fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub(crate) fn fmt_f64(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        v.to_string()
    }
}

pub(crate) fn parse_f64(s: &str) -> Option<f64> {
    match s.trim() {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        t => t.parse().ok(),
    }
}
