//! One-column numeric CSV input.
//!
//! Lines starting with `#` and blank lines are ignored. The first remaining
//! line is treated as a header when it does not parse as a number. Every
//! other line must hold exactly one finite number; all offending line
//! numbers are reported together.

use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Minimum number of observations the fitting commands accept.
pub const MIN_FIT_VALUES: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub path: PathBuf,
    pub header: Option<String>,
    pub values: Vec<f64>,
    /// SHA-256 of the file contents, hex encoded.
    pub sha256: String,
}

impl Dataset {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        let (header, values) = parse_values(&bytes).map_err(|m| CliError::Input(format!("{}: {m}", path.display())))?;
        Ok(Self {
            path: path.to_path_buf(),
            header,
            values,
            sha256: crate::config::sha256_hex(&bytes),
        })
    }

    /// Read and require at least [`MIN_FIT_VALUES`] observations.
    pub fn read_for_fit(path: &Path) -> Result<Self, CliError> {
        let d = Self::read(path)?;
        if d.values.len() < MIN_FIT_VALUES {
            return Err(CliError::Input(format!(
                "{}: need at least {MIN_FIT_VALUES} values to fit, found {}",
                path.display(),
                d.values.len()
            )));
        }
        Ok(d)
    }
}

/// Parse CSV bytes into an optional header and the values.
pub fn parse_values(bytes: &[u8]) -> Result<(Option<String>, Vec<f64>), String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(bytes);

    let mut header = None;
    let mut values = Vec::new();
    let mut bad: Vec<String> = Vec::new();
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| format!("malformed CSV: {e}"))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let is_first = std::mem::replace(&mut first, false);
        if record.len() != 1 {
            bad.push(format!("line {line}: expected one column, found {}", record.len()));
            continue;
        }
        let field = &record[0];
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(v) => bad.push(format!("line {line}: non-finite value {v}")),
            Err(_) if is_first => header = Some(field.to_string()),
            Err(_) => bad.push(format!("line {line}: not a number: {field:?}")),
        }
    }
    if !bad.is_empty() {
        return Err(bad.join("; "));
    }
    if values.is_empty() {
        return Err("no numeric values".into());
    }
    Ok((header, values))
}
