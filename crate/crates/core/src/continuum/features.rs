//! Loader for pre-extracted feature vectors.
//!
//! One sample per line: `label,f1,...,fD`. This lets externally produced
//! feature datasets (for example a frozen-backbone image embedding) run
//! through the same task pipeline as raw pixels.

use std::path::Path;

use crate::continuum::idx::SourceData;
use crate::error::{Error, Result};

pub fn parse_feature_csv(text: &str) -> Result<SourceData> {
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    let mut dim: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let label_field = fields.next().unwrap_or("");
        let label: usize = label_field
            .trim()
            .parse()
            .map_err(|_| Error::line(line_no, format!("bad label {label_field:?}")))?;
        let mut row = Vec::new();
        for field in fields {
            let value: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::line(line_no, format!("bad feature value {field:?}")))?;
            row.push(value);
        }
        if row.is_empty() {
            return Err(Error::line(line_no, "no feature values after label"));
        }
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(Error::line(
                    line_no,
                    format!("expected {d} features, got {}", row.len()),
                ))
            }
            _ => {}
        }
        inputs.push(row);
        labels.push(label);
    }
    if inputs.is_empty() {
        return Err(Error::config("feature csv contains no samples"));
    }
    SourceData::new(inputs, labels)
}

pub fn load_feature_csv(path: &Path) -> Result<SourceData> {
    let text = std::fs::read_to_string(path)?;
    parse_feature_csv(&text)
}
