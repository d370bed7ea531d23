use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use super::{Annotation, Segment};

#[derive(Debug, Error)]
pub enum RttmError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: expected at least 9 fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: {field} {value:?} is not a number")]
    NotNumeric { line: usize, field: &'static str, value: String },
    #[error("line {line}: onset must be finite and non-negative, got {value}")]
    InvalidOnset { line: usize, value: f64 },
    #[error("line {line}: duration must be positive, got {value}")]
    InvalidDuration { line: usize, value: f64 },
}

fn number(line: usize, field: &'static str, value: &str) -> Result<f64, RttmError> {
    value.parse::<f64>().map_err(|_| RttmError::NotNumeric {
        line,
        field,
        value: value.to_string(),
    })
}

/// Parses RTTM text into one annotation per recording.
///
/// Only `SPEAKER` rows are read; other row types and `#` comment lines are
/// skipped. Line numbers in errors are 1-based.
pub fn parse_rttm(text: &str) -> Result<BTreeMap<String, Annotation>, RttmError> {
    let mut out: BTreeMap<String, Annotation> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let fields: Vec<&str> = raw.split_whitespace().collect();
        match fields.first() {
            None => continue,
            Some(t) if t.starts_with('#') => continue,
            Some(&"SPEAKER") => {}
            Some(_) => continue,
        }
        if fields.len() < 9 {
            return Err(RttmError::FieldCount {
                line,
                found: fields.len(),
            });
        }
        let onset = number(line, "onset", fields[3])?;
        let duration = number(line, "duration", fields[4])?;
        if !(onset.is_finite() && onset >= 0.0) {
            return Err(RttmError::InvalidOnset { line, value: onset });
        }
        if !(duration.is_finite() && duration > 0.0) {
            return Err(RttmError::InvalidDuration { line, value: duration });
        }
        let uri = fields[1];
        let annotation = out
            .entry(uri.to_string())
            .or_insert_with(|| Annotation::new(uri));
        let pushed = annotation.push(Segment::new(onset, duration, fields[7]));
        debug_assert!(pushed);
    }
    Ok(out)
}

pub fn read_rttm(path: impl AsRef<Path>) -> Result<BTreeMap<String, Annotation>, RttmError> {
    parse_rttm(&fs::read_to_string(path)?)
}

/// Formats an annotation as RTTM, one `SPEAKER` row per segment sorted by
/// onset then label, with millisecond precision.
pub fn emit_rttm(annotation: &Annotation) -> String {
    let mut out = String::new();
    for seg in annotation.sorted_segments() {
        let _ = writeln!(
            out,
            "SPEAKER {} 1 {:.3} {:.3} <NA> <NA> {} <NA> <NA>",
            annotation.uri, seg.onset, seg.duration, seg.speaker
        );
    }
    out
}
