//! Small helpers around the `csv` crate: header-checked deserialization with
//! line numbers in errors.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};

/// One deserialized row together with its 1-based line number in the source.
pub(crate) struct Row<T> {
    pub line: u64,
    pub value: T,
}

pub(crate) fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_rows<T, R>(reader: R, label: &Path, required: &[&str]) -> Result<Vec<Row<T>>>
where
    T: DeserializeOwned,
    R: Read,
{
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(label, e))?.clone();
    for col in required {
        if !headers.iter().any(|h| h == *col) {
            return Err(Error::Parse {
                path: label.to_path_buf(),
                line: 1,
                message: format!("missing required column `{col}`"),
            });
        }
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(label, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let value: T = rec.deserialize(Some(&headers)).map_err(|e| Error::Parse {
            path: label.to_path_buf(),
            line,
            message: deserialize_message(&e),
        })?;
        rows.push(Row { line, value });
    }
    Ok(rows)
}

pub(crate) fn parse_error(label: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: label.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn csv_error(label: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Parse {
        path: label.to_path_buf(),
        line,
        message: deserialize_message(&e),
    }
}

fn deserialize_message(e: &csv::Error) -> String {
    match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => {
            let field = err
                .field()
                .map(|f| format!("field {}: ", f + 1))
                .unwrap_or_default();
            format!("{field}{}", err.kind())
        }
        _ => e.to_string(),
    }
}

/// Resolves `p` against `base` unless it is already absolute.
pub(crate) fn resolve(base: &Path, p: &str) -> PathBuf {
    let candidate = Path::new(p);
    if candidate.is_absolute() {
        candidate.to_path_buf()
    } else {
        base.join(candidate)
    }
}
