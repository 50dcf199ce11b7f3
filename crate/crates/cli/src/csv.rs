//! CSV ingestion: `key,measure` rows for one key, `key1,key2,measure` for
//! two. A single leading header line is detected and skipped; parse errors
//! carry the 1-based line number.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use polyfit_core::Point2D;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: expected {expected} comma-separated fields, got {got}")]
    SchemaMismatch {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn parse_fields(line: &str, line_no: usize, expected: usize) -> Result<Vec<f64>, CsvError> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != expected {
        return Err(CsvError::SchemaMismatch {
            line: line_no,
            expected,
            got: fields.len(),
        });
    }
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>().map_err(|_| CsvError::Parse {
                line: line_no,
                reason: format!("not a number: {f:?}"),
            })
        })
        .collect()
}

fn read_rows(path: &Path, fields: usize) -> Result<Vec<Vec<f64>>, CsvError> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        // A first line whose leading field is non-numeric is a header.
        if line_no == 1
            && line
                .split(',')
                .next()
                .is_some_and(|f| f.trim().parse::<f64>().is_err())
        {
            continue;
        }
        rows.push(parse_fields(&line, line_no, fields)?);
    }
    Ok(rows)
}

/// Read `key,measure` rows.
pub fn read_csv_1d(path: &Path) -> Result<Vec<(f64, f64)>, CsvError> {
    Ok(read_rows(path, 2)?
        .into_iter()
        .map(|v| (v[0], v[1]))
        .collect())
}

/// Read `key1,key2,measure` rows.
pub fn read_csv_2d(path: &Path) -> Result<Vec<Point2D>, CsvError> {
    Ok(read_rows(path, 3)?
        .into_iter()
        .map(|v| Point2D {
            u: v[0],
            v: v[1],
            w: v[2],
        })
        .collect())
}
