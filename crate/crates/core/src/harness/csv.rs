//! Plain numeric CSV ingestion for real-data experiments.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::harness::report::format_f64;
use crate::linalg::{DesignMatrix, ResponseVector};

/// Parsing and preprocessing options for [`load_csv`].
#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    /// Zero-based index of the response column in the file.
    pub response_column: usize,
    /// Skip the first line.
    pub header: bool,
    /// Prepend a column of ones to the predictors.
    pub add_intercept: bool,
    /// Append squares and pairwise products of the predictors; k base
    /// predictors become k + k + k(k-1)/2 columns.
    pub expand_features: bool,
}

/// Parse a comma-separated numeric file into a design matrix and response.
///
/// The designated column becomes the response; the remaining columns become
/// predictors in file order. Error locations are 1-based file coordinates.
pub fn load_csv(
    path: impl AsRef<Path>,
    opts: &CsvOptions,
) -> Result<(DesignMatrix, ResponseVector)> {
    let file = File::open(path.as_ref())?;
    load_csv_from(BufReader::new(file), opts)
}

/// Same as [`load_csv`] but over any buffered reader.
pub fn load_csv_from<R: BufRead>(
    reader: R,
    opts: &CsvOptions,
) -> Result<(DesignMatrix, ResponseVector)> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut n_cols = None;

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if opts.header && idx == 0 {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        match n_cols {
            None => {
                if cells.len() < 2 {
                    return Err(Error::Parse {
                        line: line_no,
                        column: 1,
                        message: format!(
                            "need at least 2 columns (response plus predictors), found {}",
                            cells.len()
                        ),
                    });
                }
                n_cols = Some(cells.len());
            }
            Some(expected) if cells.len() != expected => {
                return Err(Error::Parse {
                    line: line_no,
                    column: cells.len().min(expected) + 1,
                    message: format!("expected {expected} columns, found {}", cells.len()),
                });
            }
            _ => {}
        }
        let mut row = Vec::with_capacity(cells.len());
        for (col, cell) in cells.iter().enumerate() {
            let trimmed = cell.trim();
            let value: f64 = trimmed.parse().map_err(|_| Error::NonNumeric {
                line: line_no,
                column: col + 1,
                value: trimmed.to_string(),
            })?;
            row.push(value);
        }
        rows.push(row);
    }

    let n_cols = n_cols.ok_or(Error::EmptyFile)?;
    if rows.is_empty() {
        return Err(Error::EmptyFile);
    }
    if opts.response_column >= n_cols {
        return Err(Error::InvalidArgument(format!(
            "response column {} out of range for a {}-column file",
            opts.response_column, n_cols
        )));
    }

    let n = rows.len();
    let y = DVector::from_fn(n, |i, _| rows[i][opts.response_column]);
    let base: Vec<Vec<f64>> = rows
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|(j, _)| *j != opts.response_column)
                .map(|(_, &v)| v)
                .collect()
        })
        .collect();

    let k = n_cols - 1;
    let mut predictors: Vec<Vec<f64>> = base;
    if opts.expand_features {
        for row in predictors.iter_mut() {
            let linear = row.clone();
            for &v in &linear {
                row.push(v * v);
            }
            for i in 0..k {
                for j in (i + 1)..k {
                    row.push(linear[i] * linear[j]);
                }
            }
        }
    }
    if opts.add_intercept {
        for row in predictors.iter_mut() {
            row.insert(0, 1.0);
        }
    }

    let p = predictors[0].len();
    let x = DMatrix::from_fn(n, p, |i, j| predictors[i][j]);
    Ok((DesignMatrix::new(x)?, ResponseVector::new(y)?))
}

/// Write a dataset as CSV with the response in column 0, matching what the
/// loader expects with `response_column = 0`.
pub fn write_dataset_csv(
    path: impl AsRef<Path>,
    x: &DesignMatrix,
    y: &ResponseVector,
) -> Result<()> {
    let mut out = std::io::BufWriter::new(File::create(path.as_ref())?);
    for i in 0..x.n_rows() {
        let mut line = format_f64(y.values()[i]);
        for j in 0..x.n_cols() {
            line.push(',');
            line.push_str(&format_f64(x.values()[(i, j)]));
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}
