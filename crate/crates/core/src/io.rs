//! CSV input and output for numeric tables with a header row.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub data: DataMatrix,
}

pub fn read_csv<R: Read>(input: R) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::InvalidInput("CSV input has no header row".into()));
    }
    let d = headers.len();
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != d {
            return Err(Error::InvalidInput(format!(
                "row {} has {} fields, header has {d}",
                i + 2,
                record.len()
            )));
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::InvalidInput(format!("row {}, column '{}': '{field}' is not a number", i + 2, headers[j]))
            })?;
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::InvalidInput("CSV input has no data rows".into()));
    }
    Ok(Table {
        headers,
        data: DataMatrix::from_row_major(values, rows, d)?,
    })
}

pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Table> {
    read_csv(File::open(path)?)
}

/// Column names `prefix1, prefix2, …`.
pub fn default_headers(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("{prefix}{j}")).collect()
}

pub fn write_csv<W: Write>(out: W, headers: &[String], data: &DataMatrix) -> Result<()> {
    if headers.len() != data.ncols() {
        return Err(Error::InvalidInput(format!(
            "{} headers for {} columns",
            headers.len(),
            data.ncols()
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(headers)?;
    for row in data.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_path(path: impl AsRef<Path>, headers: &[String], data: &DataMatrix) -> Result<()> {
    write_csv(File::create(path)?, headers, data)
}
