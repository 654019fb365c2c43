//! Loading named numeric columns from a CSV file with a header row.
//! Empty or non-numeric cells are errors; nothing is imputed.

use std::path::Path;

use crate::error::{CliError, CliResult};

pub fn read_columns(path: &Path, names: &[&str]) -> CliResult<Vec<Vec<f64>>> {
    if !path.exists() {
        return Err(CliError::FileNotFound(path.to_path_buf()));
    }
    let read_err = |e: csv::Error| CliError::Read {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(read_err)?;
    let headers = reader.headers().map_err(read_err)?.clone();
    let indices = names
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim() == *name)
                .ok_or_else(|| CliError::MissingColumn {
                    path: path.to_path_buf(),
                    column: name.to_string(),
                })
        })
        .collect::<CliResult<Vec<_>>>()?;

    let mut columns = vec![Vec::new(); names.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(read_err)?;
        for ((col, &idx), name) in columns.iter_mut().zip(&indices).zip(names) {
            let cell = record.get(idx).unwrap_or("").trim();
            let value: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| CliError::BadCell {
                    path: path.to_path_buf(),
                    row: row + 1,
                    column: name.to_string(),
                    value: cell.to_string(),
                })?;
            col.push(value);
        }
    }
    Ok(columns)
}
