//! CSV ingestion.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Predictors, response and the column names they came from.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub predictors: DMatrix<f64>,
    pub response: Vec<f64>,
    pub predictor_names: Vec<String>,
    pub response_name: String,
    /// Hex SHA-256 of the raw file bytes.
    pub digest: String,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.response.len()
    }

    pub fn p(&self) -> usize {
        self.predictors.ncols()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn resolve_column(headers: &[String], key: &str) -> Result<usize, CliError> {
    if let Some(i) = headers.iter().position(|h| h == key) {
        return Ok(i);
    }
    match key.parse::<usize>() {
        Ok(i) if i < headers.len() => Ok(i),
        _ => Err(CliError::Input(format!(
            "column '{key}' not found; header is [{}]",
            headers.join(", ")
        ))),
    }
}

/// Reads a headed, comma-separated file. The response is a column name or a
/// 0-based index; predictors default to every other column.
pub fn read_dataset(
    path: &Path,
    response: &str,
    predictors: Option<&[String]>,
) -> Result<Dataset, CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let digest = sha256_hex(&bytes);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Input(format!("cannot read header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(CliError::Input("missing header row".into()));
    }
    let y_col = resolve_column(&headers, response)?;
    let x_cols: Vec<usize> = match predictors {
        Some(list) => list
            .iter()
            .map(|k| resolve_column(&headers, k))
            .collect::<Result<_, _>>()?,
        None => (0..headers.len()).filter(|&i| i != y_col).collect(),
    };
    if x_cols.is_empty() {
        return Err(CliError::Input("no predictor columns".into()));
    }
    if x_cols.contains(&y_col) {
        return Err(CliError::Input("the response cannot also be a predictor".into()));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut response_values = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| CliError::Input(format!("row {row}: {e}")))?;
        if record.len() != headers.len() {
            return Err(CliError::Input(format!(
                "row {row}: expected {} fields, found {}",
                headers.len(),
                record.len()
            )));
        }
        let cell = |c: usize| -> Result<f64, CliError> {
            let raw = &record[c];
            if raw.is_empty() {
                return Err(CliError::Input(format!(
                    "row {row}, column '{}': missing value",
                    headers[c]
                )));
            }
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(CliError::Input(format!(
                    "row {row}, column '{}': '{raw}' is not a finite number",
                    headers[c]
                ))),
            }
        };
        response_values.push(cell(y_col)?);
        rows.push(x_cols.iter().map(|&c| cell(c)).collect::<Result<_, _>>()?);
    }
    let n = rows.len();
    if n < 2 {
        return Err(CliError::Input(format!("need at least 2 data rows, found {n}")));
    }
    let p = x_cols.len();
    let predictors = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    Ok(Dataset {
        predictors,
        response: response_values,
        predictor_names: x_cols.iter().map(|&c| headers[c].clone()).collect(),
        response_name: headers[y_col].clone(),
        digest,
    })
}
