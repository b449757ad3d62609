//! Numeric CSV ingestion. A header row is detected when any of its fields
//! is not a number; a leading column of non-numeric row labels is dropped.

use std::path::Path;

use nalgebra::DMatrix;
use spfa::{LoadingMatrix, SymMatrix};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct NumericCsv {
    pub header: Option<Vec<String>>,
    pub values: DMatrix<f64>,
}

impl NumericCsv {
    pub fn column_names(&self) -> Vec<String> {
        match &self.header {
            Some(h) if h.len() == self.values.ncols() => h.clone(),
            _ => spfa::report::variable_names(self.values.ncols()),
        }
    }
}

fn is_number(s: &str) -> bool {
    s.trim().parse::<f64>().is_ok()
}

pub fn read_numeric_csv(path: &Path) -> CliResult<NumericCsv> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_numeric_csv(&text).map_err(|e| match e {
        CliError::Data(msg) => CliError::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_numeric_csv(text: &str) -> CliResult<NumericCsv> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows: Vec<Vec<String>> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| CliError::Data(format!("malformed CSV: {e}")))?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        rows.push(rec.iter().map(str::to_string).collect());
    }
    if rows.is_empty() {
        return Err(CliError::Data("file contains no rows".into()));
    }
    let header = if rows[0].iter().any(|f| !is_number(f)) { Some(rows.remove(0)) } else { None };
    if rows.is_empty() {
        return Err(CliError::Data("file contains a header but no data rows".into()));
    }
    let labelled = rows.iter().all(|r| !r.is_empty() && !is_number(&r[0]));
    let skip = usize::from(labelled);
    let header = header.map(|h| h.into_iter().skip(skip).collect::<Vec<_>>());
    let ncols = rows[0].len() - skip;
    let mut values = DMatrix::zeros(rows.len(), ncols);
    for (i, row) in rows.iter().enumerate() {
        if row.len() - skip != ncols {
            return Err(CliError::Data(format!("row {} has {} values, expected {ncols}", i + 1, row.len() - skip)));
        }
        for (j, field) in row.iter().skip(skip).enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| CliError::Data(format!("row {}, column {}: '{field}' is not a number", i + 1, j + 1)))?;
            if !v.is_finite() {
                return Err(CliError::Data(format!("row {}, column {}: value is not finite", i + 1, j + 1)));
            }
            values[(i, j)] = v;
        }
    }
    Ok(NumericCsv { header, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    /// Square symmetric input is a matrix, anything else raw data.
    Auto,
    Matrix,
    Data,
}

/// The matrix to analyze and whether it came from raw data.
#[derive(Debug, Clone)]
pub struct AnalysisInput {
    pub matrix: SymMatrix,
    pub names: Vec<String>,
    pub from_data: Option<usize>,
}

fn looks_like_matrix(m: &DMatrix<f64>) -> bool {
    if !m.is_square() || m.nrows() < 2 {
        return false;
    }
    let scale = m.amax().max(1.0);
    (0..m.nrows()).all(|i| m[(i, i)] > 0.0 && (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= 1e-9 * scale))
}

pub fn analysis_input(csv: NumericCsv, kind: InputKind) -> CliResult<AnalysisInput> {
    let names = csv.column_names();
    let as_matrix = match kind {
        InputKind::Matrix => true,
        InputKind::Data => false,
        InputKind::Auto => looks_like_matrix(&csv.values),
    };
    if as_matrix {
        if !csv.values.is_square() {
            return Err(CliError::Data(format!(
                "matrix input must be square, got {}x{}",
                csv.values.nrows(),
                csv.values.ncols()
            )));
        }
        let matrix = SymMatrix::new(csv.values)?;
        Ok(AnalysisInput { matrix, names, from_data: None })
    } else {
        let n = csv.values.nrows();
        if n < 3 {
            return Err(CliError::Data(format!("raw data needs at least 3 rows, got {n}")));
        }
        let matrix = spfa::model::correlation_from_data(&csv.values)?;
        Ok(AnalysisInput { matrix, names, from_data: Some(n) })
    }
}

pub fn read_target(path: &Path) -> CliResult<LoadingMatrix> {
    let csv = read_numeric_csv(path)?;
    Ok(LoadingMatrix::new(csv.values)?)
}
