//! Tabular output: a small typed table that renders to CSV (10 significant
//! digits, dot decimal separator) and to a JSON array of objects keyed by
//! the same column names.

use serde_json::{Map, Value};

use crate::error::Result;
use crate::model::{LoadingMatrix, SymMatrix};
use crate::study::{AggregateRow, LoadingTable, Metric, SimCondition, SimRecord, Summary};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(i64),
    Num(f64),
    Bool(bool),
    Missing,
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Missing, Into::into)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => format_number(*v),
            Cell::Bool(v) => v.to_string(),
            Cell::Missing => String::new(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Int(v) => Value::from(*v),
            Cell::Num(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Bool(v) => Value::Bool(*v),
            Cell::Missing => Value::Null,
        }
    }
}

/// Ten significant digits. Plain decimal notation for magnitudes in
/// `[1e-4, 1e10)`, scientific otherwise; trailing zeros are dropped.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "NaN".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{v:.9e}");
    let (mantissa, exponent) = sci.split_once('e').expect("scientific format");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    if (-4..10).contains(&exponent) {
        let decimals = (9 - exponent).max(0) as usize;
        let rounded: f64 = sci.parse().expect("round trip");
        trim_zeros(format!("{rounded:.decimals$}"))
    } else {
        format!("{}e{exponent}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    t.to_string()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let io = |e: csv::Error| crate::error::Error::InvalidArgument(format!("CSV output: {e}"));
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| crate::error::Error::InvalidArgument(format!("CSV output: {e}")))?;
        Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
    }

    pub fn to_json_value(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> =
                        self.columns.iter().cloned().zip(row.iter().map(Cell::to_json)).collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json_value()).expect("JSON values serialize");
        s.push('\n');
        s
    }
}

/// Square or rectangular numeric matrix with optional column names.
pub fn matrix_table(m: &nalgebra::DMatrix<f64>, columns: &[String], row_label: Option<(&str, &[String])>) -> Table {
    let mut header: Vec<String> = Vec::new();
    if let Some((name, _)) = row_label {
        header.push(name.to_string());
    }
    header.extend(columns.iter().cloned());
    let mut t = Table::new(header);
    for i in 0..m.nrows() {
        let mut row = Vec::with_capacity(m.ncols() + 1);
        if let Some((_, labels)) = row_label {
            row.push(Cell::Text(labels[i].clone()));
        }
        row.extend(m.row(i).iter().map(|v| Cell::Num(*v)));
        t.push(row);
    }
    t
}

pub fn factor_names(q: usize) -> Vec<String> {
    (1..=q).map(|j| format!("F{j}")).collect()
}

pub fn variable_names(p: usize) -> Vec<String> {
    (1..=p).map(|i| format!("V{i}")).collect()
}

pub fn loadings_table(l: &LoadingMatrix, variables: &[String]) -> Table {
    matrix_table(l.as_matrix(), &factor_names(l.q()), Some(("variable", variables)))
}

pub fn sym_table(s: &SymMatrix, names: &[String]) -> Table {
    matrix_table(s.as_matrix(), names, None)
}

pub const RECORD_COLUMNS: [&str; 9] =
    ["condition", "replication", "method", "converged", "heywood", "failure", "metric", "factor", "value"];

/// Long format: one row per `(replication, method, metric, factor)`.
/// `factor` is empty for the SRMR_ND metrics; failed extractions produce a
/// single row with an empty metric.
pub fn records_table(records: &[SimRecord]) -> Table {
    let mut t = Table::new(RECORD_COLUMNS);
    for rec in records {
        for m in &rec.methods {
            let base = |metric: Cell, factor: Cell, value: Cell| {
                vec![
                    Cell::Text(rec.condition.clone()),
                    rec.replication.into(),
                    m.method.as_str().into(),
                    m.converged.into(),
                    m.heywood.into(),
                    m.failure.clone().into(),
                    metric,
                    factor,
                    value,
                ]
            };
            if m.failure.is_some() {
                t.push(base(Cell::Missing, Cell::Missing, Cell::Missing));
                continue;
            }
            t.push(base(Metric::SrmrNdLoadings.as_str().into(), Cell::Missing, m.srmr_nd_loadings.into()));
            t.push(base(Metric::SrmrNdScores.as_str().into(), Cell::Missing, m.srmr_nd_scores.into()));
            for (j, r) in m.rho.iter().enumerate() {
                t.push(base(Metric::Rho.as_str().into(), (j + 1).into(), (*r).into()));
            }
        }
    }
    t
}

pub const AGGREGATE_COLUMNS: [&str; 22] = [
    "condition",
    "study",
    "q",
    "p",
    "n",
    "base_loading",
    "max_loading",
    "model_error",
    "rotation",
    "method",
    "replications",
    "failures",
    "heywood",
    "srmr_nd_loadings_mean",
    "srmr_nd_loadings_sd",
    "srmr_nd_scores_mean",
    "srmr_nd_scores_sd",
    "rho_mean",
    "rho_sd",
    "srmr_nd_loadings_count",
    "srmr_nd_scores_count",
    "rho_count",
];

/// Wide format: one row per condition and method.
pub fn aggregate_table(cells: &[(SimCondition, Vec<AggregateRow>)]) -> Table {
    let mut t = Table::new(AGGREGATE_COLUMNS);
    for (c, rows) in cells {
        for r in rows {
            let s = |m: Metric| -> &Summary { r.summary(m) };
            t.push(vec![
                Cell::Text(c.id.clone()),
                c.study.as_str().into(),
                c.q.into(),
                c.p.into(),
                c.n.into(),
                c.base_loading.into(),
                c.max_loading.into(),
                c.model_error.as_str().into(),
                c.rotation.as_str().into(),
                r.method.as_str().into(),
                r.replications.into(),
                r.failures.into(),
                r.heywood.into(),
                s(Metric::SrmrNdLoadings).mean.into(),
                s(Metric::SrmrNdLoadings).sd.into(),
                s(Metric::SrmrNdScores).mean.into(),
                s(Metric::SrmrNdScores).sd.into(),
                s(Metric::Rho).mean.into(),
                s(Metric::Rho).sd.into(),
                s(Metric::SrmrNdLoadings).count.into(),
                s(Metric::SrmrNdScores).count.into(),
                s(Metric::Rho).count.into(),
            ]);
        }
    }
    t
}

/// Rows `(condition, max_loading, method, variable, F1..Fq)`.
pub fn loading_tables_table(tables: &[LoadingTable]) -> Table {
    let q = tables.first().map_or(0, |t| t.mfa.q());
    let mut columns: Vec<String> = ["condition", "max_loading", "method", "variable"].map(String::from).to_vec();
    columns.extend(factor_names(q));
    let mut out = Table::new(columns);
    for t in tables {
        for (method, l) in [("mfa", &t.mfa), ("spfa", &t.spfa)] {
            for i in 0..l.p() {
                let mut row = vec![
                    Cell::Text(t.condition.clone()),
                    t.max_loading.into(),
                    method.into(),
                    Cell::Text(format!("V{}", i + 1)),
                ];
                row.extend((0..l.q()).map(|j| Cell::Num(l.get(i, j))));
                out.push(row);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(0.5), "0.5");
        assert_eq!(format_number(1.0 / 3.0), "0.3333333333");
        assert_eq!(format_number(-2.0 / 3.0), "-0.6666666667");
        assert_eq!(format_number(123.456789012345), "123.456789");
        assert_eq!(format_number(1e-12), "1e-12");
        assert_eq!(format_number(2.5e-7), "2.5e-7");
        assert_eq!(format_number(0.000123456789012), "0.000123456789");
        assert_eq!(format_number(1e12), "1e12");
        assert_eq!(format_number(9.99999999999), "10");
    }

    #[test]
    fn csv_and_json_share_columns() {
        let mut t = Table::new(["a", "b", "c"]);
        t.push(vec!["x,y".into(), 0.25.into(), Cell::Missing]);
        t.push(vec!["z".into(), 3usize.into(), true.into()]);
        assert_eq!(t.to_csv().unwrap(), "a,b,c\n\"x,y\",0.25,\nz,3,true\n");
        let j = t.to_json_value();
        assert_eq!(j[0]["b"], 0.25);
        assert!(j[0]["c"].is_null());
        assert_eq!(j[1]["c"], true);
    }

    #[test]
    fn loadings_layout() {
        let l = LoadingMatrix::from_rows(&[vec![0.5, 0.0], vec![0.25, 0.75], vec![0.0, 1.0]]).unwrap();
        let t = loadings_table(&l, &variable_names(3));
        assert_eq!(t.to_csv().unwrap(), "variable,F1,F2\nV1,0.5,0\nV2,0.25,0.75\nV3,0,1\n");
    }
}
