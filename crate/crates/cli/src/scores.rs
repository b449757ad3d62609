use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use spfa::model::standardize_columns;
use spfa::report::{factor_names, matrix_table};
use spfa::scores::predictor_weights;
use spfa::PredictorKind;

use crate::error::{CliError, CliResult};
use crate::extract::SolutionFile;
use crate::input::read_numeric_csv;
use crate::output::{Format, OutputDir};

#[derive(Debug, Args, Serialize)]
pub struct ScoresArgs {
    /// `solution.json` written by `extract`.
    #[arg(long)]
    pub solution: PathBuf,
    /// Raw data CSV, rows = observations, columns in the solution's order.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "regression")]
    pub kind: PredictorKind,
    #[arg(short, long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "csv,json")]
    pub format: Vec<Format>,
}

pub fn run(args: ScoresArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&args.solution).map_err(|e| CliError::io(&args.solution, e))?;
    let stored: SolutionFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("{}: not a solution file: {e}", args.solution.display())))?;
    let data = read_numeric_csv(&args.data)?;
    let p = stored.solution.p();
    if data.values.ncols() != p {
        return Err(CliError::Data(format!(
            "data has {} columns, the solution has {p} variables",
            data.values.ncols()
        )));
    }
    if data.values.nrows() < 2 {
        return Err(CliError::Data("data needs at least two rows to standardize".into()));
    }
    if stored.correlation.dim() != p {
        return Err(CliError::Data("solution file correlation does not match its loadings".into()));
    }
    let z = standardize_columns(&data.values)?;
    let weights = predictor_weights(&stored.solution, &stored.correlation, args.kind)?;
    let scores = weights.apply(&z)?;
    let q = stored.solution.q();
    let rows: Vec<String> = (1..=scores.nrows()).map(|i| i.to_string()).collect();
    let mut out = OutputDir::create(&args.out, &args.format)?;
    out.write_table("scores", &matrix_table(&scores, &factor_names(q), Some(("row", &rows))))?;
    out.write_table(
        "weights",
        &matrix_table(&weights.weights, &factor_names(q), Some(("variable", &stored.variables))),
    )?;
    out.write_manifest("scores", &args)
}
