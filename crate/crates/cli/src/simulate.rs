use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::Serialize;
use spfa::report::{aggregate_table, loading_tables_table, records_table};
use spfa::study::{
    aggregate, ladder_conditions, population_error_conditions, run_conditions, sample_grid, table1, varimax_grid,
    SimCondition, SimRecord,
};
use spfa::ModelError;

use crate::charts::{grid_chart, population_chart, Cell, RHO_SERIES, SRMR_SERIES};
use crate::error::{CliError, CliResult};
use crate::output::{Format, OutputDir};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    /// Error-free population ladders.
    Figure1,
    /// Populations with minor factors, leading loading .50 to .95.
    Figure2,
    /// Procrustes-rotated MFA/SPFA loadings of two populations with minor factors.
    Table1,
    /// The 128-condition sample grid.
    SampleGrid,
    /// The 32-condition Varimax sub-grid.
    VarimaxGrid,
    /// Conditions read from a JSON file (--grid).
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorArg {
    Moderate,
    Large,
}

impl From<ErrorArg> for ModelError {
    fn from(e: ErrorArg) -> Self {
        match e {
            ErrorArg::Moderate => ModelError::Moderate,
            ErrorArg::Large => ModelError::Large,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(value_enum)]
    pub study: Study,
    /// Indicators per factor for figure1 (3 or 5); both when omitted.
    #[arg(long)]
    pub pq: Option<usize>,
    /// Model error level for figure2/table1; figure2 runs both when omitted,
    /// table1 defaults to large.
    #[arg(long, value_enum)]
    pub error: Option<ErrorArg>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Replications per sample condition.
    #[arg(long, default_value_t = 100)]
    pub replications: usize,
    /// JSON array of conditions for the custom study.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(short, long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "csv,json,svg")]
    pub format: Vec<Format>,
}

#[derive(Serialize)]
struct Resolved<'a> {
    #[serde(flatten)]
    args: &'a SimulateArgs,
    conditions: usize,
}

fn run_cells(conds: Vec<SimCondition>) -> CliResult<(Vec<SimRecord>, Vec<Cell>)> {
    let results = run_conditions(&conds)?;
    let mut records = Vec::new();
    let mut cells = Vec::with_capacity(conds.len());
    for (cond, recs) in conds.into_iter().zip(results) {
        let rows = aggregate(&recs)?;
        records.extend(recs);
        cells.push((cond, rows));
    }
    Ok((records, cells))
}

fn write_results(out: &mut OutputDir, prefix: &str, records: &[SimRecord], cells: &[Cell]) -> CliResult<()> {
    out.write_table(&format!("{prefix}records"), &records_table(records))?;
    out.write_table(&format!("{prefix}aggregates"), &aggregate_table(cells))
}

fn population_charts(out: &mut OutputDir, stem: &str, cells: &[Cell], label: &str) -> CliResult<()> {
    let srmr = population_chart(cells, &SRMR_SERIES, &format!("SRMR_ND, {label}"), "SRMR_ND");
    out.write_svg(&format!("{stem}-srmr.svg"), &srmr.render())?;
    let rho = population_chart(cells, &RHO_SERIES, &format!("determinacy, {label}"), "ρ");
    out.write_svg(&format!("{stem}-rho.svg"), &rho.render())
}

fn grid_charts(out: &mut OutputDir, cells: &[Cell], varimax: bool) -> CliResult<()> {
    let panels: Vec<(&str, ModelError, bool)> = if varimax {
        vec![("figure7-none", ModelError::None, false), ("figure7-moderate", ModelError::Moderate, false)]
    } else {
        vec![
            ("figure3", ModelError::None, true),
            ("figure4", ModelError::Moderate, true),
            ("figure5", ModelError::None, false),
            ("figure6", ModelError::Moderate, false),
        ]
    };
    let rotation = if varimax { "Varimax" } else { "Procrustes" };
    for (stem, error, srmr) in panels {
        for q in [3, 6] {
            for n in spfa::study::SAMPLE_SIZES {
                let (series, y): (&[_], &str) = if srmr { (&SRMR_SERIES, "SRMR_ND") } else { (&RHO_SERIES, "ρ") };
                let title = format!("{y}, q = {q}, p = {}, n = {n}, model error {}, {rotation}", 5 * q, error.as_str());
                if let Some(chart) = grid_chart(cells, q, n, error, series, &title, y) {
                    out.write_svg(&format!("{stem}-q{q}-n{n}.svg"), &chart.render())?;
                }
            }
        }
    }
    Ok(())
}

fn read_grid(path: &std::path::Path, seed: u64) -> CliResult<Vec<SimCondition>> {
    #[derive(serde::Deserialize)]
    struct Entry {
        #[serde(default)]
        id: String,
        #[serde(flatten)]
        rest: serde_json::Value,
    }
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let entries: Vec<Entry> =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: invalid grid: {e}", path.display())))?;
    if entries.is_empty() {
        return Err(CliError::Data(format!("{}: grid has no conditions", path.display())));
    }
    entries
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            let mut value = e.rest;
            if let Some(obj) = value.as_object_mut() {
                obj.entry("seed").or_insert(serde_json::json!(seed));
                obj.insert("id".into(), serde_json::json!(e.id));
            }
            let mut c: SimCondition = serde_json::from_value(value)
                .map_err(|err| CliError::Data(format!("{}: condition {i}: {err}", path.display())))?;
            if c.id.is_empty() {
                c.id = c.default_id();
            }
            c.validate().map_err(|err| CliError::Data(err.to_string()))?;
            Ok(c)
        })
        .collect()
}

pub fn run(args: SimulateArgs) -> CliResult<()> {
    if args.replications == 0 {
        return Err(CliError::Usage("--replications must be >= 1".into()));
    }
    let mut out = OutputDir::create(&args.out, &args.format)?;
    let mut conditions = 0;
    match args.study {
        Study::Figure1 => {
            let pqs = match args.pq {
                None => vec![3, 5],
                Some(v @ (3 | 5)) => vec![v],
                Some(v) => return Err(CliError::Usage(format!("--pq must be 3 or 5, got {v}"))),
            };
            for pq in pqs {
                let conds = ladder_conditions(3, 3 * pq, 0.5);
                conditions += conds.len();
                let (records, cells) = run_cells(conds)?;
                let stem = format!("figure1-pq{pq}");
                write_results(&mut out, &format!("{stem}-"), &records, &cells)?;
                population_charts(&mut out, &stem, &cells, &format!("q = 3, p = {}, no model error", 3 * pq))?;
            }
        }
        Study::Figure2 => {
            let levels = match args.error {
                None => vec![ModelError::Large, ModelError::Moderate],
                Some(e) => vec![e.into()],
            };
            for level in levels {
                let conds = population_error_conditions(level, args.seed);
                conditions += conds.len();
                let (records, cells) = run_cells(conds)?;
                let stem = format!("figure2-{}", level.as_str());
                write_results(&mut out, &format!("{stem}-"), &records, &cells)?;
                population_charts(&mut out, &stem, &cells, &format!("q = 3, p = 15, {} model error", level.as_str()))?;
            }
        }
        Study::Table1 => {
            let level: ModelError = args.error.unwrap_or(ErrorArg::Large).into();
            let tables = table1(level, args.seed)?;
            conditions = tables.len();
            out.write_table("table1", &loading_tables_table(&tables))?;
        }
        Study::SampleGrid | Study::VarimaxGrid => {
            let varimax = args.study == Study::VarimaxGrid;
            let conds = if varimax {
                varimax_grid(args.seed, args.replications)
            } else {
                sample_grid(args.seed, args.replications)
            };
            conditions = conds.len();
            let (records, cells) = run_cells(conds)?;
            write_results(&mut out, "", &records, &cells)?;
            grid_charts(&mut out, &cells, varimax)?;
        }
        Study::Custom => {
            let path = args.grid.as_deref().ok_or_else(|| CliError::Usage("the custom study needs --grid".into()))?;
            let conds = read_grid(path, args.seed)?;
            conditions = conds.len();
            let (records, cells) = run_cells(conds)?;
            write_results(&mut out, "", &records, &cells)?;
        }
    }
    out.write_manifest("simulate", &Resolved { args: &args, conditions })
}
