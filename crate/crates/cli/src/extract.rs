use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use spfa::report::{factor_names, loadings_table, matrix_table, sym_table, Cell, Table};
use spfa::rotation::{match_columns, procrustes, varimax_gpa, VarimaxSettings};
use spfa::scores::{determinacy_mfa, predictor_weights};
use spfa::{
    fit_report, mfa_extract, pca_extract, spfa_extract, ExtractionSettings, FactorSolution, HeywoodPolicy, Method,
    PredictorKind, SymMatrix,
};

use crate::error::{CliError, CliResult};
use crate::input::{analysis_input, read_numeric_csv, read_target, InputKind};
use crate::output::{Format, OutputDir};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RotationArg {
    None,
    Procrustes,
    Varimax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HeywoodArg {
    Flag,
    Clamp,
    Reject,
}

impl From<HeywoodArg> for HeywoodPolicy {
    fn from(h: HeywoodArg) -> Self {
        match h {
            HeywoodArg::Flag => HeywoodPolicy::Flag,
            HeywoodArg::Clamp => HeywoodPolicy::Clamp,
            HeywoodArg::Reject => HeywoodPolicy::Reject,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ExtractArgs {
    /// Correlation/covariance matrix CSV or raw data CSV (rows = observations).
    #[arg(short, long)]
    pub input: PathBuf,
    /// Number of factors or components.
    #[arg(short, long)]
    pub q: usize,
    #[arg(long, value_delimiter = ',', default_value = "mfa,spfa,pca")]
    pub methods: Vec<Method>,
    #[arg(long, value_enum, default_value_t = InputKind::Auto)]
    pub input_kind: InputKind,
    /// Loadings CSV (p x q) to rotate towards.
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Defaults to procrustes with --target, none otherwise.
    #[arg(long, value_enum)]
    pub rotation: Option<RotationArg>,
    /// Score weights to write (regression, bartlett, mcdonald, pca-component).
    #[arg(long, value_delimiter = ',')]
    pub weights: Vec<PredictorKind>,
    #[arg(long, value_enum, default_value_t = HeywoodArg::Clamp)]
    pub heywood: HeywoodArg,
    #[arg(long, default_value_t = spfa::extraction::DEFAULT_CONVERGENCE_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = spfa::extraction::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    /// Seed of the random Varimax starts.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "csv,json")]
    pub format: Vec<Format>,
}

/// Everything `scores` needs to rebuild predictor weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionFile {
    pub solution: FactorSolution,
    pub correlation: SymMatrix,
    pub variables: Vec<String>,
    /// Rows of raw data the correlation was computed from, if any.
    pub n: Option<usize>,
}

#[derive(Serialize)]
struct Resolved<'a> {
    #[serde(flatten)]
    args: &'a ExtractArgs,
    rotation_resolved: RotationArg,
    p: usize,
    from_data_rows: Option<usize>,
    standardized: bool,
}

pub fn run(args: ExtractArgs) -> CliResult<()> {
    let csv = read_numeric_csv(&args.input)?;
    let input = analysis_input(csv, args.input_kind)?;
    let p = input.matrix.dim();
    if args.q == 0 || args.q >= p {
        return Err(CliError::Usage(format!("need 1 <= q < p, got q = {} with p = {p}", args.q)));
    }
    if args.methods.is_empty() {
        return Err(CliError::Usage("no methods requested".into()));
    }
    let standardized = !input.matrix.has_unit_diagonal(1e-12);
    let s = if standardized {
        log::info!("input has non-unit diagonal; analyzing the correlation matrix");
        input.matrix.standardized()?.0
    } else {
        input.matrix.clone()
    };
    if s.max_abs_offdiag() < 1e-8 {
        log::warn!("no common variance: all off-diagonal correlations are zero");
    }
    let target = args.target.as_deref().map(read_target).transpose()?;
    if let Some(t) = &target {
        if t.p() != p || t.q() != args.q {
            return Err(CliError::Data(format!("target is {}x{}, expected {p}x{}", t.p(), t.q(), args.q)));
        }
    }
    let rotation = args.rotation.unwrap_or(if target.is_some() { RotationArg::Procrustes } else { RotationArg::None });
    if rotation == RotationArg::Procrustes && target.is_none() {
        return Err(CliError::Usage("procrustes rotation needs --target".into()));
    }
    if rotation == RotationArg::Varimax && args.q < 2 {
        return Err(CliError::Usage("varimax rotation needs q >= 2".into()));
    }
    let settings = ExtractionSettings::new(args.q)
        .with_convergence(args.epsilon, args.max_iter)
        .with_heywood_policy(args.heywood.into());

    let mut out = OutputDir::create(&args.out, &args.format)?;
    let mut summary = Table::new([
        "method",
        "iterations",
        "converged",
        "heywood",
        "objective",
        "srmr_nd_loadings",
        "srmr_nd_scores",
        "standardized",
    ]);
    let variables = input.names.clone();
    for &method in &args.methods {
        let sol = match method {
            Method::Mfa => mfa_extract(&s, &settings)?,
            Method::Spfa => spfa_extract(&s, &settings)?,
            Method::Pca => pca_extract(&s, args.q)?,
        };
        if !sol.converged {
            log::warn!("{method}: no convergence after {} iterations", sol.iterations);
        }
        if sol.heywood {
            log::warn!("{method}: Heywood case (communality reached the variable's variance)");
        }
        let sol = rotate(sol, rotation, target.as_ref(), args.seed)?;
        let fit = fit_report(&s, &sol)?;
        let dir = method.as_str();
        out.write_table(&format!("{dir}/loadings"), &loadings_table(&sol.loadings, &variables))?;
        let mut uniq = Table::new(["variable", "communality", "uniqueness"]);
        for (i, (h, u)) in sol.loadings.communalities().iter().zip(&sol.uniqueness).enumerate() {
            uniq.push(vec![Cell::Text(variables[i].clone()), (*h).into(), (*u).into()]);
        }
        out.write_table(&format!("{dir}/uniqueness"), &uniq)?;
        out.write_table(&format!("{dir}/factor_cov"), &sym_table(&sol.factor_cov, &factor_names(args.q)))?;
        let mut fit_t =
            Table::new(["srmr_nd_loadings", "srmr_nd_scores", "trace_loadings", "trace_scores", "p", "standardized"]);
        fit_t.push(vec![
            fit.srmr_nd_loadings.into(),
            fit.srmr_nd_scores.into(),
            fit.trace_loadings.into(),
            fit.trace_scores.into(),
            fit.p.into(),
            standardized.into(),
        ]);
        out.write_table(&format!("{dir}/fit"), &fit_t)?;
        let mut det = Table::new(["factor", "rho"]);
        for (j, r) in determinacy_mfa(&sol, &s)?.iter().enumerate() {
            det.push(vec![Cell::Text(format!("F{}", j + 1)), (*r).into()]);
        }
        out.write_table(&format!("{dir}/determinacy"), &det)?;
        for &kind in &args.weights {
            match predictor_weights(&sol, &s, kind) {
                Ok(w) => {
                    let t = matrix_table(&w.weights, &factor_names(args.q), Some(("variable", &variables)));
                    out.write_table(&format!("{dir}/weights-{}", kind.as_str()), &t)?;
                }
                Err(e @ spfa::Error::NonPositiveUniqueness { .. }) => {
                    log::warn!("{method}: {kind} weights skipped: {e}");
                }
                Err(e) => return Err(e.into()),
            }
        }
        summary.push(vec![
            method.as_str().into(),
            sol.iterations.into(),
            sol.converged.into(),
            sol.heywood.into(),
            sol.objective.into(),
            fit.srmr_nd_loadings.into(),
            fit.srmr_nd_scores.into(),
            standardized.into(),
        ]);
        out.write_json(
            &format!("{dir}/solution.json"),
            &SolutionFile { solution: sol, correlation: s.clone(), variables: variables.clone(), n: input.from_data },
        )?;
    }
    out.write_table("summary", &summary)?;
    out.write_manifest(
        "extract",
        &Resolved { args: &args, rotation_resolved: rotation, p, from_data_rows: input.from_data, standardized },
    )
}

fn rotate(
    sol: FactorSolution,
    rotation: RotationArg,
    target: Option<&spfa::LoadingMatrix>,
    seed: u64,
) -> CliResult<FactorSolution> {
    match (rotation, target) {
        (RotationArg::None, _) => Ok(sol),
        (RotationArg::Procrustes, Some(t)) => {
            let r = procrustes(&sol.loadings, t)?;
            Ok(sol.rotated(&r.transform)?)
        }
        (RotationArg::Procrustes, None) => Err(CliError::Usage("procrustes rotation needs --target".into())),
        (RotationArg::Varimax, target) => {
            let mut rng = spfa::simgen::rng_from_seed(seed);
            let r = varimax_gpa(&sol.loadings, &VarimaxSettings::default(), &mut rng)?;
            if !r.converged {
                log::warn!("varimax did not converge");
            }
            let mut transform = r.transform;
            if let Some(t) = target {
                transform = &transform * &match_columns(&r.rotated, t)?.transform;
            }
            Ok(sol.rotated(&transform)?)
        }
    }
}
