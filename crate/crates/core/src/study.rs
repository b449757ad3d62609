//! Simulation studies: condition grids, the per-replication pipeline
//! (matrix, extraction, rotation, fit, determinacy) and aggregation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::{mfa_extract, pca_extract, spfa_extract, ExtractionSettings};
use crate::fit::fit_report;
use crate::model::{FactorSolution, LoadingMatrix, Method, SymMatrix};
use crate::rotation::{match_columns, procrustes, varimax_gpa, VarimaxSettings};
use crate::scores::{
    component_weights, determinacy_pca, determinacy_sample, determinacy_spfa, predictor_weights, PredictorKind,
    ScoreWeights,
};
use crate::simgen::{
    build_model_error_population, derive_seed, draw_sample, ladder_maxima, rng_from_seed, ModelError, Population,
    PopulationSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    PopulationLadder,
    PopulationError,
    Sample,
}

impl StudyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StudyKind::PopulationLadder => "population-ladder",
            StudyKind::PopulationError => "population-error",
            StudyKind::Sample => "sample",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RotationChoice {
    #[default]
    Procrustes,
    Varimax,
}

impl RotationChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            RotationChoice::Procrustes => "procrustes",
            RotationChoice::Varimax => "varimax",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimCondition {
    pub id: String,
    pub study: StudyKind,
    pub q: usize,
    pub p: usize,
    /// Sample size; `None` for population studies.
    pub n: Option<usize>,
    pub base_loading: f64,
    pub max_loading: f64,
    pub model_error: ModelError,
    pub replications: usize,
    /// Master seed. Minor factors depend on it and on `(q, p)` only; sample
    /// streams additionally on the cell and replication.
    pub seed: u64,
    #[serde(default)]
    pub rotation: RotationChoice,
}

impl SimCondition {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        study: StudyKind,
        q: usize,
        p: usize,
        n: Option<usize>,
        base_loading: f64,
        max_loading: f64,
        model_error: ModelError,
        replications: usize,
        seed: u64,
        rotation: RotationChoice,
    ) -> Self {
        let mut cond = Self {
            id: String::new(),
            study,
            q,
            p,
            n,
            base_loading,
            max_loading,
            model_error,
            replications,
            seed,
            rotation,
        };
        cond.id = cond.default_id();
        cond
    }

    pub fn default_id(&self) -> String {
        let n = self.n.map(|n| format!("-n{n}")).unwrap_or_default();
        format!(
            "{}-q{}-p{}{}-li{:.2}-lm{:.2}-{}-{}",
            self.study.as_str(),
            self.q,
            self.p,
            n,
            self.base_loading,
            self.max_loading,
            self.model_error.as_str(),
            self.rotation.as_str()
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidArgument(format!("{}: replications must be >= 1", self.id)));
        }
        match (self.study, self.n) {
            (StudyKind::Sample, None) => {
                return Err(Error::InvalidArgument(format!("{}: sample study needs n", self.id)))
            }
            (StudyKind::Sample, Some(n)) if n <= self.p => {
                return Err(Error::InvalidArgument(format!("{}: need n > p", self.id)))
            }
            _ => {}
        }
        if self.rotation == RotationChoice::Varimax && self.q < 2 {
            return Err(Error::InvalidArgument(format!("{}: Varimax needs q >= 2", self.id)));
        }
        Ok(())
    }

    pub fn population_spec(&self) -> PopulationSpec {
        PopulationSpec::new(self.q, self.p, self.base_loading, self.max_loading)
            .with_model_error(self.model_error, self.seed)
    }

    pub fn population(&self) -> Result<Population> {
        build_model_error_population(&self.population_spec())
    }

    /// Seed of the sample stream for one replication. The rotation choice
    /// is deliberately not part of the key, so Procrustes and Varimax cells
    /// analyze the same samples.
    pub fn replication_seed(&self, replication: usize) -> u64 {
        let error = match self.model_error {
            ModelError::None => 0,
            ModelError::Moderate => 1,
            ModelError::Large => 2,
        };
        derive_seed(
            self.seed,
            &[
                self.q as u64,
                self.p as u64,
                self.n.unwrap_or(0) as u64,
                (self.base_loading * 1000.0).round() as u64,
                (self.max_loading * 1000.0).round() as u64,
                error,
                replication as u64,
            ],
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRecord {
    pub method: Method,
    pub srmr_nd_loadings: Option<f64>,
    pub srmr_nd_scores: Option<f64>,
    /// Correlation of each predictor with its population major factor.
    pub rho: Vec<f64>,
    pub converged: bool,
    pub heywood: bool,
    pub iterations: usize,
    pub failure: Option<String>,
}

impl MethodRecord {
    fn failed(method: Method, err: &Error) -> Self {
        Self {
            method,
            srmr_nd_loadings: None,
            srmr_nd_scores: None,
            rho: Vec::new(),
            converged: false,
            heywood: matches!(err, Error::Heywood { .. }),
            iterations: 0,
            failure: Some(err.to_string()),
        }
    }

    /// Errors and non-converged extractions are excluded from aggregates;
    /// Heywood cases that completed are kept.
    pub fn is_failed(&self) -> bool {
        self.failure.is_some() || !self.converged
    }

    pub fn rho_mean(&self) -> Option<f64> {
        (!self.rho.is_empty()).then(|| self.rho.iter().sum::<f64>() / self.rho.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub condition: String,
    pub replication: usize,
    pub methods: Vec<MethodRecord>,
}

impl SimRecord {
    pub fn method(&self, method: Method) -> Option<&MethodRecord> {
        self.methods.iter().find(|m| m.method == method)
    }
}

/// An extracted solution after rotation towards the initial loadings.
#[derive(Debug, Clone, PartialEq)]
pub struct RotatedSolution {
    pub solution: FactorSolution,
    pub rotation_converged: bool,
}

fn extract(method: Method, s: &SymMatrix, q: usize) -> Result<FactorSolution> {
    let settings = ExtractionSettings::new(q);
    match method {
        Method::Mfa => mfa_extract(s, &settings),
        Method::Spfa => spfa_extract(s, &settings),
        Method::Pca => pca_extract(s, q),
    }
}

/// Extracts with `method` and rotates towards `target`.
pub fn extract_and_rotate(
    method: Method,
    s: &SymMatrix,
    target: &LoadingMatrix,
    rotation: RotationChoice,
    seed: u64,
) -> Result<RotatedSolution> {
    let sol = extract(method, s, target.q())?;
    match rotation {
        RotationChoice::Procrustes => {
            let r = procrustes(&sol.loadings, target)?;
            Ok(RotatedSolution { solution: sol.rotated(&r.transform)?, rotation_converged: true })
        }
        RotationChoice::Varimax => {
            let mut rng = rng_from_seed(seed);
            let r = varimax_gpa(&sol.loadings, &VarimaxSettings::default(), &mut rng)?;
            let matched = match_columns(&r.rotated, target)?;
            let solution = sol.rotated(&(&r.transform * &matched.transform))?;
            Ok(RotatedSolution { solution, rotation_converged: r.converged })
        }
    }
}

fn method_weights(method: Method, sol: &FactorSolution, s: &SymMatrix) -> Result<ScoreWeights> {
    match method {
        Method::Pca => ScoreWeights::new(PredictorKind::PcaComponent, component_weights(&sol.loadings)?),
        _ => predictor_weights(sol, s, PredictorKind::Regression),
    }
}

fn analyze_method(
    cond: &SimCondition,
    pop: &Population,
    s: &SymMatrix,
    method: Method,
    seed: u64,
) -> Result<MethodRecord> {
    let rotated = extract_and_rotate(method, s, &pop.initial_loadings, cond.rotation, seed)?;
    let sol = &rotated.solution;
    let fit = fit_report(s, sol)?;
    let phi = pop.phi();
    let rho = match (cond.study, method) {
        (StudyKind::Sample, _) | (_, Method::Mfa) => {
            determinacy_sample(&pop.major_loadings, &phi, &pop.sigma, &method_weights(method, sol, s)?)?
        }
        (_, Method::Spfa) => determinacy_spfa(&pop.major_loadings, &phi, &pop.sigma, &sol.loadings)?,
        (_, Method::Pca) => determinacy_pca(&pop.major_loadings, &phi, &sol.loadings)?,
    };
    Ok(MethodRecord {
        method,
        srmr_nd_loadings: Some(fit.srmr_nd_loadings),
        srmr_nd_scores: Some(fit.srmr_nd_scores),
        rho,
        converged: sol.converged && rotated.rotation_converged,
        heywood: sol.heywood,
        iterations: sol.iterations,
        failure: None,
    })
}

fn run_replication(cond: &SimCondition, pop: &Population, replication: usize) -> SimRecord {
    let seed = cond.replication_seed(replication);
    let matrix = match (cond.study, cond.n) {
        (StudyKind::Sample, Some(n)) => draw_sample(pop, n, &mut rng_from_seed(seed)),
        _ => Ok(pop.sigma.clone()),
    };
    let methods = Method::ALL
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let outcome = matrix
                .as_ref()
                .map_err(Clone::clone)
                .and_then(|s| analyze_method(cond, pop, s, method, derive_seed(seed, &[0x726f74, k as u64])));
            outcome.unwrap_or_else(|err| {
                log::debug!("{} replication {replication} {method}: {err}", cond.id);
                MethodRecord::failed(method, &err)
            })
        })
        .collect();
    SimRecord { condition: cond.id.clone(), replication, methods }
}

/// Runs all replications of `cond` in parallel; records are ordered by
/// replication index.
pub fn run_condition(cond: &SimCondition) -> Result<Vec<SimRecord>> {
    cond.validate()?;
    let pop = cond.population()?;
    Ok((0..cond.replications).into_par_iter().map(|r| run_replication(cond, &pop, r)).collect())
}

pub fn run_condition_serial(cond: &SimCondition) -> Result<Vec<SimRecord>> {
    cond.validate()?;
    let pop = cond.population()?;
    Ok((0..cond.replications).map(|r| run_replication(cond, &pop, r)).collect())
}

/// Runs every condition; the outer vector follows the order of `conds`.
pub fn run_conditions(conds: &[SimCondition]) -> Result<Vec<Vec<SimRecord>>> {
    conds.par_iter().map(run_condition).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    SrmrNdLoadings,
    SrmrNdScores,
    Rho,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::SrmrNdLoadings, Metric::SrmrNdScores, Metric::Rho];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::SrmrNdLoadings => "srmr_nd_loadings",
            Metric::SrmrNdScores => "srmr_nd_scores",
            Metric::Rho => "rho",
        }
    }

    fn value(self, rec: &MethodRecord) -> Option<f64> {
        match self {
            Metric::SrmrNdLoadings => rec.srmr_nd_loadings,
            Metric::SrmrNdScores => rec.srmr_nd_scores,
            Metric::Rho => rec.rho_mean(),
        }
    }
}

/// Mean and standard deviation (n - 1 denominator) of one metric.
/// `mean` is `None` when every replication failed; `sd` is `None` with
/// fewer than two usable replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let count = values.len();
        if count == 0 {
            return Self { count, mean: None, sd: None };
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let sd = (count > 1).then(|| {
            let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (count - 1) as f64).sqrt()
        });
        Self { count, mean: Some(mean), sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub condition: String,
    pub method: Method,
    pub replications: usize,
    pub failures: usize,
    pub heywood: usize,
    pub srmr_nd_loadings: Summary,
    pub srmr_nd_scores: Summary,
    pub rho: Summary,
}

impl AggregateRow {
    pub fn summary(&self, metric: Metric) -> &Summary {
        match metric {
            Metric::SrmrNdLoadings => &self.srmr_nd_loadings,
            Metric::SrmrNdScores => &self.srmr_nd_scores,
            Metric::Rho => &self.rho,
        }
    }
}

/// One row per method present in `records`, in `Method::ALL` order.
pub fn aggregate(records: &[SimRecord]) -> Result<Vec<AggregateRow>> {
    let first = records.first().ok_or_else(|| Error::InvalidArgument("no records to aggregate".into()))?;
    if let Some(other) = records.iter().find(|r| r.condition != first.condition) {
        return Err(Error::InvalidArgument(format!(
            "records mix conditions '{}' and '{}'",
            first.condition, other.condition
        )));
    }
    let mut rows = Vec::new();
    for method in Method::ALL {
        let recs: Vec<&MethodRecord> = records.iter().filter_map(|r| r.method(method)).collect();
        if recs.is_empty() {
            continue;
        }
        let usable: Vec<&MethodRecord> = recs.iter().copied().filter(|m| !m.is_failed()).collect();
        let summarize = |metric: Metric| {
            let values: Vec<f64> = usable.iter().filter_map(|m| metric.value(m)).collect();
            Summary::of(&values)
        };
        rows.push(AggregateRow {
            condition: first.condition.clone(),
            method,
            replications: recs.len(),
            failures: recs.len() - usable.len(),
            heywood: recs.iter().filter(|m| m.heywood).count(),
            srmr_nd_loadings: summarize(Metric::SrmrNdLoadings),
            srmr_nd_scores: summarize(Metric::SrmrNdScores),
            rho: summarize(Metric::Rho),
        });
    }
    Ok(rows)
}

/// Λ_m increments of the sample study, in hundredths.
pub const MAX_LOADING_INCREMENTS: [u32; 4] = [0, 15, 30, 45];
/// Λ_i levels of the sample study, in hundredths.
pub const BASE_LOADINGS: [u32; 4] = [35, 40, 45, 50];
pub const SAMPLE_SIZES: [usize; 2] = [150, 600];

fn hundredths(x: u32) -> f64 {
    x as f64 / 100.0
}

/// The 128 sample conditions: `q in {3, 6}` with five indicators per
/// factor, `n in {150, 600}`, four Λ_i levels, Λ_m = Λ_i + increment, with
/// and without moderate model error, Procrustes rotation.
pub fn sample_grid(seed: u64, replications: usize) -> Vec<SimCondition> {
    let mut out = Vec::with_capacity(128);
    for model_error in [ModelError::None, ModelError::Moderate] {
        for q in [3, 6] {
            for n in SAMPLE_SIZES {
                for base in BASE_LOADINGS {
                    for inc in MAX_LOADING_INCREMENTS {
                        out.push(SimCondition::new(
                            StudyKind::Sample,
                            q,
                            5 * q,
                            Some(n),
                            hundredths(base),
                            hundredths(base + inc),
                            model_error,
                            replications,
                            seed,
                            RotationChoice::Procrustes,
                        ));
                    }
                }
            }
        }
    }
    out
}

/// The Varimax subset: `q = 6`, Λ_i in {.35, .50}, all Λ_m levels, both
/// sample sizes, without and with model error.
pub fn varimax_grid(seed: u64, replications: usize) -> Vec<SimCondition> {
    sample_grid(seed, replications)
        .into_iter()
        .filter(|c| c.q == 6 && (c.base_loading == 0.35 || c.base_loading == 0.50))
        .map(|mut c| {
            c.rotation = RotationChoice::Varimax;
            c.id = c.default_id();
            c
        })
        .collect()
}

/// Error-free populations with the leading loading running from 1.00 down
/// to `base + .01`, `p / q` indicators per factor.
pub fn ladder_conditions(q: usize, p: usize, base: f64) -> Vec<SimCondition> {
    ladder_maxima(base)
        .into_iter()
        .map(|max| {
            SimCondition::new(
                StudyKind::PopulationLadder,
                q,
                p,
                None,
                base,
                max,
                ModelError::None,
                1,
                0,
                RotationChoice::Procrustes,
            )
        })
        .collect()
}

/// Populations with minor factors, `q = 3`, `p = 15`, Λ_i = .50 and the
/// leading loading from .50 to .95 in steps of .05.
pub fn population_error_conditions(model_error: ModelError, seed: u64) -> Vec<SimCondition> {
    (50..=95)
        .step_by(5)
        .map(|m| {
            SimCondition::new(
                StudyKind::PopulationError,
                3,
                15,
                None,
                0.50,
                hundredths(m),
                model_error,
                1,
                seed,
                RotationChoice::Procrustes,
            )
        })
        .collect()
}

/// Procrustes-rotated MFA and SPFA loadings of one population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadingTable {
    pub condition: String,
    pub max_loading: f64,
    pub mfa: LoadingMatrix,
    pub spfa: LoadingMatrix,
}

/// Loading tables for the equal-loading (.50) and the one-peak (.95)
/// populations with minor factors, `q = 3`, `p = 15`.
pub fn table1(model_error: ModelError, seed: u64) -> Result<Vec<LoadingTable>> {
    [0.50, 0.95]
        .iter()
        .map(|&max| {
            let cond = SimCondition::new(
                StudyKind::PopulationError,
                3,
                15,
                None,
                0.50,
                max,
                model_error,
                1,
                seed,
                RotationChoice::Procrustes,
            );
            let pop = cond.population()?;
            let rotate = |m| {
                extract_and_rotate(m, &pop.sigma, &pop.initial_loadings, RotationChoice::Procrustes, 0)
                    .map(|r| r.solution.loadings)
            };
            Ok(LoadingTable {
                condition: cond.id.clone(),
                max_loading: max,
                mfa: rotate(Method::Mfa)?,
                spfa: rotate(Method::Spfa)?,
            })
        })
        .collect()
}
