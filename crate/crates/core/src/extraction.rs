//! Variance extraction: Minres factor analysis (MFA), score predictor factor
//! analysis (SPFA) and principal component analysis (PCA).
//!
//! MFA and SPFA share the iterated principal factor scheme:
//!
//! 1. start from communalities `h` (squared multiple correlations),
//! 2. eigendecompose `S - diag(S) + diag(h)`,
//! 3. form loadings from the leading `q` eigenpairs,
//! 4. set `h = diag(L L')`,
//! 5. stop once the residual trace changes by less than the tolerance.
//!
//! They differ only in step 3. MFA uses `K_q Gamma_q^(1/2)`; SPFA uses
//! `K_q (K_q' S^-1 K_q)^(-1/2)`, which makes the loadings satisfy
//! `L' S^-1 L = I` and so equates the loading-implied and score-implied
//! off-diagonal covariances.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::offdiag_residual_trace;
use crate::linalg::{eigen_desc, smc_communalities, spd_inverse, sym_inv_sqrt};
use crate::model::{FactorSolution, LoadingMatrix, Method, SymMatrix};
use crate::scores::reproduced_cov_from_loadings_with_inverse;

/// Communalities are clamped to this fraction of the variable's variance
/// under [`HeywoodPolicy::Clamp`].
pub const HEYWOOD_CLAMP: f64 = 0.998;

pub const DEFAULT_MAX_ITER: usize = 10_000;
pub const DEFAULT_CONVERGENCE_EPSILON: f64 = 1e-20;
/// Changes smaller than this fraction of the objective are rounding noise.
pub const DEFAULT_RELATIVE_EPSILON: f64 = 1e-13;

/// What to do when a reproduced communality exceeds the variable's variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeywoodPolicy {
    /// Record the event and keep iterating with the unclamped communality.
    Flag,
    /// Record the event and clamp the communality to `HEYWOOD_CLAMP * s_ii`.
    #[default]
    Clamp,
    /// Abort with [`Error::Heywood`].
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionSettings {
    pub q: usize,
    pub max_iter: usize,
    pub convergence_epsilon: f64,
    #[serde(default = "default_relative_epsilon")]
    pub relative_epsilon: f64,
    pub heywood_policy: HeywoodPolicy,
}

fn default_relative_epsilon() -> f64 {
    DEFAULT_RELATIVE_EPSILON
}

impl ExtractionSettings {
    pub fn new(q: usize) -> Self {
        Self {
            q,
            max_iter: DEFAULT_MAX_ITER,
            convergence_epsilon: DEFAULT_CONVERGENCE_EPSILON,
            relative_epsilon: DEFAULT_RELATIVE_EPSILON,
            heywood_policy: HeywoodPolicy::default(),
        }
    }

    pub fn with_heywood_policy(mut self, policy: HeywoodPolicy) -> Self {
        self.heywood_policy = policy;
        self
    }

    pub fn with_convergence(mut self, epsilon: f64, max_iter: usize) -> Self {
        self.convergence_epsilon = epsilon;
        self.max_iter = max_iter;
        self
    }

    /// Stopping threshold for successive objectives `a` and `b`.
    pub fn tolerance(&self, a: f64, b: f64) -> f64 {
        self.convergence_epsilon.max(self.relative_epsilon * a.abs().max(b.abs()))
    }

    fn validate(&self, p: usize) -> Result<()> {
        if self.q == 0 || self.q >= p {
            return Err(Error::InvalidArgument(format!("need 1 <= q < p, got q = {} with p = {p}", self.q)));
        }
        if !(self.convergence_epsilon > 0.0) {
            return Err(Error::InvalidArgument("convergence epsilon must be positive".into()));
        }
        if !(self.relative_epsilon >= 0.0) {
            return Err(Error::InvalidArgument("relative convergence epsilon must be non-negative".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Eigenvalues this far below zero (relative to the largest) abort an
/// iteration; smaller negative values are treated as zero.
const NEGATIVE_EIGENVALUE_TOLERANCE: f64 = 1e-10;

pub fn mfa_extract(s: &SymMatrix, settings: &ExtractionSettings) -> Result<FactorSolution> {
    iterate(s, settings, Method::Mfa)
}

pub fn spfa_extract(s: &SymMatrix, settings: &ExtractionSettings) -> Result<FactorSolution> {
    iterate(s, settings, Method::Spfa)
}

pub fn pca_extract(s: &SymMatrix, q: usize) -> Result<FactorSolution> {
    let p = s.dim();
    if q == 0 || q > p {
        return Err(Error::InvalidArgument(format!("need 1 <= q <= p, got q = {q} with p = {p}")));
    }
    let eig = eigen_desc(s)?;
    let loadings = principal_loadings(&eig.leading_vectors(q), &eig.values.as_slice()[..q]);
    let loadings = LoadingMatrix::new(loadings)?;
    let objective = offdiag_residual_trace(s, &loadings.outer())?;
    Ok(FactorSolution {
        method: Method::Pca,
        uniqueness: uniqueness(s, &loadings),
        heywood: false,
        loadings,
        factor_cov: SymMatrix::identity(q),
        iterations: 0,
        converged: true,
        objective,
        history: vec![objective],
    })
}

/// `K_q Gamma_q^(1/2)` with tiny negative eigenvalues read as zero.
fn principal_loadings(kq: &DMatrix<f64>, gamma: &[f64]) -> DMatrix<f64> {
    let mut l = kq.clone();
    for (j, mut col) in l.column_iter_mut().enumerate() {
        col *= gamma[j].max(0.0).sqrt();
    }
    l
}

fn uniqueness(s: &SymMatrix, loadings: &LoadingMatrix) -> Vec<f64> {
    loadings.communalities().iter().enumerate().map(|(i, h)| s.get(i, i) - h).collect()
}

fn iterate(s: &SymMatrix, settings: &ExtractionSettings, method: Method) -> Result<FactorSolution> {
    let p = s.dim();
    settings.validate(p)?;
    let q = settings.q;
    let s_inv = spd_inverse(s)?;
    let mut h = smc_communalities(s)?;
    let mut heywood = false;
    let mut history = Vec::new();
    let mut loadings: Option<LoadingMatrix> = None;
    let mut converged = false;

    for iteration in 1..=settings.max_iter {
        let mut reduced = s.as_matrix().clone();
        for (i, hi) in h.iter().enumerate() {
            reduced[(i, i)] = *hi;
        }
        let eig = eigen_desc(&SymMatrix::symmetrized(reduced))?;
        let scale = eig.values[0].abs().max(1.0);
        let gamma_q = eig.values[q - 1];
        if gamma_q < -NEGATIVE_EIGENVALUE_TOLERANCE * scale {
            return Err(Error::DegenerateExtraction { iteration, index: q, value: gamma_q });
        }
        let kq = eig.leading_vectors(q);
        let l = match method {
            Method::Mfa => principal_loadings(&kq, &eig.values.as_slice()[..q]),
            Method::Spfa => {
                let inner = SymMatrix::symmetrized(kq.transpose() * s_inv.as_matrix() * &kq);
                &kq * sym_inv_sqrt(&inner)?.as_matrix()
            }
            Method::Pca => unreachable!("PCA is not iterated"),
        };
        let l = LoadingMatrix::new(l)?;

        h = l.communalities();
        for (i, hi) in h.iter_mut().enumerate() {
            if *hi > s.get(i, i) {
                heywood = true;
                match settings.heywood_policy {
                    HeywoodPolicy::Flag => {}
                    HeywoodPolicy::Clamp => *hi = HEYWOOD_CLAMP * s.get(i, i),
                    HeywoodPolicy::Reject => return Err(Error::Heywood { variable: i, communality: *hi }),
                }
            }
        }

        let objective = objective(method, s, &s_inv, &l)?;
        let done =
            history.last().is_some_and(|prev: &f64| (prev - objective).abs() < settings.tolerance(*prev, objective));
        history.push(objective);
        loadings = Some(l);
        if done {
            converged = true;
            break;
        }
    }

    let loadings = loadings.expect("max_iter >= 1");
    let uniqueness = uniqueness(s, &loadings);
    Ok(FactorSolution {
        method,
        uniqueness,
        loadings,
        factor_cov: SymMatrix::identity(q),
        iterations: history.len(),
        converged,
        objective: *history.last().expect("at least one iteration"),
        heywood,
        history,
    })
}

/// Residual off-diagonal trace minimized by each method: loading-implied
/// for MFA, score-implied for SPFA.
fn objective(method: Method, s: &SymMatrix, s_inv: &SymMatrix, l: &LoadingMatrix) -> Result<f64> {
    match method {
        Method::Spfa => {
            let implied = reproduced_cov_from_loadings_with_inverse(l, s_inv)?;
            offdiag_residual_trace(s, &implied)
        }
        _ => offdiag_residual_trace(s, &l.outer()),
    }
}
