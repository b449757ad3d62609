//! Off-diagonal residual traces and the SRMR_ND fit index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FactorSolution, SymMatrix};
use crate::scores::reproduced_cov_from_loadings;

/// Loading-implied and score-implied fit of one solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub srmr_nd_loadings: f64,
    pub srmr_nd_scores: f64,
    pub trace_loadings: f64,
    pub trace_scores: f64,
    pub p: usize,
    /// The analyzed matrix did not have unit diagonal and was standardized.
    pub standardized: bool,
}

/// Sum of squared off-diagonal entries of `s - reproduced`.
pub fn offdiag_residual_trace(s: &SymMatrix, reproduced: &SymMatrix) -> Result<f64> {
    let p = s.dim();
    if reproduced.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: format!("{p}x{p}"),
            found: format!("{0}x{0}", reproduced.dim()),
        });
    }
    let (a, b) = (s.as_matrix(), reproduced.as_matrix());
    let mut sum = 0.0;
    for j in 0..p {
        for i in 0..p {
            if i != j {
                let r = a[(i, j)] - b[(i, j)];
                sum += r * r;
            }
        }
    }
    Ok(sum)
}

fn srmr_from_trace(trace: f64, p: usize) -> f64 {
    (trace / (p * (p - 1)) as f64).sqrt()
}

pub fn srmr_nd(s: &SymMatrix, reproduced: &SymMatrix) -> Result<f64> {
    let p = s.dim();
    if p < 2 {
        return Err(Error::InvalidArgument("SRMR_ND needs at least two variables".into()));
    }
    Ok(srmr_from_trace(offdiag_residual_trace(s, reproduced)?, p))
}

/// Fit of `L L'` and of `L (L' S^-1 L)^-1 L'` to the off-diagonal of `s`.
/// Non-unit-diagonal input is standardized together with the loadings.
pub fn fit_report(s: &SymMatrix, sol: &FactorSolution) -> Result<FitReport> {
    let p = s.dim();
    if sol.p() != p {
        return Err(Error::DimensionMismatch { expected: format!("{p} variables"), found: format!("{}", sol.p()) });
    }
    if p < 2 {
        return Err(Error::InvalidArgument("SRMR_ND needs at least two variables".into()));
    }
    let standardized = !s.has_unit_diagonal(1e-12);
    let (s, loadings) = if standardized {
        let (r, sd) = s.standardized()?;
        (r, sol.loadings.rows_divided(&sd))
    } else {
        (s.clone(), sol.loadings.clone())
    };
    let trace_loadings = offdiag_residual_trace(&s, &loadings.outer())?;
    let trace_scores = offdiag_residual_trace(&s, &reproduced_cov_from_loadings(&loadings, &s)?)?;
    Ok(FitReport {
        srmr_nd_loadings: srmr_from_trace(trace_loadings, p),
        srmr_nd_scores: srmr_from_trace(trace_scores, p),
        trace_loadings,
        trace_scores,
        p,
        standardized,
    })
}
