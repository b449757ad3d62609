//! Factor score predictor weights, the covariances they reproduce, and
//! determinacy coefficients.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{spd_inverse, sym_inv_sqrt};
use crate::model::{FactorSolution, LoadingMatrix, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorKind {
    Regression,
    Bartlett,
    Mcdonald,
    PcaComponent,
}

impl PredictorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PredictorKind::Regression => "regression",
            PredictorKind::Bartlett => "bartlett",
            PredictorKind::Mcdonald => "mcdonald",
            PredictorKind::PcaComponent => "pca-component",
        }
    }
}

impl fmt::Display for PredictorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PredictorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "regression" => Ok(PredictorKind::Regression),
            "bartlett" => Ok(PredictorKind::Bartlett),
            "mcdonald" => Ok(PredictorKind::Mcdonald),
            "pca-component" | "component" => Ok(PredictorKind::PcaComponent),
            other => Err(Error::InvalidArgument(format!("unknown predictor '{other}'"))),
        }
    }
}

/// A `p x q` weight matrix `B`; predictor scores are `B' x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreWeights {
    pub kind: PredictorKind,
    pub weights: DMatrix<f64>,
}

impl ScoreWeights {
    pub fn new(kind: PredictorKind, weights: DMatrix<f64>) -> Result<Self> {
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("score weights are not finite".into()));
        }
        Ok(Self { kind, weights })
    }

    /// Scores for standardized data rows (observations x variables).
    pub fn apply(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if z.ncols() != self.weights.nrows() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} columns", self.weights.nrows()),
                found: format!("{}", z.ncols()),
            });
        }
        Ok(z * &self.weights)
    }
}

fn check_dims(l: &LoadingMatrix, s: &SymMatrix) -> Result<()> {
    if l.p() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} variables", s.dim()),
            found: format!("{}", l.p()),
        });
    }
    Ok(())
}

fn is_identity(m: &SymMatrix, tol: f64) -> bool {
    (m.as_matrix() - DMatrix::identity(m.dim(), m.dim())).amax() <= tol
}

/// Weights for the requested predictor:
///
/// * regression: `S^-1 L Phi`
/// * Bartlett: `Psi^-2 L (L' Psi^-2 L)^-1`
/// * McDonald: `S^-1 L (L' S^-1 L)^(-1/2)` (orthogonal factors)
/// * PCA component: `A (A'A)^-1`
pub fn predictor_weights(sol: &FactorSolution, s: &SymMatrix, kind: PredictorKind) -> Result<ScoreWeights> {
    let l = sol.loadings.as_matrix();
    check_dims(&sol.loadings, s)?;
    let weights = match kind {
        PredictorKind::Regression => {
            let s_inv = spd_inverse(s)?;
            s_inv.as_matrix() * l * sol.factor_cov.as_matrix()
        }
        PredictorKind::Bartlett => {
            if let Some((variable, &uniqueness)) = sol.uniqueness.iter().enumerate().find(|(_, u)| !(**u > 0.0)) {
                return Err(Error::NonPositiveUniqueness { variable, uniqueness });
            }
            let mut psi_inv_l = l.clone();
            for (i, mut row) in psi_inv_l.row_iter_mut().enumerate() {
                row /= sol.uniqueness[i];
            }
            let inner = SymMatrix::symmetrized(l.transpose() * &psi_inv_l);
            psi_inv_l * spd_inverse(&inner)?.as_matrix()
        }
        PredictorKind::Mcdonald => {
            if !is_identity(&sol.factor_cov, 1e-10) {
                return Err(Error::InvalidArgument(
                    "McDonald weights are defined here for orthogonal factors only".into(),
                ));
            }
            let s_inv = spd_inverse(s)?;
            let s_inv_l = s_inv.as_matrix() * l;
            let inner = SymMatrix::symmetrized(l.transpose() * &s_inv_l);
            s_inv_l * sym_inv_sqrt(&inner)?.as_matrix()
        }
        PredictorKind::PcaComponent => component_weights(&sol.loadings)?,
    };
    ScoreWeights::new(kind, weights)
}

/// `A (A'A)^-1`, the weights recovering component scores from `x = A c`.
pub fn component_weights(a: &LoadingMatrix) -> Result<DMatrix<f64>> {
    let a = a.as_matrix();
    let ata = SymMatrix::symmetrized(a.transpose() * a);
    Ok(a * spd_inverse(&ata)?.as_matrix())
}

/// `S B (B'SB)^-1 B' S`, the covariance reproduced from the predictors.
pub fn reproduced_cov_from_weights(s: &SymMatrix, b: &ScoreWeights) -> Result<SymMatrix> {
    let b = &b.weights;
    if b.nrows() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} rows of weights", s.dim()),
            found: format!("{}", b.nrows()),
        });
    }
    let sb = s.as_matrix() * b;
    let inner = SymMatrix::symmetrized(b.transpose() * &sb);
    let inv = spd_inverse(&inner)?;
    Ok(SymMatrix::symmetrized(&sb * inv.as_matrix() * sb.transpose()))
}

/// `L (L' S^-1 L)^-1 L'`, the score-implied covariance in loading form.
pub fn reproduced_cov_from_loadings(l: &LoadingMatrix, s: &SymMatrix) -> Result<SymMatrix> {
    check_dims(l, s)?;
    reproduced_cov_from_loadings_with_inverse(l, &spd_inverse(s)?)
}

pub(crate) fn reproduced_cov_from_loadings_with_inverse(l: &LoadingMatrix, s_inv: &SymMatrix) -> Result<SymMatrix> {
    let l = l.as_matrix();
    let inner = SymMatrix::symmetrized(l.transpose() * s_inv.as_matrix() * l);
    let inv = spd_inverse(&inner)?;
    Ok(SymMatrix::symmetrized(l * inv.as_matrix() * l.transpose()))
}

/// `sqrt(diag(L' S^-1 L))`: correlation of the regression predictor with
/// the factors of an orthogonal solution.
pub fn determinacy_mfa(sol: &FactorSolution, s: &SymMatrix) -> Result<Vec<f64>> {
    check_dims(&sol.loadings, s)?;
    if !is_identity(&sol.factor_cov, 1e-10) {
        return Err(Error::InvalidArgument("determinacy_mfa expects orthogonal factors".into()));
    }
    let l = sol.loadings.as_matrix();
    let s_inv = spd_inverse(s)?;
    let inner = l.transpose() * s_inv.as_matrix() * l;
    Ok((0..sol.q()).map(|j| inner[(j, j)].max(0.0).sqrt()).collect())
}

fn check_population(pop: &LoadingMatrix, phi: &SymMatrix, other: &DMatrix<f64>) -> Result<()> {
    if phi.dim() != pop.q() || other.nrows() != pop.p() || other.ncols() != pop.q() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{} loadings with a {}x{} factor correlation", pop.p(), pop.q(), pop.q(), pop.q()),
            found: format!("{}x{} with {}x{}", other.nrows(), other.ncols(), phi.dim(), phi.dim()),
        });
    }
    Ok(())
}

/// `diag(Phi Lambda' A (A'A)^-1)`: correlation of unit-variance component
/// scores with the population factors.
pub fn determinacy_pca(pop_loadings: &LoadingMatrix, pop_phi: &SymMatrix, a: &LoadingMatrix) -> Result<Vec<f64>> {
    check_population(pop_loadings, pop_phi, a.as_matrix())?;
    let b = component_weights(a)?;
    let m = pop_phi.as_matrix() * pop_loadings.as_matrix().transpose() * b;
    Ok((0..a.q()).map(|j| m[(j, j)]).collect())
}

/// `diag(Phi Lambda' Sigma^-1 L_s diag(L_s' Sigma^-1 L_s)^(-1/2))`:
/// correlation of the best linear SPFA predictor with the population factors.
pub fn determinacy_spfa(
    pop_loadings: &LoadingMatrix,
    pop_phi: &SymMatrix,
    pop_sigma: &SymMatrix,
    lam_s: &LoadingMatrix,
) -> Result<Vec<f64>> {
    check_population(pop_loadings, pop_phi, lam_s.as_matrix())?;
    check_dims(lam_s, pop_sigma)?;
    let s_inv = spd_inverse(pop_sigma)?;
    let s_inv_ls = s_inv.as_matrix() * lam_s.as_matrix();
    let cross = pop_phi.as_matrix() * pop_loadings.as_matrix().transpose() * &s_inv_ls;
    let var = lam_s.as_matrix().transpose() * &s_inv_ls;
    (0..lam_s.q())
        .map(|j| {
            if !(var[(j, j)] > 0.0) {
                return Err(Error::ZeroPredictorVariance { factor: j });
            }
            Ok(cross[(j, j)] / var[(j, j)].sqrt())
        })
        .collect()
}

/// `(Phi Lambda' B)_jj / sqrt((B' Sigma B)_jj)`: population correlation of
/// an arbitrary weighted predictor with the population factors.
pub fn determinacy_sample(
    pop_loadings: &LoadingMatrix,
    pop_phi: &SymMatrix,
    pop_sigma: &SymMatrix,
    weights: &ScoreWeights,
) -> Result<Vec<f64>> {
    let b = &weights.weights;
    check_population(pop_loadings, pop_phi, b)?;
    let cross = pop_phi.as_matrix() * pop_loadings.as_matrix().transpose() * b;
    let var = b.transpose() * pop_sigma.as_matrix() * b;
    (0..b.ncols())
        .map(|j| {
            let v = var[(j, j)];
            if !(v > 1e-300) {
                return Err(Error::ZeroPredictorVariance { factor: j });
            }
            Ok(cross[(j, j)] / v.sqrt())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::{mfa_extract, pca_extract, spfa_extract, ExtractionSettings};
    use crate::model::Method;

    fn single_factor() -> (LoadingMatrix, SymMatrix, FactorSolution) {
        let l = LoadingMatrix::from_rows(&[vec![0.5], vec![0.5], vec![0.5]]).unwrap();
        let s = SymMatrix::equicorrelation(3, 0.25);
        let sol = FactorSolution {
            method: Method::Mfa,
            loadings: l.clone(),
            uniqueness: vec![0.75; 3],
            factor_cov: SymMatrix::identity(1),
            iterations: 0,
            converged: true,
            objective: 0.0,
            heywood: false,
            history: vec![],
        };
        (l, s, sol)
    }

    /// Gauss-Jordan inverse, independent of the eigen route used above.
    fn gauss_jordan_inverse(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = m.len();
        let mut a: Vec<Vec<f64>> = m
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut row = r.clone();
                row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
                row
            })
            .collect();
        for c in 0..n {
            let piv = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
            a.swap(c, piv);
            let d = a[c][c];
            for v in a[c].iter_mut() {
                *v /= d;
            }
            for r in 0..n {
                if r != c {
                    let f = a[r][c];
                    let pivot_row = a[c].clone();
                    for (v, pv) in a[r].iter_mut().zip(pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
        }
        a.into_iter().map(|r| r[n..].to_vec()).collect()
    }

    #[test]
    fn regression_weights_single_factor() {
        let (_, s, sol) = single_factor();
        let b = predictor_weights(&sol, &s, PredictorKind::Regression).unwrap();
        for i in 0..3 {
            assert!((b.weights[(i, 0)] - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bartlett_weights_against_direct_evaluation() {
        let (l, s, sol) = single_factor();
        let b = predictor_weights(&sol, &s, PredictorKind::Bartlett).unwrap();
        // Psi^-2 L = (0.5/0.75) 1, L' Psi^-2 L = 3 * 0.5 * 0.5 / 0.75 = 1.
        let psi_l: Vec<f64> = (0..3).map(|i| l.get(i, 0) / 0.75).collect();
        let inner: f64 = (0..3).map(|i| l.get(i, 0) * psi_l[i]).sum();
        for (i, w) in psi_l.iter().enumerate() {
            assert!((b.weights[(i, 0)] - w / inner).abs() < 1e-12);
            assert!((b.weights[(i, 0)] - 2.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bartlett_rejects_heywood() {
        let (_, s, mut sol) = single_factor();
        sol.uniqueness[1] = 0.0;
        assert!(matches!(
            predictor_weights(&sol, &s, PredictorKind::Bartlett),
            Err(Error::NonPositiveUniqueness { variable: 1, .. })
        ));
    }

    #[test]
    fn perfect_indicator_regression_predictor_is_the_indicator() {
        let l = LoadingMatrix::from_rows(&[vec![1.0], vec![0.6], vec![0.4]]).unwrap();
        let mut s = l.outer().into_matrix();
        for i in 0..3 {
            s[(i, i)] = 1.0;
        }
        let s = SymMatrix::symmetrized(s);
        let sol = FactorSolution {
            method: Method::Mfa,
            loadings: l,
            uniqueness: vec![0.0, 0.64, 0.84],
            factor_cov: SymMatrix::identity(1),
            iterations: 0,
            converged: true,
            objective: 0.0,
            heywood: false,
            history: vec![],
        };
        let b = predictor_weights(&sol, &s, PredictorKind::Regression).unwrap();
        assert!((b.weights[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(b.weights[(1, 0)].abs() < 1e-12 && b.weights[(2, 0)].abs() < 1e-12);
        assert!((determinacy_mfa(&sol, &s).unwrap()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_factor_reproduced_covariances() {
        let (l, s, sol) = single_factor();
        let from_loadings = reproduced_cov_from_loadings(&l, &s).unwrap();
        let b = predictor_weights(&sol, &s, PredictorKind::Regression).unwrap();
        let from_weights = reproduced_cov_from_weights(&s, &b).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!((from_loadings.get(i, j) - 0.5).abs() < 1e-12);
                    assert!((from_weights.get(i, j) - 0.5).abs() < 1e-12);
                }
            }
        }
        let rho = determinacy_mfa(&sol, &s).unwrap();
        assert!((rho[0] - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn full_rank_weights_reproduce_s() {
        let s = SymMatrix::from_rows(&[vec![1.0, 0.3, 0.2], vec![0.3, 1.0, 0.4], vec![0.2, 0.4, 1.0]]).unwrap();
        let b = ScoreWeights::new(
            PredictorKind::Regression,
            DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.0, 1.0, 0.5, 0.3, 0.0, 1.0]),
        )
        .unwrap();
        let r = reproduced_cov_from_weights(&s, &b).unwrap();
        assert!(r.max_abs_diff(&s) < 1e-12);
    }

    #[test]
    fn component_scores_reproduce_eq14_form() {
        let s = SymMatrix::from_rows(&[
            vec![1.0, 0.5, 0.4, 0.1],
            vec![0.5, 1.0, 0.3, 0.2],
            vec![0.4, 0.3, 1.0, 0.25],
            vec![0.1, 0.2, 0.25, 1.0],
        ])
        .unwrap();
        let pca = pca_extract(&s, 2).unwrap();
        let b = predictor_weights(&pca, &s, PredictorKind::PcaComponent).unwrap();
        let from_weights = reproduced_cov_from_weights(&s, &b).unwrap();
        let from_loadings = reproduced_cov_from_loadings(&pca.loadings, &s).unwrap();
        assert!(from_weights.max_abs_diff(&from_loadings) < 1e-12);
        // Theorem 2: A A' itself.
        assert!(from_weights.max_abs_diff(&pca.loadings.outer()) < 1e-12);
    }

    #[test]
    fn determinacy_pca_single_factor() {
        let (l, s, _) = single_factor();
        let a = pca_extract(&s, 1).unwrap().loadings;
        let rho = determinacy_pca(&l, &SymMatrix::identity(1), &a).unwrap();
        // (3 * 0.5 * sqrt(0.5)) / 1.5
        assert!((rho[0] - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn determinacy_spfa_against_brute_force() {
        let l = LoadingMatrix::from_rows(&[vec![0.5], vec![0.5], vec![0.5]]).unwrap();
        let s = SymMatrix::equicorrelation(3, 0.25);
        let spfa = spfa_extract(&s, &ExtractionSettings::new(1)).unwrap();
        let got = determinacy_spfa(&l, &SymMatrix::identity(1), &s, &spfa.loadings).unwrap()[0];

        let inv = gauss_jordan_inverse(&s.to_rows());
        let ls: Vec<f64> = (0..3).map(|i| spfa.loadings.get(i, 0)).collect();
        let w: Vec<f64> = (0..3).map(|i| (0..3).map(|k| inv[i][k] * ls[k]).sum()).collect();
        let cov: f64 = (0..3).map(|i| 0.5 * w[i]).sum();
        let var: f64 = (0..3).map(|i| ls[i] * w[i]).sum();
        assert!((got - cov / var.sqrt()).abs() < 1e-12);
        // Rank-one: the SPFA predictor is proportional to the regression one.
        assert!((got - 0.5f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn determinacy_spfa_perfect_indicator() {
        let l = LoadingMatrix::from_rows(&[vec![1.0], vec![0.5], vec![0.5]]).unwrap();
        let mut s = l.outer().into_matrix();
        for i in 0..3 {
            s[(i, i)] = 1.0;
        }
        let s = SymMatrix::symmetrized(s);
        let lam_s = LoadingMatrix::from_rows(&[vec![2.0], vec![1.0], vec![1.0]]).unwrap();
        let rho = determinacy_spfa(&l, &SymMatrix::identity(1), &s, &lam_s).unwrap();
        assert!((rho[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn determinacy_sample_consistency_and_orthogonality() {
        let (l, s, sol) = single_factor();
        let b = predictor_weights(&sol, &s, PredictorKind::Regression).unwrap();
        let rho = determinacy_sample(&l, &SymMatrix::identity(1), &s, &b).unwrap();
        let expected = determinacy_mfa(&sol, &s).unwrap();
        assert!((rho[0] - expected[0]).abs() < 1e-12);

        let noise =
            ScoreWeights::new(PredictorKind::Regression, DMatrix::from_column_slice(3, 1, &[1.0, -1.0, 0.0])).unwrap();
        let rho = determinacy_sample(&l, &SymMatrix::identity(1), &s, &noise).unwrap();
        assert!(rho[0].abs() < 1e-12);

        let zero = ScoreWeights::new(PredictorKind::Regression, DMatrix::zeros(3, 1)).unwrap();
        assert!(determinacy_sample(&l, &SymMatrix::identity(1), &s, &zero).is_err());
    }

    #[test]
    fn predictor_equivalence_on_mfa_solution() {
        let l = LoadingMatrix::from_rows(&[
            vec![0.7, 0.0],
            vec![0.6, 0.1],
            vec![0.5, 0.0],
            vec![0.0, 0.6],
            vec![0.1, 0.5],
            vec![0.0, 0.7],
        ])
        .unwrap();
        let mut m = l.outer().into_matrix();
        for i in 0..6 {
            m[(i, i)] = 1.0;
        }
        let s = SymMatrix::symmetrized(m);
        let sol = mfa_extract(&s, &ExtractionSettings::new(2).with_convergence(1e-24, 100_000)).unwrap();
        let reference = reproduced_cov_from_loadings(&sol.loadings, &s).unwrap();
        for kind in [PredictorKind::Regression, PredictorKind::Bartlett, PredictorKind::Mcdonald] {
            let b = predictor_weights(&sol, &s, kind).unwrap();
            let r = reproduced_cov_from_weights(&s, &b).unwrap();
            assert!(r.max_abs_diff(&reference) < 1e-8, "{kind}");
        }
    }

    #[test]
    fn apply_checks_columns() {
        let b = ScoreWeights::new(PredictorKind::Regression, DMatrix::from_element(3, 1, 1.0)).unwrap();
        assert!(b.apply(&DMatrix::zeros(4, 2)).is_err());
        let scores = b.apply(&DMatrix::from_element(4, 3, 1.0)).unwrap();
        assert_eq!(scores.shape(), (4, 1));
    }
}
