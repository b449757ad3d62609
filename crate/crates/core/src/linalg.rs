//! Symmetric eigendecomposition with a fixed sign convention, and the
//! matrix functions built on it.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::SymMatrix;

/// Eigenvalues below this fraction of the largest eigenvalue mark a matrix
/// as singular.
pub const SINGULARITY_TOLERANCE: f64 = 1e-10;

const EIGEN_MAX_ITER: usize = 100_000;

/// Eigenvalues in descending order with orthonormal eigenvectors as columns.
///
/// Each eigenvector is oriented so that its entry of largest absolute value
/// is positive; ties go to the lowest row index.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// The leading `q` eigenvectors as a `p x q` matrix.
    pub fn leading_vectors(&self, q: usize) -> DMatrix<f64> {
        self.vectors.columns(0, q).into_owned()
    }

    /// `K diag(f(gamma)) K'`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.values[j]);
        }
        SymMatrix::symmetrized(scaled * self.vectors.transpose())
    }
}

pub fn eigen_desc(m: &SymMatrix) -> Result<EigenDecomposition> {
    let eig = SymmetricEigen::try_new(m.as_matrix().clone(), f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or(Error::EigenNonConvergence)?;
    let p = m.dim();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    let values = DVector::from_iterator(p, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        let mut pivot = 0;
        for i in 1..p {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenNonConvergence);
    }
    Ok(EigenDecomposition { values, vectors })
}

/// Fails with [`Error::Singular`] when the smallest eigenvalue is not above
/// `SINGULARITY_TOLERANCE` times the largest.
fn check_positive_definite(eig: &EigenDecomposition) -> Result<()> {
    let n = eig.dim();
    if n == 0 {
        return Ok(());
    }
    let largest = eig.values[0];
    let smallest = eig.values[n - 1];
    let tolerance = SINGULARITY_TOLERANCE * largest.abs().max(f64::MIN_POSITIVE);
    if !(largest > 0.0) || smallest <= tolerance {
        return Err(Error::Singular { eigenvalue: smallest, tolerance });
    }
    Ok(())
}

/// `M^(-1/2)`, the inverse of the symmetric square root.
pub fn sym_inv_sqrt(m: &SymMatrix) -> Result<SymMatrix> {
    let eig = eigen_desc(m)?;
    check_positive_definite(&eig)?;
    Ok(eig.map_spectrum(|g| 1.0 / g.sqrt()))
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse(m: &SymMatrix) -> Result<SymMatrix> {
    let eig = eigen_desc(m)?;
    check_positive_definite(&eig)?;
    Ok(eig.map_spectrum(|g| 1.0 / g))
}

/// Squared multiple correlations `1 - 1 / diag(S^-1)` for a correlation
/// matrix; `s_ii - 1 / (S^-1)_ii` in the variance metric otherwise.
pub fn smc_communalities(s: &SymMatrix) -> Result<Vec<f64>> {
    let inv = spd_inverse(s)?;
    Ok((0..s.dim()).map(|i| s.get(i, i) - 1.0 / inv.get(i, i)).collect())
}

/// A matrix `F` with `F F' = m`: Cholesky when it succeeds, otherwise the
/// symmetric square root of the positive part of the spectrum.
pub fn psd_factor(m: &SymMatrix) -> Result<DMatrix<f64>> {
    if let Some(chol) = m.as_matrix().clone().cholesky() {
        return Ok(chol.l());
    }
    let eig = eigen_desc(m)?;
    let largest = eig.values[0].abs().max(f64::MIN_POSITIVE);
    let smallest = eig.values[eig.dim() - 1];
    if smallest < -SINGULARITY_TOLERANCE * largest {
        return Err(Error::Singular { eigenvalue: smallest, tolerance: -SINGULARITY_TOLERANCE * largest });
    }
    Ok(eig.map_spectrum(|g| g.max(0.0).sqrt()).into_matrix())
}
