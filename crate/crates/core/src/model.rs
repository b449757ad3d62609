//! Domain types shared by every analysis: symmetric covariance/correlation
//! matrices, loading matrices and extracted factor solutions.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative asymmetry accepted by [`SymMatrix::new`] before the input is
/// rejected. Accepted input is symmetrized exactly.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// A `p x p` symmetric matrix. Storage is exactly symmetric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Validates squareness, finiteness and symmetry, then stores the exact
    /// symmetric part of `m`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: "square matrix".into(),
                found: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
        }
        let scale = m.amax().max(1.0);
        for i in 0..m.nrows() {
            for j in (i + 1)..m.ncols() {
                let gap = (m[(i, j)] - m[(j, i)]).abs();
                if gap > SYMMETRY_TOLERANCE * scale {
                    return Err(Error::NotSymmetric { row: i, col: j, gap });
                }
            }
        }
        Ok(Self::symmetrized(m))
    }

    /// Stores `(m + m') / 2` without validation. Intended for products such
    /// as `L' S^-1 L` that are symmetric up to rounding.
    pub fn symmetrized(m: DMatrix<f64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        let n = m.nrows();
        let mut out = m;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        Self(out)
    }

    pub fn identity(p: usize) -> Self {
        Self(DMatrix::identity(p, p))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::DimensionMismatch {
                expected: format!("{p} columns in every row"),
                found: "ragged rows".into(),
            });
        }
        Self::new(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
    }

    /// A matrix with unit diagonal and every off-diagonal equal to `r`.
    pub fn equicorrelation(p: usize, r: f64) -> Self {
        Self(DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { r }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim()).map(|i| (0..self.dim()).map(|j| self.0[(i, j)]).collect()).collect()
    }

    pub fn has_unit_diagonal(&self, tol: f64) -> bool {
        self.diagonal().iter().all(|d| (d - 1.0).abs() <= tol)
    }

    /// Largest absolute off-diagonal entry.
    pub fn max_abs_offdiag(&self) -> f64 {
        let p = self.dim();
        let mut m = 0.0f64;
        for i in 0..p {
            for j in 0..p {
                if i != j {
                    m = m.max(self.0[(i, j)].abs());
                }
            }
        }
        m
    }

    /// Rescales to unit diagonal. Returns the correlation matrix and the
    /// standard deviations that were divided out.
    pub fn standardized(&self) -> Result<(SymMatrix, Vec<f64>)> {
        let sd: Vec<f64> = self.diagonal().iter().map(|d| d.sqrt()).collect();
        if let Some(i) = sd.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidArgument(format!("variable {i} has non-positive variance")));
        }
        let p = self.dim();
        let mut m = DMatrix::from_fn(p, p, |i, j| self.0[(i, j)] / (sd[i] * sd[j]));
        for i in 0..p {
            m[(i, i)] = 1.0;
        }
        Ok((SymMatrix::symmetrized(m), sd))
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        (&self.0 - &other.0).amax()
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.to_rows()
    }
}

/// A `p x q` matrix of variable-on-factor loadings, `q <= p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct LoadingMatrix(DMatrix<f64>);

impl LoadingMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.ncols() == 0 || m.ncols() > m.nrows() {
            return Err(Error::DimensionMismatch {
                expected: "1 <= q <= p".into(),
                found: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("loadings have non-finite entries".into()));
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        let q = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != q) {
            return Err(Error::DimensionMismatch {
                expected: format!("{q} columns in every row"),
                found: "ragged rows".into(),
            });
        }
        Self::new(DMatrix::from_fn(p, q, |i, j| rows[i][j]))
    }

    pub fn p(&self) -> usize {
        self.0.nrows()
    }

    pub fn q(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.p()).map(|i| (0..self.q()).map(|j| self.0[(i, j)]).collect()).collect()
    }

    /// `diag(L L')`.
    pub fn communalities(&self) -> Vec<f64> {
        self.0.row_iter().map(|r| r.norm_squared()).collect()
    }

    /// `L L'`.
    pub fn outer(&self) -> SymMatrix {
        SymMatrix::symmetrized(&self.0 * self.0.transpose())
    }

    /// `L T` for a `q x q` transform.
    pub fn transformed(&self, t: &DMatrix<f64>) -> Result<LoadingMatrix> {
        if t.nrows() != self.q() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} rows in transform", self.q()),
                found: format!("{}", t.nrows()),
            });
        }
        LoadingMatrix::new(&self.0 * t)
    }

    /// Divides row `i` by `scale[i]`.
    pub fn rows_divided(&self, scale: &[f64]) -> LoadingMatrix {
        let mut m = self.0.clone();
        for (i, mut row) in m.row_iter_mut().enumerate() {
            row /= scale[i];
        }
        LoadingMatrix(m)
    }

    pub fn max_abs_diff(&self, other: &LoadingMatrix) -> f64 {
        (&self.0 - &other.0).amax()
    }
}

impl TryFrom<Vec<Vec<f64>>> for LoadingMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<LoadingMatrix> for Vec<Vec<f64>> {
    fn from(m: LoadingMatrix) -> Self {
        m.to_rows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mfa,
    Spfa,
    Pca,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Mfa, Method::Spfa, Method::Pca];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mfa => "mfa",
            Method::Spfa => "spfa",
            Method::Pca => "pca",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mfa" | "minres" => Ok(Method::Mfa),
            "spfa" => Ok(Method::Spfa),
            "pca" => Ok(Method::Pca),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

/// The outcome of one extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSolution {
    pub method: Method,
    pub loadings: LoadingMatrix,
    /// `diag(S - L L')`. Negative entries only occur together with `heywood`.
    pub uniqueness: Vec<f64>,
    pub factor_cov: SymMatrix,
    pub iterations: usize,
    pub converged: bool,
    /// Residual trace of the method's own objective at the returned loadings.
    pub objective: f64,
    /// Set when a reproduced communality exceeded the variable's variance.
    pub heywood: bool,
    /// Objective after each iteration.
    #[serde(default)]
    pub history: Vec<f64>,
}

impl FactorSolution {
    pub fn p(&self) -> usize {
        self.loadings.p()
    }

    pub fn q(&self) -> usize {
        self.loadings.q()
    }

    /// The same solution with loadings replaced by `L T` for orthogonal `T`.
    pub fn rotated(&self, t: &DMatrix<f64>) -> Result<FactorSolution> {
        Ok(FactorSolution { loadings: self.loadings.transformed(t)?, ..self.clone() })
    }
}

/// Correlation matrix of raw data rows (observations x variables), using the
/// `n - 1` covariance denominator before standardizing.
pub fn correlation_from_data(data: &DMatrix<f64>) -> Result<SymMatrix> {
    let (n, p) = data.shape();
    if n < 2 || p == 0 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 observations of at least 1 variable, got {n}x{p}"
        )));
    }
    let means = data.row_mean();
    let mut centered = data.clone();
    for mut row in centered.row_iter_mut() {
        row -= &means;
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    SymMatrix::symmetrized(cov).standardized().map(|(r, _)| r)
}

/// Column-standardizes raw data rows (mean 0, `n - 1` standard deviation 1).
pub fn standardize_columns(data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, _) = data.shape();
    if n < 2 {
        return Err(Error::InvalidArgument("need at least 2 observations".into()));
    }
    let mut out = data.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
        let sd = (col.norm_squared() / (n as f64 - 1.0)).sqrt();
        if !(sd > 0.0) {
            return Err(Error::InvalidArgument(format!("variable {j} is constant")));
        }
        col /= sd;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_storage_is_exact() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5 + 1e-12, 1.0]);
        let s = SymMatrix::new(m).unwrap();
        assert_eq!(s.get(0, 1), s.get(1, 0));
    }

    #[test]
    fn rejects_asymmetric_and_non_square() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(SymMatrix::new(m), Err(Error::NotSymmetric { .. })));
        let m = DMatrix::zeros(2, 3);
        assert!(matches!(SymMatrix::new(m), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn loadings_require_q_at_most_p() {
        assert!(LoadingMatrix::new(DMatrix::zeros(2, 3)).is_err());
        assert!(LoadingMatrix::new(DMatrix::zeros(3, 0)).is_err());
        let l = LoadingMatrix::from_rows(&[vec![0.5], vec![0.5], vec![0.5]]).unwrap();
        assert_eq!(l.communalities(), vec![0.25; 3]);
    }

    #[test]
    fn standardizing_a_covariance() {
        let s = SymMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 9.0]]).unwrap();
        let (r, sd) = s.standardized().unwrap();
        assert_eq!(sd, vec![2.0, 3.0]);
        assert!((r.get(0, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!(r.has_unit_diagonal(0.0));
    }

    #[test]
    fn json_round_trip() {
        let s = SymMatrix::equicorrelation(3, 0.25);
        let text = serde_json::to_string(&s).unwrap();
        let back: SymMatrix = serde_json::from_str(&text).unwrap();
        assert_eq!(s, back);
        let bad: std::result::Result<SymMatrix, _> = serde_json::from_str("[[1,0.2],[0.3,1]]");
        assert!(bad.is_err());
    }

    #[test]
    fn method_names() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("ml".parse::<Method>().is_err());
    }
}
