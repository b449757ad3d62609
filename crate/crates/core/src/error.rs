use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("matrix is not symmetric: |m[{row}][{col}] - m[{col}][{row}]| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("matrix is singular: eigenvalue {eigenvalue:e} is below tolerance {tolerance:e}")]
    Singular { eigenvalue: f64, tolerance: f64 },

    #[error("symmetric eigensolver did not converge")]
    EigenNonConvergence,

    #[error("degenerate extraction at iteration {iteration}: eigenvalue {index} is {value:e}")]
    DegenerateExtraction { iteration: usize, index: usize, value: f64 },

    #[error("Heywood case: variable {variable} has communality {communality} >= its variance")]
    Heywood { variable: usize, communality: f64 },

    #[error("Heywood case: uniqueness of variable {variable} is {uniqueness:e}, Bartlett weights need positive uniquenesses")]
    NonPositiveUniqueness { variable: usize, uniqueness: f64 },

    #[error("infeasible population: variable {variable} has major communality {communality} > 1")]
    InfeasiblePopulation { variable: usize, communality: f64 },

    #[error("predictor {factor} has zero variance")]
    ZeroPredictorVariance { factor: usize },

    #[error("could not draw minor loadings inside [-1, 1] after {attempts} attempts")]
    MinorLoadingsOutOfRange { attempts: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
