//! Score-predictor factor analysis (SPFA) next to minimum-residual factor
//! analysis and principal components, with the simulation machinery used to
//! compare them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod extraction;
pub mod fit;
pub mod linalg;
pub mod model;
pub mod report;
pub mod rotation;
pub mod scores;
pub mod simgen;
pub mod study;

pub use error::{Error, Result};
pub use extraction::{mfa_extract, pca_extract, spfa_extract, ExtractionSettings, HeywoodPolicy};
pub use fit::{fit_report, srmr_nd, FitReport};
pub use model::{FactorSolution, LoadingMatrix, Method, SymMatrix};
pub use rotation::{match_columns, procrustes, varimax_gpa, RotationResult, VarimaxSettings};
pub use scores::{predictor_weights, PredictorKind, ScoreWeights};
pub use simgen::{ModelError, Population, PopulationSpec};
pub use study::{
    aggregate, run_condition, sample_grid, AggregateRow, RotationChoice, SimCondition, SimRecord, StudyKind,
};
