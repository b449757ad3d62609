use std::path::{Path, PathBuf};

/// Process exit status for each failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 2,
    Data = 3,
    Numerical = 4,
    Io = 5,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn kind(&self) -> ExitKind {
        match self {
            CliError::Usage(_) => ExitKind::Usage,
            CliError::Data(_) => ExitKind::Data,
            CliError::Numerical(_) => ExitKind::Numerical,
            CliError::Io { .. } => ExitKind::Io,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}

impl From<spfa::Error> for CliError {
    fn from(e: spfa::Error) -> Self {
        use spfa::Error as E;
        let msg = e.to_string();
        match e {
            E::InvalidArgument(_) => CliError::Usage(msg),
            E::DimensionMismatch { .. }
            | E::NotSymmetric { .. }
            | E::InfeasiblePopulation { .. }
            | E::MinorLoadingsOutOfRange { .. } => CliError::Data(msg),
            E::Singular { .. }
            | E::EigenNonConvergence
            | E::DegenerateExtraction { .. }
            | E::Heywood { .. }
            | E::NonPositiveUniqueness { .. }
            | E::ZeroPredictorVariance { .. } => CliError::Numerical(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
