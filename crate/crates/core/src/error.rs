use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong while building, fitting or testing a model.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at data row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("non-finite data: {0}")]
    Data(String),

    #[error("invalid model specification: {0}")]
    Spec(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("degenerate degrees of freedom: {0}")]
    DegenerateFreedom(String),

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerical machinery rather than of the user's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_)
                | Error::DegenerateFit(_)
                | Error::DegenerateFreedom(_)
                | Error::DegenerateSpectrum(_)
        )
    }
}
