use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column `{0}` has zero variance")]
    ConstantColumn(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("cannot parse value at row {row}, column `{col}`")]
    Parse { row: usize, col: String },
    #[error("missing value at row {row}, column `{col}`")]
    MissingValue { row: usize, col: String },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("dataset is already standardized")]
    AlreadyStandardized,
    #[error("dataset must be standardized before fitting")]
    NotStandardized,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("linear system is singular even after diagonal jitter")]
    SingularAfterJitter,
    #[error("no comparable pairs for the C-statistic")]
    NoComparablePairs,
    #[error("fewer than two events before the AUC horizon")]
    InsufficientEvents,
    #[error("fit on fold {0} failed")]
    FoldFitFailed(usize),
    #[error("every grid point failed to fit")]
    AllFitsFailed,
    #[error("censoring calibration failed: {0}")]
    CalibrationFailed(String),
    #[error("model file: {0}")]
    Model(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical machinery rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularAfterJitter
                | Error::NoComparablePairs
                | Error::InsufficientEvents
                | Error::FoldFitFailed(_)
                | Error::AllFitsFailed
                | Error::CalibrationFailed(_)
        )
    }
}
