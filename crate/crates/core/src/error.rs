use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("group A={group} has no rows")]
    EmptyGroup { group: u8 },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),

    #[error("all conjunction weights are zero")]
    AllWeightsZero,

    #[error("total sample weight is zero")]
    ZeroTotalWeight,

    #[error("estimator has not been fitted")]
    UnfittedEstimator,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("model task does not match target kind")]
    TaskMismatch,

    #[error("densities are {age} epochs old, refit cadence allows at most {max}")]
    StaleDensities { age: usize, max: usize },

    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("subgroup contains no rows of group A={group}")]
    EmptySubgroupInGroup { group: u8 },

    #[error("could not calibrate subgroup coverage after {attempts} attempts")]
    CoverageCalibrationFailure { attempts: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("dataset has no ground-truth column `{0}`")]
    MissingTruth(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("run exceeded its time budget")]
    Timeout,

    #[error("file not found: {0}")]
    NotFound(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::SchemaMismatch(_) => "SchemaMismatch",
            Error::InvalidSchema(_) => "InvalidSchema",
            Error::Parse { .. } => "ParseError",
            Error::EmptyGroup { .. } => "EmptyGroup",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NonPositiveTemperature(_) => "NonPositiveTemperature",
            Error::AllWeightsZero => "AllWeightsZero",
            Error::ZeroTotalWeight => "ZeroTotalWeight",
            Error::UnfittedEstimator => "UnfittedEstimator",
            Error::InsufficientData(_) => "InsufficientData",
            Error::TaskMismatch => "TaskMismatch",
            Error::StaleDensities { .. } => "StaleDensities",
            Error::NonFiniteLoss { .. } => "NonFiniteLoss",
            Error::EmptySubgroupInGroup { .. } => "EmptySubgroupInGroup",
            Error::CoverageCalibrationFailure { .. } => "CoverageCalibrationFailure",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::MissingTruth(_) => "MissingTruth",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Timeout => "Timeout",
            Error::NotFound(_) => "NotFound",
            Error::Io(_) => "Io",
            Error::Csv(_) => "Csv",
            Error::Json(_) => "Json",
        }
    }

    /// Whether the error stems from invalid user input rather than a failure during the run.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::SchemaMismatch(_)
                | Error::InvalidSchema(_)
                | Error::Parse { .. }
                | Error::EmptyGroup { .. }
                | Error::InvalidConfig(_)
                | Error::NotFound(_)
                | Error::MissingTruth(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}
