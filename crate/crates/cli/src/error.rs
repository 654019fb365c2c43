use std::path::PathBuf;
use thiserror::Error;

use hetbias_core::Error as CoreError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;
pub const EXIT_FILE_NOT_FOUND: i32 = 5;
pub const EXIT_MISSING_COLUMN: i32 = 6;
pub const EXIT_BAD_CELL: i32 = 7;
pub const EXIT_IO: i32 = 8;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("column '{column}' not found in {}", .path.display())]
    MissingColumn { path: PathBuf, column: String },

    #[error("{}: row {row}, column '{column}': cannot parse '{value}' as a number", .path.display())]
    BadCell {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },

    #[error("{}: {message}", .path.display())]
    Read { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{failures} validation check(s) failed")]
    ValidationFailed { failures: usize, report: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::FileNotFound(_) => EXIT_FILE_NOT_FOUND,
            CliError::MissingColumn { .. } => EXIT_MISSING_COLUMN,
            CliError::BadCell { .. } => EXIT_BAD_CELL,
            CliError::Read { .. } => EXIT_IO,
            CliError::ValidationFailed { .. } => EXIT_NUMERICAL,
            CliError::Core(e) => match e {
                CoreError::InvalidArgument(_)
                | CoreError::InvalidScale(_)
                | CoreError::IncompatibleShape { .. }
                | CoreError::InfeasibleMoments { .. } => EXIT_USAGE,
                CoreError::NoBracket { .. } | CoreError::MomentMatchFailed { .. } => EXIT_NUMERICAL,
                CoreError::TooShort(_)
                | CoreError::ConstantRegressor
                | CoreError::LengthMismatch { .. }
                | CoreError::IndexOutOfRange { .. }
                | CoreError::InvalidVariance(_)
                | CoreError::DegenerateSampleSize { .. }
                | CoreError::RankDeficient => EXIT_DATA,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
