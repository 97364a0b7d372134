use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: row {row}: field `{field}`: {message}")]
    MalformedRow {
        path: PathBuf,
        row: usize,
        field: String,
        message: String,
    },

    #[error("row {row}: quality out of range: {value}")]
    QualityOutOfRange { row: usize, value: f64 },

    #[error("unknown distortion column `{0}`")]
    UnknownColumn(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("undefined kurtosis: zero variance")]
    UndefinedKurtosis,

    #[error("image: {0}")]
    Image(String),

    #[error("region {x},{y} {w}x{h} invalid for {width}x{height} image: {reason}")]
    Region {
        x: u32,
        y: u32,
        w: u32,
        h: u32,
        width: u32,
        height: u32,
        reason: &'static str,
    },

    #[error("model: {0}")]
    Model(String),

    #[error("training diverged at epoch {epoch} step {step}: loss = {loss}")]
    Diverged { epoch: usize, step: usize, loss: f64 },

    #[error("illegal event `{event}` in state {state}")]
    IllegalEvent { state: String, event: String },

    #[error("tile {row},{col}: {source}")]
    Tile {
        row: usize,
        col: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Validation failures are caused by bad input; everything else is a
    /// computation or environment failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::MalformedRow { .. }
                | Error::QualityOutOfRange { .. }
                | Error::UnknownColumn(_)
                | Error::Invalid(_)
                | Error::Region { .. }
                | Error::IllegalEvent { .. }
                | Error::Image(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
