use thiserror::Error;

use crate::family::FamilyKind;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter for {family:?}: {what} = {value}")]
    InvalidParameter {
        family: FamilyKind,
        what: &'static str,
        value: f64,
    },

    #[error("mean {mu} lies on the boundary of the {family:?} mean domain")]
    BoundaryMean { family: FamilyKind, mu: f64 },

    #[error("{0:?} cannot be paired with the {1:?} link")]
    LinkMismatch(FamilyKind, crate::family::Link),

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("no records")]
    NoRecords,

    #[error("study `{0}` does not supply both arms")]
    MissingArm(String),

    #[error("record `{record}`: {message}")]
    InvalidRecord { record: String, message: String },

    #[error("dataset: {0}")]
    InvalidDataset(String),

    #[error("node count must be at least 2, got {0}")]
    TooFewNodes(usize),

    #[error("record `{record}`: log-likelihood is not finite at beta = {beta:?}, tau2 = {tau2}")]
    Evaluation {
        record: String,
        beta: Vec<f64>,
        tau2: f64,
    },

    #[error("constrained fit failed at pinned value {value}: {message}")]
    ConstrainedFit { value: f64, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("scenario: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
