use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point lies on the modiolar axis; angle undefined")]
    DegeneratePoint,

    #[error("path undersampled: angular step of {step_deg:.3} deg between samples {index} and {next}", next = index + 1)]
    UndersampledPath { index: usize, step_deg: f64 },

    #[error("empty geometry: {0}")]
    EmptyGeometry(String),

    #[error("topology error: {0}")]
    Topology(String),

    #[error("transform is not rigid: {0}")]
    NonRigid(String),

    #[error("no feasible registration: every start leaves contacts outside the scala tympani")]
    InfeasibleRegistration,

    #[error("insertion vector is parallel to the round-window plane")]
    NoIntersection,

    #[error("direction is degenerate after projection onto the clock face")]
    DegenerateDirection,

    #[error("incomplete plan: missing {0}")]
    IncompletePlan(String),

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("{file}: row {row}, column `{column}`: {message}")]
    Parse {
        file: String,
        row: usize,
        column: String,
        message: String,
    },

    #[error("empty group: {0}")]
    EmptyGroup(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::DegeneratePoint => "degenerate-point",
            Error::UndersampledPath { .. } => "undersampled-path",
            Error::EmptyGeometry(_) => "empty-geometry",
            Error::Topology(_) => "topology",
            Error::NonRigid(_) => "non-rigid",
            Error::InfeasibleRegistration => "infeasible-registration",
            Error::NoIntersection => "no-intersection",
            Error::DegenerateDirection => "degenerate-direction",
            Error::IncompletePlan(_) => "incomplete-plan",
            Error::MissingData(_) => "missing-data",
            Error::Parse { .. } => "parse",
            Error::EmptyGroup(_) => "empty-group",
            Error::LengthMismatch { .. } => "length-mismatch",
            Error::Degenerate(_) => "degenerate",
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
            Error::Format(_) => "format",
        }
    }
}
