//! Error classes and the exit codes they map to.

use std::fmt;
use std::process::ExitCode;

use tdcgan_core::metrics::MetricError;
use tdcgan_core::train::TrainError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Bad flags or configuration.
    Usage,
    /// Missing, unreadable or malformed inputs, and output I/O failures.
    Data,
    /// Training or inference produced a non-finite value.
    Numerical,
}

impl Kind {
    pub fn exit_code(self) -> ExitCode {
        ExitCode::from(match self {
            Kind::Usage => 2,
            Kind::Data => 3,
            Kind::Numerical => 4,
        })
    }
}

pub struct Failure {
    pub kind: Kind,
    pub error: anyhow::Error,
}

impl fmt::Debug for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {:#}", self.kind, self.error)
    }
}

pub type CmdResult<T> = Result<T, Failure>;

pub fn usage(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        kind: Kind::Usage,
        error: error.into(),
    }
}

pub fn data(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        kind: Kind::Data,
        error: error.into(),
    }
}

fn train_kind(e: &TrainError) -> Kind {
    match e {
        TrainError::NonFinite { .. } => Kind::Numerical,
        TrainError::InvalidConfig(_) => Kind::Usage,
        _ => Kind::Data,
    }
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        Failure {
            kind: train_kind(&e),
            error: e.into(),
        }
    }
}

impl From<MetricError> for Failure {
    fn from(e: MetricError) -> Self {
        let kind = match &e {
            MetricError::Train(t) => train_kind(t),
            _ => Kind::Data,
        };
        Failure { kind, error: e.into() }
    }
}

/// Tags a result with an error class.
pub trait Classify<T> {
    fn usage(self) -> CmdResult<T>;
    fn data(self) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> CmdResult<T> {
        self.map_err(usage)
    }

    fn data(self) -> CmdResult<T> {
        self.map_err(data)
    }
}
