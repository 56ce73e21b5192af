use thiserror::Error;

use crate::contiguity::ContiguityError;
use crate::geometry::GeometryError;
use crate::ingest::IngestError;
use crate::model_select::SelectError;
use crate::report::ExportError;
use crate::skater::SkaterError;
use crate::synth::SynthError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Contiguity(#[from] ContiguityError),
    #[error(transparent)]
    Skater(#[from] SkaterError),
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("internal error: {0}")]
    Internal(String),
}

/// Broad failure class, mapped onto process exit codes by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Infeasible,
    Internal,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Input => 2,
            ErrorKind::Infeasible => 3,
            ErrorKind::Internal => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Input => "input",
            ErrorKind::Infeasible => "infeasible",
            ErrorKind::Internal => "internal",
        }
    }
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Ingest(_) | Error::Geometry(_) | Error::Synth(_) | Error::Export(_) => ErrorKind::Input,
            Error::Config(_) | Error::Io { .. } => ErrorKind::Input,
            Error::Contiguity(ContiguityError::CannotRepair { .. }) => ErrorKind::Infeasible,
            Error::Contiguity(_) => ErrorKind::Input,
            Error::Skater(SkaterError::Disconnected { .. })
            | Error::Select(SelectError::Skater(SkaterError::Disconnected { .. })) => ErrorKind::Infeasible,
            Error::Skater(SkaterError::InvalidK { .. } | SkaterError::Misaligned { .. }) => ErrorKind::Input,
            Error::Select(SelectError::Range { .. } | SelectError::Undefined { .. }) => ErrorKind::Input,
            Error::Skater(_) | Error::Select(_) | Error::Internal(_) => ErrorKind::Internal,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind().exit_code()
    }
}
