use std::path::{Path, PathBuf};

use thiserror::Error;
use turntable_core::colmap::ColmapError;
use turntable_core::evaluation::EvalError;
use turntable_core::fps_select::FpsError;
use turntable_core::geometry::GeometryError;
use turntable_core::pointcloud::PointCloudError;
use turntable_core::processing::ProcessingError;
use turntable_core::registration::RegistrationError;
use turntable_core::synth::SynthError;

/// Every failure the CLI reports, one variant per exit-code category.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{tool} not found: {detail}")]
    ToolNotFound { tool: String, detail: String },
    #[error("{tool} failed ({status}): {stderr}")]
    ToolFailure {
        tool: String,
        status: String,
        stderr: String,
    },
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{} already exists; pass --force to overwrite", .0.display())]
    OutputExists(PathBuf),
    #[error("no model produced: {0}")]
    NoModelProduced(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Parse(_) => 4,
            CliError::ToolNotFound { .. } => 5,
            CliError::ToolFailure { .. } => 6,
            CliError::Numeric(_) => 7,
            CliError::InvalidInput(_) => 8,
            CliError::OutputExists(_) => 9,
            CliError::NoModelProduced(_) => 10,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io",
            CliError::Parse(_) => "parse",
            CliError::ToolNotFound { .. } => "tool_not_found",
            CliError::ToolFailure { .. } => "tool_failure",
            CliError::Numeric(_) => "numeric",
            CliError::InvalidInput(_) => "invalid_input",
            CliError::OutputExists(_) => "output_exists",
            CliError::NoModelProduced(_) => "no_model_produced",
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    /// Prefixes the message with the file it concerns.
    pub fn in_file(self, path: &Path) -> Self {
        let at = |m: String| format!("{}: {m}", path.display());
        match self {
            CliError::Io(m) => CliError::Io(at(m)),
            CliError::Parse(m) => CliError::Parse(at(m)),
            CliError::InvalidInput(m) => CliError::InvalidInput(at(m)),
            other => other,
        }
    }
}

impl From<PointCloudError> for CliError {
    fn from(e: PointCloudError) -> Self {
        match e {
            PointCloudError::Io(_) => CliError::Io(e.to_string()),
            PointCloudError::UnsupportedFormat(_)
            | PointCloudError::MalformedHeader(_)
            | PointCloudError::TruncatedBody(_) => CliError::Parse(e.to_string()),
            _ => CliError::InvalidInput(e.to_string()),
        }
    }
}

impl From<ColmapError> for CliError {
    fn from(e: ColmapError) -> Self {
        match e {
            ColmapError::MissingFile(_) | ColmapError::Io(_) => CliError::Io(e.to_string()),
            ColmapError::EmptyModel => CliError::NoModelProduced(e.to_string()),
            _ => CliError::Parse(e.to_string()),
        }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        CliError::InvalidInput(e.to_string())
    }
}

impl From<ProcessingError> for CliError {
    fn from(e: ProcessingError) -> Self {
        match e {
            ProcessingError::PointCloud(inner) => inner.into(),
            ProcessingError::DegenerateGeometry
            | ProcessingError::NoConvergence { .. }
            | ProcessingError::NonPositiveScale(_) => CliError::Numeric(e.to_string()),
            _ => CliError::InvalidInput(e.to_string()),
        }
    }
}

impl From<RegistrationError> for CliError {
    fn from(e: RegistrationError) -> Self {
        match e {
            RegistrationError::PointCloud(inner) => inner.into(),
            RegistrationError::InvalidParams(_) => CliError::InvalidInput(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::PointCloud(inner) => inner.into(),
            EvalError::Io(_) => CliError::Io(e.to_string()),
            EvalError::MalformedCsv { .. } => CliError::Parse(e.to_string()),
            _ => CliError::InvalidInput(e.to_string()),
        }
    }
}

impl From<FpsError> for CliError {
    fn from(e: FpsError) -> Self {
        match e {
            FpsError::ProbeFailure { fps, source } => match source.downcast::<CliError>() {
                Ok(inner) => *inner,
                Err(other) => CliError::ToolFailure {
                    tool: "registration probe".into(),
                    status: format!("at {fps} fps"),
                    stderr: other.to_string(),
                },
            },
            FpsError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::InvalidInput(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::InvalidInput(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
