use std::io;
use std::path::Path;

use thiserror::Error;

/// Everything the front end can fail with. [`AppError::exit_code`] maps each
/// variant onto the process exit status.
#[derive(Debug, Error)]
pub enum AppError {
    #[error("cannot parse {source_name}: {message}")]
    ConfigParse { source_name: String, message: String },

    #[error("invalid configuration at `{path}`: {reason}")]
    ConfigInvalid { path: String, reason: String },

    #[error("unknown preset `{0}` (available: fig2b, fig3b, fig3c, fig4)")]
    UnknownPreset(String),

    #[error("{path}: input does not match the `{kind}` schema: {reason}")]
    SchemaMismatch { path: String, kind: String, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(#[from] nvreadout_core::Error),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::ConfigParse { .. }
            | AppError::ConfigInvalid { .. }
            | AppError::UnknownPreset(_)
            | AppError::SchemaMismatch { .. } => 2,
            AppError::Numerical(e) => match e {
                // Range errors caught late are still configuration errors.
                nvreadout_core::Error::InvalidParameter { .. } | nvreadout_core::Error::InvalidN { .. } => 2,
                _ => 3,
            },
            AppError::Io { .. } | AppError::Csv { .. } => 1,
        }
    }

    pub fn io(context: impl Into<String>, source: io::Error) -> Self {
        AppError::Io {
            context: context.into(),
            source,
        }
    }

    pub fn io_path(path: &std::path::Path, source: io::Error) -> Self {
        AppError::io(path.display().to_string(), source)
    }

    pub fn invalid(path: impl Into<String>, reason: impl Into<String>) -> Self {
        AppError::ConfigInvalid {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Advice printed under calibration failures.
    pub fn guidance(&self) -> Option<&'static str> {
        match self {
            AppError::Numerical(nvreadout_core::Error::NoBracket { .. }) => Some(
                "the target N_1e is out of reach for kappa in [1e-3, 1e3]; check b0_mt and a_es, or pick a target inside the reported range",
            ),
            AppError::Numerical(nvreadout_core::Error::Unreachable { .. }) => Some(
                "no contrast in (0, 1] reaches this single-shot fidelity; lower the target or raise alpha0",
            ),
            _ => None,
        }
    }
}

pub(crate) fn csv_err(path: &Path, source: csv::Error) -> AppError {
    AppError::Csv {
        path: path.display().to_string(),
        source,
    }
}

pub type Result<T, E = AppError> = std::result::Result<T, E>;
