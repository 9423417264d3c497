use std::fmt;
use std::process::ExitCode;

use reben_core::labeling::LabelError;
use reben_core::pipeline::PipelineError;
use reben_core::raster::RasterError;
use reben_core::split::SplitError;
use reben_store::{FormatError, StoreError};

/// Failure category; each maps to a fixed exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Usage,
    Data,
    Io,
}

impl Category {
    pub fn exit_code(self) -> u8 {
        match self {
            Category::Usage => 2,
            Category::Data => 3,
            Category::Io => 4,
        }
    }
}

#[derive(Debug)]
pub struct AppError {
    pub category: Category,
    pub message: String,
}

impl AppError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            category: Category::Usage,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            category: Category::Data,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            category: Category::Io,
            message: message.into(),
        }
    }

    /// Prefixes the message with where the error happened.
    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.category.exit_code())
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for AppError {}

pub type AppResult<T> = Result<T, AppError>;

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::io(e.to_string())
    }
}

impl From<serde_json::Error> for AppError {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            AppError::io(e.to_string())
        } else {
            AppError::data(e.to_string())
        }
    }
}

impl From<LabelError> for AppError {
    fn from(e: LabelError) -> Self {
        match e {
            LabelError::Io(_) => AppError::io(e.to_string()),
            other => AppError::data(other.to_string()),
        }
    }
}

impl From<PipelineError> for AppError {
    fn from(e: PipelineError) -> Self {
        AppError::data(e.to_string())
    }
}

impl From<SplitError> for AppError {
    fn from(e: SplitError) -> Self {
        AppError::data(e.to_string())
    }
}

impl From<RasterError> for AppError {
    fn from(e: RasterError) -> Self {
        match e {
            RasterError::Io { .. } => AppError::io(e.to_string()),
            other => AppError::data(other.to_string()),
        }
    }
}

impl From<FormatError> for AppError {
    fn from(e: FormatError) -> Self {
        AppError::data(e.to_string())
    }
}

impl From<StoreError> for AppError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Io(_) | StoreError::Lmdb(_) | StoreError::NotFound(_) => AppError::io(e.to_string()),
            other => AppError::data(other.to_string()),
        }
    }
}
