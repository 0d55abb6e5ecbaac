use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

/// Machine-readable failure class; each maps to a process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Configuration,
    Dataset,
    Convergence,
    Io,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Configuration => 2,
            Category::Dataset => 3,
            Category::Convergence => 4,
            Category::Io => 5,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Dataset { path: PathBuf, message: String },
    #[error("stage {stage}{context}: {source}")]
    Stage {
        stage: &'static str,
        /// Input description, e.g. " (data/r1.csv)"; empty when none.
        context: String,
        #[source]
        source: qlb_core::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn category(&self) -> Category {
        match self {
            CliError::Config(_) => Category::Configuration,
            CliError::Dataset { .. } => Category::Dataset,
            CliError::Io { .. } => Category::Io,
            CliError::Stage { source, .. } => match source {
                qlb_core::Error::Configuration(_) => Category::Configuration,
                qlb_core::Error::Convergence { .. } => Category::Convergence,
                _ => Category::Dataset,
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.category().exit_code()
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn dataset(path: &Path, message: impl Into<String>) -> Self {
        CliError::Dataset { path: path.to_path_buf(), message: message.into() }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": { "category": self.category(), "message": self.to_string() }
        })
        .to_string()
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
    fn stage_input(self, stage: &'static str, input: &str) -> Result<T>;
}

impl<T> StageContext<T> for qlb_core::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|source| CliError::Stage { stage, context: String::new(), source })
    }

    fn stage_input(self, stage: &'static str, input: &str) -> Result<T> {
        self.map_err(|source| CliError::Stage { stage, context: format!(" ({input})"), source })
    }
}
