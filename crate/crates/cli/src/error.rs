use std::fmt;
use std::path::Path;

use gelab::econometrics::EconometricsError;
use gelab::ingest::IngestError;
use gelab::simkit::ConfigError;
use serde_json::json;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Category {
    Config,
    Analysis,
    Ingest,
}

#[derive(Debug)]
pub struct CliError {
    pub category: Category,
    /// Machine-readable error name, e.g. `InsufficientSupport`.
    pub kind: String,
    pub message: String,
}

impl CliError {
    pub fn config(kind: &str, message: impl Into<String>) -> Self {
        CliError {
            category: Category::Config,
            kind: kind.into(),
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        CliError {
            category: Category::Ingest,
            kind: "Io".into(),
            message: format!("{}: {e}", path.display()),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.category {
            Category::Config => 2,
            Category::Analysis => 3,
            Category::Ingest => 4,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "error": self.kind,
            "category": match self.category {
                Category::Config => "config",
                Category::Analysis => "analysis",
                Category::Ingest => "ingest",
            },
            "message": self.message,
            "exit_code": self.exit_code(),
        })
    }

    /// Analysis errors are always reported as JSON; the rest only on request.
    pub fn emit(&self, json_errors: bool) {
        if json_errors || self.category == Category::Analysis {
            eprintln!("{}", self.to_json());
        } else {
            eprintln!("error: {}", self.message);
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<EconometricsError> for CliError {
    fn from(e: EconometricsError) -> Self {
        CliError {
            category: Category::Analysis,
            kind: e.kind().into(),
            message: e.to_string(),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        let category = match e {
            IngestError::InvalidConfig(_) => Category::Config,
            _ => Category::Ingest,
        };
        CliError {
            category,
            kind: e.kind().into(),
            message: e.to_string(),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        let kind = match e {
            ConfigError::ConfigInvalid(_) => "ConfigInvalid",
            ConfigError::Parse { .. } => "ConfigParse",
        };
        CliError::config(kind, e.to_string())
    }
}
