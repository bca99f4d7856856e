use serde::Serialize;
use thiserror::Error;

use crate::SCHEMA_VERSION;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or unreadable input; exit code 2.
    #[error("configuration error: {0}")]
    Config(String),
    /// The library rejected the request; exit code 1.
    #[error(transparent)]
    Domain(#[from] multicurve::Error),
    /// Writing an artifact failed; exit code 1.
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
    /// `verify` ran but some checks failed; exit code 1.
    #[error("{failed} of {total} checks failed")]
    ChecksFailed { failed: usize, total: usize },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> String {
        match self {
            Self::Config(_) => "config".into(),
            Self::Output { .. } => "output".into(),
            Self::ChecksFailed { .. } => "checks-failed".into(),
            Self::Domain(e) => {
                let dbg = format!("{e:?}");
                let end = dbg.find([' ', '(', '{']).unwrap_or(dbg.len());
                dbg[..end].to_string()
            }
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: String,
            exit_code: i32,
            message: &'a str,
        }
        #[derive(Serialize)]
        struct Envelope<'a> {
            schema_version: u32,
            error: Body<'a>,
        }
        let message = self.to_string();
        let env = Envelope {
            schema_version: SCHEMA_VERSION,
            error: Body { kind: self.kind(), exit_code: self.exit_code(), message: &message },
        };
        serde_json::to_string(&env).expect("error envelope serialises")
    }
}
