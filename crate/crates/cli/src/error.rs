use std::fmt::Display;
use std::path::PathBuf;

use congestion_core::beckmann::BeckmannError;
use congestion_core::dynamic::DynamicError;
use congestion_core::graph::GraphError;
use congestion_core::roads::RoadsError;

/// Exit code when a certificate is computed but fails its tolerances.
pub const EXIT_CHECK_FAILED: u8 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid input at `{pointer}`: {message}")]
    Input { pointer: String, message: String },
    #[error("infeasible instance: {0}")]
    Infeasible(String),
    #[error("no convergence: {0}")]
    NotConverged(String),
}

impl CliError {
    pub fn input(pointer: impl Into<String>, message: impl Display) -> Self {
        CliError::Input {
            pointer: pointer.into(),
            message: message.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for bad input, 3 for infeasible instances, 4 for convergence failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } | CliError::Input { .. } => 2,
            CliError::Infeasible(_) => 3,
            CliError::NotConverged(_) => 4,
        }
    }

    pub fn graph(pointer: &str, e: GraphError) -> Self {
        match e {
            GraphError::NegativeLoop { .. } => CliError::Infeasible(e.to_string()),
            other => CliError::input(pointer, other),
        }
    }

    pub fn beckmann(pointer: &str, e: BeckmannError) -> Self {
        match e {
            BeckmannError::Infeasible(_) => CliError::Infeasible(e.to_string()),
            BeckmannError::Graph(g) => CliError::graph(pointer, g),
            other => CliError::input(pointer, other),
        }
    }

    pub fn dynamic(pointer: &str, e: DynamicError) -> Self {
        match e {
            DynamicError::Beckmann(b) => CliError::beckmann(pointer, b),
            DynamicError::Graph(g) => CliError::graph(pointer, g),
            other => CliError::input(pointer, other),
        }
    }

    pub fn roads(pointer: &str, e: RoadsError) -> Self {
        match e {
            RoadsError::NotConverged { .. } => CliError::NotConverged(e.to_string()),
            RoadsError::Beckmann(b) => CliError::beckmann(pointer, b),
            other => CliError::input(pointer, other),
        }
    }
}
