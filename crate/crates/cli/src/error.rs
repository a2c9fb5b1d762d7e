//! CLI errors, their exit codes and JSON error records.

use std::path::PathBuf;

use anosov_core::error::Error as CoreError;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration at `{pointer}`: {message}")]
    Validation { pointer: String, message: String },
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{report}: {source}")]
    Core {
        report: &'static str,
        #[source]
        source: CoreError,
    },
    #[error("{report}: check failed: {message}")]
    CheckFailed {
        report: &'static str,
        message: String,
    },
}

/// Machine-readable error record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pointer: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
    pub message: String,
}

fn core_kind(e: &CoreError) -> &'static str {
    match e {
        CoreError::InvalidInput(_) => "invalid_input",
        CoreError::NotUnimodular { .. } => "not_unimodular",
        CoreError::NotHyperbolic(_) => "not_hyperbolic",
        CoreError::NonConvergence { .. } => "non_convergence",
        CoreError::Overflow(_) => "overflow",
        CoreError::Collision { .. } => "collision",
        CoreError::LeafEscape { .. } => "leaf_escape",
        CoreError::OutOfChart(_) => "out_of_chart",
        CoreError::NoIntersection(_) => "no_intersection",
        CoreError::DegenerateExponent(_) => "degenerate_exponent",
        CoreError::EmptyBall { .. } => "empty_ball",
        CoreError::NotFound { .. } => "not_found",
        CoreError::NonCommuting => "non_commuting",
        CoreError::DegenerateSamples(_) => "degenerate_samples",
        CoreError::NotCertified(_) => "not_certified",
    }
}

impl CliError {
    pub fn core(report: &'static str) -> impl FnOnce(CoreError) -> CliError {
        move |source| CliError::Core { report, source }
    }

    /// 2 for invalid input, 3 for numerical failure, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } => 2,
            CliError::Io { .. } | CliError::CheckFailed { .. } => 1,
            CliError::Core { source, .. } => match source {
                CoreError::InvalidInput(_)
                | CoreError::NotUnimodular { .. }
                | CoreError::NotHyperbolic(_) => 2,
                CoreError::NonConvergence { .. }
                | CoreError::Collision { .. }
                | CoreError::LeafEscape { .. }
                | CoreError::OutOfChart(_)
                | CoreError::NoIntersection(_)
                | CoreError::DegenerateExponent(_)
                | CoreError::EmptyBall { .. }
                | CoreError::NotCertified(_) => 3,
                _ => 1,
            },
        }
    }

    pub fn record(&self) -> ErrorRecord {
        let (kind, pointer, report) = match self {
            CliError::Validation { pointer, .. } => {
                ("validation".to_string(), Some(pointer.clone()), None)
            }
            CliError::Io { .. } => ("io".to_string(), None, None),
            CliError::Core { report, source } => (
                core_kind(source).to_string(),
                None,
                Some(report.to_string()),
            ),
            CliError::CheckFailed { report, .. } => {
                ("check_failed".to_string(), None, Some(report.to_string()))
            }
        };
        ErrorRecord {
            kind,
            exit_code: self.exit_code(),
            pointer,
            report,
            message: self.to_string(),
        }
    }
}
