use thiserror::Error;

/// Failures surfaced by the numerical pipeline.
///
/// Variants carry enough context for the CLI to emit a structured record.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix {entries:?} has determinant {det}, expected +1 or -1")]
    NotUnimodular { entries: [[i64; 2]; 2], det: i64 },

    #[error("matrix {0:?} is not hyperbolic (|trace| <= 2)")]
    NotHyperbolic([[i64; 2]; 2]),

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("two periodic points refined to within {distance:e} of each other (indices {first}, {second})")]
    Collision {
        first: usize,
        second: usize,
        distance: f64,
    },

    #[error("leaf tracing escaped: predictor/corrector drift {drift:e} at parameter {param}")]
    LeafEscape { drift: f64, param: f64 },

    #[error("no intersection inside the chart: {0}")]
    OutOfChart(String),

    #[error("holonomy leaf left the chart before crossing the target segment at sample {0}")]
    NoIntersection(usize),

    #[error("degenerate Lyapunov exponent: lambda_u = {0:e}")]
    DegenerateExponent(f64),

    #[error("ball around center {center:?} captures fewer than {min_atoms} atoms at every admissible radius")]
    EmptyBall { center: [f64; 2], min_atoms: usize },

    #[error("no commuting unimodular hyperbolic matrix with entries bounded by {bound}; retry with bound {}", bound * 2)]
    NotFound { bound: i64 },

    #[error("matrices do not commute")]
    NonCommuting,

    #[error("degenerate samples: {0}")]
    DegenerateSamples(String),

    #[error("map is not certified Anosov: {0}")]
    NotCertified(String),
}

impl Error {
    /// True for failures of an iterative or geometric numerical procedure
    /// (as opposed to malformed input).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::Collision { .. }
                | Error::LeafEscape { .. }
                | Error::OutOfChart(_)
                | Error::NoIntersection(_)
                | Error::DegenerateExponent(_)
                | Error::EmptyBall { .. }
                | Error::Overflow(_)
                | Error::NotCertified(_)
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::NotUnimodular { .. } => "NotUnimodular",
            Error::NotHyperbolic(_) => "NotHyperbolic",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::Overflow(_) => "Overflow",
            Error::Collision { .. } => "Collision",
            Error::LeafEscape { .. } => "LeafEscape",
            Error::OutOfChart(_) => "OutOfChart",
            Error::NoIntersection(_) => "NoIntersection",
            Error::DegenerateExponent(_) => "DegenerateExponent",
            Error::EmptyBall { .. } => "EmptyBall",
            Error::NotFound { .. } => "NotFound",
            Error::NonCommuting => "NonCommuting",
            Error::DegenerateSamples(_) => "DegenerateSamples",
            Error::NotCertified(_) => "NotCertified",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
