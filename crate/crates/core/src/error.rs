use thiserror::Error;

use crate::model::ModelId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {message}")]
    InvalidParameter { field: String, message: String },

    #[error("dose {0} is outside the design space")]
    Domain(f64),

    #[error("model {parent} does not collapse to {child} through a single parameter restriction")]
    NoSingleParameterNesting { parent: ModelId, child: ModelId },

    #[error("information matrix is singular (rank {rank} of {dim})")]
    SingularInformation { rank: usize, dim: usize },

    #[error("support matrix F is singular")]
    SingularSupport,

    #[error("explicit weight {index} is non-positive ({value:.3e}); points are not the Chebyshev points")]
    NegativeWeight { index: usize, value: f64 },

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("objective is not finite at the start point")]
    NonFiniteObjective,

    #[error("optimizer failed: {0}")]
    OptimizerFailure(String),

    #[error("no composition of the power and rate maps connects (b={from_b}, d={from_d}, T={from_t}) to (b={to_b}, d={to_d}, T={to_t})")]
    UnreachableScaling {
        from_b: f64,
        from_d: f64,
        from_t: f64,
        to_b: f64,
        to_d: f64,
        to_t: f64,
    },

    #[error("unsupported request: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn param(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Offending input field, for validation errors that name one.
    pub fn field(&self) -> Option<&str> {
        match self {
            Error::InvalidParameter { field, .. } => Some(field),
            _ => None,
        }
    }

    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::Domain(_) => "domain",
            Error::NoSingleParameterNesting { .. } => "no_single_parameter_nesting",
            Error::SingularInformation { .. } => "singular_information",
            Error::SingularSupport => "singular_support",
            Error::NegativeWeight { .. } => "negative_weight",
            Error::InvalidDesign(_) => "invalid_design",
            Error::NonFiniteObjective => "non_finite_objective",
            Error::OptimizerFailure(_) => "optimizer_failure",
            Error::UnreachableScaling { .. } => "unreachable_scaling",
            Error::Unsupported(_) => "unsupported",
        }
    }

    /// True for failures caused by the numerical solvers rather than by the
    /// caller's input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(self, Error::OptimizerFailure(_) | Error::NonFiniteObjective)
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
