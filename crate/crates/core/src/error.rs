use thiserror::Error;

use crate::lp::LpError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("unsupported topology: junction with incoming {incoming:?} and outgoing {outgoing:?} is neither ordinary, merge nor diverge")]
    UnsupportedTopology {
        incoming: Vec<usize>,
        outgoing: Vec<usize>,
    },

    #[error("constraint violated{}: {constraint} exceeded by {amount:.3e}", step_suffix(*.step))]
    ConstraintViolation {
        step: Option<usize>,
        constraint: String,
        amount: f64,
    },

    #[error("infeasible{}: {context}", step_suffix(*.step))]
    Infeasible { step: Option<usize>, context: String },

    #[error("linear program failed{}: {source}", step_suffix(*.step))]
    Solver {
        step: Option<usize>,
        #[source]
        source: LpError,
    },

    #[error("parameter {0:?} lies outside every critical region")]
    OutOfDomain(Vec<f64>),

    #[error("problem exceeds enumeration scale: {0}")]
    ScaleExceeded(String),

    #[error("relative loss undefined: reference cost is zero")]
    DivisionByZero,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn step_suffix(step: Option<usize>) -> String {
    match step {
        Some(k) => format!(" at step {k}"),
        None => String::new(),
    }
}

impl From<LpError> for Error {
    fn from(source: LpError) -> Self {
        Error::Solver { step: None, source }
    }
}

impl Error {
    /// Attaches a time step to errors that carry one.
    pub fn at_step(self, k: usize) -> Self {
        match self {
            Error::ConstraintViolation {
                step: None,
                constraint,
                amount,
            } => Error::ConstraintViolation {
                step: Some(k),
                constraint,
                amount,
            },
            Error::Infeasible { step: None, context } => Error::Infeasible {
                step: Some(k),
                context,
            },
            Error::Solver { step: None, source } => Error::Solver {
                step: Some(k),
                source,
            },
            other => other,
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::Infeasible { .. }
                | Error::ConstraintViolation { .. }
                | Error::Solver {
                    source: LpError::Infeasible,
                    ..
                }
        )
    }
}
