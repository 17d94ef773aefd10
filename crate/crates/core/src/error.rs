use thiserror::Error;

use crate::expr::{EvalError, ParseError};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("no valid sample point found in {draws} draws")]
    AllPointsSingular { draws: usize },
    #[error("invalid point map: {0}")]
    MapInvalid(String),
    #[error("cubic closure violated: {0}")]
    ClosureViolation(String),
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("singular evaluation at x = {x}: {source}")]
    SingularEvaluation { x: f64, source: EvalError },
    #[error("degenerate orbit ({0}): the operation requires L3 != 0")]
    DegenerateOrbit(String),
    #[error("not in general position at ({x}, {y}): Tresse Jacobian is singular")]
    NotInGeneralPosition { x: f64, y: f64 },
    #[error("no grid node is in general position")]
    NowhereGeneralPosition,
    #[error("target out of range: {0}")]
    OutOfRange(String),
    #[error("Newton iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("{path}:{line}: {msg}")]
    Format { path: String, line: usize, msg: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
