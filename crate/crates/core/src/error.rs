use thiserror::Error;

use crate::grid::Cell;

/// Errors produced by the planning library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DteError {
    #[error("cell {0} lies outside the {1}x{2} grid")]
    OutOfBounds(Cell, u16, u16),

    #[error("cell {0} is an obstacle")]
    Infeasible(Cell),

    #[error("{0}")]
    Domain(String),

    #[error("counter has length {got}, task window needs {expected}")]
    WindowMismatch { expected: usize, got: usize },

    #[error("value table has no entry for counter {0:?} and no default")]
    MissingTableEntry(Vec<u32>),

    #[error("{what} budget exceeded: {size} > {budget}")]
    BudgetExceeded {
        what: &'static str,
        size: u128,
        budget: u128,
    },

    #[error("unknown robot index {0}")]
    UnknownRobot(usize),

    #[error("unknown task index {0}")]
    UnknownTask(usize),

    #[error("not applicable: {0}")]
    Inapplicable(String),

    #[error("stationary solve did not converge (residual {0:e})")]
    NonConvergence(f64),

    #[error("trajectory count overflow")]
    CountOverflow,
}

pub type Result<T> = std::result::Result<T, DteError>;
