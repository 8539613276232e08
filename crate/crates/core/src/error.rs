use thiserror::Error;

/// Errors raised by the analytic and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of a routine.
    #[error("{routine}: argument `{arg}` = {value} is outside the domain ({expected})")]
    Domain {
        routine: &'static str,
        arg: &'static str,
        value: f64,
        expected: &'static str,
    },

    /// An iterative evaluation did not meet its tolerance within the term budget.
    #[error("{routine}: no convergence after {terms} terms")]
    NoConvergence { routine: &'static str, terms: usize },

    /// A parameter set violates a model invariant.
    #[error("invalid configuration: `{key}` {reason}")]
    Config { key: &'static str, reason: String },

    /// A generated transition row does not sum to one.
    #[error("transition row {row} sums to {sum} (expected 1)")]
    RowSum { row: usize, sum: f64 },

    /// The stationary system is singular; the battery chain has more than one closed class.
    #[error("battery chain is reducible: {closed_classes} closed classes, no unique steady state")]
    Reducible { closed_classes: usize },

    /// Linear solve failed or produced an unusable distribution.
    #[error("steady-state solve failed: {0}")]
    Solve(String),
}

impl Error {
    pub(crate) fn config(key: &'static str, reason: impl Into<String>) -> Self {
        Error::Config {
            key,
            reason: reason.into(),
        }
    }

    /// True for errors caused by the inputs rather than by numerics.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Domain { .. } | Error::Config { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
