use crate::cahn_hilliard::CHStepReport;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("phase-bound violation: |phi| = {value} at sample ({i}, {j})")]
    PhaseBound { value: f64, i: usize, j: usize },

    #[error("argument {0} lies outside the open interval (-1, 1)")]
    Domain(f64),

    #[error("grid mismatch: n = {0} vs n = {1}")]
    GridMismatch(usize, usize),

    #[error("Cahn-Hilliard step failed: {reason}")]
    CahnHilliard {
        reason: String,
        report: Box<CHStepReport>,
    },

    #[error("CFL violation: {0}")]
    Cfl(String),

    #[error("pressure solver did not converge: residual {residual:e} after {iterations} iterations")]
    PressureSolve { residual: f64, iterations: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error("run aborted at step {step} (t = {time}): {source}")]
    Aborted {
        step: u64,
        time: f64,
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Step failures that a smaller time step may cure.
    pub fn is_recoverable(&self) -> bool {
        matches!(
            self,
            Error::CahnHilliard { .. }
                | Error::Cfl(_)
                | Error::PressureSolve { .. }
                | Error::PhaseBound { .. }
        )
    }
}
