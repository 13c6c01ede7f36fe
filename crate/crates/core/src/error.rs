use thiserror::Error;

use crate::nash_moser::SolveReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("Sobolev order {0} is outside the supported range 0..=6")]
    UnsupportedOrder(usize),

    #[error("iterate is not admissible: {0}")]
    NotAdmissible(String),

    #[error("invariant violated: {name}: {detail}")]
    Invariant { name: &'static str, detail: String },

    #[error("degenerate velocity: {0}")]
    DegenerateVelocity(String),

    #[error("vanishing denominator in the x-x reconstruction (min {0:e})")]
    VanishingDenominator(f64),

    #[error("negative curvature met in conjugate gradients (Rayleigh quotient {quotient:e})")]
    NegativeCurvature { quotient: f64 },

    #[error("linear solver did not reach tolerance: {0}")]
    LinearSolve(String),

    #[error("continuation diverged at eps = {eps:e} (step ratio {ratio:e})")]
    ContinuationDiverged { eps: f64, ratio: f64 },

    #[error("eigen-iteration stagnated after {0} iterations")]
    EigenStagnation(usize),

    #[error("nonlinear solve failed: {}", report.verdict_label())]
    Solve { report: Box<SolveReport> },

    #[error("residual gate rejected the data: {value:e} > {gate:e}")]
    GateRejected { value: f64, gate: f64 },

    #[error("v1 changes sign: {0}")]
    SignChange(String),

    #[error("gauge map is not unimodular (max |det - 1| = {0:e})")]
    NotUnimodular(f64),

    #[error("boundary values of the two pairs differ")]
    BoundaryMismatch,

    #[error("mode n = {n} is at or beyond the Nyquist index {nyquist}")]
    BeyondNyquist { n: usize, nyquist: usize },

    #[error("{0}")]
    Parse(String),

    #[error("field dump: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors that stem from bad input rather than a failing solve.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidGrid(_)
                | Error::GridMismatch
                | Error::NonFinite(_)
                | Error::UnsupportedOrder(_)
                | Error::NotAdmissible(_)
                | Error::Invariant { .. }
                | Error::GateRejected { .. }
                | Error::NotUnimodular(_)
                | Error::BoundaryMismatch
                | Error::BeyondNyquist { .. }
                | Error::Parse(_)
                | Error::Format(_)
        )
    }
}
