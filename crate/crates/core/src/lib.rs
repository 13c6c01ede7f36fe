pub mod bernoulli;
pub mod cli;
pub mod diagnostics;
pub mod dump;
pub mod error;
pub mod euler;
pub mod expr;
pub mod extract;
pub mod field;
pub mod grid;
pub mod krylov;
pub mod linearized;
pub mod linsolve;
pub mod nash_moser;
pub mod norms;
pub mod pair;
pub mod precond;
pub mod problem;
pub mod reconstruct;
pub mod scenario;
pub mod sampling;
pub mod smoothing;

pub use error::{Error, Result};
