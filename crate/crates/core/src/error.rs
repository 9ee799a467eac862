use thiserror::Error;

use crate::model::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model parameters: {}", join_violations(.0))]
    InvalidModel(Vec<Violation>),

    #[error("invalid barrier: {0}")]
    InvalidBarrier(String),

    #[error("invalid impulse specification: {0}")]
    InvalidImpulse(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("claim distribution `{0}` is not supported by the analytic valuation; use the simulator")]
    UnsupportedDistribution(String),

    #[error("point ({u1}, {u2}) is outside the domain of the analytic solution: {reason}")]
    OutsideDomain { u1: f64, u2: f64, reason: String },

    #[error("negative discriminant {value:e} in {context}")]
    NegativeDiscriminant { context: &'static str, value: f64 },

    #[error("series did not converge within {max_terms} terms (tail ratio {tail_ratio:e})")]
    NonConvergence { max_terms: usize, tail_ratio: f64 },

    #[error("quadrature did not reach tolerance {tol:e} (estimated error {estimate:e})")]
    Quadrature { tol: f64, estimate: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for failures caused by the numerics rather than by the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NegativeDiscriminant { .. }
                | Error::NonConvergence { .. }
                | Error::Quadrature { .. }
                | Error::Numerical(_)
        )
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
