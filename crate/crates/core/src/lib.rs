//! Expected discounted dividend payments for two insurers that share every
//! claim and collect premiums at different rates.
//!
//! The reserve vector `(X1, X2)` drifts at `(c1, c2)` and both coordinates
//! drop by the same amount at each claim. Two dividend controls are covered:
//!
//! * reflection at a linear barrier `y = b - a x` ([`barrier`]), valued by a
//!   double exponential series built in [`gamma`];
//! * impulse payments that reset the reserves to a fixed point `(u1, u2)`
//!   ([`impulse`]), valued with q-scale functions ([`scale`]) when `u1 > u2`
//!   and by a numerical first-passage solve when `u1 <= u2`.
//!
//! Every analytic route can be checked against the exact-event Monte Carlo
//! simulator in [`sim`]. [`optimize`] sweeps and refines the barrier.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barrier;
pub mod csvio;
pub mod error;
pub mod gamma;
pub mod impulse;
pub mod model;
pub mod numeric;
pub mod optimize;
pub mod reference;
pub mod scale;
pub mod sim;

pub use error::{Error, Result};
pub use model::{
    classify_point, validate_model, BarrierSpec, ClaimDistribution, ClaimSampler, ModelParams,
    Region, Reserves, Violation,
};
