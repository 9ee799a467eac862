//! Impulse dividends: whenever company 2 climbs back to its reset level the
//! surplus of company 1 above `u1` is paid out at a fixed cost `K`, and
//! company 1 pays its premium income continuously while both sit at the
//! reset point.
//!
//! Writing `p` for the discounted probability of completing a cycle and `A`
//! for the discounted payout of one cycle, the value is `A / (1 - p)`.

mod low;
pub mod tilted;

pub use low::{first_passage_grid, LowOptions, LowRoute, DEFAULT_DQ_REL_STEP};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::scale::{scale_params, ScaleParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpulseSpec {
    pub u1: f64,
    pub u2: f64,
    /// Fixed transaction cost per payment.
    pub cost: f64,
}

impl ImpulseSpec {
    pub fn new(u1: f64, u2: f64, cost: f64) -> Result<Self> {
        let mut problems = Vec::new();
        if !(u1 >= 0.0) || !u1.is_finite() {
            problems.push(format!("u1 must be finite and nonnegative, got {u1}"));
        }
        if !(u2 >= 0.0) || !u2.is_finite() {
            problems.push(format!("u2 must be finite and nonnegative, got {u2}"));
        }
        if !(cost > 0.0) || !cost.is_finite() {
            problems.push(format!("cost K must be finite and positive, got {cost}"));
        }
        if problems.is_empty() {
            Ok(Self { u1, u2, cost })
        } else {
            Err(Error::InvalidImpulse(problems.join("; ")))
        }
    }

    /// Time for company 1 to catch up with company 2 after a shared claim,
    /// `(u2 - u1) / (c1 - c2)`; zero when `u1 >= u2`.
    pub fn catch_up_time(&self, params: &ModelParams) -> f64 {
        ((self.u2 - self.u1) / (params.c1 - params.c2)).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImpulseMethod {
    ClosedFormHigh,
    QuadratureLow,
}

impl ImpulseMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            ImpulseMethod::ClosedFormHigh => "closed-form",
            ImpulseMethod::QuadratureLow => "quadrature",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseValuation {
    pub value: f64,
    /// Discounted probability that a cycle ends in a payment.
    pub p: f64,
    /// Expected discounted payout of one cycle.
    pub a: f64,
    /// `-d/dq` of the cycle-completion transform, the discounted mean
    /// length of the catch-up phase.
    pub tau_moment: f64,
    pub method: ImpulseMethod,
    /// Which low-case solver produced the numbers, if any.
    pub route: Option<LowRoute>,
    /// Upper limit used for the claim-size integral in `p`.
    pub claim_upper_limit: f64,
    /// `A < 0`: payments cost more than they return.
    pub loss_making: bool,
}

impl ImpulseValuation {
    fn assemble(
        spec: &ImpulseSpec,
        params: &ModelParams,
        p: f64,
        tau_moment: f64,
        method: ImpulseMethod,
        route: Option<LowRoute>,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Numerical(format!(
                "cycle discount factor p = {p} outside [0, 1)"
            )));
        }
        let lq = params.lambda + params.q;
        let a = params.c1 / lq - spec.cost * p
            + params.lambda * (params.c1 - params.c2) / lq * tau_moment;
        Ok(Self {
            value: a / (1.0 - p),
            p,
            a,
            tau_moment,
            method,
            route,
            claim_upper_limit: spec.u1.min(spec.u2),
            loss_making: a < 0.0,
        })
    }
}

/// Value of the impulse policy, choosing the closed form when `u1 > u2`
/// and the low-case solver otherwise.
pub fn impulse_v1(spec: &ImpulseSpec, params: &ModelParams, low: &LowOptions) -> Result<ImpulseValuation> {
    if spec.u1 > spec.u2 {
        impulse_v1_high(spec, params)
    } else {
        impulse_v1_low(spec, params, low)
    }
}

/// Closed form for `u1 > u2`, where company 2 is always the first to fail
/// and the catch-up phase is a two-sided exit of company 2 from `[0, u2]`.
pub fn impulse_v1_high(spec: &ImpulseSpec, params: &ModelParams) -> Result<ImpulseValuation> {
    if !(spec.u1 > spec.u2) {
        return Err(Error::InvalidImpulse(format!(
            "closed form needs u1 > u2, got ({}, {}); use the low-case solver",
            spec.u1, spec.u2
        )));
    }
    let (p, tau) = exit_transform(spec.u2, params)?;
    ImpulseValuation::assemble(spec, params, p, tau, ImpulseMethod::ClosedFormHigh, None)
}

pub use low::impulse_v1_low;

/// `(p, I)` for a catch-up phase that is a plain two-sided exit of the
/// drift-`c2` process from `[0, level]` started at `level - U`.
pub(crate) fn exit_transform(level: f64, params: &ModelParams) -> Result<(f64, f64)> {
    let alpha = params.alpha()?;
    let sp = scale_params(params, params.c2)?;
    let parts = ExitParts::new(&sp, alpha, level);
    let w = sp.w(level)?;
    let dw = sp.dw_dq(level)?;
    let p = params.lambda / (params.q + params.lambda) * parts.mass / w;
    let tau = dw / (w * w) * parts.mass - parts.dmass / w;
    Ok((p, tau))
}

/// `M(q) = int_0^L W(L - x) alpha e^{-alpha x} dx` and `dM/dq` in closed
/// form.
struct ExitParts {
    mass: f64,
    dmass: f64,
}

impl ExitParts {
    fn new(sp: &ScaleParams, alpha: f64, level: f64) -> Self {
        let tail = (-alpha * level).exp();
        // int_0^L e^{r (L - x)} alpha e^{-alpha x} dx
        let k = |r: f64| alpha * ((r * level).exp() - tail) / (r + alpha);
        // int_0^L (L - x) e^{r (L - x)} alpha e^{-alpha x} dx
        let j = |r: f64| {
            let beta = r + alpha;
            let eb = (beta * level).exp();
            alpha * tail * (level * eb - (beta * level).exp_m1() / beta) / beta
        };
        let (kp, km) = (k(sp.q_plus), k(sp.q_minus));
        let (jp, jm) = (j(sp.q_plus), j(sp.q_minus));
        let mass = (sp.a_plus * kp - sp.a_minus * km) / sp.drift;
        let dmass = (sp.da_plus * kp + sp.a_plus * sp.dq_plus * jp
            - sp.da_minus * km
            - sp.a_minus * sp.dq_minus * jm)
            / sp.drift;
        Self { mass, dmass }
    }
}
