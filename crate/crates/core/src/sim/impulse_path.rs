use rand::Rng;

use crate::impulse::ImpulseSpec;
use crate::model::ModelParams;
use crate::numeric::discounted_length;

use super::trace::{Event, Trace};
use super::{draw_claim, PathOutcome};

/// One renewal cycle started at the reset point at time 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleOutcome {
    /// Premium income of company 1 paid out while both sit at the reset
    /// point, discounted to the cycle start.
    pub continuous: f64,
    /// Time of the claim that ends the waiting phase.
    pub claim_time: f64,
    /// Catch-up time of company 2 back to `u2`; `None` on ruin.
    pub catch_up: Option<f64>,
    /// Time of ruin measured from the cycle start, if any.
    pub ruin_time: Option<f64>,
}

impl CycleOutcome {
    /// Lump payment at the end of the cycle, undiscounted.
    pub fn lump(&self, spec: &ImpulseSpec, params: &ModelParams) -> Option<f64> {
        self.catch_up.map(|tau| (params.c1 - params.c2) * tau - spec.cost)
    }

    pub fn length(&self) -> Option<f64> {
        self.catch_up.map(|tau| self.claim_time + tau)
    }
}

/// Simulates one cycle. Between claims the reserves drift at `(c1, c2)`;
/// company 2 reaching `u2` ends the cycle exactly at its crossing time.
pub fn simulate_impulse_cycle<R: Rng + ?Sized>(
    spec: &ImpulseSpec,
    params: &ModelParams,
    rng: &mut R,
    t0: f64,
    max_time: f64,
    mut trace: Option<&mut Trace>,
) -> CycleOutcome {
    let (c1, c2, q) = (params.c1, params.c2, params.q);
    let wait: f64 = rng.sample::<f64, _>(rand_distr::Exp1) / params.lambda;
    if t0 + wait >= max_time {
        return CycleOutcome {
            continuous: c1 * discounted_length(q, 0.0, max_time - t0),
            claim_time: max_time - t0,
            catch_up: None,
            ruin_time: None,
        };
    }
    let continuous = c1 * discounted_length(q, 0.0, wait);
    let claim = draw_claim(&params.claims, rng);
    let (mut x1, mut x2) = (spec.u1 - claim, spec.u2 - claim);
    if let Some(tr) = trace.as_deref_mut() {
        tr.push(t0 + wait, x1, x2, Event::Claim);
    }
    if x1 < 0.0 || x2 < 0.0 {
        return CycleOutcome {
            continuous,
            claim_time: wait,
            catch_up: None,
            ruin_time: Some(wait),
        };
    }
    let mut tau = 0.0;
    loop {
        let gap: f64 = rng.sample::<f64, _>(rand_distr::Exp1) / params.lambda;
        let to_top = (spec.u2 - x2) / c2;
        if to_top <= gap {
            tau += to_top;
            return CycleOutcome {
                continuous,
                claim_time: wait,
                catch_up: Some(tau),
                ruin_time: None,
            };
        }
        if t0 + wait + tau + gap >= max_time {
            return CycleOutcome {
                continuous,
                claim_time: wait,
                catch_up: None,
                ruin_time: None,
            };
        }
        tau += gap;
        let claim = draw_claim(&params.claims, rng);
        x1 += c1 * gap - claim;
        x2 += c2 * gap - claim;
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(t0 + wait + tau, x1, x2, Event::Claim);
        }
        if x1 < 0.0 || x2 < 0.0 {
            return CycleOutcome {
                continuous,
                claim_time: wait,
                catch_up: None,
                ruin_time: Some(wait + tau),
            };
        }
    }
}

/// Full impulse path: cycles until ruin, `max_cycles`, or `max_time`.
pub(crate) fn run<R: Rng + ?Sized>(
    spec: &ImpulseSpec,
    params: &ModelParams,
    max_time: f64,
    max_cycles: usize,
    rng: &mut R,
    mut trace: Option<&mut Trace>,
) -> PathOutcome {
    let q = params.q;
    let mut t = 0.0;
    let mut paid = 0.0;
    if let Some(tr) = trace.as_deref_mut() {
        tr.push(0.0, spec.u1, spec.u2, Event::Start);
    }
    for _ in 0..max_cycles {
        let cyc = simulate_impulse_cycle(spec, params, rng, t, max_time, trace.as_deref_mut());
        let discount = (-q * t).exp();
        paid += discount * cyc.continuous;
        if let Some(r) = cyc.ruin_time {
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(t + r, f64::NAN, f64::NAN, Event::Ruin);
            }
            return PathOutcome {
                dividends: paid,
                ruin_time: Some(t + r),
            };
        }
        let (Some(len), Some(lump)) = (cyc.length(), cyc.lump(spec, params)) else {
            break;
        };
        t += len;
        paid += (-q * t).exp() * lump;
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(t, spec.u1 + lump + spec.cost, spec.u2, Event::Payment);
            tr.push(t, spec.u1, spec.u2, Event::Reset);
        }
    }
    if let Some(tr) = trace {
        tr.push(t.min(max_time), spec.u1, spec.u2, Event::Censored);
    }
    PathOutcome {
        dividends: paid,
        ruin_time: None,
    }
}
