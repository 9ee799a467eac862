//! Impulse value for `u1 <= u2`.
//!
//! After a claim `x <= u1` company 1 is the binding constraint until it
//! catches up with company 2 at time `r = (u2 - u1) / (c1 - c2)`; from then
//! on company 2 is. The cycle transform
//! `G(q) = E[e^{-q T}; T < ruin]` for the return time `T` of company 2 to
//! `u2` has no closed form, so it is computed numerically and `p`, `I`
//! follow as `lambda / (lambda + q) G` and `-dG/dq`.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numeric::{integrate, QuadOptions};
use crate::scale::{phi_inverse, scale_params};

use super::tilted::crossing_transform;
use super::{exit_transform, ImpulseMethod, ImpulseSpec, ImpulseValuation};

pub const DEFAULT_DQ_REL_STEP: f64 = 1e-4;

/// Numerical route for `G(q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LowRoute {
    /// Backward solve of the first-passage equation along the
    /// characteristics of company 1's drift, in the original measure.
    Characteristic,
    /// Tilted survival functional with the level-shift identity
    /// `e^{-Phi x} V(u2 - x) / V(u2)`. The identity ignores that the
    /// solvency line of company 1 moves with the cycle clock, so this route
    /// is biased whenever `u1 < u2`; it is kept for comparison.
    CrossingTransform,
}

impl LowRoute {
    pub fn tag(&self) -> &'static str {
        match self {
            LowRoute::Characteristic => "characteristic",
            LowRoute::CrossingTransform => "crossing-transform",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowOptions {
    pub route: LowRoute,
    /// Step of the central difference in `q`, relative to `q`.
    pub dq_rel_step: f64,
    /// Time steps of the characteristic grid; chosen from the geometry when
    /// absent.
    pub grid_steps: Option<usize>,
}

impl Default for LowOptions {
    fn default() -> Self {
        Self {
            route: LowRoute::Characteristic,
            dq_rel_step: DEFAULT_DQ_REL_STEP,
            grid_steps: None,
        }
    }
}

/// Impulse value for `u1 <= u2`.
pub fn impulse_v1_low(spec: &ImpulseSpec, params: &ModelParams, opts: &LowOptions) -> Result<ImpulseValuation> {
    if !(spec.u1 <= spec.u2) {
        return Err(Error::InvalidImpulse(format!(
            "low-case solver needs u1 <= u2, got ({}, {})",
            spec.u1, spec.u2
        )));
    }
    params.alpha()?;
    if !(opts.dq_rel_step > 0.0 && opts.dq_rel_step < 0.25) {
        return Err(Error::InvalidInput(format!(
            "relative q step must lie in (0, 0.25), got {}",
            opts.dq_rel_step
        )));
    }
    let r = spec.catch_up_time(params);
    if params.c1 * r <= 1e-6 * spec.u2.max(f64::MIN_POSITIVE) {
        // Company 1 catches up immediately: a plain exit problem at u2.
        let (p, tau) = exit_transform(spec.u1, params)?;
        return ImpulseValuation::assemble(
            spec,
            params,
            p,
            tau,
            ImpulseMethod::QuadratureLow,
            Some(opts.route),
        );
    }

    let transform = |q: f64| -> Result<f64> {
        let pq = params.with_discount(q)?;
        match opts.route {
            LowRoute::Characteristic => {
                let n = opts.grid_steps.unwrap_or_else(|| default_steps(spec, params));
                let n = n.max(8) & !1;
                let fine = first_passage_grid(spec.u1, spec.u2, &pq, n)?;
                let coarse = first_passage_grid(spec.u1, spec.u2, &pq, n / 2)?;
                Ok((4.0 * fine - coarse) / 3.0)
            }
            LowRoute::CrossingTransform => crossing_route_transform(spec, &pq),
        }
    };

    let q = params.q;
    let h = opts.dq_rel_step * q;
    let g0 = transform(q)?;
    let d1 = (transform(q + h)? - transform(q - h)?) / (2.0 * h);
    let d2 = (transform(q + 2.0 * h)? - transform(q - 2.0 * h)?) / (4.0 * h);
    let dg = (4.0 * d1 - d2) / 3.0;
    let p = params.lambda / (params.lambda + q) * g0;
    ImpulseValuation::assemble(spec, params, p, -dg, ImpulseMethod::QuadratureLow, Some(opts.route))
}

fn default_steps(spec: &ImpulseSpec, params: &ModelParams) -> usize {
    let alpha = params.alpha().unwrap_or(1.0);
    let dx = spec.u2.min(1.0 / alpha) / 400.0;
    let n = (params.c1 * spec.catch_up_time(params) / dx).ceil();
    (n as usize).clamp(200, 4000)
}

fn crossing_route_transform(spec: &ImpulseSpec, params: &ModelParams) -> Result<f64> {
    let alpha = params.alpha()?;
    let tilt = phi_inverse(params)?;
    let mut failure = None;
    let r = integrate(
        |x| match crossing_transform(x, spec, &tilt, params) {
            Ok(v) => v * alpha * (-alpha * x).exp(),
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        0.0,
        spec.u1,
        &[],
        QuadOptions::abs(1e-8),
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(r.value),
    }
}

/// `G(q) = E[e^{-q T}; T < ruin]` with the claim integrated out, from a
/// backward sweep on the grid `x_j = j c1 dt` of company 1's reserve over
/// the catch-up window `[0, r]`, `dt = r / n`.
///
/// At time `t` company 1 lives on `[0, u1 + (c1 - c2) t]`; the upper end is
/// company 2 back at `u2`. At `t = r` both reserves agree and the remaining
/// transform is the two-sided exit `W(x) / W(u2)` of company 2. The claim
/// integral `J(x) = int_0^x h(x - y) alpha e^{-alpha y} dy` is accumulated
/// by an exponentially weighted trapezoid rule and the time integral by the
/// trapezoid rule along each characteristic, so the scheme is second order
/// in `dt`.
pub fn first_passage_grid(u1: f64, u2: f64, params: &ModelParams, n: usize) -> Result<f64> {
    let alpha = params.alpha()?;
    let (c1, c2, lambda, q) = (params.c1, params.c2, params.lambda, params.q);
    let r = (u2 - u1) / (c1 - c2);
    if !(r > 0.0) || n < 2 {
        return Err(Error::InvalidInput(format!(
            "characteristic grid needs u1 < u2 and at least 2 steps (r={r}, n={n})"
        )));
    }
    let sp = scale_params(params, c2)?;
    let w_top = sp.w(u2)?;
    let dt = r / n as f64;
    let dx = c1 * dt;
    // Upper end of each level in grid units; the last node is its floor.
    let top_index = |step: usize| u1 / dx + step as f64 * (c1 - c2) / c1;
    let last_node = |idx: f64| (idx + 1e-9).floor() as usize;
    let m_len = last_node(top_index(n)) + 3;

    let m_end = last_node(top_index(n));
    let mut h: Vec<f64> = (0..m_len)
        .map(|j| if j <= m_end { sp.w_unchecked(j as f64 * dx) / w_top } else { 0.0 })
        .collect();
    let ea = (-alpha * dx).exp();
    let half = alpha * dx / 2.0;
    let mut jv = vec![0.0; m_len];
    for k in 1..m_len {
        jv[k] = ea * jv[k - 1] + half * (h[k] + ea * h[k - 1]);
    }

    let decay = (-(lambda + q) * dt).exp();
    let implicit = 1.0 - dt * lambda * alpha * dx / 4.0;
    let mut hn = vec![0.0; m_len];
    let mut jn = vec![0.0; m_len];
    for step in (0..n).rev() {
        let top = top_index(step) * dx;
        let next_idx = top_index(step + 1);
        let j_top_next = partial_cell(&jv, &h, next_idx, dx, alpha);
        let m = last_node(top_index(step));
        let m_next = last_node(next_idx);
        hn.iter_mut().for_each(|v| *v = 0.0);
        jn.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..=m {
            let x = j as f64 * dx;
            let carry = if j == 0 { 0.0 } else { ea * jn[j - 1] + half * ea * hn[j - 1] };
            let value = if j < m_next {
                let b = decay * h[j + 1] + dt * lambda / 2.0 * decay * jv[j + 1];
                (b + dt * lambda / 2.0 * carry) / implicit
            } else {
                // Company 2 reaches u2 within this step.
                let s = ((top - x) / c2).max(0.0);
                let e = (-(lambda + q) * s).exp();
                let b = e + s * lambda / 2.0 * e * j_top_next;
                (b + s * lambda / 2.0 * carry) / (1.0 - s * lambda * alpha * dx / 4.0)
            };
            hn[j] = value;
            jn[j] = if j == 0 { 0.0 } else { carry + half * value };
        }
        std::mem::swap(&mut h, &mut hn);
        std::mem::swap(&mut jv, &mut jn);
    }
    Ok(partial_cell(&jv, &h, top_index(0), dx, alpha))
}

/// `J` at the upper end of a level (grid units `idx`), where the transform
/// equals one, from the last grid node below it.
fn partial_cell(jv: &[f64], h: &[f64], idx: f64, dx: f64, alpha: f64) -> f64 {
    let m = ((idx + 1e-9).floor() as usize).min(jv.len() - 1);
    let frac = (idx - m as f64).max(0.0) * dx;
    let e = (-alpha * frac).exp();
    e * jv[m] + alpha * frac / 2.0 * (1.0 + e * h[m])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::exponential(4.0, 3.0, 1.0, 2.0, 0.1).unwrap()
    }

    #[test]
    fn grid_is_second_order() {
        let p = params();
        let g: Vec<f64> = [200, 400, 800]
            .iter()
            .map(|&n| first_passage_grid(1.0, 2.0, &p, n).unwrap())
            .collect();
        let ratio = (g[0] - g[1]) / (g[1] - g[2]);
        assert!((ratio - 4.0).abs() < 0.6, "{ratio}");
    }

    #[test]
    fn default_low_value_is_stable() {
        let p = params();
        let spec = ImpulseSpec::new(1.0, 2.0, 0.5).unwrap();
        let a = impulse_v1_low(&spec, &p, &LowOptions::default()).unwrap();
        let b = impulse_v1_low(&spec, &p, &LowOptions { grid_steps: Some(6400), ..Default::default() }).unwrap();
        assert!(a.p > 0.0 && a.p < 1.0);
        assert!((a.value - b.value).abs() < 1e-4, "{} {}", a.value, b.value);
        assert_eq!(a.claim_upper_limit, 1.0);
    }

    #[test]
    fn seam_matches_exit_problem() {
        let p = params();
        let at = impulse_v1_low(&ImpulseSpec::new(2.0, 2.0, 0.5).unwrap(), &p, &LowOptions::default()).unwrap();
        let near = impulse_v1_low(&ImpulseSpec::new(1.999, 2.0, 0.5).unwrap(), &p, &LowOptions::default()).unwrap();
        assert!((at.value - near.value).abs() < 0.01, "{} {}", at.value, near.value);
        assert!(near.value < at.value);
    }

    #[test]
    fn cost_is_linear() {
        let p = params();
        let o = LowOptions::default();
        let a = impulse_v1_low(&ImpulseSpec::new(1.0, 2.0, 0.5).unwrap(), &p, &o).unwrap();
        let b = impulse_v1_low(&ImpulseSpec::new(1.0, 2.0, 1e-9).unwrap(), &p, &o).unwrap();
        assert_eq!(a.p, b.p);
        assert!(b.value > a.value);
    }

    #[test]
    fn rejects_high_case() {
        let p = params();
        assert!(impulse_v1_low(&ImpulseSpec::new(3.0, 2.0, 0.5).unwrap(), &p, &LowOptions::default()).is_err());
    }
}
