//! Survival quantities under the measure tilted by `e^{Phi(q) x}`, where
//! claims arrive at rate `lambda_q` and are exponential with rate `alpha_q`.
//!
//! Aggregate claims are measured in time units of company `j`: `S(t) / c_j`
//! is compound Poisson with `Exp(alpha_q c_j)` jumps, so its law on
//! `(0, inf)` is a Poisson mixture of Erlang densities. The atom at zero
//! (no claims, mass `e^{-lambda_q t}`) is kept separate throughout.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numeric::{integrate, QuadOptions};
use crate::scale::TiltedModel;

use super::ImpulseSpec;

pub const DEFAULT_TRUNC_TOL: f64 = 1e-14;

fn premium(j: usize, params: &ModelParams) -> Result<f64> {
    match j {
        1 => Ok(params.c1),
        2 => Ok(params.c2),
        _ => Err(Error::InvalidInput(format!("company index must be 1 or 2, got {j}"))),
    }
}

/// Absolutely continuous part of the law of `S(t) / c_j` at `x > 0` under
/// the tilted measure.
pub fn erlang_mixture_density(
    j: usize,
    t: f64,
    x: f64,
    tilt: &TiltedModel,
    params: &ModelParams,
    trunc_tol: f64,
) -> Result<f64> {
    let c = premium(j, params)?;
    if !(t > 0.0) || !(x > 0.0) {
        return Ok(0.0);
    }
    Ok(mixture(tilt.lambda_q * t, tilt.alpha_q * c, x, trunc_tol))
}

/// `e^{-mu} sum_{i>=1} mu^i / i! * Erlang(i, beta)(x)`.
///
/// Terms are built in log space from the ratio
/// `mu beta x / (i (i + 1))` between neighbours, and summation stops once
/// `beta` times the remaining Poisson tail is below `tol`.
pub(crate) fn mixture(mu: f64, beta: f64, x: f64, tol: f64) -> f64 {
    if !(mu > 0.0) || !(x > 0.0) {
        return 0.0;
    }
    let log_ratio_base = (mu * beta * x).ln();
    let log_mu = mu.ln();
    let mut log_term = -mu - beta * x + log_mu + beta.ln();
    let mut log_pois = -mu + log_mu;
    let mut sum = 0.0;
    let mut i = 1.0f64;
    loop {
        sum += log_term.exp();
        // Poisson tail beyond i, bounded geometrically once i + 2 > mu.
        let log_next = log_pois + log_mu - (i + 1.0).ln();
        if i + 2.0 > mu {
            let tail = log_next.exp() / (1.0 - mu / (i + 2.0));
            if beta * tail < tol || i > 1e6 {
                break;
            }
        }
        log_term += log_ratio_base - (i * (i + 1.0)).ln();
        log_pois = log_next;
        i += 1.0;
    }
    sum
}

/// Probability that the drift-`c2` process started at `z` is ever ruined,
/// under the tilted measure.
pub fn tilted_ruin_probability(z: f64, tilt: &TiltedModel, params: &ModelParams) -> Result<f64> {
    if z < 0.0 || z.is_nan() {
        return Err(Error::InvalidInput(format!("reserve must be nonnegative, got {z}")));
    }
    let ratio = tilt.lambda_q / (params.c2 * tilt.alpha_q);
    Ok(ratio * (-(tilt.alpha_q - tilt.lambda_q / params.c2) * z).exp())
}

/// Density at `z` of company 1's reserve after time `r`, restricted to
/// paths that stay nonnegative, started from `c1 v`; tilted measure.
///
/// The no-claim atom at `z = c1 (v + r)` is not included.
pub fn ballot_crossing_density(
    z: f64,
    r: f64,
    v: f64,
    tilt: &TiltedModel,
    params: &ModelParams,
) -> Result<f64> {
    ballot_with_tol(z, r, v, tilt, params, 1e-9)
}

pub(crate) fn ballot_with_tol(
    z: f64,
    r: f64,
    v: f64,
    tilt: &TiltedModel,
    params: &ModelParams,
    quad_tol: f64,
) -> Result<f64> {
    let c1 = params.c1;
    if !(r > 0.0) || !(v >= 0.0) || !(z >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "ballot density needs r > 0, v >= 0, z >= 0 (got r={r}, v={v}, z={z})"
        )));
    }
    // Aggregate claims by time r, in company-1 time units.
    let phi = v - z / c1 + r;
    if phi < 0.0 {
        return Err(Error::OutsideDomain {
            u1: z,
            u2: v,
            reason: format!("reserve {z} is above the no-claim level {}", c1 * (v + r)),
        });
    }
    if phi == 0.0 {
        return Ok(0.0);
    }
    let mu_rate = tilt.lambda_q;
    let beta = tilt.alpha_q * c1;
    let f = |t: f64, x: f64| if t > 0.0 { mixture(mu_rate * t, beta, x, DEFAULT_TRUNC_TOL) } else { 0.0 };
    let slack = z / c1;

    let mut dens = f(r, phi);
    if slack < r {
        // Last touch of the ruin line followed by no claims until r.
        dens -= (-mu_rate * slack).exp() * f(r - slack, phi);
    }
    if phi > v {
        // Last touch at level w (time w - v), ballot survival afterwards.
        let conv = integrate(
            |w| {
                let rest = r + v - w;
                if rest <= 0.0 {
                    return 0.0;
                }
                slack / rest * f(rest, phi - w) * f(w - v, w)
            },
            v,
            phi,
            &[],
            QuadOptions::abs(quad_tol),
        )?;
        dens -= conv.value;
    }
    Ok((dens / c1).max(0.0))
}

/// Probability under the tilted measure that company 2, started at `y`
/// with company 1 at `y - (u2 - u1)`, is never ruined while company 1 must
/// also stay solvent until it catches up at time `r`.
pub fn v_q(y: f64, spec: &ImpulseSpec, tilt: &TiltedModel, params: &ModelParams) -> Result<f64> {
    v_q_with_tol(y, spec, tilt, params, 1e-8, 1e-6)
}

pub(crate) fn v_q_with_tol(
    y: f64,
    spec: &ImpulseSpec,
    tilt: &TiltedModel,
    params: &ModelParams,
    outer_tol: f64,
    inner_tol: f64,
) -> Result<f64> {
    if !(spec.u1 <= spec.u2) {
        return Err(Error::InvalidImpulse("survival functional needs u1 <= u2".into()));
    }
    let gap = spec.u2 - spec.u1;
    if !(y >= gap) {
        return Err(Error::InvalidInput(format!(
            "company 2 reserve {y} below the initial gap {gap}"
        )));
    }
    let r = spec.catch_up_time(params);
    if r == 0.0 {
        return Ok(1.0 - tilted_ruin_probability(y, tilt, params)?);
    }
    let c1 = params.c1;
    let v = (y - gap) / c1;
    let top = c1 * (v + r);
    let mut failure = None;
    let body = integrate(
        |z| {
            let dens = match ballot_with_tol(z, r, v, tilt, params, inner_tol) {
                Ok(d) => d,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            };
            dens * (1.0 - tilted_ruin_probability(z, tilt, params).unwrap_or(1.0))
        },
        0.0,
        top,
        &[c1 * r],
        QuadOptions::abs(outer_tol),
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let atom = (-tilt.lambda_q * r).exp() * (1.0 - tilted_ruin_probability(top, tilt, params)?);
    Ok(body.value + atom)
}

/// `E[e^{-q T}; T < ruin]` for company 2 started at `u2 - x` to climb back
/// to `u2`, through the tilted survival functional.
///
/// This treats the moving solvency line of company 1 as if the catch-up
/// clock restarted at every level, which the impulse dynamics do not do;
/// see [`super::LowRoute`].
pub fn crossing_transform(x: f64, spec: &ImpulseSpec, tilt: &TiltedModel, params: &ModelParams) -> Result<f64> {
    let base = v_q(spec.u2, spec, tilt, params)?;
    if !(base > 0.0) {
        return Err(Error::Numerical("survival functional vanishes at u2".into()));
    }
    Ok((-tilt.phi * x).exp() * v_q(spec.u2 - x, spec, tilt, params)? / base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scale::phi_inverse;

    fn params() -> ModelParams {
        ModelParams::exponential(4.0, 3.0, 1.0, 2.0, 0.1).unwrap()
    }

    #[test]
    fn mixture_mass_excludes_atom() {
        let p = params();
        let tilt = phi_inverse(&p).unwrap();
        for t in [0.1, 1.0, 5.0] {
            for j in [1, 2] {
                let mass = crate::numeric::integrate_to_infinity(
                    |x| erlang_mixture_density(j, t, x, &tilt, &p, 1e-15).unwrap(),
                    0.0,
                    QuadOptions::abs(1e-12),
                )
                .unwrap()
                .value;
                let expected = 1.0 - (-tilt.lambda_q * t).exp();
                assert!((mass - expected).abs() < 1e-8, "t={t} j={j}: {mass} vs {expected}");
            }
        }
    }

    #[test]
    fn mixture_matches_bessel_form() {
        // e^{-mu - beta x} sqrt(mu beta / x) I1(2 sqrt(mu beta x)), I1 by its series.
        let (mu, beta, x) = (1.3f64, 8.0f64, 0.7f64);
        let s = 2.0 * (mu * beta * x).sqrt();
        let mut i1 = 0.0;
        let mut term = s / 2.0;
        for k in 0..60 {
            i1 += term;
            let k = k as f64;
            term *= (s / 2.0).powi(2) / ((k + 1.0) * (k + 2.0));
        }
        let exact = (-mu - beta * x).exp() * (mu * beta / x).sqrt() * i1;
        assert!((mixture(mu, beta, x, 1e-16) - exact).abs() < 1e-13 * exact);
    }

    #[test]
    fn mixture_vanishes_for_short_horizons() {
        let p = params();
        let tilt = phi_inverse(&p).unwrap();
        let m = |t: f64| {
            integrate(
                |x| erlang_mixture_density(1, t, x, &tilt, &p, 1e-15).unwrap(),
                0.0,
                50.0,
                &[],
                QuadOptions::abs(1e-13),
            )
            .unwrap()
            .value
        };
        assert!(m(1e-4) < 1e-3 && m(1e-6) < m(1e-4));
    }

    #[test]
    fn ruin_probability_at_zero() {
        let p = params();
        let tilt = phi_inverse(&p).unwrap();
        let r0 = tilted_ruin_probability(0.0, &tilt, &p).unwrap();
        assert_eq!(r0, tilt.lambda_q / (3.0 * tilt.alpha_q));
        assert!(tilted_ruin_probability(1.0, &tilt, &p).unwrap() < r0);
        assert!(tilted_ruin_probability(-1.0, &tilt, &p).is_err());
    }

    #[test]
    fn ballot_mass_plus_atom_below_one() {
        let p = params();
        let tilt = phi_inverse(&p).unwrap();
        let (r, v) = (1.0, 0.25);
        let top = 4.0 * (v + r);
        let mass = integrate(
            |z| ballot_crossing_density(z, r, v, &tilt, &p).unwrap(),
            0.0,
            top,
            &[4.0 * r],
            QuadOptions::abs(1e-9),
        )
        .unwrap()
        .value;
        let total = mass + (-tilt.lambda_q * r).exp();
        assert!(total < 1.0 && total > 0.9, "{total}");
    }

    #[test]
    fn ballot_rejects_overshoot() {
        let p = params();
        let tilt = phi_inverse(&p).unwrap();
        assert!(ballot_crossing_density(100.0, 1.0, 0.0, &tilt, &p).is_err());
    }

    #[test]
    fn survival_collapses_without_catch_up() {
        let p = params();
        let tilt = phi_inverse(&p).unwrap();
        let spec = ImpulseSpec::new(2.0, 2.0, 0.5).unwrap();
        let v = v_q(1.5, &spec, &tilt, &p).unwrap();
        let expected = 1.0 - tilted_ruin_probability(1.5, &tilt, &p).unwrap();
        assert!((v - expected).abs() < 1e-15);
    }

    #[test]
    fn survival_is_monotone() {
        let p = params();
        let tilt = phi_inverse(&p).unwrap();
        let spec = ImpulseSpec::new(1.0, 2.0, 0.5).unwrap();
        let vals: Vec<f64> = [1.0, 1.3, 1.7, 2.0, 3.0]
            .iter()
            .map(|&y| v_q(y, &spec, &tilt, &p).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] >= w[0]), "{vals:?}");
        assert!(vals.iter().all(|v| *v > 0.0 && *v < 1.0));
    }
}
