//! Expected discounted dividends under reflection at a linear barrier, and
//! residual checks of the integro-differential equation it solves.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gamma::{cached_sequences, GammaSequences, GammaStep, DEFAULT_MAX_TERMS};
use crate::model::{classify_point, BarrierSpec, ModelParams, Region, Reserves};
use crate::numeric::{integrate, QuadOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierValuation {
    pub value: f64,
    pub terms_used: usize,
    /// Largest relative size of the last retained term of either series.
    pub tail_estimate: f64,
    /// Identifies the exponent sequences used, e.g. `a=0.1;b=14;terms=12`.
    pub sequences_ref: String,
}

/// Default truncation tolerance for [`v1_barrier`].
pub const DEFAULT_TOL: f64 = 1e-12;

/// Series value at `u`.
///
/// Valid below the barrier and on it, with `u1 < u2 < b`; the corner
/// `(0, b)` is also accepted and evaluates to zero.
pub fn v1_barrier(
    u: Reserves,
    barrier: &BarrierSpec,
    params: &ModelParams,
    tol: f64,
) -> Result<BarrierValuation> {
    params.alpha()?;
    if !barrier.is_reflection(params) {
        return Err(Error::InvalidBarrier(
            "the series solution covers reflection only; use the simulator for general refraction"
                .into(),
        ));
    }
    check_domain(u, barrier)?;
    let seq = cached_sequences(barrier, params, DEFAULT_MAX_TERMS, tol.min(DEFAULT_TOL))?;
    Ok(evaluate(&seq, u, tol))
}

pub(crate) fn check_domain(u: Reserves, barrier: &BarrierSpec) -> Result<()> {
    let outside = |reason: &str| Error::OutsideDomain {
        u1: u.u1,
        u2: u.u2,
        reason: reason.to_string(),
    };
    match classify_point(u, barrier) {
        Region::OutsideQuadrant => return Err(outside("negative reserve")),
        Region::Interior => {
            return Err(outside(
                "point lies above the barrier; value it with the simulator",
            ))
        }
        Region::OnLine | Region::Complement => {}
    }
    let corner = u.u1 == 0.0 && (u.u2 - barrier.b).abs() <= crate::model::ON_LINE_TOL;
    if corner {
        return Ok(());
    }
    if !(u.u1 < u.u2) {
        return Err(outside(
            "the series covers u1 < u2 only; value it with the simulator",
        ));
    }
    if !(u.u2 < barrier.b) {
        return Err(outside("requires u2 < b"));
    }
    Ok(())
}

/// Series value from prebuilt sequences, without domain checks.
pub fn evaluate(seq: &GammaSequences, u: Reserves, tol: f64) -> BarrierValuation {
    let (main, tail_m, used_m) = partial_series(&seq.steps, seq, u, tol);
    let (primed, tail_p, used_p) = partial_series(&seq.primed_steps, seq, u, tol);
    BarrierValuation {
        value: main + seq.primed_weight() * primed,
        terms_used: used_m.max(used_p),
        tail_estimate: tail_m.max(tail_p),
        sequences_ref: format!("a={};b={};terms={}", seq.a, seq.b, seq.terms()),
    }
}

fn partial_series(steps: &[GammaStep], seq: &GammaSequences, u: Reserves, tol: f64) -> (f64, f64, usize) {
    let mut sum = 0.0;
    let mut last = f64::INFINITY;
    let mut small_run = 0;
    for (k, s) in steps.iter().enumerate() {
        let t = term(s, seq, u);
        sum += t;
        last = if sum != 0.0 { t.abs() / sum.abs() } else { t.abs() };
        if last <= tol {
            small_run += 1;
            if small_run == 2 {
                return (sum, last, k + 1);
            }
        } else {
            small_run = 0;
        }
    }
    (sum, last, steps.len())
}

fn term(s: &GammaStep, seq: &GammaSequences, u: Reserves) -> f64 {
    let height = s.g2 * (u.u2 - seq.b);
    let shape = (s.g1 * u.u1).exp() - s.rho(seq.alpha) * (s.g3 * u.u1).exp();
    if s.d_scaled == 0.0 || shape == 0.0 {
        return 0.0;
    }
    s.d_scaled * shape * height.exp()
}

/// Evaluator bound to one barrier; convenient for stencils and sweeps.
#[derive(Debug, Clone)]
pub struct SeriesEvaluator {
    seq: Arc<GammaSequences>,
    barrier: BarrierSpec,
    tol: f64,
}

impl SeriesEvaluator {
    pub fn new(barrier: &BarrierSpec, params: &ModelParams, tol: f64) -> Result<Self> {
        params.alpha()?;
        if !barrier.is_reflection(params) {
            return Err(Error::InvalidBarrier(
                "the series solution covers reflection only".into(),
            ));
        }
        let seq = cached_sequences(barrier, params, DEFAULT_MAX_TERMS, tol.min(DEFAULT_TOL))?;
        Ok(Self {
            seq,
            barrier: *barrier,
            tol,
        })
    }

    pub fn sequences(&self) -> &GammaSequences {
        &self.seq
    }

    pub fn value(&self, u: Reserves) -> Result<BarrierValuation> {
        check_domain(u, &self.barrier)?;
        Ok(evaluate(&self.seq, u, self.tol))
    }

    /// Series at any point, including outside its domain of validity.
    pub fn raw(&self, u1: f64, u2: f64) -> f64 {
        evaluate(&self.seq, Reserves::at(u1, u2), self.tol).value
    }
}

/// Left side of the generator equation for a candidate value function `v`:
/// `c1 dV/du1 + c2 dV/du2 - (lambda + q) V + lambda * E[V(u - U(1, 1))]`,
/// with central differences of step `h` and ruin (`U > min(u1, u2)`)
/// contributing zero.
pub fn pide_residual_with<F>(v: F, u: Reserves, params: &ModelParams, h: f64) -> Result<f64>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    let alpha = params.alpha()?;
    if !(h > 0.0) || u.u1 - h < 0.0 || u.u2 - h < 0.0 {
        return Err(Error::OutsideDomain {
            u1: u.u1,
            u2: u.u2,
            reason: format!("stencil of step {h} leaves the quadrant"),
        });
    }
    let centre = v(u.u1, u.u2)?;
    let d1 = (v(u.u1 + h, u.u2)? - v(u.u1 - h, u.u2)?) / (2.0 * h);
    let d2 = (v(u.u1, u.u2 + h)? - v(u.u1, u.u2 - h)?) / (2.0 * h);

    let upper = u.u1.min(u.u2);
    let mut failure = None;
    // Shifting along (1, 1) keeps u2 - u1 fixed, so the only kinks are at
    // the ends; the diagonal breakpoint is kept for inputs on it.
    let diag = if u.u1 == u.u2 { vec![0.0] } else { vec![] };
    let integral = integrate(
        |s| match v(u.u1 - s, u.u2 - s) {
            Ok(x) => x * alpha * (-alpha * s).exp(),
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        0.0,
        upper,
        &diag,
        QuadOptions::abs(1e-10),
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(params.c1 * d1 + params.c2 * d2 - (params.lambda + params.q) * centre
        + params.lambda * integral.value)
}

/// [`pide_residual_with`] applied to the series solution.
///
/// `u` must be below the barrier with every stencil and quadrature point
/// at least `2h` away from the region boundaries.
pub fn pide_residual(u: Reserves, barrier: &BarrierSpec, params: &ModelParams, h: f64) -> Result<f64> {
    let margin = 2.0 * h;
    let gap = barrier.line(u.u1) - u.u2;
    if classify_point(u, barrier) != Region::Complement
        || gap <= margin * (1.0 + barrier.a)
        || u.u1 <= margin
        || u.u2 - u.u1 <= margin
    {
        return Err(Error::OutsideDomain {
            u1: u.u1,
            u2: u.u2,
            reason: format!("needs a margin of {margin} inside the region below the barrier"),
        });
    }
    let ev = SeriesEvaluator::new(barrier, params, DEFAULT_TOL)?;
    pide_residual_with(|x, y| Ok(ev.raw(x, y)), u, params, h)
}

/// Defect of the barrier condition
/// `delta1 dV/du1 + delta2 dV/du2 = delta1 + delta2` at a point on the line,
/// with second-order one-sided differences from below the line.
pub fn boundary_residual(
    u_on_line: Reserves,
    barrier: &BarrierSpec,
    params: &ModelParams,
    h: f64,
) -> Result<f64> {
    let u = u_on_line;
    if classify_point(u, barrier) != Region::OnLine {
        return Err(Error::OutsideDomain {
            u1: u.u1,
            u2: u.u2,
            reason: "point is not on the barrier line".into(),
        });
    }
    if !(u.u1 > 2.0 * h) {
        return Err(Error::OutsideDomain {
            u1: u.u1,
            u2: u.u2,
            reason: format!("one-sided stencil of step {h} needs u1 > {}", 2.0 * h),
        });
    }
    let ev = SeriesEvaluator::new(barrier, params, DEFAULT_TOL)?;
    let f = |x: f64, y: f64| -> Result<f64> { Ok(ev.value(Reserves::at(x, y))?.value) };
    let centre = f(u.u1, u.u2)?;
    let d1 = (3.0 * centre - 4.0 * f(u.u1 - h, u.u2)? + f(u.u1 - 2.0 * h, u.u2)?) / (2.0 * h);
    let d2 = (3.0 * centre - 4.0 * f(u.u1, u.u2 - h)? + f(u.u1, u.u2 - 2.0 * h)?) / (2.0 * h);
    Ok(barrier.delta1 * d1 + barrier.delta2 * d2 - barrier.delta0())
}
