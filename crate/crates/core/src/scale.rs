//! q-scale function of a one-dimensional reserve process with drift `c`
//! and exponential claims, together with its Laplace exponent and the
//! exponentially tilted model at `Phi(q)`.

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Exponents and coefficients of
/// `W(x) = (A+ e^{q+ x} - A- e^{q- x}) / c`, with their `q`-derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleParams {
    pub drift: f64,
    pub q: f64,
    pub q_plus: f64,
    pub q_minus: f64,
    pub a_plus: f64,
    pub a_minus: f64,
    pub dq_plus: f64,
    pub dq_minus: f64,
    pub da_plus: f64,
    pub da_minus: f64,
}

/// Stable roots of `c theta^2 - B theta - q alpha = 0`, `B = q + lambda - alpha c`.
fn roots(drift: f64, lambda: f64, alpha: f64, q: f64) -> (f64, f64, f64) {
    let b = q + lambda - alpha * drift;
    let s = (b * b + 4.0 * drift * q * alpha).sqrt();
    let (plus, minus) = if b >= 0.0 {
        let p = (b + s) / (2.0 * drift);
        (p, -q * alpha / (drift * p))
    } else {
        let m = (b - s) / (2.0 * drift);
        (-q * alpha / (drift * m), m)
    };
    (plus, minus, s)
}

/// Scale-function parameters for drift `drift` (normally `c2`).
pub fn scale_params(params: &ModelParams, drift: f64) -> Result<ScaleParams> {
    let alpha = params.alpha()?;
    let (lambda, q) = (params.lambda, params.q);
    if !(drift > 0.0) {
        return Err(Error::InvalidInput(format!("drift must be positive, got {drift}")));
    }
    let (qp, qm, s) = roots(drift, lambda, alpha, q);
    let gap = qp - qm;
    let a_plus = (alpha + qp) / gap;
    let a_minus = (alpha + qm) / gap;
    let k = (q + lambda + alpha * drift) / s;
    let dqp = (1.0 + k) / (2.0 * drift);
    let dqm = (1.0 - k) / (2.0 * drift);
    let dgap = dqp - dqm;
    let da_plus = (dqp * gap - (alpha + qp) * dgap) / (gap * gap);
    let da_minus = (dqm * gap - (alpha + qm) * dgap) / (gap * gap);
    Ok(ScaleParams {
        drift,
        q,
        q_plus: qp,
        q_minus: qm,
        a_plus,
        a_minus,
        dq_plus: dqp,
        dq_minus: dqm,
        da_plus,
        da_minus,
    })
}

impl ScaleParams {
    fn check(x: f64) -> Result<()> {
        if x < 0.0 || x.is_nan() {
            return Err(Error::InvalidInput(format!(
                "scale function argument must be nonnegative, got {x}"
            )));
        }
        Ok(())
    }

    /// `W(x)` for `x >= 0`.
    pub fn w(&self, x: f64) -> Result<f64> {
        Self::check(x)?;
        Ok(self.w_unchecked(x))
    }

    pub(crate) fn w_unchecked(&self, x: f64) -> f64 {
        (self.a_plus * (self.q_plus * x).exp() - self.a_minus * (self.q_minus * x).exp())
            / self.drift
    }

    /// Derivative of `W(x)` in `x`.
    pub fn w_prime(&self, x: f64) -> Result<f64> {
        Self::check(x)?;
        Ok((self.a_plus * self.q_plus * (self.q_plus * x).exp()
            - self.a_minus * self.q_minus * (self.q_minus * x).exp())
            / self.drift)
    }

    /// Derivative of `W(x)` in the discount rate `q`.
    pub fn dw_dq(&self, x: f64) -> Result<f64> {
        Self::check(x)?;
        Ok(self.dw_dq_unchecked(x))
    }

    pub(crate) fn dw_dq_unchecked(&self, x: f64) -> f64 {
        ((self.da_plus + self.a_plus * self.dq_plus * x) * (self.q_plus * x).exp()
            - (self.da_minus + self.a_minus * self.dq_minus * x) * (self.q_minus * x).exp())
            / self.drift
    }
}

/// Laplace exponent `c theta - lambda theta / (alpha + theta)` for
/// exponential claims.
pub fn psi(theta: f64, params: &ModelParams, drift: f64) -> Result<f64> {
    let alpha = params.alpha()?;
    Ok(drift * theta - params.lambda * theta / (alpha + theta))
}

/// Intensity and claim rate after tilting by `e^{Phi(q) x}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltedModel {
    pub phi: f64,
    pub lambda_q: f64,
    pub alpha_q: f64,
}

impl TiltedModel {
    /// Mean claim size under the tilted measure.
    pub fn claim_mean(&self) -> f64 {
        1.0 / self.alpha_q
    }
}

/// Right inverse of the Laplace exponent of the drift-`c2` process at `q`,
/// and the tilted model it induces.
pub fn phi_inverse(params: &ModelParams) -> Result<TiltedModel> {
    let alpha = params.alpha()?;
    let (phi, _, _) = roots(params.c2, params.lambda, alpha, params.q);
    Ok(TiltedModel {
        phi,
        lambda_q: params.lambda * alpha / (alpha + phi),
        alpha_q: alpha + phi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{bisect, integrate, QuadOptions};

    fn params() -> ModelParams {
        ModelParams::exponential(4.0, 3.0, 1.0, 2.0, 0.1).unwrap()
    }

    fn at_q(q: f64) -> ScaleParams {
        let p = params().with_discount(q).unwrap();
        scale_params(&p, 3.0).unwrap()
    }

    #[test]
    fn roots_match_bisection() {
        let p = params();
        let s = scale_params(&p, 3.0).unwrap();
        let f = |t: f64| psi(t, &p, 3.0).unwrap() - 0.1;
        let plus = bisect(f, 1e-12, 10.0, 1e-15).unwrap();
        let minus = bisect(f, -2.0 + 1e-9, -1e-12, 1e-15).unwrap();
        assert!(s.q_plus > 0.0 && s.q_minus < 0.0);
        assert!((s.q_plus - plus).abs() <= 1e-12 * plus.abs());
        assert!((s.q_minus - minus).abs() <= 1e-12 * minus.abs());
        for r in [s.q_plus, s.q_minus] {
            assert!((psi(r, &p, 3.0).unwrap() - 0.1).abs() <= 1e-12 * 0.1);
        }
    }

    #[test]
    fn coefficients_differ_by_one() {
        let s = scale_params(&params(), 3.0).unwrap();
        assert!((s.a_plus - s.a_minus - 1.0).abs() < 1e-12);
        assert!((s.w(0.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn derivative_fields_match_finite_differences() {
        let h = 1e-6;
        let (lo, mid, hi) = (at_q(0.1 - h), at_q(0.1), at_q(0.1 + h));
        let fd = |f: fn(&ScaleParams) -> f64| (f(&hi) - f(&lo)) / (2.0 * h);
        type Pick = fn(&ScaleParams) -> f64;
        let pairs: [(f64, Pick); 4] = [
            (mid.dq_plus, |s| s.q_plus),
            (mid.dq_minus, |s| s.q_minus),
            (mid.da_plus, |s| s.a_plus),
            (mid.da_minus, |s| s.a_minus),
        ];
        for (exact, f) in pairs {
            let approx = fd(f);
            assert!((exact - approx).abs() <= 1e-6 * exact.abs(), "{exact} vs {approx}");
        }
    }

    #[test]
    fn dw_dq_matches_finite_differences() {
        let h = 1e-6;
        let (lo, mid, hi) = (at_q(0.1 - h), at_q(0.1), at_q(0.1 + h));
        for x in [0.5, 2.0, 10.0] {
            let fd = (hi.w(x).unwrap() - lo.w(x).unwrap()) / (2.0 * h);
            let exact = mid.dw_dq(x).unwrap();
            assert!((exact - fd).abs() <= 1e-5 * fd.abs(), "x={x}: {exact} vs {fd}");
        }
        assert!(mid.dw_dq(0.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn dw_dq_positive_on_scan() {
        let s = at_q(0.1);
        for i in 1..=100 {
            assert!(s.dw_dq(i as f64 * 0.3).unwrap() > 0.0);
        }
    }

    #[test]
    fn laplace_transform_identity() {
        let p = params();
        let s = scale_params(&p, 3.0).unwrap();
        let tilt = phi_inverse(&p).unwrap();
        let theta = tilt.phi + 1.0;
        let r = integrate(
            |x| (-theta * x).exp() * s.w(x).unwrap(),
            0.0,
            200.0,
            &[1.0, 5.0, 20.0],
            QuadOptions::abs(1e-13),
        )
        .unwrap();
        let exact = 1.0 / (psi(theta, &p, 3.0).unwrap() - 0.1);
        assert!((r.value - exact).abs() <= 1e-6 * exact);
    }

    #[test]
    fn w_is_increasing() {
        let s = scale_params(&params(), 3.0).unwrap();
        let vals: Vec<f64> = (0..100).map(|i| s.w(i as f64 * 0.5).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
        assert!(s.w(-0.1).is_err());
        assert!(s.dw_dq(-0.1).is_err());
    }

    #[test]
    fn tilt_agrees_with_scale_root() {
        let p = params();
        let s = scale_params(&p, 3.0).unwrap();
        let t = phi_inverse(&p).unwrap();
        assert!((t.phi - s.q_plus).abs() <= 1e-12 * s.q_plus);
        assert!((psi(t.phi, &p, 3.0).unwrap() - 0.1).abs() <= 1e-12 * 0.1);
        assert!(t.lambda_q < p.lambda);
        assert_eq!(t.alpha_q, 2.0 + t.phi);
    }

    #[test]
    fn negative_b_branch_is_stable() {
        // alpha c2 well above q + lambda; B < 0 in the root formula.
        let p = ModelParams::exponential(40.0, 30.0, 1.0, 2.0, 1e-6).unwrap();
        let s = scale_params(&p, 30.0).unwrap();
        assert!(s.q_plus > 0.0);
        assert!((psi(s.q_plus, &p, 30.0).unwrap() - 1e-6).abs() <= 1e-12 * 1e-6 + 1e-18);
    }
}
