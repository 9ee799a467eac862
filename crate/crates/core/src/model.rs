//! Model parameters, controls and the barrier-region geometry.

use std::fmt;
use std::sync::Arc;

use rand::RngCore;

use crate::error::{Error, Result};

/// Absolute tolerance for deciding that a point lies on the barrier line.
pub const ON_LINE_TOL: f64 = 1e-12;

/// Sampler for claim sizes that have no closed-form treatment.
///
/// Only the simulator accepts these; analytic modules reject them.
pub trait ClaimSampler: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn mean(&self) -> f64;
    fn sample(&self, rng: &mut dyn RngCore) -> f64;
}

/// Inverse-CDF sampler: `quantile(U)` with `U` uniform on (0, 1).
pub struct InverseCdf {
    name: String,
    mean: f64,
    quantile: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl InverseCdf {
    pub fn new(
        name: impl Into<String>,
        mean: f64,
        quantile: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            mean,
            quantile: Box::new(quantile),
        }
    }
}

impl fmt::Debug for InverseCdf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InverseCdf")
            .field("name", &self.name)
            .field("mean", &self.mean)
            .finish()
    }
}

impl ClaimSampler for InverseCdf {
    fn name(&self) -> &str {
        &self.name
    }

    fn mean(&self) -> f64 {
        self.mean
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        // 53 random bits mapped into the open interval (0, 1)
        let u = ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
        (self.quantile)(u)
    }
}

#[derive(Debug, Clone)]
pub enum ClaimDistribution {
    /// Exponential claims with the given rate (mean `1 / rate`).
    Exponential { rate: f64 },
    Sampled(Arc<dyn ClaimSampler>),
}

impl ClaimDistribution {
    pub fn exponential(rate: f64) -> Self {
        ClaimDistribution::Exponential { rate }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ClaimDistribution::Exponential { rate } => 1.0 / rate,
            ClaimDistribution::Sampled(s) => s.mean(),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            ClaimDistribution::Exponential { .. } => "exponential",
            ClaimDistribution::Sampled(s) => s.name(),
        }
    }

    pub fn exponential_rate(&self) -> Option<f64> {
        match self {
            ClaimDistribution::Exponential { rate } => Some(*rate),
            ClaimDistribution::Sampled(_) => None,
        }
    }
}

impl PartialEq for ClaimDistribution {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Self::Exponential { rate: a }, Self::Exponential { rate: b }) => a == b,
            (Self::Sampled(a), Self::Sampled(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

/// A single failed validity condition.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    C1NotAboveC2 { c1: f64, c2: f64 },
    C2NotPositive { c2: f64 },
    DiscountNotPositive { q: f64 },
    IntensityNotPositive { lambda: f64 },
    ClaimRateNotPositive { rate: f64 },
    ClaimMeanInvalid { mean: f64 },
    NetProfit1 { c1: f64, loading: f64 },
    NetProfit2 { c2: f64, loading: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::C1NotAboveC2 { c1, c2 } => write!(f, "c1 > c2 violated ({c1} <= {c2})"),
            Violation::C2NotPositive { c2 } => write!(f, "c2 > 0 violated ({c2})"),
            Violation::DiscountNotPositive { q } => write!(f, "q > 0 violated ({q})"),
            Violation::IntensityNotPositive { lambda } => {
                write!(f, "lambda > 0 violated ({lambda})")
            }
            Violation::ClaimRateNotPositive { rate } => {
                write!(f, "exponential claim rate > 0 violated ({rate})")
            }
            Violation::ClaimMeanInvalid { mean } => {
                write!(f, "claim mean must be finite and positive ({mean})")
            }
            Violation::NetProfit1 { c1, loading } => write!(
                f,
                "net profit for company 1 violated (c1 = {c1} <= lambda*E[U] = {loading})"
            ),
            Violation::NetProfit2 { c2, loading } => write!(
                f,
                "net profit for company 2 violated (c2 = {c2} <= lambda*E[U] = {loading})"
            ),
        }
    }
}

/// Premium rates, claim arrivals, claim sizes and the discount rate.
///
/// Construct through [`ModelParams::new`] or [`validate_model`]; the fields
/// are public for reading but a value that did not pass validation should
/// not be fed to the valuation routines.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub c1: f64,
    pub c2: f64,
    pub lambda: f64,
    pub claims: ClaimDistribution,
    pub q: f64,
}

impl ModelParams {
    pub fn new(c1: f64, c2: f64, lambda: f64, claims: ClaimDistribution, q: f64) -> Result<Self> {
        validate_model(ModelParams {
            c1,
            c2,
            lambda,
            claims,
            q,
        })
        .map_err(Error::InvalidModel)
    }

    /// Exponential-claims model; the common case for analytic work.
    pub fn exponential(c1: f64, c2: f64, lambda: f64, alpha: f64, q: f64) -> Result<Self> {
        Self::new(c1, c2, lambda, ClaimDistribution::exponential(alpha), q)
    }

    /// Claim rate of the exponential distribution, or a typed error for
    /// anything else.
    pub fn alpha(&self) -> Result<f64> {
        self.claims
            .exponential_rate()
            .ok_or_else(|| Error::UnsupportedDistribution(self.claims.name().to_string()))
    }

    /// Same model with a different discount rate; skips revalidation of the
    /// untouched fields.
    pub fn with_discount(&self, q: f64) -> Result<Self> {
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::InvalidModel(vec![Violation::DiscountNotPositive { q }]));
        }
        Ok(ModelParams { q, ..self.clone() })
    }
}

/// Checks every validity condition and reports all of the failures at once.
pub fn validate_model(params: ModelParams) -> std::result::Result<ModelParams, Vec<Violation>> {
    let mut out = Vec::new();
    let ModelParams {
        c1, c2, lambda, q, ..
    } = params;

    if !(c2 > 0.0) {
        out.push(Violation::C2NotPositive { c2 });
    }
    if !(c1 > c2) {
        out.push(Violation::C1NotAboveC2 { c1, c2 });
    }
    if !(q > 0.0) || !q.is_finite() {
        out.push(Violation::DiscountNotPositive { q });
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        out.push(Violation::IntensityNotPositive { lambda });
    }

    let mean_ok = match &params.claims {
        ClaimDistribution::Exponential { rate } => {
            if !(*rate > 0.0) || !rate.is_finite() {
                out.push(Violation::ClaimRateNotPositive { rate: *rate });
                false
            } else {
                true
            }
        }
        ClaimDistribution::Sampled(s) => {
            let m = s.mean();
            if !(m > 0.0) || !m.is_finite() {
                out.push(Violation::ClaimMeanInvalid { mean: m });
                false
            } else {
                true
            }
        }
    };

    if mean_ok && lambda.is_finite() {
        let loading = lambda * params.claims.mean();
        if !(c1 > loading) {
            out.push(Violation::NetProfit1 { c1, loading });
        }
        if !(c2 > loading) {
            out.push(Violation::NetProfit2 { c2, loading });
        }
    }

    if out.is_empty() {
        Ok(params)
    } else {
        Err(out)
    }
}

/// Initial (or current) reserves of the two companies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reserves {
    pub u1: f64,
    pub u2: f64,
}

impl Reserves {
    pub fn new(u1: f64, u2: f64) -> Result<Self> {
        if !(u1 >= 0.0 && u2 >= 0.0) || !u1.is_finite() || !u2.is_finite() {
            return Err(Error::InvalidInput(format!(
                "reserves must be finite and nonnegative, got ({u1}, {u2})"
            )));
        }
        Ok(Self { u1, u2 })
    }

    /// Unchecked constructor for geometry queries on arbitrary points.
    pub const fn at(u1: f64, u2: f64) -> Self {
        Self { u1, u2 }
    }
}

/// Linear barrier `y = b - a x` with the drift `delta` subtracted while the
/// process sits in the region on or above it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierSpec {
    pub a: f64,
    pub b: f64,
    pub delta1: f64,
    pub delta2: f64,
}

impl BarrierSpec {
    /// General refraction at rates `(delta1, delta2)`.
    pub fn refraction(a: f64, b: f64, delta1: f64, delta2: f64, params: &ModelParams) -> Result<Self> {
        let mut problems = Vec::new();
        if !(a > 0.0) || !a.is_finite() {
            problems.push(format!("slope a must be positive, got {a}"));
        }
        if !(b > 0.0) || !b.is_finite() {
            problems.push(format!("intercept b must be positive, got {b}"));
        }
        if !(delta1 > 0.0) {
            problems.push(format!("delta1 must be positive, got {delta1}"));
        }
        if !(delta2 > 0.0) {
            problems.push(format!("delta2 must be positive, got {delta2}"));
        }
        if !(params.c1 - delta1 < 0.0) {
            problems.push(format!(
                "c1 - delta1 < 0 violated ({} - {delta1})",
                params.c1
            ));
        }
        if problems.is_empty() {
            Ok(Self {
                a,
                b,
                delta1,
                delta2,
            })
        } else {
            Err(Error::InvalidBarrier(problems.join("; ")))
        }
    }

    /// Reflection at the line: the net velocity on the barrier is `(-1, a)`.
    /// Requires `c2 > a`.
    pub fn reflection(a: f64, b: f64, params: &ModelParams) -> Result<Self> {
        if !(params.c2 > a) {
            return Err(Error::InvalidBarrier(format!(
                "reflection requires c2 > a ({} <= {a})",
                params.c2
            )));
        }
        Self::refraction(a, b, params.c1 + 1.0, params.c2 - a, params)
    }

    /// Total dividend rate while in the barrier region.
    pub fn delta0(&self) -> f64 {
        self.delta1 + self.delta2
    }

    pub fn is_reflection(&self, params: &ModelParams) -> bool {
        let tol = 1e-12 * (1.0 + params.c1.abs() + params.c2.abs());
        (self.delta1 - (params.c1 + 1.0)).abs() <= tol
            && (self.delta2 - (params.c2 - self.a)).abs() <= tol
    }

    /// Height of the barrier line at `u1`.
    pub fn line(&self, u1: f64) -> f64 {
        self.b - self.a * u1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    /// Strictly above the barrier line, inside the quadrant.
    Interior,
    /// On the barrier line.
    OnLine,
    /// Strictly below the line, inside the quadrant.
    Complement,
    OutsideQuadrant,
}

pub fn classify_point(u: Reserves, barrier: &BarrierSpec) -> Region {
    if u.u1 < 0.0 || u.u2 < 0.0 || u.u1.is_nan() || u.u2.is_nan() {
        return Region::OutsideQuadrant;
    }
    let gap = u.u2 - barrier.line(u.u1);
    if gap.abs() <= ON_LINE_TOL {
        Region::OnLine
    } else if gap > 0.0 {
        Region::Interior
    } else {
        Region::Complement
    }
}
