//! Exponent triples and coefficients of the double exponential series for
//! reflection at a linear barrier.
//!
//! Each term `e^{g1 x + g2 y}` solves the generator equation in the region
//! below the barrier when `(g1, g2)` lies on the conic
//!
//! ```text
//! c1 g1^2 + (c1 + c2) g1 g2 + c2 g2^2 + (alpha c1 - q - lambda) g1
//!     + (alpha c2 - q - lambda) g2 - alpha q = 0,
//! ```
//!
//! and the companion `e^{g3 x + g2 y}` with the other root `g3` cancels the
//! integral term's boundary contribution. Consecutive steps share the value
//! of `g - a g2` along the barrier, which fixes the next `g2`.
//!
//! Two families are built: the main one starts with `g1 = a g2` and the
//! second ("primed") with `g1 = a' g2`, `a' = (a - c2) / (c1 + 1)`. The
//! second family carries the free constant that pins the value at the
//! corner `(0, b)` to zero.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::model::{BarrierSpec, ModelParams};
use crate::numeric::quadratic_roots;

pub const DEFAULT_MAX_TERMS: usize = 200;
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaStep {
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
    /// Coefficient on the original scale, `d_scaled * e^{-g2 b}` for the main
    /// family and `d_scaled * e^{-(g2 - g2_0) b}` for the primed one. Can
    /// underflow to zero for large `k`; evaluation uses `d_scaled`.
    pub d: f64,
    /// Coefficient normalised to the barrier height.
    pub d_scaled: f64,
    /// Discriminant of the quadratic that produced `g2`.
    pub disc_g2: f64,
    /// Discriminant of the quadratic that produced `g1` and `g3`.
    pub disc_g1: f64,
}

impl GammaStep {
    /// `(g3 + g2 + alpha) / (g1 + g2 + alpha)`.
    pub fn rho(&self, alpha: f64) -> f64 {
        (self.g3 + self.g2 + alpha) / (self.g1 + self.g2 + alpha)
    }

    /// Contribution of this step to the series at `u = (0, b)` with unit
    /// coefficient.
    pub fn corner_weight(&self, alpha: f64) -> f64 {
        (self.g1 - self.g3) / (self.g1 + self.g2 + alpha)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaSequences {
    pub steps: Vec<GammaStep>,
    pub primed_steps: Vec<GammaStep>,
    /// Matching constant on the original scale.
    pub e: f64,
    pub a_prime: f64,
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    /// Main-family series at the corner `(0, b)`.
    pub corner_main: f64,
    /// Primed-family series at the corner `(0, b)`.
    pub corner_primed: f64,
    /// Largest relative size of the last retained corner terms.
    pub tail_ratio: f64,
}

impl GammaSequences {
    /// Coefficient multiplying the normalised primed series,
    /// `-corner_main / corner_primed`.
    pub fn primed_weight(&self) -> f64 {
        -self.corner_main / self.corner_primed
    }

    pub fn terms(&self) -> usize {
        self.steps.len()
    }
}

/// Positive root of the conic restricted to `g1 = m g2`.
pub fn gamma2_initial(m: f64, params: &ModelParams) -> Result<(f64, f64)> {
    let alpha = params.alpha()?;
    let (c1, c2, lambda, q) = (params.c1, params.c2, params.lambda, params.q);
    let lead = (m * m + m) * c1 + (1.0 + m) * c2;
    if !(lead > 0.0) {
        return Err(Error::Numerical(format!(
            "leading coefficient {lead} of the initial exponent equation is not positive (slope {m})"
        )));
    }
    let lin = m * (alpha * c1 - q - lambda) + alpha * c2 - q - lambda;
    let r = quadratic_roots(lead, lin, -alpha * q, "initial g2")?;
    Ok((r.larger, r.discriminant))
}

struct Coeffs {
    c1: f64,
    c2: f64,
    lq: f64,
    alpha: f64,
    q: f64,
}

impl Coeffs {
    fn new(params: &ModelParams) -> Result<Self> {
        Ok(Self {
            c1: params.c1,
            c2: params.c2,
            lq: params.lambda + params.q,
            alpha: params.alpha()?,
            q: params.q,
        })
    }
}

/// Both roots in `g` of the conic with `g2` fixed; `(plus, minus, disc)`.
pub fn solve_g1_g3(g2: f64, params: &ModelParams) -> Result<(f64, f64, f64)> {
    solve_g1_g3_with(g2, &Coeffs::new(params)?)
}

fn solve_g1_g3_with(g2: f64, k: &Coeffs) -> Result<(f64, f64, f64)> {
    let b = (k.c1 + k.c2) * g2 + k.alpha * k.c1 - k.lq;
    let c = k.c2 * g2 * g2 + (k.alpha * k.c2 - k.lq) * g2 - k.alpha * k.q;
    let r = quadratic_roots(k.c1, b, c, "g1/g3")?;
    Ok((r.larger, r.smaller, r.discriminant))
}

/// Next `g2`: larger root of the conic after substituting
/// `g1 = s + slope * g2` with `s = prev.g3 - slope * prev.g2`.
pub fn advance_gamma2(prev: &GammaStep, slope: f64, params: &ModelParams) -> Result<(f64, f64)> {
    advance_with(prev, slope, &Coeffs::new(params)?)
}

fn advance_with(prev: &GammaStep, a: f64, k: &Coeffs) -> Result<(f64, f64)> {
    let s = prev.g3 - a * prev.g2;
    let lead = (a * a + a) * k.c1 + (1.0 + a) * k.c2;
    let lin = s * (2.0 * k.c1 * a + k.c1 + k.c2) - k.lq * (1.0 + a) + k.alpha * (a * k.c1 + k.c2);
    let cst = k.c1 * s * s + (k.c1 * k.alpha - k.lq) * s - k.alpha * k.q;
    let r = quadratic_roots(lead, lin, cst, "next g2")?;
    Ok((r.larger, r.discriminant))
}

/// Residual of the conic at `(g1, g2)`, relative to the largest term.
pub fn conic_residual(g1: f64, g2: f64, params: &ModelParams) -> Result<f64> {
    let k = Coeffs::new(params)?;
    let terms = [
        k.c1 * g1 * g1,
        (k.c1 + k.c2) * g1 * g2,
        k.c2 * g2 * g2,
        (k.alpha * k.c1 - k.lq) * g1,
        (k.alpha * k.c2 - k.lq) * g2,
        -k.alpha * k.q,
    ];
    let scale = terms.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    Ok(terms.iter().sum::<f64>().abs() / scale)
}

/// Exponents of one family: `n_terms` triples starting from `g1 = m g2`,
/// linked with the barrier slope `a`. Coefficients are left at zero.
pub fn build_family(m: f64, a: f64, params: &ModelParams, n_terms: usize) -> Result<Vec<GammaStep>> {
    let k = Coeffs::new(params)?;
    let mut out = Vec::with_capacity(n_terms);
    if n_terms == 0 {
        return Ok(out);
    }
    let (g2, disc_g2) = gamma2_initial(m, params)?;
    out.push(close_step(m * g2, g2, disc_g2, &k)?);
    while out.len() < n_terms {
        let prev = out.last().expect("nonempty");
        let (g2n, disc) = advance_with(prev, a, &k)?;
        let g1n = (prev.g3 - a * prev.g2) + a * g2n;
        out.push(close_step(g1n, g2n, disc, &k)?);
    }
    Ok(out)
}

/// Completes a step whose `g1` is fixed by the linkage; `g3` is the root of
/// the `g1/g3` quadratic away from it.
fn close_step(g1: f64, g2: f64, disc_g2: f64, k: &Coeffs) -> Result<GammaStep> {
    let (plus, minus, disc_g1) = solve_g1_g3_with(g2, k)?;
    let g3 = if (plus - g1).abs() <= (minus - g1).abs() {
        minus
    } else {
        plus
    };
    Ok(GammaStep {
        g1,
        g2,
        g3,
        d: 0.0,
        d_scaled: 0.0,
        disc_g2,
        disc_g1,
    })
}

/// Limit of `g2_{k+1} / g2_k` for slope `a`.
pub fn growth_limit(a: f64, params: &ModelParams) -> f64 {
    (params.c1 * a + params.c1) / (params.c1 * a + params.c2)
}

/// A violated structural property of one family.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantFailure {
    pub family: &'static str,
    pub k: usize,
    pub check: &'static str,
    pub detail: String,
}

impl std::fmt::Display for InvariantFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} family, k={}: {} ({})", self.family, self.k, self.check, self.detail)
    }
}

/// Relative tolerance for the linkage identity and the conic residual.
pub const INVARIANT_TOL: f64 = 1e-9;

/// Signs, monotonicity and linkage of one family; with `params`, also the
/// conic residual of both roots.
pub fn check_family(
    steps: &[GammaStep],
    family: &'static str,
    a: f64,
    params: Option<&ModelParams>,
) -> Vec<InvariantFailure> {
    let mut out = Vec::new();
    let mut fail = |k: usize, check: &'static str, detail: String| {
        out.push(InvariantFailure {
            family,
            k,
            check,
            detail,
        })
    };
    for (k, s) in steps.iter().enumerate() {
        if !(s.g2 > 0.0) {
            fail(k, "g2 > 0", format!("g2={}", s.g2));
        }
        if !(s.g3 < 0.0) {
            fail(k, "g3 < 0", format!("g3={}", s.g3));
        }
        if !(s.g1 > s.g3) {
            fail(k, "g1 > g3", format!("g1={} g3={}", s.g1, s.g3));
        }
        if let Some(p) = params {
            for (name, g) in [("conic residual of g1", s.g1), ("conic residual of g3", s.g3)] {
                match conic_residual(g, s.g2, p) {
                    Ok(r) if r < INVARIANT_TOL => {}
                    Ok(r) => fail(k, name, format!("{r:e}")),
                    Err(e) => fail(k, name, e.to_string()),
                }
            }
        }
        if let Some(n) = steps.get(k + 1) {
            if !(n.g2 > s.g2) {
                fail(k, "g2 increasing", format!("{} -> {}", s.g2, n.g2));
            }
            if !(n.g3 < s.g3) {
                fail(k, "g3 decreasing", format!("{} -> {}", s.g3, n.g3));
            }
            let lhs = n.g1 - a * n.g2;
            let rhs = s.g3 - a * s.g2;
            let scale = n.g1.abs().max((a * n.g2).abs()).max(s.g3.abs()).max((a * s.g2).abs());
            if !((lhs - rhs).abs() <= INVARIANT_TOL * scale) {
                fail(k, "linkage", format!("{lhs} vs {rhs}"));
            }
        }
    }
    out
}

/// [`check_family`] over both families of `seq`.
pub fn check_sequences(seq: &GammaSequences, params: &ModelParams) -> Vec<InvariantFailure> {
    let mut out = check_family(&seq.steps, "main", seq.a, Some(params));
    out.extend(check_family(&seq.primed_steps, "primed", seq.a, Some(params)));
    out
}

/// Fills `d_scaled` from the recursion tying consecutive coefficients
/// through the barrier condition.
fn fill_coefficients(steps: &mut [GammaStep], d0: f64, a: f64, c1: f64, c2: f64, alpha: f64) {
    let w1 = c1 + 1.0;
    let w2 = c2 - a;
    if let Some(first) = steps.first_mut() {
        first.d_scaled = d0;
    }
    for i in 1..steps.len() {
        let prev = steps[i - 1];
        let cur = steps[i];
        let ratio = prev.rho(alpha) * (prev.g3 * w1 + prev.g2 * w2) / (cur.g1 * w1 + cur.g2 * w2);
        steps[i].d_scaled = prev.d_scaled * ratio;
    }
}

/// Builds both families with coefficients and the matching constant,
/// truncated once the corner series of both families have converged.
pub fn build_sequences(
    barrier: &BarrierSpec,
    params: &ModelParams,
    max_terms: usize,
    tail_tol: f64,
) -> Result<GammaSequences> {
    if max_terms < 2 {
        return Err(Error::InvalidInput(format!("max_terms must be at least 2, got {max_terms}")));
    }
    if !barrier.is_reflection(params) {
        return Err(Error::InvalidBarrier(
            "the series solution covers reflection only; use the simulator for general refraction"
                .into(),
        ));
    }
    let alpha = params.alpha()?;
    let (a, b, c1, c2) = (barrier.a, barrier.b, params.c1, params.c2);
    let a_prime = (a - c2) / (c1 + 1.0);

    // Grow in blocks so the typical case (a dozen terms) builds little.
    let mut n = 16.min(max_terms);
    loop {
        let mut main = build_family(a, a, params, n)?;
        let mut primed = build_family(a_prime, a, params, n)?;
        let s0 = main[0];
        let d0 = ((c1 + 1.0) + (c2 - a)) / (s0.g1 * (c1 + 1.0) + s0.g2 * (c2 - a));
        fill_coefficients(&mut main, d0, a, c1, c2, alpha);
        fill_coefficients(&mut primed, 1.0, a, c1, c2, alpha);

        let corner = |steps: &[GammaStep]| -> Vec<f64> {
            steps.iter().map(|s| s.d_scaled * s.corner_weight(alpha)).collect()
        };
        let tm = corner(&main);
        let tp = corner(&primed);
        let (cut_m, ratio_m) = truncation_index(&tm, tail_tol);
        let (cut_p, ratio_p) = truncation_index(&tp, tail_tol);

        match (cut_m, cut_p) {
            (Some(i), Some(j)) => {
                let keep = i.max(j) + 1;
                main.truncate(keep);
                primed.truncate(keep);
                let corner_main: f64 = tm[..keep].iter().sum();
                let corner_primed: f64 = tp[..keep].iter().sum();
                if !(corner_primed != 0.0) || !corner_main.is_finite() || !corner_primed.is_finite() {
                    return Err(Error::Numerical(format!(
                        "degenerate corner sums ({corner_main}, {corner_primed})"
                    )));
                }
                let g20p = primed[0].g2;
                for s in main.iter_mut() {
                    s.d = s.d_scaled * (-s.g2 * b).exp();
                }
                for s in primed.iter_mut() {
                    s.d = s.d_scaled * (-(s.g2 - g20p) * b).exp();
                }
                let e = -corner_main / ((g20p * b).exp() * corner_primed);
                let tail_ratio = relative_last(&tm[..keep]).max(relative_last(&tp[..keep]));
                return Ok(GammaSequences {
                    steps: main,
                    primed_steps: primed,
                    e,
                    a_prime,
                    a,
                    b,
                    alpha,
                    corner_main,
                    corner_primed,
                    tail_ratio,
                });
            }
            _ if n >= max_terms => {
                return Err(Error::NonConvergence {
                    max_terms,
                    tail_ratio: ratio_m.max(ratio_p),
                });
            }
            _ => n = (n * 2).min(max_terms),
        }
    }
}

/// First index whose term is below `tol` relative to the partial sum up to
/// it, followed by a term that is too. Also returns the last term's ratio.
fn truncation_index(terms: &[f64], tol: f64) -> (Option<usize>, f64) {
    let mut partial = 0.0;
    let mut small_run = 0;
    for (i, t) in terms.iter().enumerate() {
        partial += t;
        if t.abs() <= tol * partial.abs() {
            small_run += 1;
            if small_run == 2 {
                return (Some(i), t.abs() / partial.abs());
            }
        } else {
            small_run = 0;
        }
    }
    (None, relative_last(terms))
}

fn relative_last(terms: &[f64]) -> f64 {
    let sum: f64 = terms.iter().sum();
    match terms.last() {
        Some(t) if sum != 0.0 => t.abs() / sum.abs(),
        Some(_) => f64::INFINITY,
        None => 0.0,
    }
}

type CacheKey = [u64; 10];

fn cache_key(barrier: &BarrierSpec, params: &ModelParams, max_terms: usize, tail_tol: f64) -> Option<CacheKey> {
    let alpha = params.claims.exponential_rate()?;
    Some([
        barrier.a.to_bits(),
        barrier.b.to_bits(),
        barrier.delta1.to_bits(),
        barrier.delta2.to_bits(),
        params.c1.to_bits(),
        params.c2.to_bits(),
        params.lambda.to_bits(),
        alpha.to_bits(),
        params.q.to_bits(),
        (max_terms as u64) ^ tail_tol.to_bits().rotate_left(17),
    ])
}

fn cache() -> &'static Mutex<HashMap<CacheKey, Arc<GammaSequences>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<GammaSequences>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// [`build_sequences`] behind a process-wide cache keyed on the exact bit
/// patterns of every input.
pub fn cached_sequences(
    barrier: &BarrierSpec,
    params: &ModelParams,
    max_terms: usize,
    tail_tol: f64,
) -> Result<Arc<GammaSequences>> {
    let Some(key) = cache_key(barrier, params, max_terms, tail_tol) else {
        return build_sequences(barrier, params, max_terms, tail_tol).map(Arc::new);
    };
    if let Some(hit) = cache().lock().expect("gamma cache poisoned").get(&key) {
        return Ok(Arc::clone(hit));
    }
    let built = Arc::new(build_sequences(barrier, params, max_terms, tail_tol)?);
    cache()
        .lock()
        .expect("gamma cache poisoned")
        .entry(key)
        .or_insert_with(|| Arc::clone(&built));
    Ok(built)
}
