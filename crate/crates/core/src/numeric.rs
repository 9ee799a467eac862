//! Quadratic roots and adaptive Gauss-Kronrod quadrature.

use crate::error::{Error, Result};

/// Real roots of `a x^2 + b x + c = 0`, `a != 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadRoots {
    pub larger: f64,
    pub smaller: f64,
    pub discriminant: f64,
}

/// Both roots without cancellation: the root of larger magnitude comes from
/// the textbook formula with matching signs, the other from `c / (a r)`.
pub fn quadratic_roots(a: f64, b: f64, c: f64, context: &'static str) -> Result<QuadRoots> {
    if !(a != 0.0) || !a.is_finite() || !b.is_finite() || !c.is_finite() {
        return Err(Error::Numerical(format!(
            "degenerate quadratic in {context}: ({a}, {b}, {c})"
        )));
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Err(Error::NegativeDiscriminant {
            context,
            value: disc,
        });
    }
    let sq = disc.sqrt();
    let qv = -0.5 * (b + b.signum_nonzero() * sq);
    let r1 = qv / a;
    let r2 = if qv != 0.0 { c / qv } else { 0.0 };
    let (larger, smaller) = if r1 >= r2 { (r1, r2) } else { (r2, r1) };
    Ok(QuadRoots {
        larger,
        smaller,
        discriminant: disc,
    })
}

trait SignNonzero {
    fn signum_nonzero(self) -> f64;
}

impl SignNonzero for f64 {
    fn signum_nonzero(self) -> f64 {
        if self >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Bisection on a bracketing interval, used by tests as an independent
/// root oracle.
pub fn bisect(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Numerical(format!(
            "bisection interval [{lo}, {hi}] does not bracket a root"
        )));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol * (1.0 + mid.abs()) {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel with the embedded 7-point Gauss estimate.
/// Returns `(kronrod, |kronrod - gauss|)`.
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(centre - dx) + f(centre + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 0.0,
            max_panels: 20_000,
        }
    }
}

impl QuadOptions {
    pub fn abs(tol: f64) -> Self {
        Self {
            abs_tol: tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

/// Globally adaptive G7K15 over `[a, b]`, split first at every breakpoint
/// strictly inside the interval.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            panels: 0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|x| x.is_finite() && *x > lo && *x < hi)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    // (lo, hi, value, err)
    let mut panels: Vec<(f64, f64, f64, f64)> = Vec::new();
    let mut left = lo;
    for right in cuts.into_iter().chain(std::iter::once(hi)) {
        let (v, e) = gk15(&mut f, left, right);
        panels.push((left, right, v, e));
        left = right;
    }

    loop {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(Error::Numerical("non-finite integrand".into()));
        }
        let target = opts.abs_tol.max(opts.rel_tol * total.abs());
        if err <= target {
            return Ok(QuadResult {
                value: sign * total,
                error: err,
                panels: panels.len(),
            });
        }
        if panels.len() >= opts.max_panels {
            return Err(Error::Quadrature {
                tol: target,
                estimate: err,
            });
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("at least one panel");
        let (pa, pb, _, _) = panels[idx];
        let mid = 0.5 * (pa + pb);
        if !(mid > pa && mid < pb) {
            // Panel below floating-point resolution; accept what we have.
            return Ok(QuadResult {
                value: sign * total,
                error: err,
                panels: panels.len(),
            });
        }
        let (v1, e1) = gk15(&mut f, pa, mid);
        let (v2, e2) = gk15(&mut f, mid, pb);
        panels[idx] = (pa, mid, v1, e1);
        panels.push((mid, pb, v2, e2));
    }
}

/// Integral of `f` over `[a, inf)` through the map `x = a + t / (1 - t)`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    opts: QuadOptions,
) -> Result<QuadResult> {
    integrate(
        |t| {
            if t >= 1.0 {
                return 0.0;
            }
            let s = 1.0 - t;
            let v = f(a + t / s);
            if v == 0.0 {
                0.0
            } else {
                v / (s * s)
            }
        },
        0.0,
        1.0,
        &[],
        opts,
    )
}

/// `(e^{-q t1} - e^{-q t2}) / q`, the discounted length of `[t1, t2]`.
pub fn discounted_length(q: f64, t1: f64, t2: f64) -> f64 {
    if t2 <= t1 {
        return 0.0;
    }
    (-q * t1).exp() * -(-q * (t2 - t1)).exp_m1() / q
}
