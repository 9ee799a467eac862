//! Self-checks run by `tandem validate`.

use tandem_core::barrier::{boundary_residual, pide_residual, v1_barrier, SeriesEvaluator, DEFAULT_TOL};
use tandem_core::csvio::{check_gamma_rows, parse_gamma_csv};
use tandem_core::gamma::{
    build_family, build_sequences, check_family, check_sequences, growth_limit, DEFAULT_MAX_TERMS,
};
use tandem_core::numeric::{integrate, QuadOptions};
use tandem_core::scale::{phi_inverse, psi, scale_params};
use tandem_core::{BarrierSpec, ModelParams, Reserves, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

pub const SLOPES: [f64; 4] = [0.1, 0.2, 0.5, 1.0];
pub const FAMILY_TERMS: usize = 60;
pub const RATIO_INDEX: usize = 40;
pub const RATIO_TOL: f64 = 0.01;
pub const PIDE_REL_TOL: f64 = 1e-4;
pub const BOUNDARY_REL_TOL: f64 = 1e-3;
pub const CORNER_TOL: f64 = 1e-6;
pub const TRANSFORM_REL_TOL: f64 = 1e-6;
pub const DWDQ_REL_TOL: f64 = 1e-5;

/// Low-discrepancy points in the unit square (additive recurrence).
pub fn unit_points(n: usize) -> Vec<(f64, f64)> {
    let g = 1.324_717_957_244_746;
    let (s1, s2) = (1.0 / g, 1.0 / (g * g));
    (1..=n)
        .map(|i| ((0.5 + s1 * i as f64).fract(), (0.5 + s2 * i as f64).fract()))
        .collect()
}

/// Points strictly between the diagonal and the barrier line, at least
/// `margin` away from both and from the axes.
pub fn interior_points(barrier: &BarrierSpec, n: usize, margin: f64) -> Vec<Reserves> {
    let x_max = barrier.b / (1.0 + barrier.a);
    unit_points(n)
        .into_iter()
        .filter_map(|(s, t)| {
            let u1 = margin + s * (x_max - 3.0 * margin);
            let lo = u1 + margin;
            let hi = barrier.line(u1) - margin * (1.0 + barrier.a);
            (hi > lo).then(|| Reserves::at(u1, lo + t * (hi - lo)))
        })
        .collect()
}

/// Sign, monotonicity, linkage and conic checks on both families for each
/// slope, plus the finite-index growth ratios.
pub fn gamma_suite(params: &ModelParams) -> Vec<Check> {
    let mut out = Vec::new();
    for a in SLOPES {
        let a_prime = (a - params.c2) / (params.c1 + 1.0);
        for (family, m) in [("main", a), ("primed", a_prime)] {
            let name = format!("gamma invariants a={a} {family} ({FAMILY_TERMS} terms)");
            match build_family(m, a, params, FAMILY_TERMS) {
                Ok(steps) => {
                    let bad = check_family(&steps, family, a, Some(params));
                    let detail = bad.first().map_or("all hold".to_string(), ToString::to_string);
                    out.push(Check::new(name, bad.is_empty(), detail));
                    let k = RATIO_INDEX;
                    let ratio = steps[k + 1].g2 / steps[k].g2;
                    let limit = growth_limit(a, params);
                    let r32 = steps[k].g3 / steps[k].g2;
                    let r12 = steps[k].g1 / steps[k].g2;
                    let target12 = -params.c2 / params.c1;
                    out.push(Check::new(
                        format!("g2 growth ratio a={a} {family} k={k}"),
                        (ratio / limit - 1.0).abs() < RATIO_TOL,
                        format!("{ratio} vs {limit}"),
                    ));
                    out.push(Check::new(
                        format!("g3/g2 and g1/g2 limits a={a} {family} k={k}"),
                        (r32 + 1.0).abs() < RATIO_TOL && (r12 / target12 - 1.0).abs() < RATIO_TOL,
                        format!("g3/g2={r32} g1/g2={r12} vs -1, {target12}"),
                    ));
                }
                Err(e) => out.push(Check::new(name, false, e.to_string())),
            }
        }
    }
    out
}

/// Series checks for one barrier: residuals, corner value, monotonicity,
/// decay in `b` and truncation independence.
pub fn barrier_suite(params: &ModelParams, barrier: &BarrierSpec, n_points: usize, h: f64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let lq = params.lambda + params.q;
    let seq = build_sequences(barrier, params, DEFAULT_MAX_TERMS, DEFAULT_TOL)?;
    let bad = check_sequences(&seq, params);
    out.push(Check::new(
        format!("sequence invariants a={} b={} ({} terms)", barrier.a, barrier.b, seq.terms()),
        bad.is_empty(),
        bad.first().map_or("all hold".to_string(), ToString::to_string),
    ));

    let ev = SeriesEvaluator::new(barrier, params, DEFAULT_TOL)?;
    let mut worst: (f64, Option<Reserves>) = (0.0, None);
    let pts = interior_points(barrier, n_points, 0.05);
    for &u in &pts {
        let r = pide_residual(u, barrier, params, h)?;
        let v = ev.value(u)?.value;
        let rel = r.abs() / (lq * v);
        if rel > worst.0 || worst.1.is_none() {
            worst = (rel, Some(u));
        }
    }
    out.push(Check::new(
        format!("generator residual at {} interior points, h={h}", pts.len()),
        pts.len() == n_points && worst.0 < PIDE_REL_TOL,
        match worst.1 {
            Some(u) => format!("max |r|/((lambda+q) V1) = {:e} at ({}, {})", worst.0, u.u1, u.u2),
            None => "no points".into(),
        },
    ));

    let x_max = barrier.b / (1.0 + barrier.a);
    let mut worst_b: f64 = 0.0;
    let line_pts: Vec<f64> = (1..=5).map(|i| x_max * i as f64 / 6.0).collect();
    for &x in &line_pts {
        let r = boundary_residual(Reserves::at(x, barrier.line(x)), barrier, params, h)?;
        worst_b = worst_b.max(r.abs() / barrier.delta0());
    }
    out.push(Check::new(
        format!("barrier condition at {} points on the line", line_pts.len()),
        worst_b < BOUNDARY_REL_TOL,
        format!("max |r|/delta0 = {worst_b:e}"),
    ));

    let corner = v1_barrier(Reserves::at(0.0, barrier.b), barrier, params, DEFAULT_TOL)?.value;
    out.push(Check::new(
        "value at the corner (0, b)",
        corner.abs() < CORNER_TOL,
        format!("{corner:e}"),
    ));

    let mut mono = Ok(());
    for (s, t) in unit_points(200) {
        let u1 = s * 0.8 * x_max;
        let u2 = u1 + 0.05 + t * (barrier.line(u1) - u1 - 0.1);
        if u2 <= u1 + 0.01 {
            continue;
        }
        let v = ev.raw(u1, u2);
        let v_right = ev.raw(u1 + 0.01, u2);
        let slack = 1e-9 * v.abs().max(1.0);
        if v_right < v - slack && u1 + 0.01 < u2 {
            mono = Err(format!("decrease near ({u1}, {u2})"));
            break;
        }
    }
    out.push(Check::new(
        "nondecreasing in u1 on 200 points",
        mono.is_ok(),
        mono.err().unwrap_or_else(|| "nondecreasing".into()),
    ));

    let u = Reserves::at(1.0, 2.0);
    let far: Result<Vec<f64>> = [20.0, 40.0, 80.0]
        .iter()
        .map(|&b| {
            let bar = BarrierSpec::reflection(barrier.a, b, params)?;
            Ok(v1_barrier(u, &bar, params, DEFAULT_TOL)?.value)
        })
        .collect();
    let far = far?;
    out.push(Check::new(
        "decay as b grows (20, 40, 80) at (1, 2)",
        far[0] > far[1] && far[1] > far[2] && far[2] > 0.0,
        format!("{far:?}"),
    ));

    let fine = build_sequences(barrier, params, 2 * DEFAULT_MAX_TERMS, 1e-15)?;
    let probe = pts.first().copied().unwrap_or(Reserves::at(0.5, 1.0));
    let v_default = tandem_core::barrier::evaluate(&seq, probe, DEFAULT_TOL).value;
    let v_fine = tandem_core::barrier::evaluate(&fine, probe, 1e-15).value;
    let rel = (v_default - v_fine).abs() / v_fine.abs();
    out.push(Check::new(
        format!("truncation independence ({} vs {} terms)", seq.terms(), fine.terms()),
        rel < 10.0 * DEFAULT_TOL,
        format!("relative change {rel:e}"),
    ));
    Ok(out)
}

/// Scale function against its Laplace transform and finite differences.
pub fn scale_suite(params: &ModelParams) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let c2 = params.c2;
    let s = scale_params(params, c2)?;
    let tilt = phi_inverse(params)?;
    let q = params.q;
    let roots_ok = [s.q_plus, s.q_minus, tilt.phi]
        .iter()
        .map(|&t| psi(t, params, c2).map(|v| (v - q).abs() / q))
        .collect::<Result<Vec<_>>>()?;
    out.push(Check::new(
        "Laplace exponent at q+, q-, Phi(q)",
        roots_ok.iter().all(|&r| r < 1e-12),
        format!("relative defects {roots_ok:?}"),
    ));
    let w0 = s.w(0.0)?;
    out.push(Check::new("W(0) = 1/c2", (w0 * c2 - 1.0).abs() < 1e-12, format!("{w0}")));

    for dt in [0.5, 1.0, 3.0] {
        let theta = tilt.phi + dt;
        let r = integrate(
            |x| (-theta * x).exp() * s.w(x).unwrap_or(f64::NAN),
            0.0,
            40.0 / dt + 200.0,
            &[1.0, 5.0, 20.0],
            QuadOptions::abs(1e-13),
        )?;
        let exact = 1.0 / (psi(theta, params, c2)? - q);
        let rel = (r.value - exact).abs() / exact;
        out.push(Check::new(
            format!("Laplace transform of W at theta = Phi + {dt}"),
            rel < TRANSFORM_REL_TOL,
            format!("{} vs {exact}, relative {rel:e}", r.value),
        ));
    }

    let h = 1e-6 * q;
    let lo = scale_params(&params.with_discount(q - h)?, c2)?;
    let hi = scale_params(&params.with_discount(q + h)?, c2)?;
    let mut worst: f64 = 0.0;
    for x in [0.5, 2.0, 10.0] {
        let fd = (hi.w(x)? - lo.w(x)?) / (2.0 * h);
        worst = worst.max((s.dw_dq(x)? - fd).abs() / fd.abs());
    }
    out.push(Check::new(
        "dW/dq against central differences at x = 0.5, 2, 10",
        worst < DWDQ_REL_TOL,
        format!("max relative gap {worst:e}"),
    ));
    Ok(out)
}

/// Checks a dump produced by `tandem gamma` for slope `a`.
pub fn gamma_csv_suite(text: &str, a: f64, params: &ModelParams) -> Result<Vec<Check>> {
    let rows = parse_gamma_csv(text)?;
    let bad = check_gamma_rows(&rows, a, Some(params));
    Ok(vec![Check::new(
        format!("gamma dump ({} rows)", rows.len()),
        bad.is_empty(),
        bad.first().map_or("all hold".to_string(), ToString::to_string),
    )])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::exponential(4.0, 3.0, 1.0, 2.0, 0.1).unwrap()
    }

    #[test]
    fn points_stay_inside() {
        let p = params();
        let bar = BarrierSpec::reflection(0.1, 14.0, &p).unwrap();
        let pts = interior_points(&bar, 20, 0.05);
        assert_eq!(pts.len(), 20);
        for u in pts {
            assert!(u.u1 > 0.0 && u.u2 > u.u1 && u.u2 < bar.line(u.u1));
        }
    }

    #[test]
    fn suites_pass_on_reference_model() {
        let p = params();
        let bar = BarrierSpec::reflection(0.1, 14.0, &p).unwrap();
        let all: Vec<Check> = gamma_suite(&p)
            .into_iter()
            .chain(barrier_suite(&p, &bar, 20, 1e-4).unwrap())
            .chain(scale_suite(&p).unwrap())
            .collect();
        for c in &all {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
