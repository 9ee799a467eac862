//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints exactly one PASS or FAIL line; exits nonzero if any fail.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use tandem_cli::{compute_table, validate};
use tandem_core::barrier::{boundary_residual, pide_residual, v1_barrier, SeriesEvaluator, DEFAULT_TOL};
use tandem_core::impulse::tilted::{erlang_mixture_density, tilted_ruin_probability, DEFAULT_TRUNC_TOL};
use tandem_core::impulse::{impulse_v1, ImpulseMethod, ImpulseSpec, LowOptions};
use tandem_core::numeric::{integrate_to_infinity, QuadOptions};
use tandem_core::reference::{reference_params, table};
use tandem_core::scale::phi_inverse;
use tandem_core::sim::{estimate_barrier_moments, estimate_impulse_cycle, estimate_impulse_moments, SimConfig};
use tandem_core::{BarrierSpec, ModelParams, Reserves};

const TABLE_ABS_TOL: f64 = 0.05;
const TABLE_TIME_LIMIT: Duration = Duration::from_secs(5);
const MC_SE_MULTIPLE: f64 = 3.0;
const BARRIER_PATHS: u64 = 1_000_000;
const BARRIER_TIME_LIMIT: Duration = Duration::from_secs(60);
const PIDE_POINTS: usize = 20;
const PIDE_H: f64 = 1e-4;
const PIDE_REL_TOL: f64 = 1e-4;
const BOUNDARY_REL_TOL: f64 = 1e-3;
const RATIO_INDEX: usize = 40;
const RATIO_TOL: f64 = 0.01;
const FAMILY_TERMS: usize = 60;
const TRANSFORM_REL_TOL: f64 = 1e-6;
const DWDQ_REL_TOL: f64 = 1e-5;
const HIGH_CYCLES: u64 = 1_000_000;
const LOW_CYCLES: u64 = 100_000;
const MIXTURE_MASS_TOL: f64 = 1e-8;
const RUIN_ORACLE_TOL: f64 = 1e-4;

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

fn params() -> ModelParams {
    reference_params().unwrap()
}

fn within_se(label: &str, analytic: f64, mean: f64, se: f64) -> Result<String, String> {
    let z = (mean - analytic) / se;
    let line = format!("{label}: analytic {analytic:.6}, mc {mean:.6} +- {se:.6} (z = {z:.2})");
    if z.abs() <= MC_SE_MULTIPLE {
        Ok(line)
    } else {
        Err(line)
    }
}

fn reproduce(number: u8, named: &[(f64, f64, f64)]) -> Outcome {
    let t0 = Instant::now();
    let p = params();
    let (res, reference) = compute_table(number, &p).map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed();
    let mut off = Vec::new();
    let mut max_diff: f64 = 0.0;
    for (cell, r) in res.cells.iter().zip(&reference.cells) {
        let Some(v) = cell.value() else {
            off.push(format!("({}, {}) failed", cell.u.u1, cell.u.u2));
            continue;
        };
        let d = (v - r.value).abs();
        max_diff = max_diff.max(d);
        if d > TABLE_ABS_TOL {
            off.push(format!("a={} b={} u=({}, {}): {v:.4} vs {}", r.a, r.b, r.u1, r.u2, r.value));
        }
    }
    for &(u1, u2, v) in named {
        let present = reference.cells.iter().any(|c| c.u1 == u1 && c.u2 == u2 && c.value == v);
        if !present {
            off.push(format!("reference cell ({u1}, {u2}) = {v} missing"));
        }
    }
    let mut argmax_note = String::new();
    if let (Some(best), Some((a, b))) = (res.best(), reference.reported_argmax) {
        argmax_note = format!(", argmax ({}, {}) vs ({a}, {b})", best.a, best.b);
        if (best.a, best.b) != (a, b) {
            off.push(format!("argmax ({}, {})", best.a, best.b));
        }
    }
    if elapsed > TABLE_TIME_LIMIT {
        off.push(format!("runtime {elapsed:?}"));
    }
    let summary = format!(
        "{} of {} cells within {TABLE_ABS_TOL}, max |diff| {max_diff:.4}{argmax_note}, {elapsed:.2?}",
        reference.cells.len() - off.iter().filter(|s| s.starts_with("a=")).count(),
        reference.cells.len()
    );
    if off.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary}; first mismatch {}", off[0]))
    }
}

fn criterion_1() -> Outcome {
    reproduce(1, &[])
}

fn criterion_2() -> Outcome {
    reproduce(2, &[])
}

fn criterion_3() -> Outcome {
    let populated = table(3).unwrap().cells.len();
    reproduce(3, &[(0.0, 0.2, 2.09), (0.4, 0.6, 1.98)]).map_err(|e| format!("{populated} populated cells: {e}"))
}

fn criterion_4() -> Outcome {
    let p = params();
    let configs = [
        ((1.0, 2.0), 0.1, 14.0),
        ((2.0, 3.0), 0.1, 15.0),
        ((0.5, 3.0), 0.5, 8.0),
        ((1.0, 5.0), 0.2, 20.0),
        ((0.3, 0.6), 0.9, 1.8),
        ((3.0, 4.0), 1.0, 28.0),
    ];
    let mut lines = Vec::new();
    let mut ok = true;
    for (i, ((u1, u2), a, b)) in configs.into_iter().enumerate() {
        let bar = BarrierSpec::reflection(a, b, &p).map_err(|e| e.to_string())?;
        let u = Reserves::at(u1, u2);
        let series = v1_barrier(u, &bar, &p, DEFAULT_TOL).map_err(|e| e.to_string())?.value;
        let t0 = Instant::now();
        let est = estimate_barrier_moments(u, &bar, &p, &SimConfig::new(BARRIER_PATHS, 1000 + i as u64))
            .map_err(|e| e.to_string())?;
        let elapsed = t0.elapsed();
        let m = est.mean().unwrap();
        let r = within_se(&format!("u=({u1}, {u2}) a={a} b={b} {elapsed:.1?}"), series, m.mean, m.std_error);
        ok &= r.is_ok() && elapsed < BARRIER_TIME_LIMIT;
        lines.push(r.unwrap_or_else(|e| e));
    }
    let text = lines.join("; ");
    if ok {
        Ok(text)
    } else {
        Err(text)
    }
}

fn criterion_5() -> Outcome {
    let p = params();
    let bar = BarrierSpec::reflection(0.1, 14.0, &p).unwrap();
    let ev = SeriesEvaluator::new(&bar, &p, DEFAULT_TOL).unwrap();
    let lq = p.lambda + p.q;
    let pts = validate::interior_points(&bar, PIDE_POINTS, 0.05);
    if pts.len() != PIDE_POINTS {
        return Err(format!("only {} interior points", pts.len()));
    }
    let mut worst: f64 = 0.0;
    for &u in &pts {
        let r = pide_residual(u, &bar, &p, PIDE_H).map_err(|e| e.to_string())?;
        worst = worst.max(r.abs() / (lq * ev.value(u).unwrap().value));
    }
    let x_max = bar.b / (1.0 + bar.a);
    let mut worst_b: f64 = 0.0;
    for i in 1..=9 {
        let x = x_max * i as f64 / 10.0;
        let r = boundary_residual(Reserves::at(x, bar.line(x)), &bar, &p, PIDE_H).map_err(|e| e.to_string())?;
        worst_b = worst_b.max(r.abs() / bar.delta0());
    }
    let text = format!(
        "max interior |r|/((lambda+q) V1) = {worst:.2e} (< {PIDE_REL_TOL:e}), max line |r|/delta0 = {worst_b:.2e} (< {BOUNDARY_REL_TOL:e})"
    );
    if worst < PIDE_REL_TOL && worst_b < BOUNDARY_REL_TOL {
        Ok(text)
    } else {
        Err(text)
    }
}

fn criterion_6() -> Outcome {
    assert_eq!(validate::SLOPES, [0.1, 0.2, 0.5, 1.0]);
    assert_eq!(validate::FAMILY_TERMS, FAMILY_TERMS);
    assert_eq!(validate::RATIO_INDEX, RATIO_INDEX);
    assert_eq!(validate::RATIO_TOL, RATIO_TOL);
    let p = params();
    let checks = validate::gamma_suite(&p);
    let relevant: Vec<_> = checks.iter().filter(|c| !c.name.contains("g3/g2")).collect();
    let failed: Vec<_> = relevant.iter().filter(|c| !c.passed).collect();
    let text = format!("{} invariant and growth-ratio checks over 4 slopes x 2 families", relevant.len());
    match failed.first() {
        None => Ok(text),
        Some(c) => Err(format!("{text}; {}: {}", c.name, c.detail)),
    }
}

fn criterion_7() -> Outcome {
    assert_eq!(validate::TRANSFORM_REL_TOL, TRANSFORM_REL_TOL);
    assert_eq!(validate::DWDQ_REL_TOL, DWDQ_REL_TOL);
    let checks = validate::scale_suite(&params()).map_err(|e| e.to_string())?;
    let relevant: Vec<_> = checks
        .iter()
        .filter(|c| c.name.starts_with("Laplace transform") || c.name.starts_with("dW/dq"))
        .collect();
    if relevant.len() != 4 {
        return Err(format!("expected 3 transform checks and 1 derivative check, got {}", relevant.len()));
    }
    let text = relevant.iter().map(|c| c.detail.clone()).collect::<Vec<_>>().join("; ");
    if relevant.iter().all(|c| c.passed) {
        Ok(text)
    } else {
        Err(text)
    }
}

fn criterion_8() -> Outcome {
    let p = params();
    let spec = ImpulseSpec::new(3.0, 2.0, 0.5).unwrap();
    let v = impulse_v1(&spec, &p, &LowOptions::default()).map_err(|e| e.to_string())?;
    if v.method != ImpulseMethod::ClosedFormHigh {
        return Err(format!("method {}", v.method.tag()));
    }
    if !(v.p > 0.0 && v.p < 1.0) {
        return Err(format!("p = {} outside (0, 1)", v.p));
    }
    let cfg = SimConfig::new(HIGH_CYCLES, 808);
    let c = estimate_impulse_cycle(&spec, &p, &cfg).map_err(|e| e.to_string())?;
    let total = estimate_impulse_moments(&spec, &p, &cfg).map_err(|e| e.to_string())?.mean().unwrap();
    let parts = [
        within_se("p", v.p, c.p.mean, c.p.std_error),
        within_se("A", v.a, c.a.mean, c.a.std_error),
        within_se("tau", v.tau_moment, c.tau_moment.mean, c.tau_moment.std_error),
        within_se("V1", v.value, total.mean, total.std_error),
    ];
    let ok = parts.iter().all(Result::is_ok);
    let text = parts.into_iter().map(|r| r.unwrap_or_else(|e| e)).collect::<Vec<_>>().join("; ");
    if ok {
        Ok(text)
    } else {
        Err(text)
    }
}

fn criterion_9() -> Outcome {
    let p = params();
    let spec = ImpulseSpec::new(1.0, 2.0, 0.5).unwrap();
    let v = impulse_v1(&spec, &p, &LowOptions::default()).map_err(|e| e.to_string())?;
    let est = estimate_impulse_moments(&spec, &p, &SimConfig::new(LOW_CYCLES, 909))
        .map_err(|e| e.to_string())?
        .mean()
        .unwrap();
    let value = within_se("V1", v.value, est.mean, est.std_error);

    let tilt = phi_inverse(&p).unwrap();
    let mut worst_mass: f64 = 0.0;
    for t in [0.1, 1.0, 5.0] {
        for j in [1, 2] {
            let mass = integrate_to_infinity(
                |x| erlang_mixture_density(j, t, x, &tilt, &p, 1e-15).unwrap(),
                0.0,
                QuadOptions::abs(1e-12),
            )
            .map_err(|e| e.to_string())?
            .value;
            worst_mass = worst_mass.max((mass - (1.0 - (-tilt.lambda_q * t).exp())).abs());
        }
    }

    let c2 = p.c2;
    let prefactor = 1.0 - tilt.lambda_q / (c2 * tilt.alpha_q);
    let mut worst_ruin: f64 = 0.0;
    for z in [0.5, 2.0] {
        let x0 = z / c2;
        let n = 200_000;
        let h = 120.0 / n as f64;
        let f = |y: f64| erlang_mixture_density(2, y - x0, y, &tilt, &p, DEFAULT_TRUNC_TOL).unwrap();
        let mut s = f(x0) + f(x0 + 120.0);
        for i in 1..n {
            s += f(x0 + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let oracle = prefactor * s * h / 3.0;
        worst_ruin = worst_ruin.max((oracle - tilted_ruin_probability(z, &tilt, &p).unwrap()).abs());
    }

    let ok = value.is_ok() && worst_mass < MIXTURE_MASS_TOL && worst_ruin < RUIN_ORACLE_TOL;
    let text = format!(
        "{}; mixture mass error {worst_mass:.1e} (< {MIXTURE_MASS_TOL:e}); ruin vs ladder quadrature {worst_ruin:.1e} (< {RUIN_ORACLE_TOL:e})",
        value.unwrap_or_else(|e| e)
    );
    if ok {
        Ok(text)
    } else {
        Err(text)
    }
}

fn criterion_10() -> Outcome {
    let run = |args: &[&str]| -> Vec<u8> {
        let o = Command::new(env!("CARGO_BIN_EXE_tandem")).args(args).output().expect("binary runs");
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        o.stdout
    };
    let cases: [&[&str]; 2] = [
        &["simulate", "barrier", "--u1", "1", "--u2", "2", "--a", "0.1", "--b", "14", "--paths", "50000", "--seed", "5", "--moments", "1,2"],
        &["simulate", "impulse", "--u1", "3", "--u2", "2", "--cost", "0.5", "--paths", "50000", "--seed", "6", "--cycle"],
    ];
    for case in cases {
        let outputs: Vec<Vec<u8>> = ["1", "1", "2", "7"]
            .iter()
            .map(|t| {
                let mut args = case.to_vec();
                args.extend(["--threads", t]);
                run(&args)
            })
            .collect();
        if outputs.windows(2).any(|w| w[0] != w[1]) {
            return Err(format!("`{}` output differs between runs", case[..2].join(" ")));
        }
    }
    Ok("barrier and impulse runs byte-identical for threads 1, 1, 2, 7".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "grid of 24 barriers at u = (1, 2)", criterion_1),
        (2, "grid of 24 barriers at u = (2, 3)", criterion_2),
        (3, "reserve grid at a = 0.9, b = 1.8", criterion_3),
        (4, "barrier series vs Monte Carlo", criterion_4),
        (5, "generator and barrier residuals", criterion_5),
        (6, "exponent sequence invariants", criterion_6),
        (7, "scale function transform and q-derivative", criterion_7),
        (8, "impulse value, reset above", criterion_8),
        (9, "impulse value, reset below", criterion_9),
        (10, "simulation determinism", criterion_10),
    ];
    let only: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (n, name, f) in criteria {
        if only.is_some_and(|k| k != n) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {n} ({name}): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}): {detail}");
            }
        }
    }
    println!("acceptance: {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
