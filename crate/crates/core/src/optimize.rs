//! Barrier search: grid sweeps over `(a, b)` and a local refinement.

use rayon::prelude::*;

use crate::barrier::{check_domain, evaluate, v1_barrier, BarrierValuation, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::gamma::{build_sequences, DEFAULT_MAX_TERMS};
use crate::model::{BarrierSpec, ModelParams, Reserves};

/// One grid cell; the outcome carries the cell's own error if it failed.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub a: f64,
    pub b: f64,
    pub u: Reserves,
    pub outcome: Result<BarrierValuation>,
}

impl SweepCell {
    pub fn value(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|v| v.value)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Cells in row-major order: `a` outer, `b` inner.
    pub cells: Vec<SweepCell>,
    /// Index of the best cell; the first in grid order wins ties.
    pub argmax: Option<usize>,
}

impl SweepResult {
    /// Wraps evaluated cells, picking the first maximal one.
    pub fn from_cells(cells: Vec<SweepCell>) -> Self {
        let mut argmax: Option<usize> = None;
        for (i, c) in cells.iter().enumerate() {
            if let Some(v) = c.value() {
                if argmax.is_none_or(|j| v > cells[j].value().unwrap_or(f64::NEG_INFINITY)) {
                    argmax = Some(i);
                }
            }
        }
        Self { cells, argmax }
    }

    pub fn best(&self) -> Option<&SweepCell> {
        self.argmax.map(|i| &self.cells[i])
    }

    pub fn failures(&self) -> impl Iterator<Item = &SweepCell> {
        self.cells.iter().filter(|c| c.outcome.is_err())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub tol: f64,
    /// Reuse exponent sequences across calls through the process cache.
    pub use_cache: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            use_cache: true,
        }
    }
}

/// Series value on the full `a_values x b_values` grid.
pub fn sweep_barrier(
    u: Reserves,
    a_values: &[f64],
    b_values: &[f64],
    params: &ModelParams,
) -> Result<SweepResult> {
    sweep_barrier_with(u, a_values, b_values, params, &SweepOptions::default())
}

pub fn sweep_barrier_with(
    u: Reserves,
    a_values: &[f64],
    b_values: &[f64],
    params: &ModelParams,
    opts: &SweepOptions,
) -> Result<SweepResult> {
    if a_values.is_empty() || b_values.is_empty() {
        return Err(Error::InvalidInput("sweep grid must have at least one a and one b".into()));
    }
    params.alpha()?;
    let grid: Vec<(f64, f64)> = a_values
        .iter()
        .flat_map(|&a| b_values.iter().map(move |&b| (a, b)))
        .collect();
    let cells: Vec<SweepCell> = grid
        .par_iter()
        .map(|&(a, b)| SweepCell {
            a,
            b,
            u,
            outcome: cell_value(u, a, b, params, opts),
        })
        .collect();
    Ok(SweepResult::from_cells(cells))
}

fn cell_value(u: Reserves, a: f64, b: f64, params: &ModelParams, opts: &SweepOptions) -> Result<BarrierValuation> {
    let barrier = BarrierSpec::reflection(a, b, params)?;
    if opts.use_cache {
        return v1_barrier(u, &barrier, params, opts.tol);
    }
    check_domain(u, &barrier)?;
    let seq = build_sequences(&barrier, params, DEFAULT_MAX_TERMS, opts.tol.min(DEFAULT_TOL))?;
    Ok(evaluate(&seq, u, opts.tol))
}

/// Outcome of [`refine_barrier`].
#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub a: f64,
    pub b: f64,
    pub value: f64,
    /// Accepted points `(a, b, v1)`, starting with the initial point.
    pub path: Vec<(f64, f64, f64)>,
    pub evaluations: usize,
    /// Set when the evaluation budget ran out before convergence.
    pub budget_exhausted: bool,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Coordinate search from `start`: alternating golden-section maximisation
/// over `a` and `b` within the given ranges. A candidate replaces the
/// current point only if it is strictly better, so the reported value is
/// never below the starting value. `budget` caps the number of series
/// evaluations.
pub fn refine_barrier(
    u: Reserves,
    params: &ModelParams,
    a_range: (f64, f64),
    b_range: (f64, f64),
    start: (f64, f64),
    budget: usize,
) -> Result<Refinement> {
    for (name, (lo, hi)) in [("a", a_range), ("b", b_range)] {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidInput(format!("{name} range [{lo}, {hi}] is not an interval")));
        }
    }
    if a_range.1 >= params.c2 {
        return Err(Error::InvalidBarrier(format!(
            "a range must stay below c2 = {}, got upper end {}",
            params.c2, a_range.1
        )));
    }
    let inside = |(a, b): (f64, f64)| a >= a_range.0 && a <= a_range.1 && b >= b_range.0 && b <= b_range.1;
    if !inside(start) {
        return Err(Error::InvalidInput(format!(
            "start ({}, {}) lies outside the search box",
            start.0, start.1
        )));
    }

    let mut evals = 0usize;
    let mut exhausted = false;
    let mut objective = |a: f64, b: f64| -> Option<f64> {
        if evals >= budget {
            exhausted = true;
            return None;
        }
        evals += 1;
        let opts = SweepOptions {
            tol: DEFAULT_TOL,
            use_cache: false,
        };
        Some(cell_value(u, a, b, params, &opts).map_or(f64::NEG_INFINITY, |v| v.value))
    };

    let Some(v0) = objective(start.0, start.1) else {
        return Err(Error::InvalidInput("refinement budget must allow at least one evaluation".into()));
    };
    if !v0.is_finite() {
        return Err(Error::InvalidInput(format!(
            "start ({}, {}) has no valid barrier value",
            start.0, start.1
        )));
    }
    let (mut a, mut b, mut best) = (start.0, start.1, v0);
    let mut path = vec![(a, b, best)];

    'rounds: for _ in 0..50 {
        let before = best;
        for axis in 0..2 {
            let (lo, hi) = if axis == 0 { a_range } else { b_range };
            let point = |x: f64| if axis == 0 { (x, b) } else { (a, x) };
            let Some((x, v)) = golden_max(lo, hi, |x| {
                let (pa, pb) = point(x);
                objective(pa, pb)
            }) else {
                break 'rounds;
            };
            if v > best {
                (a, b) = point(x);
                best = v;
                path.push((a, b, best));
            }
        }
        if best - before <= 1e-12 * best.abs().max(1.0) {
            break;
        }
    }
    Ok(Refinement {
        a,
        b,
        value: best,
        path,
        evaluations: evals,
        budget_exhausted: exhausted,
    })
}

/// Golden-section search for a maximum on `[lo, hi]`. Returns `None` once
/// `f` refuses further evaluations.
fn golden_max<F: FnMut(f64) -> Option<f64>>(mut lo: f64, mut hi: f64, mut f: F) -> Option<(f64, f64)> {
    if hi - lo <= 0.0 {
        return f(lo).map(|v| (lo, v));
    }
    let tol = 1e-7 * (1.0 + lo.abs().max(hi.abs()));
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Some(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::exponential(4.0, 3.0, 1.0, 2.0, 0.1).unwrap()
    }

    #[test]
    fn single_cell_is_its_own_argmax() {
        let r = sweep_barrier(Reserves::at(1.0, 2.0), &[0.2], &[8.0], &params()).unwrap();
        assert_eq!(r.cells.len(), 1);
        assert_eq!(r.argmax, Some(0));
    }

    #[test]
    fn ties_go_to_first_cell() {
        let r = sweep_barrier(Reserves::at(1.0, 2.0), &[0.2, 0.2], &[8.0], &params()).unwrap();
        assert_eq!(r.argmax, Some(0));
    }

    #[test]
    fn failing_cells_do_not_stop_the_sweep() {
        // b = 1.5 lies below u2; a = 3 is not a reflection barrier.
        let r = sweep_barrier(Reserves::at(1.0, 2.0), &[0.1, 3.0], &[1.5, 14.0], &params()).unwrap();
        assert_eq!(r.cells.len(), 4);
        assert_eq!(r.failures().count(), 3);
        assert_eq!(r.argmax, Some(1));
        assert_eq!((r.cells[0].a, r.cells[0].b), (0.1, 1.5));
    }

    #[test]
    fn cache_does_not_change_values() {
        let p = params();
        let u = Reserves::at(1.0, 2.0);
        let a = [0.1, 0.5];
        let b = [6.0, 14.0];
        let cached = sweep_barrier(u, &a, &b, &p).unwrap();
        let fresh = sweep_barrier_with(u, &a, &b, &p, &SweepOptions { use_cache: false, ..Default::default() }).unwrap();
        for (x, y) in cached.cells.iter().zip(&fresh.cells) {
            assert!((x.value().unwrap() - y.value().unwrap()).abs() <= 1e-14 * x.value().unwrap());
        }
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, v) = golden_max(-1.0, 3.0, |x| Some(-(x - 1.25) * (x - 1.25))).unwrap();
        assert!((x - 1.25).abs() < 1e-6 && v <= 0.0);
    }

    #[test]
    fn refinement_is_monotone_and_flags_budget() {
        let p = params();
        let u = Reserves::at(1.0, 2.0);
        let r = refine_barrier(u, &p, (0.05, 1.0), (6.0, 28.0), (0.2, 8.0), 400).unwrap();
        assert!(r.path.windows(2).all(|w| w[1].2 >= w[0].2));
        assert!(r.value >= r.path[0].2);
        let short = refine_barrier(u, &p, (0.05, 1.0), (6.0, 28.0), (0.2, 8.0), 5).unwrap();
        assert!(short.budget_exhausted);
        assert_eq!(short.evaluations, 5);
    }

    #[test]
    fn refinement_rejects_bad_boxes() {
        let p = params();
        let u = Reserves::at(1.0, 2.0);
        assert!(refine_barrier(u, &p, (0.5, 0.1), (6.0, 28.0), (0.2, 8.0), 10).is_err());
        assert!(refine_barrier(u, &p, (0.1, 3.5), (6.0, 28.0), (0.2, 8.0), 10).is_err());
        assert!(refine_barrier(u, &p, (0.1, 1.0), (6.0, 28.0), (0.2, 30.0), 10).is_err());
    }
}
