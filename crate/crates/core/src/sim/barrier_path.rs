use rand::Rng;

use crate::model::{BarrierSpec, ModelParams};
use crate::numeric::discounted_length;

use super::trace::{Event, Trace};
use super::{draw_claim, PathOutcome};

/// Flow regime between claims.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    /// Below the line: premium drift, no dividends.
    Below,
    /// In the barrier region or on the line moving away from it: refracted
    /// drift, dividends at `delta1 + delta2`.
    Refracted,
    /// Held on the line by drifts pointing into it from both sides:
    /// drift `c - kappa delta`, dividends at `kappa (delta1 + delta2)`.
    Sliding(f64),
}

/// Geometry and rates shared by every path of one configuration.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Flow {
    c1: f64,
    c2: f64,
    a: f64,
    b: f64,
    d1: f64,
    d2: f64,
    q: f64,
    /// Rate of change of `y + a x` under the refracted drift.
    normal_rate: f64,
    line_tol: f64,
}

impl Flow {
    pub(crate) fn new(barrier: &BarrierSpec, params: &ModelParams) -> Self {
        let (c1, c2) = (params.c1, params.c2);
        let mut normal_rate = (c2 - barrier.delta2) + barrier.a * (c1 - barrier.delta1);
        let scale = c2.abs() + barrier.delta2.abs() + barrier.a * (c1.abs() + barrier.delta1.abs());
        if normal_rate.abs() <= 1e-12 * scale {
            normal_rate = 0.0;
        }
        Self {
            c1,
            c2,
            a: barrier.a,
            b: barrier.b,
            d1: barrier.delta1,
            d2: barrier.delta2,
            q: params.q,
            normal_rate,
            line_tol: 1e-12 * (1.0 + barrier.b),
        }
    }

    fn gap(&self, x: f64, y: f64) -> f64 {
        y + self.a * x - self.b
    }

    fn mode(&self, x: f64, y: f64) -> Mode {
        let g = self.gap(x, y);
        if g < -self.line_tol {
            Mode::Below
        } else if g > self.line_tol || self.normal_rate >= 0.0 {
            Mode::Refracted
        } else {
            let kappa = (self.c2 + self.a * self.c1) / (self.d2 + self.a * self.d1);
            Mode::Sliding(kappa)
        }
    }

    fn velocity(&self, mode: Mode) -> (f64, f64, f64) {
        match mode {
            Mode::Below => (self.c1, self.c2, 0.0),
            Mode::Refracted => (self.c1 - self.d1, self.c2 - self.d2, self.d1 + self.d2),
            Mode::Sliding(k) => (self.c1 - k * self.d1, self.c2 - k * self.d2, k * (self.d1 + self.d2)),
        }
    }

    fn delta0(&self) -> f64 {
        self.d1 + self.d2
    }
}

/// Deterministic motion from `(x, y)` at time `t` for up to `span` time
/// units. Returns the new state, dividends (discounted to time 0) and the
/// ruin time if the flow leaves the quadrant.
pub(crate) fn drift(
    flow: &Flow,
    mut x: f64,
    mut y: f64,
    mut t: f64,
    span: f64,
    trace: &mut Option<&mut Trace>,
) -> (f64, f64, f64, f64, Option<f64>) {
    let end = t + span;
    let mut paid = 0.0;
    let mut guard = 0;
    while t < end {
        guard += 1;
        let mode = flow.mode(x, y);
        let (vx, vy, rate) = flow.velocity(mode);
        let mut dur = end - t;
        let mut hits_line = false;
        let g = flow.gap(x, y);
        let g_rate = vy + flow.a * vx;
        match mode {
            Mode::Below => {
                let tl = -g / g_rate;
                if tl < dur {
                    dur = tl;
                    hits_line = true;
                }
            }
            Mode::Refracted if g > flow.line_tol && g_rate < 0.0 => {
                let tl = g / -g_rate;
                if tl < dur {
                    dur = tl;
                    hits_line = true;
                }
            }
            _ => {}
        }
        let mut exit = None;
        if vx < 0.0 && x + vx * dur < 0.0 {
            exit = Some(x / -vx);
        }
        if vy < 0.0 && y + vy * dur < 0.0 {
            let ty = y / -vy;
            exit = Some(exit.map_or(ty, |tx: f64| tx.min(ty)));
        }
        if let Some(te) = exit {
            paid += rate * discounted_length(flow.q, t, t + te);
            let (xe, ye) = (x + vx * te, y + vy * te);
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(t + te, xe, ye, Event::Ruin);
            }
            return (xe, ye, t + te, paid, Some(t + te));
        }
        paid += rate * discounted_length(flow.q, t, t + dur);
        x += vx * dur;
        y += vy * dur;
        t += dur;
        let along_line = g.abs() <= flow.line_tol && g_rate.abs() <= flow.line_tol * (1.0 + vx.abs());
        if hits_line || along_line {
            y = flow.b - flow.a * x;
        }
        if hits_line {
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(t, x, y, Event::Barrier);
            }
        } else {
            t = end;
        }
        if guard > 64 {
            // Degenerate geometry; finish the interval in the current mode.
            let (vx, vy, rate) = flow.velocity(flow.mode(x, y));
            paid += rate * discounted_length(flow.q, t, end);
            x += vx * (end - t);
            y += vy * (end - t);
            t = end;
        }
    }
    (x, y, t, paid, None)
}

/// One path of the refracted process. Claims hit both companies; the path
/// ends at ruin or is censored at `max_time`.
pub(crate) fn run<R: Rng + ?Sized>(
    u1: f64,
    u2: f64,
    flow: &Flow,
    params: &ModelParams,
    max_time: f64,
    rng: &mut R,
    mut trace: Option<&mut Trace>,
) -> PathOutcome {
    let (mut x, mut y, mut t) = (u1, u2, 0.0);
    let mut paid = 0.0;
    if let Some(tr) = trace.as_deref_mut() {
        tr.push(0.0, x, y, Event::Start);
    }
    if x < 0.0 || y < 0.0 {
        return PathOutcome {
            dividends: 0.0,
            ruin_time: Some(0.0),
        };
    }
    loop {
        let wait: f64 = rng.sample::<f64, _>(rand_distr::Exp1) / params.lambda;
        let censor = wait >= max_time - t;
        let span = if censor { max_time - t } else { wait };
        let (nx, ny, nt, d, ruin) = drift(flow, x, y, t, span, &mut trace);
        paid += d;
        if ruin.is_some() {
            return PathOutcome {
                dividends: paid,
                ruin_time: ruin,
            };
        }
        (x, y, t) = (nx, ny, nt);
        if censor {
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(t, x, y, Event::Censored);
            }
            return PathOutcome {
                dividends: paid,
                ruin_time: None,
            };
        }
        let claim = draw_claim(&params.claims, rng);
        x -= claim;
        y -= claim;
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(t, x, y, Event::Claim);
        }
        if x < 0.0 || y < 0.0 {
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(t, x, y, Event::Ruin);
            }
            return PathOutcome {
                dividends: paid,
                ruin_time: Some(t),
            };
        }
    }
}

/// Upper bound on dividends paid after `horizon`, discounted to time 0.
pub(crate) fn tail_bound(flow: &Flow, horizon: f64) -> f64 {
    (-flow.q * horizon).exp() * flow.delta0() / flow.q
}
