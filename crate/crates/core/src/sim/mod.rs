//! Monte Carlo simulation of the controlled reserve process.
//!
//! Paths are driven by event times only: between claims the state moves on
//! straight lines, so barrier hits, exits from the quadrant and returns to
//! a reset level are found by solving linear equations. The only bias left
//! is censoring at `max_time`, which is bounded and reported.
//!
//! Path `i` draws from ChaCha8 stream `i` of the master seed, and paths are
//! reduced in fixed-size chunks merged in index order, so estimates do not
//! depend on the number of worker threads.

mod barrier_path;
mod impulse_path;
mod trace;

use std::collections::BTreeMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use impulse_path::{simulate_impulse_cycle, CycleOutcome};
pub use trace::{Event, Trace, TraceRow};

use crate::error::{Error, Result};
use crate::impulse::ImpulseSpec;
use crate::model::{BarrierSpec, ClaimDistribution, ModelParams, Reserves};

/// Paths per reduction chunk.
const CHUNK: u64 = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_paths: u64,
    pub master_seed: u64,
    /// Censoring horizon; derived from `bias_tol` when absent.
    pub max_time: Option<f64>,
    pub moment_orders: Vec<u32>,
    /// Target for the censoring bias when `max_time` is derived.
    pub bias_tol: f64,
    /// Cap on renewal cycles per impulse path.
    pub max_cycles: usize,
}

impl SimConfig {
    pub fn new(n_paths: u64, master_seed: u64) -> Self {
        Self {
            n_paths,
            master_seed,
            max_time: None,
            moment_orders: vec![1],
            bias_tol: 1e-4,
            max_cycles: 1_000_000,
        }
    }

    pub fn with_moments(mut self, orders: &[u32]) -> Self {
        self.moment_orders = orders.to_vec();
        self
    }

    pub fn with_max_time(mut self, max_time: f64) -> Self {
        self.max_time = Some(max_time);
        self
    }

    fn check(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::InvalidInput("at least one path is required".into()));
        }
        if self.moment_orders.is_empty() || self.moment_orders.contains(&0) {
            return Err(Error::InvalidInput("moment orders must be positive integers".into()));
        }
        if let Some(t) = self.max_time {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::InvalidInput(format!("max_time must be positive, got {t}")));
            }
        }
        if !(self.bias_tol > 0.0) {
            return Err(Error::InvalidInput(format!(
                "bias tolerance must be positive, got {}",
                self.bias_tol
            )));
        }
        Ok(())
    }

    /// Horizon `T` with `e^{-q T} bound / q <= bias_tol`, where `bound` is the
    /// largest payout rate.
    fn horizon(&self, q: f64, bound: f64) -> f64 {
        self.max_time
            .unwrap_or_else(|| ((bound / (q * self.bias_tol)).ln() / q).max(1.0 / q))
    }
}

/// Deterministic random stream for path `index` of `master_seed`.
pub fn path_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

pub(crate) fn draw_claim<R: Rng + ?Sized>(claims: &ClaimDistribution, rng: &mut R) -> f64 {
    match claims {
        ClaimDistribution::Exponential { rate } => rng.sample::<f64, _>(rand_distr::Exp1) / rate,
        ClaimDistribution::Sampled(s) => {
            let mut adapter = DynRng(rng);
            s.sample(&mut adapter)
        }
    }
}

struct DynRng<'a, R: ?Sized>(&'a mut R);

impl<R: RngCore + ?Sized> RngCore for DynRng<'_, R> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

/// Discounted dividends of one path and its ruin time (`None` if censored).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    pub dividends: f64,
    pub ruin_time: Option<f64>,
}

/// Refracted process from `u` until ruin or `max_time`.
pub fn simulate_refracted_path<R: Rng + ?Sized>(
    u: Reserves,
    barrier: &BarrierSpec,
    params: &ModelParams,
    max_time: f64,
    rng: &mut R,
) -> PathOutcome {
    let flow = barrier_path::Flow::new(barrier, params);
    barrier_path::run(u.u1, u.u2, &flow, params, max_time, rng, None)
}

/// Impulse-controlled process from the reset point until ruin, `max_time`
/// or `max_cycles` completed cycles.
pub fn simulate_impulse_path<R: Rng + ?Sized>(
    spec: &ImpulseSpec,
    params: &ModelParams,
    max_time: f64,
    max_cycles: usize,
    rng: &mut R,
) -> PathOutcome {
    impulse_path::run(spec, params, max_time, max_cycles, rng, None)
}

/// Event log of path `index`, identical to the path used by the estimators.
pub fn trace_barrier_path(
    u: Reserves,
    barrier: &BarrierSpec,
    params: &ModelParams,
    cfg: &SimConfig,
    index: u64,
) -> Result<(PathOutcome, Trace)> {
    cfg.check()?;
    let flow = barrier_path::Flow::new(barrier, params);
    let horizon = cfg.horizon(params.q, barrier.delta0());
    let mut tr = Trace::default();
    let mut rng = path_rng(cfg.master_seed, index);
    let out = barrier_path::run(u.u1, u.u2, &flow, params, horizon, &mut rng, Some(&mut tr));
    Ok((out, tr))
}

pub fn trace_impulse_path(
    spec: &ImpulseSpec,
    params: &ModelParams,
    cfg: &SimConfig,
    index: u64,
) -> Result<(PathOutcome, Trace)> {
    cfg.check()?;
    let horizon = cfg.horizon(params.q, impulse_rate_bound(spec, params));
    let mut tr = Trace::default();
    let mut rng = path_rng(cfg.master_seed, index);
    let out = impulse_path::run(spec, params, horizon, cfg.max_cycles, &mut rng, Some(&mut tr));
    Ok((out, tr))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DividendEstimate {
    /// Order `n` to the estimate of `E[D^n]`.
    pub moments: BTreeMap<u32, MomentEstimate>,
    /// Mean ruin time over paths that were ruined before `max_time`.
    pub ruin_time_mean: Option<MomentEstimate>,
    pub ruined_paths: u64,
    pub censored: u64,
    /// Bound on the dividends lost to censoring, discounted to time 0.
    pub truncation_bias_bound: f64,
    pub max_time: f64,
    pub n_paths: u64,
}

impl DividendEstimate {
    pub fn mean(&self) -> Option<MomentEstimate> {
        self.moments.get(&1).copied()
    }
}

/// Streaming mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&mut self, o: &Welford) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *o;
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n as f64 / n as f64;
        self.m2 += o.m2 + d * d * self.n as f64 * o.n as f64 / n as f64;
        self.n = n;
    }

    fn estimate(&self) -> MomentEstimate {
        let var = if self.n > 1 { self.m2 / (self.n - 1) as f64 } else { 0.0 };
        MomentEstimate {
            mean: self.mean,
            std_error: (var.max(0.0) / self.n as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Chunk {
    moments: Vec<Welford>,
    ruin: Welford,
    censored: u64,
}

impl Chunk {
    fn merge(&mut self, o: &Chunk) {
        for (a, b) in self.moments.iter_mut().zip(&o.moments) {
            a.merge(b);
        }
        self.ruin.merge(&o.ruin);
        self.censored += o.censored;
    }
}

fn run_paths<F>(cfg: &SimConfig, path: F) -> (Chunk, Vec<u32>)
where
    F: Fn(&mut ChaCha8Rng) -> PathOutcome + Sync,
{
    let mut orders = cfg.moment_orders.clone();
    orders.sort_unstable();
    orders.dedup();
    let n_chunks = cfg.n_paths.div_ceil(CHUNK);
    let chunks: Vec<Chunk> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Chunk {
                moments: vec![Welford::default(); orders.len()],
                ..Chunk::default()
            };
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(cfg.n_paths);
            for i in lo..hi {
                let mut rng = path_rng(cfg.master_seed, i);
                let out = path(&mut rng);
                for (w, &n) in acc.moments.iter_mut().zip(&orders) {
                    w.push(out.dividends.powi(n as i32));
                }
                match out.ruin_time {
                    Some(t) => acc.ruin.push(t),
                    None => acc.censored += 1,
                }
            }
            acc
        })
        .collect();
    let mut total = Chunk {
        moments: vec![Welford::default(); orders.len()],
        ..Chunk::default()
    };
    for c in &chunks {
        total.merge(c);
    }
    (total, orders)
}

fn finish(total: Chunk, orders: Vec<u32>, bias: f64, max_time: f64, n_paths: u64) -> DividendEstimate {
    DividendEstimate {
        moments: orders
            .into_iter()
            .zip(total.moments.iter().map(Welford::estimate))
            .collect(),
        ruin_time_mean: (total.ruin.n > 0).then(|| total.ruin.estimate()),
        ruined_paths: total.ruin.n,
        censored: total.censored,
        truncation_bias_bound: bias,
        max_time,
        n_paths,
    }
}

/// Moments of the discounted dividends under refraction at the barrier.
pub fn estimate_barrier_moments(
    u: Reserves,
    barrier: &BarrierSpec,
    params: &ModelParams,
    cfg: &SimConfig,
) -> Result<DividendEstimate> {
    cfg.check()?;
    if u.u1 < 0.0 || u.u2 < 0.0 {
        return Err(Error::InvalidInput(format!(
            "start ({}, {}) lies outside the quadrant",
            u.u1, u.u2
        )));
    }
    let flow = barrier_path::Flow::new(barrier, params);
    let horizon = cfg.horizon(params.q, barrier.delta0());
    let (total, orders) = run_paths(cfg, |rng| barrier_path::run(u.u1, u.u2, &flow, params, horizon, rng, None));
    let bias = barrier_path::tail_bound(&flow, horizon);
    Ok(finish(total, orders, bias, horizon, cfg.n_paths))
}

/// Rough bound on the payout rate of the impulse policy: premium income of
/// company 1 plus the cost of one payment per claim.
fn impulse_rate_bound(spec: &ImpulseSpec, params: &ModelParams) -> f64 {
    params.c1 + params.lambda * spec.cost + params.q * spec.u1
}

/// Moments of the discounted dividends under the impulse policy.
pub fn estimate_impulse_moments(
    spec: &ImpulseSpec,
    params: &ModelParams,
    cfg: &SimConfig,
) -> Result<DividendEstimate> {
    cfg.check()?;
    let rate = impulse_rate_bound(spec, params);
    let horizon = cfg.horizon(params.q, rate);
    let (total, orders) = run_paths(cfg, |rng| {
        impulse_path::run(spec, params, horizon, cfg.max_cycles, rng, None)
    });
    let bias = (-params.q * horizon).exp() * rate / params.q;
    Ok(finish(total, orders, bias, horizon, cfg.n_paths))
}

/// Per-cycle quantities estimated from independent single cycles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleEstimate {
    /// `E[e^{-q L}; completed]`, `L` the cycle length.
    pub p: MomentEstimate,
    /// Discounted payout of one cycle.
    pub a: MomentEstimate,
    /// `E[tau e^{-q tau}; completed]` for the catch-up time `tau`.
    pub tau_moment: MomentEstimate,
    pub n_cycles: u64,
}

pub fn estimate_impulse_cycle(spec: &ImpulseSpec, params: &ModelParams, cfg: &SimConfig) -> Result<CycleEstimate> {
    cfg.check()?;
    let q = params.q;
    let n_chunks = cfg.n_paths.div_ceil(CHUNK);
    let chunks: Vec<[Welford; 3]> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = [Welford::default(); 3];
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(cfg.n_paths);
            for i in lo..hi {
                let mut rng = path_rng(cfg.master_seed, i);
                let cyc = simulate_impulse_cycle(spec, params, &mut rng, 0.0, f64::INFINITY, None);
                let (p, a, tm) = match (cyc.catch_up, cyc.lump(spec, params)) {
                    (Some(tau), Some(lump)) => {
                        let d = (-q * (cyc.claim_time + tau)).exp();
                        (d, cyc.continuous + d * lump, tau * (-q * tau).exp())
                    }
                    _ => (0.0, cyc.continuous, 0.0),
                };
                acc[0].push(p);
                acc[1].push(a);
                acc[2].push(tm);
            }
            acc
        })
        .collect();
    let mut total = [Welford::default(); 3];
    for c in &chunks {
        for (t, x) in total.iter_mut().zip(c) {
            t.merge(x);
        }
    }
    Ok(CycleEstimate {
        p: total[0].estimate(),
        a: total[1].estimate(),
        tau_moment: total[2].estimate(),
        n_cycles: cfg.n_paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::exponential(4.0, 3.0, 1.0, 2.0, 0.1).unwrap()
    }

    #[test]
    fn same_seed_same_estimate() {
        let p = params();
        let bar = BarrierSpec::reflection(0.1, 14.0, &p).unwrap();
        let cfg = SimConfig::new(3000, 7).with_moments(&[1, 2]);
        let a = estimate_barrier_moments(Reserves::at(1.0, 2.0), &bar, &p, &cfg).unwrap();
        let b = estimate_barrier_moments(Reserves::at(1.0, 2.0), &bar, &p, &cfg).unwrap();
        assert_eq!(a, b);
        let m1 = a.moments[&1];
        let m2 = a.moments[&2];
        assert!(m2.mean >= m1.mean * m1.mean);
        assert!(m1.std_error > 0.0);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let p = params();
        let bar = BarrierSpec::reflection(0.2, 8.0, &p).unwrap();
        let cfg = SimConfig::new(5000, 11);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| estimate_barrier_moments(Reserves::at(1.0, 2.0), &bar, &p, &cfg).unwrap());
        let b = four.install(|| estimate_barrier_moments(Reserves::at(1.0, 2.0), &bar, &p, &cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn welford_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.3).collect();
        let mut whole = Welford::default();
        xs.iter().for_each(|&x| whole.push(x));
        let mut left = Welford::default();
        let mut right = Welford::default();
        xs[..333].iter().for_each(|&x| left.push(x));
        xs[333..].iter().for_each(|&x| right.push(x));
        left.merge(&right);
        assert!((left.mean - whole.mean).abs() < 1e-12);
        assert!((left.m2 - whole.m2).abs() < 1e-8 * whole.m2);
    }

    #[test]
    fn censoring_bound_shrinks_with_horizon() {
        let p = params();
        let bar = BarrierSpec::reflection(0.1, 14.0, &p).unwrap();
        let short = SimConfig::new(2000, 1).with_max_time(40.0);
        let long = SimConfig::new(2000, 1).with_max_time(80.0);
        let a = estimate_barrier_moments(Reserves::at(1.0, 2.0), &bar, &p, &short).unwrap();
        let b = estimate_barrier_moments(Reserves::at(1.0, 2.0), &bar, &p, &long).unwrap();
        assert!(b.truncation_bias_bound < a.truncation_bias_bound);
        let diff = b.mean().unwrap().mean - a.mean().unwrap().mean;
        assert!((0.0..=a.truncation_bias_bound).contains(&diff));
    }

    #[test]
    fn deterministic_path_without_claims() {
        // A tiny claim rate makes a claim before ruin essentially impossible.
        let p = ModelParams::exponential(4.0, 3.0, 1e-12, 2.0, 0.1).unwrap();
        let bar = BarrierSpec::reflection(0.1, 14.0, &p).unwrap();
        let u = Reserves::at(2.0, bar.line(2.0));
        let mut rng = path_rng(5, 0);
        let out = simulate_refracted_path(u, &bar, &p, 1e3, &mut rng);
        let d0 = bar.delta0();
        assert!((out.dividends - d0 * (1.0 - (-0.2f64).exp()) / 0.1).abs() < 1e-12);
        assert!((out.ruin_time.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_claims_are_simulated() {
        use crate::model::InverseCdf;
        use std::sync::Arc;
        let s = InverseCdf::new("uniform(0,1)", 0.5, |u| u);
        let p = ModelParams::new(4.0, 3.0, 1.0, ClaimDistribution::Sampled(Arc::new(s)), 0.1).unwrap();
        let bar = BarrierSpec::reflection(0.1, 14.0, &p).unwrap();
        let est = estimate_barrier_moments(Reserves::at(1.0, 2.0), &bar, &p, &SimConfig::new(500, 3)).unwrap();
        assert!(est.mean().unwrap().mean > 0.0);
    }

    #[test]
    fn bad_config_rejected() {
        let p = params();
        let bar = BarrierSpec::reflection(0.1, 14.0, &p).unwrap();
        let u = Reserves::at(1.0, 2.0);
        assert!(estimate_barrier_moments(u, &bar, &p, &SimConfig::new(0, 1)).is_err());
        assert!(estimate_barrier_moments(u, &bar, &p, &SimConfig::new(10, 1).with_moments(&[0])).is_err());
    }
}
