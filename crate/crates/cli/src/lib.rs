//! `tandem`: valuation, simulation, table reproduction, barrier search and
//! self-validation for the two-company dividend model.
//!
//! Exit codes: 0 success, 1 validation failure, 2 bad input, 3 numerical
//! non-convergence.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod grid;
pub mod validate;

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use tandem_core::barrier::{v1_barrier, DEFAULT_TOL};
use tandem_core::csvio::{num, write_gamma_csv, write_sweep_csv, write_table_csv};
use tandem_core::gamma::{build_sequences, DEFAULT_MAX_TERMS};
use tandem_core::impulse::{impulse_v1, ImpulseSpec, LowOptions, LowRoute};
use tandem_core::optimize::{refine_barrier, sweep_barrier, SweepCell, SweepResult};
use tandem_core::reference;
use tandem_core::sim::{
    estimate_barrier_moments, estimate_impulse_cycle, estimate_impulse_moments, trace_barrier_path,
    trace_impulse_path, DividendEstimate, MomentEstimate, SimConfig,
};
use tandem_core::{BarrierSpec, ModelParams, Reserves};

use config::{ConfigError, Route, RunConfig};
use grid::{parse_grid, GridError};
use validate::Check;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] tandem_core::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("bad grid: {0}")]
    Grid(#[from] GridError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("{0}")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::Validation(_) => EXIT_VALIDATION,
            _ => EXIT_INPUT,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "tandem", version, about = "Dividend valuation for two insurers sharing claims")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    c1: Option<f64>,
    #[arg(long, global = true)]
    c2: Option<f64>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Exponential claim rate.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Discount rate.
    #[arg(long, global = true)]
    q: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Series value under reflection at the barrier y = b - a x.
    ValueBarrier(BarrierArgs),
    /// Value of the impulse policy resetting to (u1, u2) at cost K.
    ValueImpulse(ImpulseArgs),
    /// Monte Carlo estimate of dividend moments.
    Simulate(SimulateArgs),
    /// Recompute a reference table and diff it against the stored values.
    Table(TableArgs),
    /// Sweep (a, b) on a grid and optionally refine the best cell.
    Optimize(OptimizeArgs),
    /// Run the residual, invariant and transform checks.
    Validate(ValidateArgs),
    /// Dump the exponent sequences of a barrier as CSV.
    Gamma(GammaArgs),
}

#[derive(Args, Debug, Default)]
struct PointArgs {
    #[arg(long)]
    u1: Option<f64>,
    #[arg(long)]
    u2: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct LineArgs {
    /// Barrier slope.
    #[arg(long)]
    a: Option<f64>,
    /// Barrier height at u1 = 0.
    #[arg(long)]
    b: Option<f64>,
}

#[derive(Args, Debug)]
struct BarrierArgs {
    #[command(flatten)]
    point: PointArgs,
    #[command(flatten)]
    line: LineArgs,
    /// Relative truncation tolerance of the series.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum RouteArg {
    Characteristic,
    CrossingTransform,
}

#[derive(Args, Debug)]
struct ImpulseArgs {
    #[command(flatten)]
    point: PointArgs,
    /// Fixed cost per payment.
    #[arg(long)]
    cost: Option<f64>,
    /// Solver for u1 <= u2.
    #[arg(long, value_enum)]
    route: Option<RouteArg>,
    /// Time steps of the characteristic grid.
    #[arg(long)]
    grid_steps: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SimKind {
    Barrier,
    Impulse,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    kind: SimKind,
    #[arg(long)]
    paths: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Moment orders, e.g. 1,2.
    #[arg(long, value_delimiter = ',')]
    moments: Option<Vec<u32>>,
    #[command(flatten)]
    point: PointArgs,
    #[command(flatten)]
    line: LineArgs,
    #[arg(long)]
    cost: Option<f64>,
    /// Censoring horizon; derived from --bias-tol when absent.
    #[arg(long)]
    max_time: Option<f64>,
    #[arg(long)]
    bias_tol: Option<f64>,
    #[arg(long)]
    max_cycles: Option<usize>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Also estimate p, A and the catch-up moment from single cycles.
    #[arg(long)]
    cycle: bool,
    /// Write the event log of one path as CSV.
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    /// Index of the traced path.
    #[arg(long, default_value_t = 0)]
    trace_path: u64,
}

#[derive(Args, Debug)]
struct TableArgs {
    /// Table number: 1, 2 or 3.
    number: u8,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Fail (exit 1) if any cell differs by more than --diff-tol.
    #[arg(long)]
    check: bool,
    #[arg(long, default_value_t = 0.05)]
    diff_tol: f64,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[command(flatten)]
    point: PointArgs,
    /// Slopes, e.g. 0.1,0.2,0.5,1 or 0.1:0.1:1.
    #[arg(long)]
    a_grid: String,
    /// Heights, e.g. 6,8,14 or 6:2:28.
    #[arg(long)]
    b_grid: String,
    /// Golden-section refinement from the best cell within the grid box.
    #[arg(long)]
    refine: bool,
    /// Series evaluations allowed for the refinement.
    #[arg(long, default_value_t = 400)]
    budget: usize,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    line: LineArgs,
    /// Interior points for the generator residual.
    #[arg(long, default_value_t = 20)]
    points: usize,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-4)]
    h: f64,
    /// Also check a dump written by `tandem gamma` (slope taken from --a).
    #[arg(long, value_name = "FILE")]
    gamma_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GammaArgs {
    #[command(flatten)]
    line: LineArgs,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_INPUT
                }
            };
        }
    };
    match dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

struct Ctx {
    cfg: RunConfig,
    params: ModelParams,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

fn out_err(e: io::Error) -> CliError {
    CliError::Io {
        path: "<output>".into(),
        msg: e.to_string(),
    }
}

fn load(cli: &Cli) -> CliResult<Ctx> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            RunConfig::from_toml_str(&text)?
        }
        None => RunConfig::default(),
    };
    cfg.c1 = cli.c1.or(cfg.c1);
    cfg.c2 = cli.c2.or(cfg.c2);
    cfg.lambda = cli.lambda.or(cfg.lambda);
    cfg.alpha = cli.alpha.or(cfg.alpha);
    cfg.q = cli.q.or(cfg.q);
    cfg.check()?;
    let params = cfg.model()?;
    Ok(Ctx { cfg, params })
}

fn pick(flag: Option<f64>, cfg: Option<f64>, name: &str, key: &str) -> CliResult<f64> {
    flag.or(cfg)
        .ok_or_else(|| CliError::Usage(format!("missing --{name} (or `{key}` in the config)")))
}

impl Ctx {
    fn reserves(&self, p: &PointArgs) -> CliResult<Reserves> {
        let u1 = pick(p.u1, self.cfg.reserves.u1, "u1", "reserves.u1")?;
        let u2 = pick(p.u2, self.cfg.reserves.u2, "u2", "reserves.u2")?;
        Ok(Reserves::new(u1, u2)?)
    }

    fn line(&self, l: &LineArgs) -> CliResult<(f64, f64)> {
        Ok((
            pick(l.a, self.cfg.barrier.a, "a", "barrier.a")?,
            pick(l.b, self.cfg.barrier.b, "b", "barrier.b")?,
        ))
    }

    fn barrier(&self, l: &LineArgs) -> CliResult<BarrierSpec> {
        let (a, b) = self.line(l)?;
        Ok(BarrierSpec::reflection(a, b, &self.params)?)
    }

    fn impulse(&self, p: &PointArgs, cost: Option<f64>) -> CliResult<ImpulseSpec> {
        let u = self.reserves(p)?;
        let k = pick(cost, self.cfg.impulse.cost, "cost", "impulse.cost")?;
        Ok(ImpulseSpec::new(u.u1, u.u2, k)?)
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<i32> {
    let ctx = load(cli)?;
    match &cli.command {
        Command::ValueBarrier(a) => value_barrier(&ctx, a, out),
        Command::ValueImpulse(a) => value_impulse(&ctx, a, out),
        Command::Simulate(a) => simulate(&ctx, a, out),
        Command::Table(a) => table(&ctx, a, out, err),
        Command::Optimize(a) => optimize(&ctx, a, out, err),
        Command::Validate(a) => run_validate(&ctx, a, out),
        Command::Gamma(a) => gamma(&ctx, a, out),
    }
}

fn line(out: &mut dyn Write, key: &str, value: impl std::fmt::Display, tag: &str) -> CliResult<()> {
    writeln!(out, "{key} = {value} [{tag}]").map_err(out_err)
}

fn real(out: &mut dyn Write, key: &str, value: f64, tag: &str) -> CliResult<()> {
    line(out, key, num(value), tag)
}

fn mc_line(out: &mut dyn Write, key: &str, est: MomentEstimate) -> CliResult<()> {
    writeln!(out, "{key} = {} [mc] se = {}", num(est.mean), num(est.std_error)).map_err(out_err)
}

fn value_barrier(ctx: &Ctx, args: &BarrierArgs, out: &mut dyn Write) -> CliResult<i32> {
    let u = ctx.reserves(&args.point)?;
    let bar = ctx.barrier(&args.line)?;
    let tol = args.tol.or(ctx.cfg.tolerance.series).unwrap_or(DEFAULT_TOL);
    if !(tol > 0.0 && tol < 1.0) {
        return Err(CliError::Usage(format!("--tol must lie in (0, 1), got {tol}")));
    }
    let v = v1_barrier(u, &bar, &ctx.params, tol)?;
    real(out, "v1", v.value, "series")?;
    line(out, "terms", v.terms_used, "series")?;
    real(out, "tail", v.tail_estimate, "series")?;
    line(out, "sequences", &v.sequences_ref, "series")?;
    Ok(EXIT_OK)
}

fn value_impulse(ctx: &Ctx, args: &ImpulseArgs, out: &mut dyn Write) -> CliResult<i32> {
    let spec = ctx.impulse(&args.point, args.cost)?;
    let route = match args.route {
        Some(RouteArg::Characteristic) => LowRoute::Characteristic,
        Some(RouteArg::CrossingTransform) => LowRoute::CrossingTransform,
        None => match ctx.cfg.impulse.route.unwrap_or_default() {
            Route::Characteristic => LowRoute::Characteristic,
            Route::CrossingTransform => LowRoute::CrossingTransform,
        },
    };
    let opts = LowOptions {
        route,
        grid_steps: args.grid_steps.or(ctx.cfg.impulse.grid_steps),
        ..LowOptions::default()
    };
    let v = impulse_v1(&spec, &ctx.params, &opts)?;
    let tag = v.method.tag();
    real(out, "v1", v.value, tag)?;
    real(out, "p", v.p, tag)?;
    real(out, "a", v.a, tag)?;
    real(out, "tau_moment", v.tau_moment, tag)?;
    real(out, "claim_upper_limit", v.claim_upper_limit, tag)?;
    writeln!(out, "method = {tag}").map_err(out_err)?;
    if let Some(r) = v.route {
        writeln!(out, "route = {}", r.tag()).map_err(out_err)?;
    }
    if v.loss_making {
        writeln!(out, "warning = each payment loses money on average (A < 0)").map_err(out_err)?;
    }
    Ok(EXIT_OK)
}

fn write_estimate(out: &mut dyn Write, est: &DividendEstimate, seed: u64) -> CliResult<()> {
    writeln!(out, "method = mc").map_err(out_err)?;
    line(out, "paths", est.n_paths, "mc")?;
    line(out, "seed", seed, "mc")?;
    real(out, "max_time", est.max_time, "mc")?;
    for (n, m) in &est.moments {
        mc_line(out, &format!("E[D^{n}]"), *m)?;
    }
    match est.ruin_time_mean {
        Some(m) => mc_line(out, "ruin_time_mean", m)?,
        None => writeln!(out, "ruin_time_mean = none [mc]").map_err(out_err)?,
    }
    line(out, "ruined", est.ruined_paths, "mc")?;
    line(out, "censored", est.censored, "mc")?;
    real(out, "truncation_bias_bound", est.truncation_bias_bound, "mc")?;
    Ok(())
}

fn simulate(ctx: &Ctx, args: &SimulateArgs, out: &mut dyn Write) -> CliResult<i32> {
    let s = &ctx.cfg.simulation;
    let paths = args.paths.or(s.paths).unwrap_or(100_000);
    let seed = args.seed.or(s.seed).unwrap_or(0);
    let mut cfg = SimConfig::new(paths, seed);
    if let Some(m) = args.moments.as_ref().or(s.moments.as_ref()) {
        cfg.moment_orders = m.clone();
    }
    cfg.max_time = args.max_time.or(s.max_time);
    if let Some(b) = args.bias_tol.or(s.bias_tol) {
        cfg.bias_tol = b;
    }
    if let Some(c) = args.max_cycles.or(s.max_cycles) {
        cfg.max_cycles = c;
    }
    let threads = args.threads.or(s.threads);
    if threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let trace_to = args.trace.clone().or(ctx.cfg.output.trace.clone());

    let body = |out: &mut dyn Write| -> CliResult<()> {
        match args.kind {
            SimKind::Barrier => {
                let u = ctx.reserves(&args.point)?;
                let bar = ctx.barrier(&args.line)?;
                let est = estimate_barrier_moments(u, &bar, &ctx.params, &cfg)?;
                write_estimate(out, &est, seed)?;
                if let Some(path) = &trace_to {
                    let (_, tr) = trace_barrier_path(u, &bar, &ctx.params, &cfg, args.trace_path)?;
                    let f = fs::File::create(path).map_err(|e| io_err(path, e))?;
                    tr.write_csv(io::BufWriter::new(f))?;
                }
            }
            SimKind::Impulse => {
                let spec = ctx.impulse(&args.point, args.cost)?;
                let est = estimate_impulse_moments(&spec, &ctx.params, &cfg)?;
                write_estimate(out, &est, seed)?;
                if args.cycle {
                    let c = estimate_impulse_cycle(&spec, &ctx.params, &cfg)?;
                    mc_line(out, "cycle_p", c.p)?;
                    mc_line(out, "cycle_a", c.a)?;
                    mc_line(out, "cycle_tau_moment", c.tau_moment)?;
                }
                if let Some(path) = &trace_to {
                    let (_, tr) = trace_impulse_path(&spec, &ctx.params, &cfg, args.trace_path)?;
                    let f = fs::File::create(path).map_err(|e| io_err(path, e))?;
                    tr.write_csv(io::BufWriter::new(f))?;
                }
            }
        }
        Ok(())
    };
    let mut buf: Vec<u8> = Vec::new();
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?;
            pool.install(|| body(&mut buf))?;
        }
        None => body(&mut buf)?,
    }
    out.write_all(&buf).map_err(out_err)?;
    Ok(EXIT_OK)
}

/// Writes CSV produced by `f` to `path`, or to `out` when absent.
fn csv_to<F>(path: Option<&Path>, out: &mut dyn Write, f: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn Write) -> tandem_core::Result<()>,
{
    match path {
        Some(p) => {
            let mut file = io::BufWriter::new(fs::File::create(p).map_err(|e| io_err(p, e))?);
            f(&mut file)?;
            file.flush().map_err(|e| io_err(p, e))
        }
        None => Ok(f(out)?),
    }
}

/// Recomputes reference table `number` with `params`.
pub fn compute_table(number: u8, params: &ModelParams) -> CliResult<(SweepResult, reference::ReferenceTable)> {
    let table = reference::table(number)
        .ok_or_else(|| CliError::Usage(format!("no table {number}; choose 1, 2 or 3")))?;
    let res = if number == 3 {
        let cells = table
            .cells
            .iter()
            .map(|c| {
                let u = Reserves::at(c.u1, c.u2);
                let outcome = BarrierSpec::reflection(c.a, c.b, params)
                    .and_then(|bar| v1_barrier(u, &bar, params, DEFAULT_TOL));
                SweepCell {
                    a: c.a,
                    b: c.b,
                    u,
                    outcome,
                }
            })
            .collect();
        SweepResult::from_cells(cells)
    } else {
        let (a, b) = table.grid();
        let c = table.cells[0];
        sweep_barrier(Reserves::at(c.u1, c.u2), &a, &b, params)?
    };
    Ok((res, table))
}

fn table(ctx: &Ctx, args: &TableArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<i32> {
    if !(args.diff_tol > 0.0) {
        return Err(CliError::Usage("--diff-tol must be positive".into()));
    }
    let (res, table) = compute_table(args.number, &ctx.params)?;
    let path = args.out.clone().or(ctx.cfg.output.csv.clone());
    csv_to(path.as_deref(), out, |w| write_table_csv(&res, &table, w))?;

    let mut max_diff: f64 = 0.0;
    let mut within = 0;
    for (cell, r) in res.cells.iter().zip(&table.cells) {
        match cell.value() {
            Some(v) => {
                let d = (v - r.value).abs();
                max_diff = max_diff.max(d);
                if d <= args.diff_tol {
                    within += 1;
                }
            }
            None => max_diff = f64::INFINITY,
        }
    }
    let n = table.cells.len();
    let w = |e: io::Error| out_err(e);
    writeln!(err, "table {}: {}", table.number, table.caption).map_err(w)?;
    writeln!(err, "max_abs_diff = {max_diff} [series]").map_err(w)?;
    writeln!(err, "cells_within_{} = {within}/{n}", args.diff_tol).map_err(w)?;
    let mut argmax_ok = true;
    if let Some(best) = res.best() {
        let v = best.value().unwrap_or(f64::NAN);
        writeln!(err, "argmax = a {} b {} u ({}, {}) v1 = {v} [series]", best.a, best.b, best.u.u1, best.u.u2)
            .map_err(w)?;
        if let Some((a, b)) = table.reported_argmax {
            writeln!(err, "reference_argmax = a {a} b {b}").map_err(w)?;
            argmax_ok = (best.a, best.b) == (a, b);
        }
    }
    if args.check && (within < n || !argmax_ok) {
        return Err(CliError::Validation(format!(
            "table {} disagrees with the reference values ({within}/{n} cells within {})",
            table.number, args.diff_tol
        )));
    }
    Ok(EXIT_OK)
}

fn optimize(ctx: &Ctx, args: &OptimizeArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<i32> {
    let u = ctx.reserves(&args.point)?;
    let a_grid = parse_grid(&args.a_grid)?;
    let b_grid = parse_grid(&args.b_grid)?;
    let res = sweep_barrier(u, &a_grid, &b_grid, &ctx.params)?;
    let path = args.out.clone().or(ctx.cfg.output.csv.clone());
    csv_to(path.as_deref(), out, |w| write_sweep_csv(&res, w))?;
    let w = |e: io::Error| out_err(e);
    for c in res.failures() {
        if let Err(e) = &c.outcome {
            writeln!(err, "cell ({}, {}) failed: {e}", c.a, c.b).map_err(w)?;
        }
    }
    let Some(best) = res.best() else {
        return Err(CliError::Usage("no grid cell could be valued".into()));
    };
    if args.refine {
        let span = |g: &[f64]| {
            g.iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
        };
        let r = refine_barrier(u, &ctx.params, span(&a_grid), span(&b_grid), (best.a, best.b), args.budget)?;
        writeln!(err, "refined_a = {} [series]", r.a).map_err(w)?;
        writeln!(err, "refined_b = {} [series]", r.b).map_err(w)?;
        writeln!(err, "refined_v1 = {} [series]", r.value).map_err(w)?;
        writeln!(err, "evaluations = {}", r.evaluations).map_err(w)?;
        if r.budget_exhausted {
            writeln!(err, "warning = refinement budget exhausted; best point so far reported").map_err(w)?;
        }
    }
    Ok(EXIT_OK)
}

fn run_validate(ctx: &Ctx, args: &ValidateArgs, out: &mut dyn Write) -> CliResult<i32> {
    if !(args.h > 0.0) || args.points == 0 {
        return Err(CliError::Usage("--h must be positive and --points at least 1".into()));
    }
    let a = args.line.a.or(ctx.cfg.barrier.a).unwrap_or(0.1);
    let b = args.line.b.or(ctx.cfg.barrier.b).unwrap_or(14.0);
    let bar = BarrierSpec::reflection(a, b, &ctx.params)?;
    let mut checks: Vec<Check> = validate::gamma_suite(&ctx.params);
    checks.extend(validate::barrier_suite(&ctx.params, &bar, args.points, args.h)?);
    checks.extend(validate::scale_suite(&ctx.params)?);
    if let Some(path) = &args.gamma_csv {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        checks.extend(validate::gamma_csv_suite(&text, a, &ctx.params)?);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    for c in &checks {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        writeln!(out, "{mark} {}: {}", c.name, c.detail).map_err(out_err)?;
    }
    writeln!(out, "checks = {}, failed = {failed}", checks.len()).map_err(out_err)?;
    if failed > 0 {
        return Err(CliError::Validation(format!("{failed} check(s) failed")));
    }
    Ok(EXIT_OK)
}

fn gamma(ctx: &Ctx, args: &GammaArgs, out: &mut dyn Write) -> CliResult<i32> {
    let bar = ctx.barrier(&args.line)?;
    let tol = ctx.cfg.tolerance.series.unwrap_or(DEFAULT_TOL);
    let seq = build_sequences(&bar, &ctx.params, DEFAULT_MAX_TERMS, tol)?;
    let path = args.out.clone().or(ctx.cfg.output.csv.clone());
    csv_to(path.as_deref(), out, |w| write_gamma_csv(&seq, w))?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_with(std::iter::once("tandem").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn corner_value_is_zero() {
        let (code, out, _) = run_capture(&["value-barrier", "--u1", "0", "--u2", "14", "--a", "0.1", "--b", "14"]);
        assert_eq!(code, 0);
        let v: f64 = out.lines().next().unwrap().split_whitespace().nth(2).unwrap().parse().unwrap();
        assert!(v.abs() < 1e-6);
        assert!(out.contains("[series]"));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run_capture(&["value-barrier", "--u1", "1"]).0, EXIT_INPUT);
        assert_eq!(run_capture(&["value-barrier", "--u1", "3", "--u2", "2", "--a", "0.1", "--b", "14"]).0, EXIT_INPUT);
        assert_eq!(run_capture(&["--q", "-1", "gamma", "--a", "0.1", "--b", "14"]).0, EXIT_INPUT);
        assert_eq!(run_capture(&["--c1", "2", "gamma", "--a", "0.1", "--b", "14"]).0, EXIT_INPUT);
        assert_eq!(run_capture(&["table", "4"]).0, EXIT_INPUT);
        assert_eq!(run_capture(&["frobnicate"]).0, EXIT_INPUT);
        assert_eq!(run_capture(&["--help"]).0, EXIT_OK);
        let numerical = CliError::Core(tandem_core::Error::NonConvergence {
            max_terms: 3,
            tail_ratio: 1.0,
        });
        assert_eq!(numerical.exit_code(), EXIT_NUMERICAL);
    }

    #[test]
    fn impulse_prints_method() {
        let (code, out, _) = run_capture(&["value-impulse", "--u1", "3", "--u2", "2", "--cost", "0.5"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("v1 = 25.16"));
        assert!(out.contains("method = closed-form"));
    }

    #[test]
    fn simulate_is_repeatable() {
        let args = ["simulate", "barrier", "--paths", "500", "--seed", "7", "--u1", "1", "--u2", "2", "--a", "0.1", "--b", "14", "--moments", "1,2"];
        let (c1, o1, _) = run_capture(&args);
        let (c2, o2, _) = run_capture(&args);
        assert_eq!((c1, c2), (0, 0));
        assert_eq!(o1, o2);
        assert!(o1.contains("E[D^2] = "));
        assert!(o1.contains("] se = "));
    }

    #[test]
    fn gamma_dump_feeds_validation() {
        let (code, out, _) = run_capture(&["gamma", "--a", "0.2", "--b", "8"]);
        assert_eq!(code, 0);
        let p = reference::reference_params().unwrap();
        let checks = validate::gamma_csv_suite(&out, 0.2, &p).unwrap();
        assert!(checks.iter().all(|c| c.passed));
        let bad = validate::gamma_csv_suite(&out, 0.5, &p).unwrap();
        assert!(bad.iter().any(|c| !c.passed));
    }

    #[test]
    fn optimize_writes_argmax_footer() {
        let (code, out, _) = run_capture(&["optimize", "--u1", "1", "--u2", "2", "--a-grid", "0.1,0.2", "--b-grid", "8,14"]);
        assert_eq!(code, 0);
        let t = tandem_core::csvio::parse_sweep_csv(&out).unwrap();
        assert_eq!(t.rows.len(), 4);
        assert_eq!(t.argmax.map(|r| (r.a, r.b)), Some((0.1, 14.0)));
    }
}
