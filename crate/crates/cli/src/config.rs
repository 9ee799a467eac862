//! Run configuration read from a TOML document.
//!
//! ```toml
//! c1 = 4.0
//! c2 = 3.0
//! lambda = 1.0
//! alpha = 2.0
//! q = 0.1
//!
//! [reserves]
//! u1 = 1.0
//! u2 = 2.0
//!
//! [barrier]
//! a = 0.1
//! b = 14.0
//!
//! [impulse]
//! cost = 0.5
//! route = "characteristic"
//!
//! [simulation]
//! paths = 100000
//! seed = 7
//! moments = [1, 2]
//! bias_tol = 1e-4
//!
//! [tolerance]
//! series = 1e-12
//!
//! [output]
//! csv = "out.csv"
//! trace = "trace.csv"
//! ```
//!
//! Every key is optional. Missing model keys fall back to the reference
//! parameters; command-line flags override anything set here.

use std::path::PathBuf;

use serde::Deserialize;
use tandem_core::reference;
use tandem_core::{validate_model, ModelParams, Violation};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("config is not valid TOML: {0}")]
    Syntax(String),
    #[error("config value out of range: {0}")]
    Range(String),
    #[error("model parameters violate: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Model(Vec<Violation>),
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub q: Option<f64>,
    #[serde(default)]
    pub reserves: Reserves,
    #[serde(default)]
    pub barrier: Barrier,
    #[serde(default)]
    pub impulse: Impulse,
    #[serde(default)]
    pub simulation: Simulation,
    #[serde(default)]
    pub tolerance: Tolerance,
    #[serde(default)]
    pub output: Output,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reserves {
    pub u1: Option<f64>,
    pub u2: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Barrier {
    pub a: Option<f64>,
    pub b: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    #[default]
    Characteristic,
    CrossingTransform,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Impulse {
    pub cost: Option<f64>,
    pub route: Option<Route>,
    pub grid_steps: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Simulation {
    pub paths: Option<u64>,
    pub seed: Option<u64>,
    pub moments: Option<Vec<u32>>,
    pub max_time: Option<f64>,
    pub bias_tol: Option<f64>,
    pub max_cycles: Option<usize>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerance {
    pub series: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    pub csv: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

fn positive(name: &str, v: Option<f64>) -> Result<(), ConfigError> {
    match v {
        Some(x) if !(x.is_finite() && x > 0.0) => {
            Err(ConfigError::Range(format!("{name} must be finite and positive, got {x}")))
        }
        _ => Ok(()),
    }
}

fn nonnegative(name: &str, v: Option<f64>) -> Result<(), ConfigError> {
    match v {
        Some(x) if !(x.is_finite() && x >= 0.0) => {
            Err(ConfigError::Range(format!("{name} must be finite and nonnegative, got {x}")))
        }
        _ => Ok(()),
    }
}

impl RunConfig {
    /// Parses and range-checks a document. Model conditions that involve
    /// several parameters are checked by [`RunConfig::model`].
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.message().to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("c1", self.c1),
            ("c2", self.c2),
            ("lambda", self.lambda),
            ("alpha", self.alpha),
            ("q", self.q),
            ("impulse.cost", self.impulse.cost),
            ("barrier.b", self.barrier.b),
            ("simulation.max_time", self.simulation.max_time),
            ("simulation.bias_tol", self.simulation.bias_tol),
            ("tolerance.series", self.tolerance.series),
        ] {
            positive(name, v)?;
        }
        for (name, v) in [
            ("reserves.u1", self.reserves.u1),
            ("reserves.u2", self.reserves.u2),
            ("barrier.a", self.barrier.a),
        ] {
            nonnegative(name, v)?;
        }
        let s = &self.simulation;
        if s.paths == Some(0) {
            return Err(ConfigError::Range("simulation.paths must be at least 1".into()));
        }
        if s.max_cycles == Some(0) {
            return Err(ConfigError::Range("simulation.max_cycles must be at least 1".into()));
        }
        if s.threads == Some(0) {
            return Err(ConfigError::Range("simulation.threads must be at least 1".into()));
        }
        if let Some(m) = &s.moments {
            if m.is_empty() || m.iter().any(|&n| n == 0 || n > 16) {
                return Err(ConfigError::Range("simulation.moments must list orders in 1..=16".into()));
            }
        }
        if self.impulse.grid_steps.is_some_and(|n| !(8..=1_000_000).contains(&n)) {
            return Err(ConfigError::Range("impulse.grid_steps must lie in 8..=1000000".into()));
        }
        Ok(())
    }

    /// Model parameters with reference values for missing keys, validated.
    pub fn model(&self) -> Result<ModelParams, ConfigError> {
        let p = ModelParams {
            c1: self.c1.unwrap_or(reference::C1),
            c2: self.c2.unwrap_or(reference::C2),
            lambda: self.lambda.unwrap_or(reference::LAMBDA),
            claims: tandem_core::ClaimDistribution::exponential(self.alpha.unwrap_or(reference::ALPHA)),
            q: self.q.unwrap_or(reference::Q),
        };
        validate_model(p).map_err(ConfigError::Model)
    }
}
