//! Run configuration, read from JSON or from `key = value` lines.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Bootstrap,
    Price,
    Simulate,
    Calibrate,
    ConstructKernel,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Bootstrap => "bootstrap",
            Self::Price => "price",
            Self::Simulate => "simulate",
            Self::Calibrate => "calibrate",
            Self::ConstructKernel => "construct-kernel",
            Self::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PricingMethod {
    /// Closed form for linear products, Fourier for affine caplets.
    Analytic,
    MonteCarlo,
}

/// Everything a command may need. Paths are resolved against the directory
/// of the configuration file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    /// Market quotes CSV (`instrument,tenor,maturity,quote`).
    pub quotes: Option<PathBuf>,
    /// Curve-set JSON, as written by `bootstrap`.
    pub curves: Option<PathBuf>,
    /// HJM or affine model JSON.
    pub model: Option<PathBuf>,
    pub product: Option<PathBuf>,
    /// Caplet vol surface CSV (`expiry,tenor,strike,vol`).
    pub surface: Option<PathBuf>,
    /// Free parameters and optimiser settings for `calibrate`.
    pub calibration: Option<PathBuf>,
    /// Moment targets JSON for `construct-kernel`.
    pub targets: Option<PathBuf>,
    pub horizon: Option<f64>,
    pub dt: Option<f64>,
    pub dx: Option<f64>,
    pub n_paths: Option<usize>,
    pub seed: Option<u64>,
    pub observation_times: Vec<f64>,
    pub maturities: Vec<f64>,
    pub method: Option<PricingMethod>,
    /// Points per sampled curve in plot CSVs.
    pub plot_points: Option<usize>,
    /// Paths written to the path dump.
    pub dump_paths: Option<usize>,
    /// Support grid size for `construct-kernel`.
    pub grid_size: Option<usize>,
    /// Tolerance on martingale z-scores reported by `simulate`.
    pub z_tolerance: Option<f64>,
    pub check_ordering: Option<bool>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Read a configuration file; JSON if it starts with `{`.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.resolve(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let value = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| CliError::config(format!("config JSON: {e}")))?
        } else {
            let mut v = parse_key_values(text)?;
            for key in ["observation_times", "maturities"] {
                if let Some(x) = v.get_mut(key).filter(|x| x.is_number()) {
                    *x = Value::Array(vec![x.take()]);
                }
            }
            v
        };
        serde_json::from_value(value).map_err(|e| CliError::config(format!("config: {e}")))
    }

    fn resolve(&mut self, base: &Path) {
        for p in self.paths_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    fn paths_mut(&mut self) -> impl Iterator<Item = &mut PathBuf> {
        [
            &mut self.quotes,
            &mut self.curves,
            &mut self.model,
            &mut self.product,
            &mut self.surface,
            &mut self.calibration,
            &mut self.targets,
            &mut self.out,
        ]
        .into_iter()
        .flatten()
    }

    /// Check the invariants shared by every command.
    pub fn validate(&self, command: Command) -> CliResult<()> {
        if let Some(c) = self.command {
            if c != command {
                return Err(CliError::config(format!(
                    "config is for `{}` but `{}` was requested",
                    c.name(),
                    command.name()
                )));
            }
        }
        let inputs =
            [&self.quotes, &self.curves, &self.model, &self.product, &self.surface, &self.calibration, &self.targets];
        for p in inputs.into_iter().flatten() {
            if !p.is_file() {
                return Err(CliError::config(format!("input file {} does not exist", p.display())));
            }
        }
        for (name, v) in
            [("horizon", self.horizon), ("dt", self.dt), ("dx", self.dx), ("z_tolerance", self.z_tolerance)]
        {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(CliError::config(format!("{name} must be positive, got {v}")));
                }
            }
        }
        for (name, v) in [("n_paths", self.n_paths), ("plot_points", self.plot_points), ("grid_size", self.grid_size)] {
            if v == Some(0) {
                return Err(CliError::config(format!("{name} must be positive")));
            }
        }
        if self.observation_times.iter().chain(&self.maturities).any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(CliError::config("observation times and maturities must be non-negative"));
        }
        Ok(())
    }

    pub fn seed(&self) -> CliResult<u64> {
        self.seed.ok_or_else(|| CliError::config("a seed is required for stochastic commands (--seed or `seed`)"))
    }

    pub fn require<'a, T>(&self, field: &'a Option<T>, name: &str) -> CliResult<&'a T> {
        field.as_ref().ok_or_else(|| CliError::config(format!("`{name}` is required")))
    }
}

/// `key = value` lines; `#` starts a comment. Values are typed on sight:
/// `true`/`false`, numbers (including fractions such as `1/365`),
/// comma-separated number lists, otherwise strings.
pub fn parse_key_values(text: &str) -> CliResult<Value> {
    let mut map = Map::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("config line {}: expected `key = value`", no + 1)))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(CliError::config(format!("config line {}: empty key", no + 1)));
        }
        if map.insert(key.to_string(), typed(value.trim())).is_some() {
            return Err(CliError::config(format!("config line {}: duplicate key `{key}`", no + 1)));
        }
    }
    Ok(Value::Object(map))
}

fn number(s: &str) -> Option<Value> {
    if let Ok(i) = s.parse::<u64>() {
        return Some(Value::Number(i.into()));
    }
    let f = match s.split_once('/') {
        Some((a, b)) => a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?,
        None => s.parse::<f64>().ok()?,
    };
    Number::from_f64(f).map(Value::Number)
}

fn typed(s: &str) -> Value {
    match s {
        "true" => return Value::Bool(true),
        "false" => return Value::Bool(false),
        _ => {}
    }
    if let Some(n) = number(s) {
        return n;
    }
    if s.contains(',') {
        let items: Option<Vec<Value>> = s.split(',').map(|t| t.trim()).filter(|t| !t.is_empty()).map(number).collect();
        if let Some(items) = items {
            return Value::Array(items);
        }
    }
    Value::String(s.to_string())
}
