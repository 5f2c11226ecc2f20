//! Experiment configuration: flags, flat `key=value` files, and defaults.
//!
//! Precedence for every field is command-line flag, then config file, then
//! (for the seed only) the `IFSLAB_SEED` environment variable, then the
//! command's default.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

pub const SEED_ENV: &str = "IFSLAB_SEED";
pub const MAX_GRID: usize = 1_000_000;
/// The Ulam matrix is dense; this keeps it (and its transpose) under 300 MB.
pub const MAX_CELLS: usize = 4000;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("config file {path}: {reason}")]
    File { path: PathBuf, reason: String },
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {reason}")]
    Value { key: &'static str, reason: String },
}

/// Every field optional: one layer of the precedence stack.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartialConfig {
    pub weight: Option<String>,
    pub alpha: Option<f64>,
    pub grid: Option<usize>,
    pub cells: Option<usize>,
    pub chains: Option<usize>,
    pub steps: Option<usize>,
    pub burn_in: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub x0: Option<f64>,
}

fn parse_value<T: FromStr>(key: &'static str, raw: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    raw.parse().map_err(|e: T::Err| ConfigError::Value {
        key,
        reason: format!("`{raw}`: {e}"),
    })
}

impl PartialConfig {
    /// Parses flat `key=value` text; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax {
                line: k + 1,
                reason: format!("expected key=value, got `{line}`"),
            })?;
            let value = value.trim();
            match key.trim() {
                "weight" => c.weight = Some(value.to_string()),
                "alpha" => c.alpha = Some(parse_value("alpha", value)?),
                "grid" => c.grid = Some(parse_value("grid", value)?),
                "cells" => c.cells = Some(parse_value("cells", value)?),
                "chains" => c.chains = Some(parse_value("chains", value)?),
                "steps" => c.steps = Some(parse_value("steps", value)?),
                "burn_in" | "burn-in" => c.burn_in = Some(parse_value("burn_in", value)?),
                "seed" => c.seed = Some(parse_value("seed", value)?),
                "out" => c.out = Some(PathBuf::from(value)),
                "threads" => c.threads = Some(parse_value("threads", value)?),
                "x0" => c.x0 = Some(parse_value("x0", value)?),
                other => return Err(ConfigError::UnknownKey(other.to_string())),
            }
        }
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::File {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Fields of `self`, falling back to `lower` where unset.
    pub fn or(self, lower: PartialConfig) -> PartialConfig {
        PartialConfig {
            weight: self.weight.or(lower.weight),
            alpha: self.alpha.or(lower.alpha),
            grid: self.grid.or(lower.grid),
            cells: self.cells.or(lower.cells),
            chains: self.chains.or(lower.chains),
            steps: self.steps.or(lower.steps),
            burn_in: self.burn_in.or(lower.burn_in),
            seed: self.seed.or(lower.seed),
            out: self.out.or(lower.out),
            threads: self.threads.or(lower.threads),
            x0: self.x0.or(lower.x0),
        }
    }

    /// The seed layer from `IFSLAB_SEED`, if set.
    pub fn from_env() -> Result<Self, ConfigError> {
        match std::env::var(SEED_ENV) {
            Ok(raw) => Ok(Self {
                seed: Some(parse_value("seed", raw.trim())?),
                ..Self::default()
            }),
            Err(_) => Ok(Self::default()),
        }
    }
}

/// A fully resolved, validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub weight: String,
    pub alpha: f64,
    pub grid: usize,
    pub cells: usize,
    pub chains: usize,
    pub steps: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// `None`: rayon's default pool.
    pub threads: Option<usize>,
    pub x0: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            weight: "const:0.5".into(),
            alpha: 1.0,
            grid: 2000,
            cells: 1000,
            chains: 10_000,
            steps: 200,
            burn_in: 100,
            seed: 0,
            out: PathBuf::from("."),
            threads: None,
            x0: 0.5,
        }
    }
}

impl ExperimentConfig {
    /// Fills unset fields of `layers` from `defaults` and validates.
    pub fn resolve(layers: PartialConfig, defaults: &ExperimentConfig) -> Result<Self, ConfigError> {
        let d = defaults.clone();
        let c = Self {
            weight: layers.weight.unwrap_or(d.weight),
            alpha: layers.alpha.unwrap_or(d.alpha),
            grid: layers.grid.unwrap_or(d.grid),
            cells: layers.cells.unwrap_or(d.cells),
            chains: layers.chains.unwrap_or(d.chains),
            steps: layers.steps.unwrap_or(d.steps),
            burn_in: layers.burn_in.unwrap_or(d.burn_in),
            seed: layers.seed.unwrap_or(d.seed),
            out: layers.out.unwrap_or(d.out),
            threads: layers.threads.or(d.threads),
            x0: layers.x0.unwrap_or(d.x0),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &'static str, reason: String| Err(ConfigError::Value { key, reason });
        if self.weight.trim().is_empty() {
            return bad("weight", "empty weight spec".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha", format!("{} not in (0, 1]", self.alpha));
        }
        if !(16..=MAX_GRID).contains(&self.grid) {
            return bad("grid", format!("{} not in [16, {MAX_GRID}]", self.grid));
        }
        if !(8..=MAX_CELLS).contains(&self.cells) {
            return bad("cells", format!("{} not in [8, {MAX_CELLS}]", self.cells));
        }
        if self.chains == 0 {
            return bad("chains", "must be positive".into());
        }
        if self.steps == 0 {
            return bad("steps", "must be positive".into());
        }
        if self.threads == Some(0) {
            return bad("threads", "must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.x0) {
            return bad("x0", format!("{} not in [0, 1]", self.x0));
        }
        Ok(())
    }

    /// Flat `key=value` text that [`PartialConfig::parse`] reads back to the
    /// same configuration.
    pub fn emit(&self) -> String {
        let mut s = String::new();
        // f64 Display is the shortest string that parses back to the same value
        let _ = writeln!(s, "weight={}", self.weight);
        let _ = writeln!(s, "alpha={}", self.alpha);
        let _ = writeln!(s, "grid={}", self.grid);
        let _ = writeln!(s, "cells={}", self.cells);
        let _ = writeln!(s, "chains={}", self.chains);
        let _ = writeln!(s, "steps={}", self.steps);
        let _ = writeln!(s, "burn_in={}", self.burn_in);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "out={}", self.out.display());
        if let Some(t) = self.threads {
            let _ = writeln!(s, "threads={t}");
        }
        let _ = writeln!(s, "x0={}", self.x0);
        s
    }

    pub fn to_partial(&self) -> PartialConfig {
        PartialConfig {
            weight: Some(self.weight.clone()),
            alpha: Some(self.alpha),
            grid: Some(self.grid),
            cells: Some(self.cells),
            chains: Some(self.chains),
            steps: Some(self.steps),
            burn_in: Some(self.burn_in),
            seed: Some(self.seed),
            out: Some(self.out.clone()),
            threads: self.threads,
            x0: Some(self.x0),
        }
    }
}
