//! `key = value` run configuration with `#` comments.

use crate::ippmm::SolverOptions;
use crate::metrics::{DEFAULT_THRESHOLD_FRACTION, DEFAULT_TRANSACTION_EPS};
use crate::{Error, Result};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Instance keys passed through to the generators and loaders.
pub const INSTANCE_KEYS: &[&str] = &[
    "family",
    "s",
    "m",
    "n",
    "grid",
    "tau",
    "tau1",
    "tau2",
    "lambda",
    "image",
    "size",
    "blur",
    "len",
    "angle",
    "sigma",
    "peak",
    "background",
    "separation",
    "sparsity",
    "data",
    "labels",
    "folds",
    "radius",
    "choice",
    "rho",
    "delta",
    "baseline_iters",
];

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: Option<String>,
    pub seed: u64,
    pub solvers: Vec<String>,
    pub options: SolverOptions,
    pub transaction_eps: f64,
    pub threshold_fraction: f64,
    pub output: Option<PathBuf>,
    pub params: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            seed: 0,
            solvers: vec!["ippmm".into()],
            options: SolverOptions::default(),
            transaction_eps: DEFAULT_TRANSACTION_EPS,
            threshold_fraction: DEFAULT_THRESHOLD_FRACTION,
            output: None,
            params: BTreeMap::new(),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("bad value '{value}' for '{key}'")))
}

impl RunConfig {
    /// Applies one setting. Solver options use their own key names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "command" => self.command = Some(value.to_string()),
            "seed" => self.seed = parse_value(key, value)?,
            "solvers" => {
                self.solvers = value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
                if self.solvers.is_empty() {
                    return Err(Error::invalid("solvers list is empty"));
                }
            }
            "transaction_eps" | "eps" => self.transaction_eps = parse_value(key, value)?,
            "threshold_fraction" => self.threshold_fraction = parse_value(key, value)?,
            "output" | "out" => self.output = Some(PathBuf::from(value)),
            k if INSTANCE_KEYS.contains(&k) => {
                self.params.insert(k.to_string(), value.to_string());
            }
            k => self.options.set(k, value)?,
        }
        Ok(())
    }

    /// Parses configuration text; errors name the line and the column of
    /// the key or value at fault.
    pub fn parse(text: &str, label: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text, label)?;
        Ok(cfg)
    }

    /// Applies configuration text on top of the current settings.
    pub fn apply_text(&mut self, text: &str, label: &str) -> Result<()> {
        let cfg = self;
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("");
            if line.trim().is_empty() {
                continue;
            }
            let err = |column: usize, message: String| Error::Parse {
                path: label.to_string(),
                line: k + 1,
                column,
                message,
            };
            let col_of = |s: &str| raw[..s.as_ptr() as usize - raw.as_ptr() as usize].chars().count() + 1;
            let Some((key, value)) = line.split_once('=') else {
                return Err(err(col_of(line.trim_start()), "expected 'key = value'".into()));
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(err(col_of(line.trim_start()), "missing key".into()));
            }
            if value.is_empty() {
                return Err(err(col_of(key) + key.chars().count(), format!("missing value for '{key}'")));
            }
            if let Err(e) = cfg.set(key, value) {
                let message = e.to_string();
                let column = if message.contains("unknown") { col_of(key) } else { col_of(value) };
                return Err(err(column, message));
            }
        }
        cfg.options.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_file(path)?;
        Ok(cfg)
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Instance parameter `key`, or `default` when unset.
    pub fn param<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.params.get(key) {
            Some(v) => parse_value(key, v),
            None => Ok(default),
        }
    }
}
