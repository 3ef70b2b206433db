//! Plain `key = value` run configuration.
//!
//! Lines starting with `#` are comments. Later assignments replace earlier
//! ones, so command-line overrides are applied by [`RunConfig::set`] after
//! the file is read.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use thiserror::Error;

use crate::expr::{self, FuncExpr};
use crate::kernels::{AbelKernel, Convergent, Kernel, ScaleMode, SchroederKernel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: expected key = value")]
    Syntax { line: usize },
    #[error("missing key '{0}'")]
    Missing(String),
    #[error("key '{key}': {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl fmt::Display) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax { line: i + 1 });
            }
            cfg.set(key, value.trim());
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    /// Apply a `KEY=VALUE` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), ConfigError> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| invalid(pair, "expected KEY=VALUE"))?;
        self.set(k.trim(), v.trim());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str, ConfigError> {
        self.get(key).ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| invalid(key, e)))
            .transpose()
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn complex(&self, key: &str) -> Result<Option<Complex64>, ConfigError> {
        self.get(key)
            .map(|v| expr::parse_complex(v).map_err(|e| invalid(key, e)))
            .transpose()
    }

    pub fn complex_or(&self, key: &str, default: Complex64) -> Result<Complex64, ConfigError> {
        Ok(self.complex(key)?.unwrap_or(default))
    }

    /// A `;`-separated list of complex literals.
    pub fn complex_list(&self, key: &str) -> Result<Vec<Complex64>, ConfigError> {
        let Some(raw) = self.get(key) else {
            return Ok(Vec::new());
        };
        raw.split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| expr::parse_complex(s).map_err(|e| invalid(key, e)))
            .collect()
    }

    pub fn expr(&self, key: &str, variable: &str) -> Result<FuncExpr, ConfigError> {
        expr::parse(self.require(key)?, variable).map_err(|e| invalid(key, e))
    }

    /// Kernel from `kind`, `p`/`u`, `f`, `lambda`, `beta` and `mode`.
    ///
    /// `p` and `u` accept the catalog names `rational`, `reciprocal`,
    /// `exponential` and `logistic` (the last two take `beta`, default 1) or an
    /// expression in `w` (Schröder) or `s` (Abel). `f` is an expression in `z`.
    pub fn kernel(&self) -> Result<Kernel, ConfigError> {
        let f = self.expr("f", "z")?;
        let beta = self.complex("beta")?;
        let convergent = |key: &str, var: &str| -> Result<FuncExpr, ConfigError> {
            let raw = self.require(key)?;
            if let Some(named) = Convergent::by_name(raw, beta) {
                return Ok(named);
            }
            expr::parse(raw, var).map_err(|e| invalid(key, e))
        };
        match self.get("kind").unwrap_or("schroeder") {
            "schroeder" => {
                let lambda = self.complex("lambda")?.ok_or_else(|| ConfigError::Missing("lambda".into()))?;
                let mode = match self.get("mode").unwrap_or("contracting") {
                    "contracting" => ScaleMode::Contracting,
                    "expanding" => ScaleMode::Expanding,
                    other => return Err(invalid("mode", format!("unknown mode '{other}'"))),
                };
                let p = convergent("p", "w")?;
                SchroederKernel::new(p, f, lambda, mode)
                    .map(Kernel::Schroeder)
                    .map_err(|e| invalid("lambda", e))
            }
            "abel" => {
                let u = convergent("u", "s")?;
                Ok(Kernel::Abel(AbelKernel::new(u, f)))
            }
            other => Err(invalid("kind", format!("unknown kind '{other}'"))),
        }
    }
}
