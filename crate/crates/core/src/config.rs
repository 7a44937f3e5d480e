//! Simulation configuration: a flat `key = value` text file.
//!
//! ```text
//! # whole-line comments start with '#' or '//'
//! size.Q = 3
//! availableResources.q1 = 5
//! limit = 10
//! seed = 42
//! max_steps = 10000
//! lossy = false
//! loss_prob = 0.0
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use crate::ast::{Expr, Ident};
use crate::parser::parse_expr;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Value supplied for a constant left open by the model.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstValue {
    Whole(Expr),
    PerProcess(BTreeMap<Ident, Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub class_sizes: BTreeMap<Ident, usize>,
    pub constant_values: BTreeMap<Ident, ConstValue>,
    pub seed: u64,
    pub max_steps: usize,
    pub lossy: bool,
    pub loss_prob: f64,
    /// Non-fatal remarks gathered while parsing, with line numbers.
    pub warnings: Vec<String>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            class_sizes: BTreeMap::new(),
            constant_values: BTreeMap::new(),
            seed: 0,
            max_steps: 10_000,
            lossy: false,
            loss_prob: 0.0,
            warnings: Vec::new(),
        }
    }
}

fn ident(s: &str, line: usize) -> Result<Ident, ConfigError> {
    Ident::new(s).ok_or_else(|| ConfigError::Parse {
        line,
        message: format!("`{s}` is not an identifier"),
    })
}

fn number<T: std::str::FromStr>(v: &str, line: usize, what: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| ConfigError::Parse {
        line,
        message: format!("{what} expected, found `{v}`"),
    })
}

impl SimConfig {
    pub fn parse(text: &str) -> Result<SimConfig, ConfigError> {
        let mut cfg = SimConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') || content.starts_with("//") {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Parse {
                    line,
                    message: "expected `key = value`".to_string(),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if value.is_empty() {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("`{key}` has no value"),
                });
            }
            match key {
                "seed" => cfg.seed = number(value, line, "a 64-bit unsigned seed")?,
                "max_steps" => cfg.max_steps = number(value, line, "a natural number")?,
                "lossy" => cfg.lossy = number(value, line, "`true` or `false`")?,
                "loss_prob" => {
                    let p: f64 = number(value, line, "a probability")?;
                    if !(0.0..=1.0).contains(&p) {
                        return Err(ConfigError::Parse {
                            line,
                            message: format!("loss_prob must lie in [0, 1], found {p}"),
                        });
                    }
                    cfg.loss_prob = p;
                }
                _ => {
                    let parts: Vec<&str> = key.split('.').collect();
                    match parts.as_slice() {
                        ["size", class] => {
                            let class = ident(class, line)?;
                            let n = value.parse::<usize>().map_err(|_| ConfigError::Parse {
                                line,
                                message: format!(
                                    "size of `{class}` must be a natural number, found `{value}`"
                                ),
                            })?;
                            cfg.class_sizes.insert(class, n);
                        }
                        [name] => {
                            let name = ident(name, line)?;
                            let e = expr(value, line)?;
                            cfg.constant_values.insert(name, ConstValue::Whole(e));
                        }
                        [name, proc] => {
                            let name = ident(name, line)?;
                            let proc = ident(proc, line)?;
                            let e = expr(value, line)?;
                            let entry = cfg
                                .constant_values
                                .entry(name.clone())
                                .or_insert_with(|| ConstValue::PerProcess(BTreeMap::new()));
                            match entry {
                                ConstValue::PerProcess(m) => {
                                    m.insert(proc, e);
                                }
                                ConstValue::Whole(_) => {
                                    return Err(ConfigError::Parse {
                                        line,
                                        message: format!("`{name}` already has a whole value"),
                                    })
                                }
                            }
                        }
                        _ => cfg
                            .warnings
                            .push(format!("line {line}: unknown key `{key}` ignored")),
                    }
                }
            }
        }
        if cfg.loss_prob > 0.0 && !cfg.lossy {
            cfg.warnings
                .push("loss_prob is set but lossy = false; messages will not be lost".to_string());
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<SimConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        SimConfig::parse(&text)
    }
}

fn expr(value: &str, line: usize) -> Result<Expr, ConfigError> {
    parse_expr(value).map_err(|d| ConfigError::Parse {
        line,
        message: d
            .first()
            .map_or_else(|| "bad value".to_string(), |d| d.message.clone()),
    })
}

/// Reads a configuration file.
pub fn load_config(path: &Path) -> Result<SimConfig, ConfigError> {
    SimConfig::load(path)
}
