//! Flat key=value config files supplying defaults; command-line flags win.

use std::collections::HashMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ranksmith::{RankError, Result, YearSpan};

/// Every key a config file may carry (long flag names without `--`).
const KNOWN_KEYS: &[&str] = &[
    "seed", "threads", "n", "years", "dim", "noise-sigma", "distractor-dims", "out", "data",
    "model", "log", "split", "balanced", "encoder", "dim-out", "loss", "tau", "relevance",
    "gamma", "positive-gap", "batch-size", "iterations", "eval-every", "optimizer", "lr",
    "momentum", "beta1", "beta2", "epsilon", "normalize", "k", "weighted", "ann", "support",
    "trees", "leaf", "budget", "curve", "curve-out", "bin-sim-out", "bin-width", "part",
    "queries", "index",
];

#[derive(Debug, Default)]
pub struct ConfigMap {
    values: HashMap<String, String>,
}

impl ConfigMap {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(ConfigMap::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| RankError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut values = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(RankError::Parse {
                    path: path.to_path_buf(),
                    location: format!("line {}", lineno + 1),
                    message: format!("expected key=value, got {line:?}"),
                });
            };
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(RankError::Parse {
                    path: path.to_path_buf(),
                    location: format!("line {}", lineno + 1),
                    message: format!("unknown key {key:?}"),
                });
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(ConfigMap { values })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Flag value, then config value, then default.
    pub fn get<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.raw(key) {
            Some(s) => s.parse::<T>().map_err(|e| RankError::InvalidParameter {
                name: "config",
                reason: format!("{key}: {e}"),
            }),
            None => Ok(default),
        }
    }

    pub fn require_path(&self, flag: Option<PathBuf>, key: &str) -> Result<PathBuf> {
        match flag {
            Some(v) => Ok(v),
            None => match self.raw(key) {
                Some(s) => Ok(PathBuf::from(s)),
                None => Err(RankError::InvalidParameter {
                    name: "usage",
                    reason: format!("missing required --{key}"),
                }),
            },
        }
    }

    pub fn get_path(&self, flag: Option<PathBuf>, key: &str) -> Option<PathBuf> {
        flag.or_else(|| self.raw(key).map(PathBuf::from))
    }

    pub fn get_opt(&self, flag: Option<String>, key: &str) -> Option<String> {
        flag.or_else(|| self.raw(key).map(str::to_string))
    }

    /// Boolean switch: a set flag wins; otherwise config `true`/`1`.
    pub fn get_flag(&self, flag: bool, key: &str) -> bool {
        flag || matches!(self.raw(key), Some("true") | Some("1"))
    }
}

/// `1930:1999` year-span argument.
pub fn parse_years(s: &str) -> Result<YearSpan> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| RankError::InvalidParameter {
        name: "years",
        reason: format!("expected min:max, got {s:?}"),
    })?;
    let min: i32 = lo.parse().map_err(|e| RankError::InvalidParameter {
        name: "years",
        reason: format!("{e}"),
    })?;
    let max: i32 = hi.parse().map_err(|e| RankError::InvalidParameter {
        name: "years",
        reason: format!("{e}"),
    })?;
    YearSpan::new(min, max)
}

/// `0.93:0:0.07` split-fraction argument.
pub fn parse_split(s: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(RankError::InvalidParameter {
            name: "split",
            reason: format!("expected train:val:test, got {s:?}"),
        });
    }
    let mut out = [0.0; 3];
    for (slot, part) in out.iter_mut().zip(&parts) {
        *slot = part.parse().map_err(|e| RankError::InvalidParameter {
            name: "split",
            reason: format!("{e}"),
        })?;
    }
    Ok((out[0], out[1], out[2]))
}

/// Comma-separated k list for curve sweeps.
pub fn parse_ks(s: &str) -> Result<Vec<usize>> {
    let s = s.strip_prefix("k=").unwrap_or(s);
    s.split(',')
        .map(|p| {
            p.trim().parse::<usize>().map_err(|e| RankError::InvalidParameter {
                name: "curve",
                reason: format!("{e}"),
            })
        })
        .collect()
}
