//! Key-value run configuration.
//!
//! A config file holds `key = value` lines (`#` starts a comment). Command-line
//! flags are applied on top. Every key a command reads, including defaults,
//! is recorded and echoed into the manifest.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub type ConfigResult<T> = Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> ConfigResult<T> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    used: RefCell<BTreeMap<String, String>>,
}

impl RunConfig {
    pub fn parse_text(text: &str) -> ConfigResult<Self> {
        let mut cfg = RunConfig::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return err(format!("config line {}: expected key = value", no + 1));
            };
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> ConfigResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::parse_text(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> ConfigResult<()> {
        if key.is_empty() || key.contains(char::is_whitespace) {
            return err(format!("bad config key {key:?}"));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies `key=value` overrides, each optionally prefixed (`a=1` under `shell` sets `shell.a`).
    pub fn apply_pairs(&mut self, prefix: Option<&str>, pairs: &[String]) -> ConfigResult<()> {
        for p in pairs {
            let Some((k, v)) = p.split_once('=') else {
                return err(format!("expected key=value, got {p:?}"));
            };
            let key = match prefix {
                Some(pre) => format!("{pre}.{}", k.trim()),
                None => k.trim().to_string(),
            };
            self.set(&key, v.trim())?;
        }
        Ok(())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<String> {
        let v = self.values.get(key).cloned();
        if let Some(v) = &v {
            self.used.borrow_mut().insert(key.to_string(), v.clone());
        }
        v
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> ConfigResult<T>
    where
        T: fmt::Display,
    {
        match self.values.get(key) {
            Some(v) => {
                let parsed = v.parse::<T>().map_err(|_| ConfigError(format!("{key}: cannot parse {v:?}")))?;
                self.used.borrow_mut().insert(key.to_string(), v.clone());
                Ok(parsed)
            }
            None => {
                self.used.borrow_mut().insert(key.to_string(), default.to_string());
                Ok(default)
            }
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> ConfigResult<T> {
        let Some(v) = self.values.get(key) else {
            return err(format!("missing required setting {key}"));
        };
        let parsed = v.parse::<T>().map_err(|_| ConfigError(format!("{key}: cannot parse {v:?}")))?;
        self.used.borrow_mut().insert(key.to_string(), v.clone());
        Ok(parsed)
    }

    /// A positive tolerance.
    pub fn tol(&self, key: &str, default: f64) -> ConfigResult<f64> {
        let v = self.get(key, default)?;
        if !(v > 0.0) || !v.is_finite() {
            return err(format!("{key} must be positive, got {v}"));
        }
        Ok(v)
    }

    pub fn range(&self, key: &str, default: &str) -> ConfigResult<Vec<f64>> {
        let text = match self.values.get(key) {
            Some(v) => v.clone(),
            None => default.to_string(),
        };
        let out = parse_range(&text).map_err(|e| ConfigError(format!("{key}: {}", e.0)))?;
        self.used.borrow_mut().insert(key.to_string(), text);
        Ok(out)
    }

    pub fn require_range(&self, key: &str) -> ConfigResult<Vec<f64>> {
        if !self.contains(key) {
            return err(format!("missing required setting {key}"));
        }
        self.range(key, "")
    }

    pub fn used(&self) -> BTreeMap<String, String> {
        self.used.borrow().clone()
    }

    pub fn unused(&self) -> Vec<String> {
        let used = self.used.borrow();
        self.values.keys().filter(|k| !used.contains_key(*k)).cloned().collect()
    }
}

/// `start:stop:count` (linear, inclusive), `start:stop:count:log` (geometric),
/// or a comma-separated list.
pub fn parse_range(text: &str) -> ConfigResult<Vec<f64>> {
    let text = text.trim();
    if text.is_empty() {
        return err("empty grid");
    }
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| ConfigError(format!("bad number {s:?}")));
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 && parts.len() != 4 {
            return err(format!("range {text:?} is not start:stop:count[:log]"));
        }
        let (a, b) = (num(parts[0])?, num(parts[1])?);
        let n: usize = parts[2].trim().parse().map_err(|_| ConfigError(format!("bad count {:?}", parts[2])))?;
        let log = match parts.get(3).map(|s| s.trim()) {
            None | Some("lin") => false,
            Some("log") => true,
            Some(o) => return err(format!("unknown spacing {o:?}")),
        };
        if n == 0 || !a.is_finite() || !b.is_finite() {
            return err(format!("range {text:?} is empty or not finite"));
        }
        if n == 1 {
            return Ok(vec![a]);
        }
        if log && !(a > 0.0 && b > 0.0) {
            return err("geometric range needs positive endpoints");
        }
        Ok((0..n)
            .map(|i| {
                let s = i as f64 / (n - 1) as f64;
                if log {
                    (a.ln() + s * (b.ln() - a.ln())).exp()
                } else {
                    a + s * (b - a)
                }
            })
            .collect())
    } else {
        text.split(',').map(num).collect()
    }
}
