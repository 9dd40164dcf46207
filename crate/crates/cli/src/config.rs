use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}:{line}: {msg}")]
    File { path: String, line: usize, msg: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`: {msg}")]
    Value { key: String, value: String, msg: String },
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Example {
    Burgers(usize),
    Manufactured,
}

impl FromStr for Example {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "manufactured" => Ok(Example::Manufactured),
            "1" => Ok(Example::Burgers(1)),
            "2" => Ok(Example::Burgers(2)),
            "3" => Ok(Example::Burgers(3)),
            other => Err(format!("expected 1, 2, 3 or manufactured, got `{other}`")),
        }
    }
}

impl fmt::Display for Example {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Example::Burgers(k) => write!(f, "{k}"),
            Example::Manufactured => write!(f, "manufactured"),
        }
    }
}

/// Settings of one `run`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub example: Example,
    pub levels: usize,
    pub order_u: usize,
    pub order_v: usize,
    pub eta: Option<f64>,
    pub tol: f64,
    pub max_iters: usize,
    pub out: PathBuf,
    /// Time samples of the per-level solution grids (capped by the mesh).
    pub grid: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            example: Example::Burgers(1),
            levels: 4,
            order_u: 1,
            order_v: 1,
            eta: None,
            tol: 1e-8,
            max_iters: 50,
            out: PathBuf::from("out"),
            grid: 256,
        }
    }
}

/// Values that override the defaults; `None` leaves a field unchanged.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub example: Option<Example>,
    pub levels: Option<usize>,
    pub order_u: Option<usize>,
    pub order_v: Option<usize>,
    pub eta: Option<Option<f64>>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub out: Option<PathBuf>,
    pub grid: Option<usize>,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Value { key: key.into(), value: value.into(), msg: e.to_string() })
}

impl Overrides {
    /// Sets one `key = value` entry. Keys accept `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key.trim().replace('-', "_").as_str() {
            "example" => self.example = Some(parse(key, value)?),
            "levels" => self.levels = Some(parse(key, value)?),
            "order_u" => self.order_u = Some(parse(key, value)?),
            "order_v" => self.order_v = Some(parse(key, value)?),
            "eta" => {
                self.eta = Some(match value {
                    "" | "none" => None,
                    v => Some(parse(key, v)?),
                })
            }
            "tol" => self.tol = Some(parse(key, value)?),
            "max_iters" => self.max_iters = Some(parse(key, value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            "grid" => self.grid = Some(parse(key, value)?),
            other => return Err(ConfigError::UnknownKey(other.into())),
        }
        Ok(())
    }

    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn parse_text(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let mut o = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::File { path: origin.into(), line: i + 1, msg: "expected key = value".into() });
            };
            o.set(k, v).map_err(|e| ConfigError::File { path: origin.into(), line: i + 1, msg: e.to_string() })?;
        }
        Ok(o)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse_text(&text, &path.display().to_string())
    }

    pub fn apply(&self, c: &mut RunConfig) {
        if let Some(v) = self.example {
            c.example = v;
        }
        if let Some(v) = self.levels {
            c.levels = v;
        }
        if let Some(v) = self.order_u {
            c.order_u = v;
        }
        if let Some(v) = self.order_v {
            c.order_v = v;
        }
        if let Some(v) = self.eta {
            c.eta = v;
        }
        if let Some(v) = self.tol {
            c.tol = v;
        }
        if let Some(v) = self.max_iters {
            c.max_iters = v;
        }
        if let Some(v) = &self.out {
            c.out = v.clone();
        }
        if let Some(v) = self.grid {
            c.grid = v;
        }
    }
}

impl RunConfig {
    /// Defaults, then the file, then the flags.
    pub fn resolve(file: Option<&Overrides>, flags: &Overrides) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        if let Some(f) = file {
            f.apply(&mut c);
        }
        flags.apply(&mut c);
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.levels == 0 {
            return Err(ConfigError::Invalid("levels must be at least 1".into()));
        }
        for (name, o) in [("order_u", self.order_u), ("order_v", self.order_v)] {
            if !(1..=2).contains(&o) {
                return Err(ConfigError::Invalid(format!("{name} must be 1 or 2, got {o}")));
            }
        }
        if !(self.tol > 0.0) {
            return Err(ConfigError::Invalid(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(ConfigError::Invalid("max_iters must be at least 1".into()));
        }
        if self.grid == 0 {
            return Err(ConfigError::Invalid("grid must be at least 1".into()));
        }
        if let Some(eta) = self.eta {
            if !eta.is_finite() {
                return Err(ConfigError::Invalid(format!("eta must be finite, got {eta}")));
            }
        }
        Ok(())
    }
}
