//! Flat `key = value` text format used for waveform configs and scene files.
//!
//! One entry per line, `#` starts a comment, blank lines are ignored. Values
//! are SI units. Keys may repeat (scene files use repeated `actor.*` blocks);
//! the consumer decides what repetition means.

use crate::error::ConfigError;

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

impl Entry {
    pub fn f64(&self) -> Result<f64, ConfigError> {
        let v: f64 = self.value.parse().map_err(|_| self.err(format!("`{}` is not a number", self.value)))?;
        if !v.is_finite() {
            return Err(self.err(format!("`{}` must be finite", self.key)));
        }
        Ok(v)
    }

    pub fn usize(&self) -> Result<usize, ConfigError> {
        self.value
            .parse()
            .map_err(|_| self.err(format!("`{}` is not a non-negative integer", self.value)))
    }

    pub fn u64(&self) -> Result<u64, ConfigError> {
        self.value
            .parse()
            .map_err(|_| self.err(format!("`{}` is not a non-negative integer", self.value)))
    }

    /// Comma-separated list of numbers.
    pub fn f64_list(&self) -> Result<Vec<f64>, ConfigError> {
        self.value
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| self.err(format!("`{}` is not a number", s.trim())))
            })
            .collect()
    }

    pub fn err(&self, message: impl Into<String>) -> ConfigError {
        ConfigError::Parse { line: self.line, message: message.into() }
    }

    pub fn unknown(&self) -> ConfigError {
        ConfigError::UnknownKey { line: self.line, key: self.key.clone() }
    }
}

pub fn parse(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body.split_once('=').ok_or_else(|| ConfigError::Parse {
            line,
            message: format!("expected `key = value`, found `{body}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(ConfigError::Parse { line, message: "empty key".into() });
        }
        out.push(Entry { line, key: key.to_string(), value: value.to_string() });
    }
    Ok(out)
}
