//! Flat `key = value` run configuration with flag > file > default precedence.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use gbn::exploration::NodeId;
use gbn::{Concentration, Hyperparams, Link};

use crate::error::CliError;

/// Every recognised key with its default ("" = no default).
const DEFAULTS: &[(&str, &str)] = &[
    ("data", ""),
    ("format", "uci"),
    ("vocab", ""),
    ("model", ""),
    ("out", ""),
    ("link", "count"),
    ("k1max", "100"),
    ("tmax", "1"),
    ("eta", "0.05"),
    ("b", "500"),
    ("c", "500"),
    ("burnin", "500"),
    ("collect", "500"),
    ("thin", "5"),
    ("seed", "0"),
    ("threads", "1"),
    ("a0", "0.01"),
    ("b0", "0.01"),
    ("e0", "1"),
    ("f0", "1"),
    ("train_fraction", "0.3"),
    ("early_stop", "10"),
    ("validate", "false"),
    ("roots", ""),
    ("tau", ""),
    ("docs", "10"),
    ("scales", ""),
    ("top", "12"),
];

fn normalize(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: String,
    values: BTreeMap<String, String>,
}

impl RunConfig {
    /// Resolve defaults, then the config file (if any), then `overrides`.
    pub fn resolve(command: &str, file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let mut values: BTreeMap<String, String> = DEFAULTS
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        if let Some(path) = file {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
            for (k, v) in parse_file(&text)? {
                set(&mut values, &k, v)?;
            }
        }
        for (k, v) in overrides {
            set(&mut values, k, v.clone())?;
        }
        Ok(Self {
            command: command.to_string(),
            values,
        })
    }

    /// The resolved configuration, including the command.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = self.values.clone();
        m.insert("command".into(), self.command.clone());
        m
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn is_set(&self, key: &str) -> bool {
        !self.raw(key).is_empty()
    }

    pub fn require(&self, keys: &[&str]) -> Result<(), CliError> {
        for k in keys {
            if !self.is_set(k) {
                return Err(CliError::Config(format!("`{}` needs `{k}`", self.command)));
            }
        }
        Ok(())
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.is_set(key).then(|| PathBuf::from(self.raw(key)))
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError> {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|_| CliError::Config(format!("bad value for `{key}`: {raw:?}")))
    }

    pub fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>, CliError> {
        self.raw(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| CliError::Config(format!("bad entry {s:?} in `{key}`")))
            })
            .collect()
    }

    pub fn bool(&self, key: &str) -> Result<bool, CliError> {
        match self.raw(key) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(CliError::Config(format!("bad value for `{key}`: {other:?}"))),
        }
    }

    pub fn link(&self) -> Result<Link, CliError> {
        self.raw("link").parse().map_err(|e| CliError::Config(format!("{e}")))
    }

    pub fn format(&self) -> Result<DataFormat, CliError> {
        match self.raw("format") {
            "uci" => Ok(DataFormat::Uci),
            "csv" => Ok(DataFormat::Csv),
            other => Err(CliError::Config(format!("unknown data format {other:?} (uci or csv)"))),
        }
    }

    /// Data format and link must agree: counts or binary from UCI files,
    /// nonnegative reals from CSV.
    pub fn check_modality(&self, link: Link) -> Result<(), CliError> {
        let format = self.format()?;
        let ok = matches!(
            (format, link),
            (DataFormat::Uci, Link::PoissonCount | Link::BernoulliPoisson) | (DataFormat::Csv, Link::PoissonRandomizedGamma)
        );
        if ok {
            Ok(())
        } else {
            Err(CliError::Config(format!(
                "link {link} cannot read {} data",
                self.raw("format")
            )))
        }
    }

    pub fn hyper(&self) -> Result<Hyperparams, CliError> {
        let eta: Vec<f64> = self.list("eta")?;
        if eta.is_empty() {
            return Err(CliError::Config("`eta` is empty".into()));
        }
        let hyper = Hyperparams {
            eta: eta.into_iter().map(Concentration::Symmetric).collect(),
            a0: self.get("a0")?,
            b0: self.get("b0")?,
            e0: self.get("e0")?,
            f0: self.get("f0")?,
            ..Hyperparams::default()
        };
        hyper.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(hyper)
    }

    pub fn roots(&self) -> Result<Vec<NodeId>, CliError> {
        self.list("roots")
    }

    /// Per-layer thresholds; required, since no default is endorsed.
    pub fn tau(&self) -> Result<Vec<f64>, CliError> {
        let tau: Vec<f64> = self
            .raw("tau")
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| match s {
                "inf" | "infinity" => Ok(f64::INFINITY),
                _ => s.parse().map_err(|_| CliError::Config(format!("bad entry {s:?} in `tau`"))),
            })
            .collect::<Result<_, _>>()?;
        if tau.is_empty() {
            return Err(CliError::Config("`tau` is required".into()));
        }
        if tau.iter().any(|t| !(*t >= 0.0)) {
            return Err(CliError::Config("`tau` entries must be nonnegative".into()));
        }
        Ok(tau)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataFormat {
    Uci,
    Csv,
}

fn set(values: &mut BTreeMap<String, String>, key: &str, value: String) -> Result<(), CliError> {
    let key = normalize(key);
    match values.get_mut(&key) {
        Some(slot) => {
            *slot = value.trim().to_string();
            Ok(())
        }
        None => Err(CliError::Config(format!("unknown key `{key}`"))),
    }
}

/// `key = value` lines; `#` starts a comment.
pub fn parse_file(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("config line {}: expected key = value", i + 1)))?;
        out.push((normalize(k), v.trim().to_string()));
    }
    Ok(out)
}

/// `KEY=VALUE` from the command line.
pub fn parse_assignment(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (normalize(k), v.trim().to_string()))
        .ok_or_else(|| format!("expected KEY=VALUE, got {s:?}"))
}
