use std::fmt;
use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use unfolding::io::CastCodeMap;
use unfolding::model::Hyperparams;

/// Bad arguments or configuration; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

/// Parse a TOML config file; unknown keys and syntax errors are usage
/// errors.
pub fn load_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_toml(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

pub fn parse_toml<T: DeserializeOwned>(text: &str) -> Result<T, toml::de::Error> {
    toml::from_str(text)
}

pub fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).context("serialising config echo")
}

pub fn write_echo<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_toml(value)?).with_context(|| format!("writing {}", path.display()))
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn required<T: Clone>(value: &Option<T>, flag: &str) -> Result<T> {
    value
        .clone()
        .ok_or_else(|| usage(format!("missing required option --{flag}")))
}

/// `[hyper]` section.
#[derive(clap::Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HyperArgs {
    /// Prior mean of (δ1, δ2), as two comma-separated values.
    #[arg(long, value_delimiter = ',', num_args = 2, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vartheta: Option<Vec<f64>>,
    /// Prior variance of each δ.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_sq: Option<f64>,
    /// Prior variance of each α.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_sq: Option<f64>,
}

impl HyperArgs {
    pub fn or(self, file: HyperArgs) -> Self {
        Self {
            vartheta: self.vartheta.or(file.vartheta),
            omega_sq: self.omega_sq.or(file.omega_sq),
            kappa_sq: self.kappa_sq.or(file.kappa_sq),
        }
    }

    pub fn resolve(&self) -> Result<Hyperparams> {
        let mut hyper = Hyperparams::default();
        if let Some(v) = &self.vartheta {
            let [a, b] = v[..] else {
                return Err(usage(format!("vartheta needs 2 values, got {}", v.len())));
            };
            hyper.vartheta = [a, b];
        }
        if let Some(w) = self.omega_sq {
            hyper.omega_sq = w;
        }
        if let Some(k) = self.kappa_sq {
            hyper.kappa_sq = k;
        }
        hyper.validate().map_err(|e| usage(e.to_string()))?;
        Ok(hyper)
    }

    pub fn echo(hyper: &Hyperparams) -> Self {
        Self {
            vartheta: Some(hyper.vartheta.to_vec()),
            omega_sq: Some(hyper.omega_sq),
            kappa_sq: Some(hyper.kappa_sq),
        }
    }
}

/// `[codes]` section: which raw cast codes count as yea and nay.
#[derive(clap::Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodeArgs {
    /// Cast codes read as yea [default: 1,2,3].
    #[arg(long = "yea-codes", value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub yea: Option<Vec<u8>>,
    /// Cast codes read as nay [default: 4,5,6].
    #[arg(long = "nay-codes", value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nay: Option<Vec<u8>>,
}

impl CodeArgs {
    pub fn or(self, file: CodeArgs) -> Self {
        Self {
            yea: self.yea.or(file.yea),
            nay: self.nay.or(file.nay),
        }
    }

    pub fn filled(&self) -> Self {
        Self {
            yea: Some(self.yea.clone().unwrap_or_else(|| vec![1, 2, 3])),
            nay: Some(self.nay.clone().unwrap_or_else(|| vec![4, 5, 6])),
        }
    }

    pub fn resolve(&self) -> Result<CastCodeMap> {
        let filled = self.filled();
        CastCodeMap::from_lists(
            filled.yea.as_deref().unwrap_or_default(),
            filled.nay.as_deref().unwrap_or_default(),
        )
        .map_err(|e| usage(e.to_string()))
    }
}
