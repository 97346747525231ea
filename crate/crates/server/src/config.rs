//! Configuration file and parameter precedence: command line, then file, then
//! built-in defaults.

use std::path::{Path, PathBuf};

use antsteer::{AcsParams, RunConfig};
use serde::Deserialize;

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
pub const DEFAULT_HIF: f64 = 1.0;
/// Environment variable naming the persistence root.
pub const DATA_ENV: &str = "ANTSTEER_DATA";

/// Partial colony parameters; unset fields fall through to the next source.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    #[serde(alias = "m")]
    pub ants: Option<usize>,
    pub iterations: Option<usize>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub rho: Option<f64>,
    pub q0: Option<f64>,
    pub seed: Option<u64>,
    pub two_opt: Option<bool>,
    pub sigma: Option<f64>,
}

impl ParamOverrides {
    pub fn apply(&self, params: &mut AcsParams) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { params.$f = v; } )* };
        }
        set!(ants, iterations, alpha, beta, rho, q0, seed, two_opt);
        if self.sigma.is_some() {
            params.sigma = self.sigma;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub bind: Option<String>,
    pub data_dir: Option<PathBuf>,
    pub hif: Option<f64>,
    pub iteration_delay_ms: Option<u64>,
    #[serde(default)]
    pub params: ParamOverrides,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse { path: path.into(), source })
    }

    pub fn load_optional(path: Option<&Path>) -> Result<Self, ConfigError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    /// Run configuration with `cli` taking precedence over this file.
    pub fn run_config(&self, cli: &ParamOverrides, cli_hif: Option<f64>) -> RunConfig {
        let mut params = AcsParams::default();
        self.params.apply(&mut params);
        cli.apply(&mut params);
        RunConfig { hif: cli_hif.or(self.hif).unwrap_or(DEFAULT_HIF), params }
    }
}
