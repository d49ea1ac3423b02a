use std::path::{Path, PathBuf};

use hardy_core::identities::Tolerances;
use hardy_core::suite::{P4FitWindow, SuiteConfig};
use hardy_core::transforms::TailMode;
use hardy_core::{EvalConfig, Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

/// Contents of the optional TOML config file; command-line flags override it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub eval: EvalConfig,
    pub grid_step: f64,
    pub grid_t_max: f64,
    pub mellin_x_max: f64,
    pub tail_mode: TailMode,
    pub tolerances: Tolerances,
    pub p4_fit: P4FitWindow,
    pub seed: u64,
    pub cache_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SuiteConfig::default();
        Self {
            eval: s.eval,
            grid_step: s.grid_step,
            grid_t_max: s.grid_t_max,
            mellin_x_max: s.mellin_x_max,
            tail_mode: s.tail_mode,
            tolerances: s.tolerances,
            p4_fit: s.p4_fit,
            seed: s.seed,
            cache_dir: None,
            threads: None,
            format: Format::Csv,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))
    }

    pub fn suite(&self) -> SuiteConfig {
        SuiteConfig {
            eval: self.eval,
            grid_step: self.grid_step,
            grid_t_max: self.grid_t_max,
            mellin_x_max: self.mellin_x_max,
            tail_mode: self.tail_mode,
            tolerances: self.tolerances,
            p4_fit: self.p4_fit,
            seed: self.seed,
            cache_dir: self.cache_dir.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.suite().validate()?;
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        Ok(())
    }

    /// CRC-64 of the canonical JSON form.
    pub fn hash(&self) -> u64 {
        let json = serde_json::to_string(self).expect("config serializes");
        hardy_core::checksum::crc64(json.as_bytes())
    }
}
