//! Run configuration: stream, kernel, loss, tolerances, and the doubling
//! wrapper settings. Parses from TOML or JSON files with CLI overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decision::LossSpec;
use crate::error::{Error, Result};
use crate::forecaster::{DEFAULT_BINARY_TOL, DEFAULT_TOL_NEUTRAL};
use crate::harness::stream::StreamSpec;
use crate::kernel::KernelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Probability forecasts only.
    Forecast,
    /// Forecasts plus expected-loss-minimizing predictions.
    Decide,
    /// Forecasts with the full Skeptic panel attached.
    Test,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Forecast => write!(f, "forecast"),
            Mode::Decide => write!(f, "decide"),
            Mode::Test => write!(f, "test"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    #[serde(default = "default_neutral")]
    pub neutral: f64,
    #[serde(default = "default_binary")]
    pub binary: f64,
}

fn default_neutral() -> f64 {
    DEFAULT_TOL_NEUTRAL
}

fn default_binary() -> f64 {
    DEFAULT_BINARY_TOL
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            neutral: default_neutral(),
            binary: default_binary(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoublingConfig {
    #[serde(default)]
    pub enabled: bool,
    /// Initial radius of the datum norm ball.
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_factor")]
    pub factor: f64,
}

fn default_radius() -> f64 {
    1.0
}

fn default_factor() -> f64 {
    2.0
}

impl Default for DoublingConfig {
    fn default() -> Self {
        DoublingConfig {
            enabled: false,
            radius: default_radius(),
            factor: default_factor(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub rounds: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Class count; defaults to the loss's class count, else 2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub stream: StreamSpec,
    pub kernel: KernelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub doubling: DoublingConfig,
}

impl RunConfig {
    pub fn class_count(&self) -> usize {
        if let Some(loss) = &self.loss {
            loss.classes()
        } else {
            self.m.unwrap_or(2)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if let Some(loss) = &self.loss {
            loss.validate()?;
            if let Some(m) = self.m {
                if m != loss.classes() {
                    return Err(Error::Config(format!(
                        "m = {m} conflicts with the loss's {} classes",
                        loss.classes()
                    )));
                }
            }
        }
        if self.mode == Mode::Decide && self.loss.is_none() {
            return Err(Error::Config("decide mode needs a loss".into()));
        }
        if !(self.tolerances.neutral > 0.0 && self.tolerances.binary > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.doubling.enabled {
            if !(self.doubling.radius > 0.0) {
                return Err(Error::Config("doubling radius must be positive".into()));
            }
            if !(self.doubling.factor > 1.0) {
                return Err(Error::Config("doubling factor must exceed 1".into()));
            }
        }
        self.stream.validate(self.class_count())?;
        Ok(())
    }

    /// Loads TOML (`.toml`) or JSON (anything else) from disk.
    pub fn from_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let config: RunConfig = if path.extension().and_then(|e| e.to_str()) == Some("toml") {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        config.validate()?;
        Ok(config)
    }
}
