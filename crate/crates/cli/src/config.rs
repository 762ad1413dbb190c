//! Pipeline configuration, read from a TOML file.
//!
//! ```toml
//! seed = 42
//! year_range = [2008, 2023]
//!
//! [paths]
//! indicators = "indicators.csv"
//! target = "target.csv"
//! output = "out"
//!
//! [edr]
//! epsilon = 0.25
//! k = 10
//! coverage_threshold = 0.7
//!
//! [split]
//! last_train_year = 2017
//!
//! [cv]
//! k = 3
//! shuffled = false
//!
//! [grid]
//! n_estimators = [100, 500]
//! learning_rate = [0.1, 0.3]
//!
//! [forecast]
//! horizon = 5
//! trend_window = 8
//! ```
//!
//! Relative paths are resolved against the directory holding the config
//! file. Every section except `paths` may be omitted.

use std::path::{Path, PathBuf};

use panelcast::edr::EdrParams;
use panelcast::eval::{DEFAULT_HORIZON, DEFAULT_TREND_WINDOW};
use panelcast::panel::{YearRange, DEFAULT_COVERAGE_THRESHOLD};
use panelcast::tuning::{CvConfig, GridSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub year_range: YearRange,
    pub paths: Paths,
    #[serde(default)]
    pub edr: EdrSection,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub cv: CvConfig,
    /// Lists left out keep their default value; an absent section is a
    /// single default combination.
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub forecast: ForecastSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub indicators: PathBuf,
    pub target: PathBuf,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdrSection {
    pub epsilon: f64,
    pub k: usize,
    pub coverage_threshold: f64,
}

impl Default for EdrSection {
    fn default() -> Self {
        Self {
            epsilon: EdrParams::DEFAULT_EPSILON,
            k: 10,
            coverage_threshold: DEFAULT_COVERAGE_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub last_train_year: i32,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self { last_train_year: 2017 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastSection {
    pub horizon: usize,
    pub trend_window: usize,
}

impl Default for ForecastSection {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
            trend_window: DEFAULT_TREND_WINDOW,
        }
    }
}

/// A parsed and validated config together with the hash of its bytes.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: PipelineConfig,
    /// The paths as written in the file, for manifests.
    pub declared_paths: Paths,
    pub sha256: String,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: PipelineConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        EdrParams::new(self.edr.epsilon).map_err(|e| CliError::Config(e.to_string()))?;
        if self.edr.k == 0 {
            return bad("edr.k must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.edr.coverage_threshold) {
            return bad(format!(
                "edr.coverage_threshold must lie in [0, 1], got {}",
                self.edr.coverage_threshold
            ));
        }
        let range = self.year_range;
        let lty = self.split.last_train_year;
        if lty < range.start() || lty >= range.end() {
            return bad(format!(
                "split.last_train_year {lty} must satisfy {} <= year < {}",
                range.start(),
                range.end()
            ));
        }
        if self.cv.k < 2 {
            return bad(format!("cv.k must be at least 2, got {}", self.cv.k));
        }
        self.grid
            .combinations()
            .map_err(|e| CliError::Config(format!("grid: {e}")))?;
        if self.forecast.horizon == 0 {
            return bad("forecast.horizon must be at least 1".into());
        }
        if self.forecast.trend_window < 2 {
            return bad(format!(
                "forecast.trend_window must be at least 2, got {}",
                self.forecast.trend_window
            ));
        }
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reads, validates and resolves the config at `path`.
pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    let bytes =
        std::fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut config = PipelineConfig::from_toml(text)
        .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))?;
    let declared_paths = config.paths.clone();
    let base = path.parent().unwrap_or(Path::new(""));
    for p in [
        &mut config.paths.indicators,
        &mut config.paths.target,
        &mut config.paths.output,
    ] {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(LoadedConfig {
        config,
        declared_paths,
        sha256: sha256_hex(&bytes),
    })
}
