//! Run configuration: one JSON file drives every subcommand, with flags
//! overriding individual fields.

use std::path::{Path, PathBuf};

use crate::backtest::BacktestConfig;
use crate::synth::SynthConfig;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub prices_path: PathBuf,
    pub weights_path: PathBuf,
    pub output_dir: PathBuf,
    pub index_id: String,
    /// Master seed; overrides the nested synth/backtest seeds on load.
    pub seed: u64,
    pub threads: usize,
    #[serde(default)]
    pub synth: SynthConfig,
    #[serde(default)]
    pub backtest: BacktestConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            prices_path: "prices.csv".into(),
            weights_path: "weights.csv".into(),
            output_dir: "out".into(),
            index_id: "INDEX".into(),
            seed: 7,
            threads: 1,
            synth: SynthConfig::default(),
            backtest: BacktestConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config field error: {0}")]
    Parse(String),

    #[error("config field `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.propagate_seed();
        Ok(cfg)
    }

    /// Push the master seed into the nested configs so one number controls
    /// every random stream.
    pub fn propagate_seed(&mut self) {
        self.synth.seed = self.seed;
        self.backtest.seed = self.seed;
        self.synth.index_id = self.index_id.clone();
    }

    /// Semantic validation beyond what serde enforces; `require_inputs`
    /// additionally demands that the panel files exist.
    pub fn validate(&self, require_inputs: bool) -> Result<(), ConfigError> {
        if require_inputs && !self.prices_path.exists() {
            return Err(ConfigError::Invalid {
                field: "prices_path",
                message: format!("{} does not exist", self.prices_path.display()),
            });
        }
        if require_inputs && !self.weights_path.exists() {
            return Err(ConfigError::Invalid {
                field: "weights_path",
                message: format!("{} does not exist", self.weights_path.display()),
            });
        }
        if self.index_id.is_empty() {
            return Err(ConfigError::Invalid {
                field: "index_id",
                message: "must be non-empty".into(),
            });
        }
        if self.threads == 0 {
            return Err(ConfigError::Invalid {
                field: "threads",
                message: "must be at least 1".into(),
            });
        }
        let b = &self.backtest;
        if !(b.train_span > b.validation_span && b.validation_span > b.horizon + b.half_window) {
            return Err(ConfigError::Invalid {
                field: "backtest.train_span",
                message: format!(
                    "need train_span > validation_span > horizon + half_window, got {} / {} / {}",
                    b.train_span,
                    b.validation_span,
                    b.horizon + b.half_window
                ),
            });
        }
        if b.cardinalities.contains(&0) {
            return Err(ConfigError::Invalid {
                field: "backtest.cardinalities",
                message: "cardinality caps must be positive".into(),
            });
        }
        self.backtest.train.validate().map_err(|message| ConfigError::Invalid {
            field: "backtest.train",
            message,
        })?;
        self.synth.validate().map_err(|message| ConfigError::Invalid {
            field: "synth",
            message,
        })?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_roundtrips_and_validates() {
        let cfg = RunConfig::default();
        cfg.validate(false).unwrap();
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        let mut back: RunConfig = serde_json::from_str(&json).unwrap();
        back.propagate_seed();
        assert_eq!(back.seed, cfg.seed);
        assert_eq!(back.synth.seed, cfg.seed);
    }

    #[test]
    fn missing_input_names_the_field() {
        let cfg = RunConfig {
            prices_path: "/definitely/not/here.csv".into(),
            ..RunConfig::default()
        };
        match cfg.validate(true) {
            Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "prices_path"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_schedule_names_the_field() {
        let mut cfg = RunConfig::default();
        cfg.backtest.validation_span = cfg.backtest.train_span + 1;
        match cfg.validate(false) {
            Err(ConfigError::Invalid { field, .. }) => {
                assert_eq!(field, "backtest.train_span")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let json = r#"{ "prices_path": "p.csv", "weights_path": "w.csv",
            "output_dir": "o", "index_id": "I", "seed": 1, "threads": 1,
            "no_such_field": true }"#;
        let err = serde_json::from_str::<RunConfig>(json).unwrap_err();
        assert!(err.to_string().contains("no_such_field"));
    }
}
