//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "experiment": "hard",
//!   "K": 8,
//!   "T": 100000,
//!   "reps": 10,
//!   "master_seed": 2021,
//!   "checkpoints": 200,
//!   "algorithms": [{"id": "tsallis_switch"}, {"id": "base_geom", "params": {"gamma": 1.0}}],
//!   "environment": {"id": "stochastic", "params": {"gap": 0.05}},
//!   "cost": {"kind": "fixed", "lambda": 1.0}
//! }
//! ```
//!
//! Unknown keys are rejected at every level.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::algorithms::{BaseParams, GridKind};
use crate::environments::{CostSchedule, PhasePlan};
use crate::harness::{
    log_checkpoints, AlgorithmEntry, AlgorithmKind, EnvironmentSpec, ExperimentConfig,
    DEFAULT_CHECKPOINTS,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid config key `{key}`: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        message: message.into(),
    }
}

fn default_checkpoints() -> usize {
    DEFAULT_CHECKPOINTS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: String,
    #[serde(rename = "K")]
    pub arms: usize,
    #[serde(rename = "T")]
    pub horizon: u64,
    pub reps: usize,
    pub master_seed: u64,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    pub algorithms: Vec<AlgorithmFile>,
    pub environment: EnvironmentFile,
    pub cost: CostSchedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmFile {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub params: Map<String, Value>,
}

impl AlgorithmFile {
    pub fn new(id: &str) -> Self {
        Self {
            id: id.to_string(),
            label: None,
            params: Map::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentFile {
    pub id: String,
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub params: Map<String, Value>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GapParams {
    gap: f64,
    #[serde(default = "one")]
    best_arms: usize,
    #[serde(default = "default_growth")]
    growth: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StochasticParams {
    gap: f64,
    #[serde(default = "one")]
    best_arms: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlipParams {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AlternatingParams {
    #[serde(default = "one_u64")]
    period: u64,
}

fn one() -> usize {
    1
}

fn one_u64() -> u64 {
    1
}

fn default_growth() -> f64 {
    PhasePlan::DEFAULT_GROWTH
}

fn params<T: DeserializeOwned>(key: &str, map: &Map<String, Value>) -> Result<T, ConfigError> {
    serde_json::from_value(Value::Object(map.clone())).map_err(|e| invalid(key, e.to_string()))
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Validates every field and builds the harness configuration.
    pub fn to_experiment(&self) -> Result<ExperimentConfig, ConfigError> {
        if self.experiment.is_empty()
            || !self
                .experiment
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c))
        {
            return Err(invalid(
                "experiment",
                "must be a non-empty name of letters, digits, '_', '-' or '.'",
            ));
        }
        if self.arms < 2 {
            return Err(invalid(
                "K",
                format!("need at least 2 arms, got {}", self.arms),
            ));
        }
        if self.horizon == 0 {
            return Err(invalid("T", "horizon must be at least 1"));
        }
        if self.reps == 0 {
            return Err(invalid("reps", "need at least 1 repetition"));
        }
        if self.checkpoints == 0 {
            return Err(invalid("checkpoints", "need at least 1 checkpoint"));
        }
        match self.cost {
            CostSchedule::Fixed { lambda } if !(lambda.is_finite() && lambda >= 0.0) => {
                return Err(invalid(
                    "cost.lambda",
                    format!("must be >= 0, got {lambda}"),
                ));
            }
            CostSchedule::Power { alpha } if !(alpha.is_finite() && alpha > 0.0) => {
                return Err(invalid("cost.alpha", format!("must be > 0, got {alpha}")));
            }
            _ => {}
        }
        if self.algorithms.is_empty() {
            return Err(invalid("algorithms", "list must not be empty"));
        }
        let algorithms = self
            .algorithms
            .iter()
            .enumerate()
            .map(|(i, a)| self.algorithm(i, a))
            .collect::<Result<Vec<_>, _>>()?;
        let mut labels: Vec<&str> = algorithms.iter().map(|a| a.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("algorithms", "labels must be unique"));
        }
        let environment = self.environment()?;
        let experiment = ExperimentConfig {
            name: self.experiment.clone(),
            arms: self.arms,
            horizon: self.horizon,
            algorithms,
            environment,
            cost: self.cost,
            reps: self.reps,
            master_seed: self.master_seed,
            checkpoints: log_checkpoints(self.horizon, self.checkpoints),
        };
        experiment
            .validate()
            .map_err(|e| invalid("environment.params", e.to_string()))?;
        Ok(experiment)
    }

    fn algorithm(&self, index: usize, file: &AlgorithmFile) -> Result<AlgorithmEntry, ConfigError> {
        let key = format!("algorithms[{index}].params");
        let no_params = |kind: AlgorithmKind| -> Result<AlgorithmKind, ConfigError> {
            if file.params.is_empty() {
                Ok(kind)
            } else {
                Err(invalid(&key, format!("`{}` takes no parameters", file.id)))
            }
        };
        let kind = match file.id.as_str() {
            "tsallis_switch" => no_params(AlgorithmKind::TsallisSwitch)?,
            "tsallis_inf" => no_params(AlgorithmKind::TsallisInf)?,
            "exp3" => no_params(AlgorithmKind::Exp3)?,
            "exp3_blocks" => no_params(AlgorithmKind::Exp3Blocks)?,
            "base_arith" | "base_geom" => {
                let params: BaseParams = params(&key, &file.params)?;
                if let Some(m) = params.batches {
                    if m == 0 || m > self.horizon {
                        return Err(invalid(
                            format!("{key}.batches"),
                            format!("must lie in [1, T], got {m}"),
                        ));
                    }
                }
                if !(params.gamma.is_finite() && params.gamma > 0.0) {
                    return Err(invalid(format!("{key}.gamma"), "must be > 0"));
                }
                let grid = if file.id == "base_arith" {
                    GridKind::Arithmetic
                } else {
                    GridKind::Geometric
                };
                AlgorithmKind::Base { grid, params }
            }
            other => {
                return Err(invalid(
                    format!("algorithms[{index}].id"),
                    format!("unknown algorithm `{other}`"),
                ))
            }
        };
        Ok(match &file.label {
            Some(label) if label.is_empty() || label.contains([',', '"', '\n']) => {
                return Err(invalid(
                    format!("algorithms[{index}].label"),
                    "must be non-empty without commas or quotes",
                ))
            }
            Some(label) => AlgorithmEntry::labeled(kind, label.clone()),
            None => AlgorithmEntry::new(kind),
        })
    }

    fn environment(&self) -> Result<EnvironmentSpec, ConfigError> {
        let key = "environment.params";
        let check_gap = |gap: f64, best_arms: usize| -> Result<(), ConfigError> {
            if !(0.0..=0.5).contains(&gap) {
                return Err(invalid(
                    "environment.params.gap",
                    format!("must lie in [0, 0.5], got {gap}"),
                ));
            }
            if best_arms < 1 || best_arms >= self.arms {
                return Err(invalid(
                    "environment.params.best_arms",
                    format!("must lie in [1, K-1], got {best_arms}"),
                ));
            }
            Ok(())
        };
        Ok(match self.environment.id.as_str() {
            "stochastic" => {
                let p: StochasticParams = params(key, &self.environment.params)?;
                check_gap(p.gap, p.best_arms)?;
                EnvironmentSpec::Stochastic {
                    gap: p.gap,
                    best_arms: p.best_arms,
                }
            }
            "constrained" => {
                let p: GapParams = params(key, &self.environment.params)?;
                check_gap(p.gap, p.best_arms)?;
                if !(p.growth.is_finite() && p.growth > 1.0) {
                    return Err(invalid("environment.params.growth", "must exceed 1"));
                }
                EnvironmentSpec::Constrained {
                    gap: p.gap,
                    best_arms: p.best_arms,
                    growth: p.growth,
                }
            }
            "flip" => {
                let _: FlipParams = params(key, &self.environment.params)?;
                EnvironmentSpec::Flip
            }
            "alternating" => {
                let p: AlternatingParams = params(key, &self.environment.params)?;
                if p.period == 0 {
                    return Err(invalid("environment.params.period", "must be at least 1"));
                }
                EnvironmentSpec::Alternating { period: p.period }
            }
            other => {
                return Err(invalid(
                    "environment.id",
                    format!("unknown environment `{other}`"),
                ))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EASY: &str = r#"{
        "experiment": "easy",
        "K": 8,
        "T": 100000,
        "reps": 10,
        "master_seed": 1,
        "algorithms": [
            {"id": "tsallis_switch"}, {"id": "tsallis_inf"}, {"id": "exp3"},
            {"id": "exp3_blocks"}, {"id": "base_arith"}, {"id": "base_geom", "params": {"gamma": 0.5}}
        ],
        "environment": {"id": "stochastic", "params": {"gap": 0.2}},
        "cost": {"kind": "fixed", "lambda": 0.025}
    }"#;

    fn message(err: ConfigError) -> String {
        err.to_string()
    }

    #[test]
    fn parses_the_easy_setting() {
        let exp = ConfigFile::from_json(EASY)
            .unwrap()
            .to_experiment()
            .unwrap();
        assert_eq!(exp.algorithms.len(), 6);
        assert_eq!(exp.algorithms[5].label, "base_geom");
        assert_eq!(
            exp.environment,
            EnvironmentSpec::Stochastic {
                gap: 0.2,
                best_arms: 1
            }
        );
        assert_eq!(exp.cost, CostSchedule::Fixed { lambda: 0.025 });
        assert!(exp.checkpoints.len() <= 200);
        assert_eq!(*exp.checkpoints.last().unwrap(), 100_000);
    }

    #[test]
    fn missing_key_is_named() {
        let text = EASY.replace("\"K\": 8,", "");
        let err = ConfigFile::from_json(&text).unwrap_err();
        assert!(message(err).contains("`K`"));
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = EASY.replace("\"reps\": 10,", "\"reps\": 10, \"colour\": 1,");
        assert!(message(ConfigFile::from_json(&text).unwrap_err()).contains("colour"));

        let text = EASY.replace("{\"gap\": 0.2}", "{\"gap\": 0.2, \"spread\": 3}");
        let err = ConfigFile::from_json(&text)
            .unwrap()
            .to_experiment()
            .unwrap_err();
        assert!(message(err).contains("spread"));

        let text = EASY.replace("\"lambda\": 0.025", "\"lambda\": 0.025, \"alpha\": 1");
        assert!(ConfigFile::from_json(&text).is_err());
    }

    #[test]
    fn ranges_are_checked() {
        let cases = [
            ("\"K\": 8", "\"K\": 1", "`K`"),
            ("\"T\": 100000", "\"T\": 0", "`T`"),
            ("\"reps\": 10", "\"reps\": 0", "`reps`"),
            ("{\"gap\": 0.2}", "{\"gap\": 0.7}", "gap"),
            (
                "{\"gap\": 0.2}",
                "{\"gap\": 0.2, \"best_arms\": 8}",
                "best_arms",
            ),
            ("\"lambda\": 0.025", "\"lambda\": -1", "cost.lambda"),
            (
                "{\"id\": \"exp3\"}",
                "{\"id\": \"ucb\"}",
                "algorithms[2].id",
            ),
            ("{\"gamma\": 0.5}", "{\"batches\": 0}", "batches"),
        ];
        for (from, to, key) in cases {
            let text = EASY.replace(from, to);
            let err = ConfigFile::from_json(&text)
                .unwrap()
                .to_experiment()
                .unwrap_err();
            assert!(message(err).contains(key), "{to}");
        }
    }

    #[test]
    fn other_environments_and_costs() {
        let text = EASY
            .replace(
                "{\"id\": \"stochastic\", \"params\": {\"gap\": 0.2}}",
                "{\"id\": \"constrained\", \"params\": {\"gap\": 0.05, \"best_arms\": 3}}",
            )
            .replace(
                "\"kind\": \"fixed\", \"lambda\": 0.025",
                "\"kind\": \"power\", \"alpha\": 1.4",
            );
        let exp = ConfigFile::from_json(&text)
            .unwrap()
            .to_experiment()
            .unwrap();
        assert_eq!(exp.cost, CostSchedule::Power { alpha: 1.4 });
        assert!(
            matches!(exp.environment, EnvironmentSpec::Constrained { best_arms: 3, growth, .. } if growth == 1.6)
        );

        let flip = EASY.replace(
            "{\"id\": \"stochastic\", \"params\": {\"gap\": 0.2}}",
            "{\"id\": \"flip\"}",
        );
        let exp = ConfigFile::from_json(&flip)
            .unwrap()
            .to_experiment()
            .unwrap();
        assert_eq!(exp.environment, EnvironmentSpec::Flip);
    }

    #[test]
    fn serializes_back() {
        let file = ConfigFile::from_json(EASY).unwrap();
        assert_eq!(ConfigFile::from_json(&file.to_json()).unwrap(), file);
    }

    #[test]
    fn duplicate_labels_rejected() {
        let text = EASY.replace(
            "{\"id\": \"tsallis_inf\"}",
            "{\"id\": \"tsallis_inf\", \"label\": \"exp3\"}",
        );
        let err = ConfigFile::from_json(&text)
            .unwrap()
            .to_experiment()
            .unwrap_err();
        assert!(message(err).contains("unique"));
    }
}
