//! Run configuration: JSON files mirroring [`RunConfig`] field names, plus
//! dot-path overrides from the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sfn_core::model::{Activation, LossKind};
use sfn_core::optim::{OptimizerConfig, OptimizerKind};
use sfn_core::oracle::SfnOracleConfig;
use sfn_core::series::SeriesConfig;

use crate::error::{io_err, HarnessError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub optimizer: OptimizerSettings,
    pub epochs: usize,
    #[serde(default)]
    pub batch_size: BatchSize,
    #[serde(default)]
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if let DatasetConfig::Csv { split, .. } = &self.dataset {
            let total: f64 = split.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(HarnessError::Config(format!(
                    "split fractions must sum to 1, got {total}"
                )));
            }
        }
        self.optimizer
            .to_core()
            .validate()
            .map_err(HarnessError::Core)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetConfig {
    Csv {
        path: PathBuf,
        #[serde(default = "default_split")]
        split: [f64; 3],
        #[serde(default)]
        standardise: bool,
        /// Number of trailing columns treated as targets.
        #[serde(default = "default_target_cols")]
        target_cols: usize,
    },
    Synthetic {
        name: String,
        #[serde(default)]
        params: serde_json::Value,
    },
}

fn default_split() -> [f64; 3] {
    [0.8, 0.1, 0.1]
}

fn default_target_cols() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Mlp {
        layer_sizes: Vec<usize>,
        #[serde(default = "default_activation")]
        activation: ActivationName,
        #[serde(default = "default_loss")]
        loss: LossName,
    },
    /// Optimise the synthetic quadratic problem directly.
    Quadratic,
}

fn default_activation() -> ActivationName {
    ActivationName::Tanh
}

fn default_loss() -> LossName {
    LossName::Mse
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationName {
    Tanh,
    Relu,
    Identity,
}

impl ActivationName {
    pub fn to_core(self) -> Activation {
        match self {
            ActivationName::Tanh => Activation::Tanh,
            ActivationName::Relu => Activation::Relu,
            ActivationName::Identity => Activation::Identity,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossName {
    Mse,
    SoftmaxCrossEntropy,
}

impl LossName {
    pub fn to_core(self) -> LossKind {
        match self {
            LossName::Mse => LossKind::Mse,
            LossName::SoftmaxCrossEntropy => LossKind::SoftmaxCrossEntropy,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKindName {
    Sgd,
    Adam,
    Sfn,
    SfnAdaptive,
    ExactSfn,
    ExactSfnAdaptive,
    ExactNewton,
}

impl OptimizerKindName {
    pub fn to_core(self) -> OptimizerKind {
        match self {
            OptimizerKindName::Sgd => OptimizerKind::Sgd,
            OptimizerKindName::Adam => OptimizerKind::Adam,
            OptimizerKindName::Sfn => OptimizerKind::Sfn,
            OptimizerKindName::SfnAdaptive => OptimizerKind::SfnAdaptive,
            OptimizerKindName::ExactSfn => OptimizerKind::ExactSfn,
            OptimizerKindName::ExactSfnAdaptive => OptimizerKind::ExactSfnAdaptive,
            OptimizerKindName::ExactNewton => OptimizerKind::ExactNewton,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SeriesSettings {
    pub terms: usize,
    pub accel_order: usize,
    pub damping: f64,
    pub v_init: f64,
}

impl Default for SeriesSettings {
    fn default() -> Self {
        let d = SeriesConfig::default();
        Self {
            terms: d.terms,
            accel_order: d.accel_order,
            damping: d.damping,
            v_init: d.v_init,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleSettings {
    pub eig_threshold: f64,
    pub eig_replacement: f64,
    pub damping: f64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        let d = SfnOracleConfig::default();
        Self {
            eig_threshold: d.eig_threshold,
            eig_replacement: d.eig_replacement,
            damping: d.damping,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSettings {
    pub kind: OptimizerKindName,
    pub lr: f64,
    pub momentum: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub series: SeriesSettings,
    pub lm_omega: f64,
    pub initial_damping: f64,
    pub oracle: OracleSettings,
    pub ema_beta: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        let d = OptimizerConfig::default();
        Self {
            kind: OptimizerKindName::Sgd,
            lr: d.lr,
            momentum: d.momentum,
            adam_beta1: d.adam_beta1,
            adam_beta2: d.adam_beta2,
            adam_eps: d.adam_eps,
            series: SeriesSettings::default(),
            lm_omega: d.lm_omega,
            initial_damping: d.initial_damping,
            oracle: OracleSettings::default(),
            ema_beta: d.ema_beta,
        }
    }
}

impl OptimizerSettings {
    pub fn to_core(&self) -> OptimizerConfig {
        OptimizerConfig {
            kind: self.kind.to_core(),
            lr: self.lr,
            momentum: self.momentum,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            adam_eps: self.adam_eps,
            series: SeriesConfig {
                terms: self.series.terms,
                accel_order: self.series.accel_order,
                damping: self.series.damping,
                v_init: self.series.v_init,
            },
            lm_omega: self.lm_omega,
            initial_damping: self.initial_damping,
            oracle: SfnOracleConfig {
                eig_threshold: self.oracle.eig_threshold,
                eig_replacement: self.oracle.eig_replacement,
                damping: self.oracle.damping,
            },
            ema_beta: self.ema_beta,
        }
    }
}

/// Batch size: a count, or `"full"` for one full-batch step per epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BatchSize {
    #[default]
    Full,
    Size(usize),
}

impl Serialize for BatchSize {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BatchSize::Full => s.serialize_str("full"),
            BatchSize::Size(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for BatchSize {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let value = serde_json::Value::deserialize(d)?;
        match &value {
            serde_json::Value::String(s) if s == "full" => Ok(BatchSize::Full),
            serde_json::Value::Number(n) => n
                .as_u64()
                .filter(|&n| n > 0)
                .map(|n| BatchSize::Size(n as usize))
                .ok_or_else(|| D::Error::custom("batch_size must be a positive integer")),
            other => Err(D::Error::custom(format!(
                "batch_size must be a positive integer or \"full\", got {other}"
            ))),
        }
    }
}

/// Loads a config file, applies `--override key=value` dot-path overrides
/// and the `--seed` / `--out` flags, then deserialises.
pub fn load_config(
    path: &Path,
    seed: Option<u64>,
    out_dir: Option<&Path>,
    overrides: &[String],
) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut value: serde_json::Value = serde_json::from_str(&text)?;
    for item in overrides {
        apply_override(&mut value, item)?;
    }
    if let Some(seed) = seed {
        value["seed"] = serde_json::json!(seed);
    }
    if let Some(out) = out_dir {
        value["out_dir"] = serde_json::json!(out);
    }
    let cfg: RunConfig = serde_json::from_value(value)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Applies one `key.path=value` override. The value is parsed as JSON when
/// possible and kept as a string otherwise. Missing intermediate objects are
/// created.
pub fn apply_override(root: &mut serde_json::Value, item: &str) -> Result<()> {
    let (path, raw) = item.split_once('=').ok_or_else(|| {
        HarnessError::Config(format!("override '{item}' is not of the form key=value"))
    })?;
    let parsed: serde_json::Value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));

    let mut node = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, segment) in segments.iter().enumerate() {
        if segment.is_empty() {
            return Err(HarnessError::Config(format!(
                "override path '{path}' has an empty segment"
            )));
        }
        if !node.is_object() {
            return Err(HarnessError::Config(format!(
                "override path '{path}' descends through a non-object"
            )));
        }
        let map = node.as_object_mut().expect("checked is_object");
        if i + 1 == segments.len() {
            map.insert(segment.to_string(), parsed);
            return Ok(());
        }
        node = map
            .entry(segment.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    unreachable!("override paths always contain at least one segment")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_config_json() -> serde_json::Value {
        serde_json::json!({
            "dataset": {"kind": "synthetic", "name": "mlp_regression"},
            "model": {"kind": "mlp", "layer_sizes": [8, 12, 1]},
            "optimizer": {"kind": "sgd", "lr": 0.1},
            "epochs": 3,
            "out_dir": "/tmp/run"
        })
    }

    #[test]
    fn minimal_config_roundtrip() {
        let cfg: RunConfig = serde_json::from_value(minimal_config_json()).unwrap();
        assert_eq!(cfg.epochs, 3);
        assert_eq!(cfg.batch_size, BatchSize::Full);
        assert_eq!(cfg.seed, 0);
        let back = serde_json::to_value(&cfg).unwrap();
        let again: RunConfig = serde_json::from_value(back).unwrap();
        assert_eq!(again.epochs, 3);
    }

    #[test]
    fn batch_size_forms() {
        let cfg: RunConfig = serde_json::from_value({
            let mut v = minimal_config_json();
            v["batch_size"] = serde_json::json!(64);
            v
        })
        .unwrap();
        assert_eq!(cfg.batch_size, BatchSize::Size(64));

        let cfg: RunConfig = serde_json::from_value({
            let mut v = minimal_config_json();
            v["batch_size"] = serde_json::json!("full");
            v
        })
        .unwrap();
        assert_eq!(cfg.batch_size, BatchSize::Full);

        let bad = serde_json::from_value::<RunConfig>({
            let mut v = minimal_config_json();
            v["batch_size"] = serde_json::json!("half");
            v
        });
        assert!(bad.is_err());
    }

    #[test]
    fn overrides_apply_dot_paths() {
        let mut v = minimal_config_json();
        apply_override(&mut v, "optimizer.lr=0.5").unwrap();
        apply_override(&mut v, "optimizer.series.terms=18").unwrap();
        apply_override(&mut v, "seed=7").unwrap();
        let cfg: RunConfig = serde_json::from_value(v).unwrap();
        assert_eq!(cfg.optimizer.lr, 0.5);
        assert_eq!(cfg.optimizer.series.terms, 18);
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn override_rejects_malformed() {
        let mut v = minimal_config_json();
        assert!(apply_override(&mut v, "no_equals_sign").is_err());
        assert!(apply_override(&mut v, "a..b=1").is_err());
    }

    #[test]
    fn split_must_sum_to_one() {
        let cfg: RunConfig = serde_json::from_value(serde_json::json!({
            "dataset": {"kind": "csv", "path": "x.csv", "split": [0.5, 0.2, 0.2]},
            "model": {"kind": "mlp", "layer_sizes": [8, 1]},
            "optimizer": {"kind": "sgd", "lr": 0.1},
            "epochs": 1,
            "out_dir": "/tmp/run"
        }))
        .unwrap();
        assert!(cfg.validate().is_err());
    }
}
