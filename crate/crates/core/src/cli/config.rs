//! Experiment configuration documents (TOML).

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::aggregation::{StrategyTag, DEFAULT_ALPHA};
use crate::data::PartitionPlan;
use crate::engine::TrainConfig;
use crate::error::{Error, Result};
use crate::models::{ModelKind, ModelSpec};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetConfig {
    Idx {
        images: PathBuf,
        labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
    Synthetic {
        samples: usize,
        test_samples: usize,
        dim: usize,
        classes: usize,
        /// Fixed data seed; when absent each run seed generates its own data.
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default)]
    pub hidden_dims: Option<Vec<usize>>,
    pub input_dim: Option<usize>,
    pub num_classes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    /// Shorthand such as `"5IID+5NonIID(1)"`.
    pub nodes: String,
    pub samples_per_node: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub eta0: f64,
    pub decay: f64,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub rounds: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub clients_per_round: Option<usize>,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_strategies() -> Vec<StrategyTag> {
    vec![StrategyTag::FedAvg, StrategyTag::FedAdp]
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub partition: PartitionConfig,
    pub train: TrainSection,
    pub targets: Vec<f64>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<StrategyTag>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let key = e
                .span()
                .and_then(|span| text.get(span))
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .unwrap_or_else(|| "<document>".into());
            Error::config(key, message)
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        let distinct: BTreeSet<u64> = self.seeds.iter().copied().collect();
        if distinct.len() != self.seeds.len() {
            return Err(Error::config("seeds", "seeds must be distinct"));
        }
        if let Some(t) = self.targets.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(Error::config("targets", format!("{t} is outside (0, 1]")));
        }
        if self.strategies.is_empty() {
            return Err(Error::config("strategies", "at least one strategy is required"));
        }
        if let DatasetConfig::Synthetic {
            samples,
            test_samples,
            dim,
            classes,
            ..
        } = &self.dataset
        {
            if *classes == 0 || *dim == 0 {
                return Err(Error::config(
                    "dataset.synthetic",
                    "`dim` and `classes` must be positive",
                ));
            }
            if samples < classes {
                return Err(Error::config(
                    "dataset.synthetic.samples",
                    "must be at least the number of classes",
                ));
            }
            if *test_samples == 0 {
                return Err(Error::config("dataset.synthetic.test_samples", "must be positive"));
            }
        }
        if self.model.kind == ModelKind::Mlr
            && self.model.hidden_dims.as_ref().is_some_and(|h| !h.is_empty())
        {
            return Err(Error::config("model.hidden_dims", "must be empty for an MLR model"));
        }
        self.plan(0)?;
        self.train_config(StrategyTag::FedAvg, 0).validate()
    }

    /// Model spec for a dataset with the given shape. Explicit
    /// `input_dim`/`num_classes` must agree with the data.
    pub fn model_spec(&self, input_dim: usize, num_classes: usize) -> Result<ModelSpec> {
        if let Some(d) = self.model.input_dim.filter(|&d| d != input_dim) {
            return Err(Error::config(
                "model.input_dim",
                format!("{d} does not match the data dimension {input_dim}"),
            ));
        }
        if let Some(c) = self.model.num_classes.filter(|&c| c != num_classes) {
            return Err(Error::config(
                "model.num_classes",
                format!("{c} does not match the {num_classes} classes in the data"),
            ));
        }
        let spec = match self.model.kind {
            ModelKind::Mlr => ModelSpec::mlr(input_dim, num_classes),
            ModelKind::Mlp => ModelSpec::mlp(
                input_dim,
                num_classes,
                self.model.hidden_dims.clone().unwrap_or_else(|| vec![64]),
            ),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn plan(&self, seed: u64) -> Result<PartitionPlan> {
        PartitionPlan::from_shorthand(&self.partition.nodes, self.partition.samples_per_node, seed)
    }

    pub fn train_config(&self, strategy: StrategyTag, seed: u64) -> TrainConfig {
        TrainConfig {
            eta0: self.train.eta0,
            decay: self.train.decay,
            local_epochs: self.train.local_epochs,
            batch_size: self.train.batch_size,
            rounds: self.train.rounds,
            alpha: self.train.alpha,
            strategy,
            seed,
            clients_per_round: self.train.clients_per_round,
        }
    }
}
