//! Training configuration, read from a flat TOML document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::embedder::Doc2VecConfig;
use crate::fsgnn::{Activation, CompositionOp, ModelConfig};

/// How the per-node loss is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossNorm {
    /// Each graph's summed loss is divided by its own node count.
    #[default]
    Graph,
    /// The batch loss is divided by the batch's total node count.
    Global,
}

impl std::str::FromStr for LossNorm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "graph" => Ok(LossNorm::Graph),
            "global" => Ok(LossNorm::Global),
            other => Err(format!(
                "unknown loss normalization `{other}` (expected graph or global)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub node_dim: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub oversample_scale: f64,
    pub epochs: usize,
    pub seed: u64,
    pub composition: CompositionOp,
    pub bases: usize,
    /// Message-passing layers before resampling; one more layer follows it.
    pub layers: usize,
    /// Edge generator acceptance threshold.
    pub eta: f64,
    /// Fraction of sample pairs used for training.
    pub split: f64,
    pub api_list: Option<PathBuf>,
    pub loss_norm: LossNorm,
    pub mean_aggregation: bool,
    /// Epochs without smoothed-loss improvement before stopping.
    pub patience: usize,
    pub tolerance: f64,
    pub edge_lr: f64,
    pub doc2vec_epochs: usize,
    pub doc2vec_window: usize,
    pub doc2vec_negative: usize,
    pub doc2vec_lr: f64,
    pub infer_steps: usize,
    pub normalize_identifiers: bool,
    /// Scale node embeddings to unit length.
    pub unit_norm: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            node_dim: 100,
            batch_size: 32,
            dropout: 0.1,
            lr: 0.001,
            weight_decay: 0.5,
            oversample_scale: 1.0,
            epochs: 40,
            seed: 0,
            composition: CompositionOp::Ccorr,
            bases: 4,
            layers: 2,
            eta: 0.5,
            split: 0.8,
            api_list: None,
            loss_norm: LossNorm::Graph,
            mean_aggregation: false,
            patience: 10,
            tolerance: 1e-5,
            edge_lr: 0.01,
            doc2vec_epochs: 20,
            doc2vec_window: 4,
            doc2vec_negative: 5,
            doc2vec_lr: 0.025,
            infer_steps: 50,
            normalize_identifiers: false,
            unit_norm: false,
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let cfg: TrainConfig =
            toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: &str| Err(PipelineError::Config(msg.to_string()));
        let positive = [
            ("node_dim", self.node_dim),
            ("batch_size", self.batch_size),
            ("bases", self.bases),
            ("layers", self.layers),
            ("doc2vec_window", self.doc2vec_window),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return bad(&format!("{name} must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return bad("split must lie in (0, 1)");
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad("eta must lie in (0, 1)");
        }
        if !(self.lr > 0.0 && self.doc2vec_lr > 0.0 && self.edge_lr >= 0.0) {
            return bad("learning rates must be positive");
        }
        if self.weight_decay < 0.0 || self.oversample_scale < 0.0 || self.tolerance < 0.0 {
            return bad("weight_decay, oversample_scale and tolerance must be non-negative");
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            dim: self.node_dim,
            layers: self.layers,
            bases: self.bases,
            op: self.composition,
            activation: Activation::Tanh,
            mean_agg: self.mean_aggregation,
            dropout: self.dropout,
        }
    }

    pub fn doc2vec_config(&self) -> Doc2VecConfig {
        Doc2VecConfig {
            dim: self.node_dim,
            window: self.doc2vec_window,
            negative: self.doc2vec_negative,
            epochs: self.doc2vec_epochs,
            lr: self.doc2vec_lr,
            infer_steps: self.infer_steps,
            normalize_identifiers: self.normalize_identifiers,
            unit_norm: self.unit_norm,
            seed: self.seed,
            ..Doc2VecConfig::default()
        }
    }
}
