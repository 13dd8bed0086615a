//! Initialization, optimization, the training loop and evaluation metrics.

mod adam;
mod init;
mod metrics;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModelError;

pub use adam::{adam_step, AdamState};
pub use init::{kaiming_bound, kaiming_uniform_init};
pub use metrics::{
    default_threshold_grid, evaluate, roc_auc, roc_curve, threshold_moving, Confusion, EvalReport, RocPoint,
};
pub use train::{score_pairs, split_indices, train, EpochRecord, PairIndex, PairSet, Split, TrainOutcome};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("dataset has no pairs to work with")]
    EmptyDataset,
    #[error("AUC needs both classes")]
    SingleClass,
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("pair refers to unknown graph {0}")]
    BadPair(usize),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub threshold_grid: Vec<f64>,
    /// Stop after this many consecutive epochs of perfect validation F1; 0 never stops early.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-4,
            batch_size: 50,
            epochs: 300,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            threshold_grid: default_threshold_grid(),
            patience: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if !(self.eps > 0.0) {
            return bad("eps must be positive");
        }
        let grid = &self.threshold_grid;
        if grid.is_empty()
            || grid.iter().any(|g| !(0.0..=1.0).contains(g))
            || grid.windows(2).any(|w| w[0] >= w[1])
        {
            return bad("threshold grid must be non-empty, strictly increasing and within [0, 1]");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
