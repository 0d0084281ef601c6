//! Small feed-forward networks trained with Adam: the twin similarity model
//! and plain binary classifiers.

mod adam;
mod binary;
mod dense;
mod dual;
mod persist;

pub use adam::Adam;
pub use binary::{train_binary, BinaryArchitecture, BinaryClassifier};
pub use dense::{
    probability, sigmoid, softplus, Activation, DenseLayer, DenseNetwork, ForwardCache, LayerSpec,
    NetworkGrads,
};
pub use dual::{
    train_dual, DualArchitecture, DualGrads, DualNetworkModel, Embedding, MetricExponent,
    TrainingPair,
};
pub use persist::{
    load_binary, load_dual, read_binary, read_dual, save_binary, save_dual, write_binary,
    write_dual, ModelKind, FORMAT_VERSION,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("expected input of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("malformed model: {0}")]
    Malformed(String),
    #[error("training data needs both positive and negative labels")]
    DegenerateLabels,
    #[error("embedding needs at least one positive example")]
    EmptyPositives,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// L2 coefficient λ.
    pub l2: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            l2: 1e-4,
            epochs: 20,
            batch_size: 32,
            dropout: 0.5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NnError::InvalidConfig(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(NnError::InvalidConfig(format!("l2 {} must be >= 0", self.l2)));
        }
        if self.batch_size == 0 {
            return Err(NnError::InvalidConfig("batch size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(NnError::InvalidConfig(format!("dropout {} not in [0,1)", self.dropout)));
        }
        Ok(())
    }
}

/// Hyperparameters recorded alongside a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub lr: f64,
    pub l2: f64,
    pub epochs: usize,
}

impl From<&TrainConfig> for TrainingMeta {
    fn from(c: &TrainConfig) -> Self {
        Self {
            seed: c.seed,
            lr: c.learning_rate,
            l2: c.l2,
            epochs: c.epochs,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    /// Mean mini-batch loss per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Central-difference gradient of `f` at `params`.
pub fn numeric_gradient(params: &[f64], step: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + step;
            let up = f(&p);
            p[i] = orig - step;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// `‖a − b‖ / (‖a‖ + ‖b‖)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut a.iter().zip(b).map(|(x, y)| x - y));
    let scale = norm(&mut a.iter().copied()) + norm(&mut b.iter().copied());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}
