//! Feed-forward binary classifiers with a single sigmoid output.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dense::{Activation, DenseNetwork, LayerSpec, NetworkGrads};
use super::{Adam, NnError, TrainConfig, TrainLog, TrainingMeta};

const EDGE: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryArchitecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl BinaryArchitecture {
    /// 640 → 256 → 64 → 1, ReLU hidden.
    pub fn part_shape() -> Self {
        Self {
            input_dim: crate::geometry::ESF_LEN,
            hidden: vec![256, 64],
            activation: Activation::Relu,
        }
    }

    /// 331 → 256 → 1.
    pub fn pierce() -> Self {
        Self {
            input_dim: crate::spectral::SPECTRAL_LEN,
            hidden: vec![256],
            activation: Activation::Relu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryClassifier {
    pub network: DenseNetwork,
    pub training: Option<TrainingMeta>,
}

impl BinaryClassifier {
    pub fn random(arch: &BinaryArchitecture, dropout: f64, seed: u64) -> Result<Self, NnError> {
        let mut specs: Vec<LayerSpec> = arch
            .hidden
            .iter()
            .map(|&u| LayerSpec::new(u, arch.activation, dropout))
            .collect();
        specs.push(LayerSpec::new(1, Activation::Sigmoid, 0.0));
        Ok(Self {
            network: DenseNetwork::random(arch.input_dim, &specs, seed)?,
            training: None,
        })
    }

    pub fn from_network(network: DenseNetwork) -> Result<Self, NnError> {
        let last = network.layers().last().expect("non-empty");
        if last.rows != 1 || last.activation != Activation::Sigmoid {
            return Err(NnError::Malformed(
                "classifier must end in a single sigmoid unit".into(),
            ));
        }
        Ok(Self {
            network,
            training: None,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.network.input_dim()
    }

    /// Confidence in the positive class, strictly inside (0, 1).
    pub fn predict(&self, x: &[f64]) -> Result<f64, NnError> {
        Ok(self.network.forward(x)?[0].clamp(EDGE, 1.0 - EDGE))
    }

    pub fn predict_many(&self, xs: &[&[f64]]) -> Result<Vec<f64>, NnError> {
        let flat = stack(xs, self.input_dim())?;
        Ok(self
            .network
            .forward_batch(&flat, xs.len())
            .into_iter()
            .map(|p| p.clamp(EDGE, 1.0 - EDGE))
            .collect())
    }

    /// Mean cross-entropy plus `l2 · Σ W²` over every weight matrix.
    pub fn loss_and_grad(
        &self,
        xs: &[&[f64]],
        labels: &[bool],
        l2: f64,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(f64, NetworkGrads), NnError> {
        assert_eq!(xs.len(), labels.len());
        let b = xs.len();
        let flat = stack(xs, self.input_dim())?;
        let cache = self.network.forward_train(&flat, b, rng);
        let mut loss = 0.0;
        let dz: Vec<f64> = cache
            .output()
            .iter()
            .zip(labels)
            .map(|(&p, &y)| {
                let y = if y { 1.0 } else { 0.0 };
                let pc = p.clamp(EDGE, 1.0 - EDGE);
                loss -= y * pc.ln() + (1.0 - y) * (1.0 - pc).ln();
                (p - y) / b as f64
            })
            .collect();
        loss = loss / b as f64 + l2 * self.network.weight_norm_sq();
        let mut grads = self.network.backward(&cache, &dz, true);
        for (g, layer) in grads.weights.iter_mut().zip(self.network.layers()) {
            g.iter_mut()
                .zip(&layer.weights)
                .for_each(|(g, w)| *g += 2.0 * l2 * w);
        }
        Ok((loss, grads))
    }
}

fn stack(xs: &[&[f64]], dim: usize) -> Result<Vec<f64>, NnError> {
    let mut flat = Vec::with_capacity(xs.len() * dim);
    for x in xs {
        if x.len() != dim {
            return Err(NnError::DimensionMismatch {
                expected: dim,
                got: x.len(),
            });
        }
        flat.extend_from_slice(x);
    }
    Ok(flat)
}

pub fn train_binary(
    features: &[&[f64]],
    labels: &[bool],
    arch: &BinaryArchitecture,
    config: &TrainConfig,
) -> Result<(BinaryClassifier, TrainLog), NnError> {
    config.validate()?;
    if features.len() != labels.len() {
        return Err(NnError::Malformed(format!(
            "{} feature rows but {} labels",
            features.len(),
            labels.len()
        )));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return Err(NnError::DegenerateLabels);
    }
    let mut clf = BinaryClassifier::random(arch, config.dropout, config.seed)?;
    let sizes: Vec<usize> = clf
        .network
        .layers()
        .iter()
        .flat_map(|l| [l.weights.len(), l.bias.len()])
        .collect();
    let mut adam = Adam::new(config.learning_rate, &sizes);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut log = TrainLog::default();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let xs: Vec<&[f64]> = chunk.iter().map(|&i| features[i]).collect();
            let ys: Vec<bool> = chunk.iter().map(|&i| labels[i]).collect();
            let (loss, grads) = clf.loss_and_grad(&xs, &ys, config.l2, Some(&mut rng))?;
            let mut params: Vec<&mut [f64]> = Vec::new();
            for layer in clf.network.layers_mut() {
                params.push(&mut layer.weights);
                params.push(&mut layer.bias);
            }
            let gs: Vec<&[f64]> = grads
                .weights
                .iter()
                .zip(&grads.bias)
                .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
                .collect();
            adam.step(&mut params, &gs);
            total += loss;
            batches += 1;
        }
        log.epoch_losses.push(total / batches as f64);
    }
    clf.training = Some(TrainingMeta::from(config));
    Ok((clf, log))
}
