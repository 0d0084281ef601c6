//! Weight-tied twin network with an element-wise distance head.
//!
//! Both inputs pass through the same trunk `f`; the head computes
//! `σ(w · |f(a) − f(b)|^e + β)` with `e ∈ {1, 2}` applied element-wise.
//! After training, the mean trunk output over positive examples serves as an
//! embedding and a query is scored by its similarity to that mean.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dense::{probability, sigmoid, softplus, Activation, DenseNetwork, LayerSpec, NetworkGrads};
use super::{Adam, NnError, TrainConfig, TrainLog, TrainingMeta};
use crate::action::Action;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum MetricExponent {
    /// `|Δ|`, used for material similarity.
    L1,
    /// `|Δ|²`, used for joint shape similarity.
    SquaredL1,
}

impl MetricExponent {
    fn apply(self, delta: f64) -> f64 {
        match self {
            MetricExponent::L1 => delta.abs(),
            MetricExponent::SquaredL1 => delta * delta,
        }
    }

    fn derivative(self, delta: f64) -> f64 {
        match self {
            MetricExponent::L1 => {
                if delta > 0.0 {
                    1.0
                } else if delta < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            MetricExponent::SquaredL1 => 2.0 * delta,
        }
    }
}

impl From<MetricExponent> for u8 {
    fn from(e: MetricExponent) -> u8 {
        match e {
            MetricExponent::L1 => 1,
            MetricExponent::SquaredL1 => 2,
        }
    }
}

impl TryFrom<u8> for MetricExponent {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(MetricExponent::L1),
            2 => Ok(MetricExponent::SquaredL1),
            other => Err(format!("metric exponent must be 1 or 2, got {other}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualArchitecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub exponent: MetricExponent,
}

impl DualArchitecture {
    /// 331 → 426 → 284 → 128, tanh, L1 head.
    pub fn material() -> Self {
        Self {
            input_dim: crate::spectral::SPECTRAL_LEN,
            hidden: vec![426, 284, 128],
            activation: Activation::Tanh,
            exponent: MetricExponent::L1,
        }
    }

    /// 640 → 426 → 284 → 128, tanh, squared-L1 head.
    pub fn joint_shape() -> Self {
        Self {
            input_dim: crate::geometry::ESF_LEN,
            hidden: vec![426, 284, 128],
            activation: Activation::Tanh,
            exponent: MetricExponent::SquaredL1,
        }
    }
}

/// Mean trunk output over an action's positive examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub values: Vec<f64>,
    pub action: Action,
    pub count: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct TrainingPair<'a> {
    pub first: &'a [f64],
    pub second: &'a [f64],
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualNetworkModel {
    pub trunk: DenseNetwork,
    pub head_weights: Vec<f64>,
    pub head_bias: f64,
    pub metric_exponent: MetricExponent,
    pub training: Option<TrainingMeta>,
}

/// Gradients of the dual loss, trunk first.
#[derive(Debug, Clone)]
pub struct DualGrads {
    pub trunk: NetworkGrads,
    pub head_weights: Vec<f64>,
    pub head_bias: f64,
}

impl DualGrads {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = self.trunk.flatten();
        out.extend_from_slice(&self.head_weights);
        out.push(self.head_bias);
        out
    }
}

impl DualNetworkModel {
    pub fn random(arch: &DualArchitecture, dropout: f64, seed: u64) -> Result<Self, NnError> {
        let specs: Vec<LayerSpec> = arch
            .hidden
            .iter()
            .map(|&u| LayerSpec::new(u, arch.activation, dropout))
            .collect();
        let trunk = DenseNetwork::random(arch.input_dim, &specs, seed)?;
        let d = trunk.output_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4ead);
        let limit = (6.0 / (d + 1) as f64).sqrt();
        Ok(Self {
            trunk,
            head_weights: (0..d).map(|_| rng.random_range(-limit..limit)).collect(),
            head_bias: 0.0,
            metric_exponent: arch.exponent,
            training: None,
        })
    }

    pub fn from_parts(
        trunk: DenseNetwork,
        head_weights: Vec<f64>,
        head_bias: f64,
        metric_exponent: MetricExponent,
    ) -> Result<Self, NnError> {
        if head_weights.len() != trunk.output_dim() {
            return Err(NnError::DimensionMismatch {
                expected: trunk.output_dim(),
                got: head_weights.len(),
            });
        }
        Ok(Self {
            trunk,
            head_weights,
            head_bias,
            metric_exponent,
            training: None,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.trunk.input_dim()
    }

    pub fn embedding_dim(&self) -> usize {
        self.trunk.output_dim()
    }

    /// `f(x)`, inference mode.
    pub fn forward_trunk(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        self.trunk.forward(x)
    }

    /// `f(x)` for many inputs at once.
    pub fn forward_trunk_many(&self, xs: &[&[f64]]) -> Result<Vec<Vec<f64>>, NnError> {
        let dim = self.input_dim();
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
        let out = self.trunk.forward_batch(&flat, xs.len());
        Ok(out
            .chunks(self.embedding_dim())
            .map(<[f64]>::to_vec)
            .collect())
    }

    fn head_logit(&self, fa: &[f64], fb: &[f64]) -> f64 {
        self.head_weights
            .iter()
            .zip(fa.iter().zip(fb))
            .map(|(w, (a, b))| w * self.metric_exponent.apply(a - b))
            .sum::<f64>()
            + self.head_bias
    }

    /// Similarity head applied to two trunk outputs.
    pub fn feature_probability(&self, fa: &[f64], fb: &[f64]) -> Result<f64, NnError> {
        let d = self.embedding_dim();
        if fa.len() != d || fb.len() != d {
            return Err(NnError::DimensionMismatch {
                expected: d,
                got: if fa.len() != d { fa.len() } else { fb.len() },
            });
        }
        Ok(probability(self.head_logit(fa, fb)))
    }

    pub fn pair_probability(&self, a: &[f64], b: &[f64]) -> Result<f64, NnError> {
        let fa = self.forward_trunk(a)?;
        let fb = self.forward_trunk(b)?;
        self.feature_probability(&fa, &fb)
    }

    pub fn compute_embedding<'a>(
        &self,
        action: Action,
        positives: impl IntoIterator<Item = &'a [f64]>,
    ) -> Result<Embedding, NnError> {
        let xs: Vec<&[f64]> = positives.into_iter().collect();
        if xs.is_empty() {
            return Err(NnError::EmptyPositives);
        }
        let outputs = self.forward_trunk_many(&xs)?;
        let mut mean = vec![0.0; self.embedding_dim()];
        for f in &outputs {
            mean.iter_mut().zip(f).for_each(|(m, v)| *m += v);
        }
        let n = outputs.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        Ok(Embedding {
            values: mean,
            action,
            count: outputs.len(),
        })
    }

    /// Similarity of `x` to the embedding.
    pub fn embedding_score(&self, embedding: &Embedding, x: &[f64]) -> Result<f64, NnError> {
        let f = self.forward_trunk(x)?;
        self.feature_probability(&embedding.values, &f)
    }

    /// Mean binary cross-entropy over `batch` plus `l2 · |w|²`, and its
    /// gradient. Dropout masks come from `rng`; `None` disables dropout.
    pub fn loss_and_grad(
        &self,
        batch: &[TrainingPair<'_>],
        l2: f64,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(f64, DualGrads), NnError> {
        let dim = self.input_dim();
        let b = batch.len();
        let mut flat = Vec::with_capacity(2 * b * dim);
        for pair in batch {
            for x in [pair.first, pair.second] {
                if x.len() != dim {
                    return Err(NnError::DimensionMismatch {
                        expected: dim,
                        got: x.len(),
                    });
                }
            }
            flat.extend_from_slice(pair.first);
        }
        for pair in batch {
            flat.extend_from_slice(pair.second);
        }

        let cache = self.trunk.forward_train(&flat, 2 * b, rng);
        let d = self.embedding_dim();
        let features = cache.output();
        let (left, right) = features.split_at(b * d);

        let mut loss = 0.0;
        let mut grad_features = vec![0.0; 2 * b * d];
        let mut grad_w: Vec<f64> = self.head_weights.iter().map(|w| 2.0 * l2 * w).collect();
        let mut grad_beta = 0.0;
        for (i, pair) in batch.iter().enumerate() {
            let fa = &left[i * d..(i + 1) * d];
            let fb = &right[i * d..(i + 1) * d];
            let z = self.head_logit(fa, fb);
            let y = if pair.label { 1.0 } else { 0.0 };
            loss += softplus(z) - y * z;
            let dz = (sigmoid(z) - y) / b as f64;
            grad_beta += dz;
            for k in 0..d {
                let delta = fa[k] - fb[k];
                grad_w[k] += dz * self.metric_exponent.apply(delta);
                let g = dz * self.head_weights[k] * self.metric_exponent.derivative(delta);
                grad_features[i * d + k] = g;
                grad_features[(b + i) * d + k] = -g;
            }
        }
        loss /= b as f64;
        loss += l2 * self.head_weights.iter().map(|w| w * w).sum::<f64>();

        let trunk = self.trunk.backward(&cache, &grad_features, false);
        Ok((
            loss,
            DualGrads {
                trunk,
                head_weights: grad_w,
                head_bias: grad_beta,
            },
        ))
    }

    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = self.trunk.flatten_params();
        out.extend_from_slice(&self.head_weights);
        out.push(self.head_bias);
        out
    }

    pub fn set_params(&mut self, params: &[f64]) {
        let n = self.trunk.parameter_count();
        let d = self.head_weights.len();
        assert_eq!(params.len(), n + d + 1);
        self.trunk.set_params(&params[..n]);
        self.head_weights.copy_from_slice(&params[n..n + d]);
        self.head_bias = params[n + d];
    }

    pub fn head_norm(&self) -> f64 {
        self.head_weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

fn apply_step(model: &mut DualNetworkModel, adam: &mut Adam, grads: &DualGrads) {
    let mut params: Vec<&mut [f64]> = Vec::new();
    for layer in model.trunk.layers_mut() {
        params.push(&mut layer.weights);
        params.push(&mut layer.bias);
    }
    params.push(&mut model.head_weights);
    params.push(std::slice::from_mut(&mut model.head_bias));
    let mut gs: Vec<&[f64]> = Vec::new();
    for (w, b) in grads.trunk.weights.iter().zip(&grads.trunk.bias) {
        gs.push(w);
        gs.push(b);
    }
    gs.push(&grads.head_weights);
    gs.push(std::slice::from_ref(&grads.head_bias));
    adam.step(&mut params, &gs);
}

fn group_sizes(model: &DualNetworkModel) -> Vec<usize> {
    let mut sizes: Vec<usize> = model
        .trunk
        .layers()
        .iter()
        .flat_map(|l| [l.weights.len(), l.bias.len()])
        .collect();
    sizes.push(model.head_weights.len());
    sizes.push(1);
    sizes
}

/// Trains a twin network on labelled pairs with Adam.
pub fn train_dual(
    pairs: &[TrainingPair<'_>],
    arch: &DualArchitecture,
    config: &TrainConfig,
) -> Result<(DualNetworkModel, TrainLog), NnError> {
    config.validate()?;
    let positives = pairs.iter().filter(|p| p.label).count();
    if pairs.is_empty() || positives == 0 || positives == pairs.len() {
        return Err(NnError::DegenerateLabels);
    }
    let mut model = DualNetworkModel::random(arch, config.dropout, config.seed)?;
    let mut adam = Adam::new(config.learning_rate, &group_sizes(&model));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut log = TrainLog::default();
    let mut batch = Vec::with_capacity(config.batch_size);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| pairs[i]));
            let (loss, grads) = model.loss_and_grad(&batch, config.l2, Some(&mut rng))?;
            apply_step(&mut model, &mut adam, &grads);
            total += loss;
            batches += 1;
        }
        log.epoch_losses.push(total / batches as f64);
    }
    model.training = Some(TrainingMeta::from(config));
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::dense::DenseLayer;

    fn tiny_arch(exponent: MetricExponent) -> DualArchitecture {
        DualArchitecture {
            input_dim: 4,
            hidden: vec![6, 3],
            activation: Activation::Tanh,
            exponent,
        }
    }

    fn hand_model() -> DualNetworkModel {
        // identity trunk, so f-differences are chosen directly by the inputs
        let layer = DenseLayer {
            rows: 2,
            cols: 2,
            weights: vec![1.0, 0.0, 0.0, 1.0],
            bias: vec![0.0, 0.0],
            activation: Activation::Identity,
            dropout: 0.0,
        };
        DualNetworkModel::from_parts(
            DenseNetwork::new(vec![layer]).unwrap(),
            vec![1.0, 1.0],
            0.0,
            MetricExponent::L1,
        )
        .unwrap()
    }

    #[test]
    fn same_input_gives_sigmoid_of_bias() {
        let mut m = DualNetworkModel::random(&tiny_arch(MetricExponent::L1), 0.0, 1).unwrap();
        m.head_bias = 0.3;
        let x = [0.1, 0.2, -0.3, 0.9];
        assert_eq!(m.pair_probability(&x, &x).unwrap(), sigmoid(0.3));
    }

    #[test]
    fn closed_form_head() {
        let m = hand_model();
        let p = m.pair_probability(&[0.5, 0.5], &[0.0, 0.0]).unwrap();
        assert!((p - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert_eq!(p, m.pair_probability(&[0.0, 0.0], &[0.5, 0.5]).unwrap());
    }

    #[test]
    fn embedding_score_closed_form() {
        let layer = DenseLayer {
            rows: 1,
            cols: 1,
            weights: vec![1.0],
            bias: vec![0.0],
            activation: Activation::Identity,
            dropout: 0.0,
        };
        let m = DualNetworkModel::from_parts(
            DenseNetwork::new(vec![layer]).unwrap(),
            vec![-2.0],
            1.0,
            MetricExponent::L1,
        )
        .unwrap();
        let e = Embedding {
            values: vec![0.25],
            action: Action::Hit,
            count: 1,
        };
        assert_eq!(m.embedding_score(&e, &[0.75]).unwrap(), 0.5);
        assert_eq!(m.embedding_score(&e, &[0.25]).unwrap(), sigmoid(1.0));
    }

    #[test]
    fn embedding_is_mean_of_trunk_outputs() {
        let m = DualNetworkModel::random(&tiny_arch(MetricExponent::L1), 0.0, 2).unwrap();
        let xs = [[0.1, 0.2, 0.3, 0.4], [-1.0, 0.0, 1.0, 2.0], [0.5, 0.5, -0.5, 0.0]];
        let outs: Vec<Vec<f64>> = xs.iter().map(|x| m.forward_trunk(x).unwrap()).collect();
        let e = m
            .compute_embedding(Action::Hit, xs.iter().map(|x| &x[..]))
            .unwrap();
        assert_eq!(e.count, 3);
        for k in 0..3 {
            let mean = (outs[0][k] + outs[1][k] + outs[2][k]) / 3.0;
            assert!((e.values[k] - mean).abs() < 1e-12);
        }
        let single = m.compute_embedding(Action::Hit, [&xs[0][..]]).unwrap();
        let dup = m
            .compute_embedding(Action::Hit, [&xs[0][..], &xs[0][..]])
            .unwrap();
        for k in 0..3 {
            assert!((single.values[k] - outs[0][k]).abs() < 1e-15);
            assert!((dup.values[k] - single.values[k]).abs() < 1e-15);
        }
        assert!(matches!(
            m.compute_embedding(Action::Hit, std::iter::empty()),
            Err(NnError::EmptyPositives)
        ));
    }

    #[test]
    fn dimension_errors() {
        let m = DualNetworkModel::random(&tiny_arch(MetricExponent::L1), 0.0, 2).unwrap();
        assert!(matches!(
            m.pair_probability(&[1.0], &[1.0, 2.0, 3.0, 4.0]),
            Err(NnError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn single_label_is_rejected() {
        let x = [0.0; 4];
        let pairs = vec![
            TrainingPair {
                first: &x,
                second: &x,
                label: true
            };
            4
        ];
        let cfg = TrainConfig::default();
        assert!(matches!(
            train_dual(&pairs, &tiny_arch(MetricExponent::L1), &cfg),
            Err(NnError::DegenerateLabels)
        ));
    }

    fn gaussian_pairs(seed: u64, n: usize) -> (Vec<Vec<f64>>, Vec<(usize, usize, bool)>) {
        use rand_distr::{Distribution, Normal};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.25).unwrap();
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let c = if i % 2 == 0 { 1.0 } else { -1.0 };
                (0..4).map(|_| c + noise.sample(&mut rng)).collect()
            })
            .collect();
        let pos: Vec<usize> = (0..n).step_by(2).collect();
        let neg: Vec<usize> = (1..n).step_by(2).collect();
        let pairs = crate::spectral::balanced_pairs(&pos, &neg, 2 * n, seed).unwrap();
        (xs, pairs)
    }

    fn as_training<'a>(xs: &'a [Vec<f64>], pairs: &[(usize, usize, bool)]) -> Vec<TrainingPair<'a>> {
        pairs
            .iter()
            .map(|&(i, j, label)| TrainingPair {
                first: &xs[i],
                second: &xs[j],
                label,
            })
            .collect()
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            learning_rate: 1e-2,
            l2: 1e-4,
            epochs: 50,
            batch_size: 32,
            dropout: 0.0,
            seed: 0,
        }
    }

    #[test]
    fn separable_classes_generalize_to_held_out_pairs() {
        let arch = tiny_arch(MetricExponent::L1);
        let (xs, pairs) = gaussian_pairs(10, 80);
        let train = as_training(&xs, &pairs);
        let (model, log) = train_dual(&train, &arch, &small_config()).unwrap();
        assert!(log.epoch_losses.last().unwrap() < &log.epoch_losses[0]);
        let (hx, hp) = gaussian_pairs(11, 80);
        let correct = hp
            .iter()
            .filter(|&&(i, j, y)| (model.pair_probability(&hx[i], &hx[j]).unwrap() >= 0.5) == y)
            .count();
        let acc = correct as f64 / hp.len() as f64;
        assert!(acc >= 0.95, "held-out accuracy {acc}");
    }

    #[test]
    fn huge_l2_shrinks_head() {
        let arch = tiny_arch(MetricExponent::SquaredL1);
        let init = DualNetworkModel::random(&arch, 0.0, 0).unwrap().head_norm();
        let (xs, pairs) = gaussian_pairs(12, 40);
        let train = as_training(&xs, &pairs);
        let cfg = TrainConfig {
            l2: 1e6,
            epochs: 5,
            ..small_config()
        };
        let (model, _) = train_dual(&train, &arch, &cfg).unwrap();
        assert!(model.head_norm() < init);
    }

    #[test]
    fn training_is_bit_deterministic() {
        let arch = tiny_arch(MetricExponent::L1);
        let (xs, pairs) = gaussian_pairs(13, 40);
        let train = as_training(&xs, &pairs);
        let cfg = TrainConfig {
            dropout: 0.5,
            epochs: 3,
            ..small_config()
        };
        let (a, _) = train_dual(&train, &arch, &cfg).unwrap();
        let (b, _) = train_dual(&train, &arch, &cfg).unwrap();
        assert_eq!(a.flatten_params(), b.flatten_params());
    }
}
