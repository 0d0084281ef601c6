//! Dense layers stored row-major, evaluated a mini-batch at a time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Sigmoid squeezed into the open interval so scores never hit 0 or 1.
pub fn probability(z: f64) -> f64 {
    const EDGE: f64 = 1e-15;
    sigmoid(z).clamp(EDGE, 1.0 - EDGE)
}

/// `c = a · b + beta · c` with explicit row/column strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    debug_assert!(a.len() >= (m - 1) * rsa + (k.max(1) - 1) * csa + 1 || k == 0);
    debug_assert!(c.len() >= (m - 1) * rsc + (n - 1) * csc + 1);
    // SAFETY: the slices cover every index the strides address (checked above
    // in debug builds; callers pass dense row-major buffers of matching shape).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// Output dimension.
    pub rows: usize,
    /// Input dimension.
    pub cols: usize,
    /// `rows × cols`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
    /// Train-time drop probability applied to this layer's output.
    pub dropout: f64,
}

impl DenseLayer {
    /// Glorot-uniform weights, zero bias.
    pub fn glorot(
        cols: usize,
        rows: usize,
        activation: Activation,
        dropout: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let limit = (6.0 / (cols + rows) as f64).sqrt();
        Self {
            rows,
            cols,
            weights: (0..rows * cols)
                .map(|_| rng.random_range(-limit..limit))
                .collect(),
            bias: vec![0.0; rows],
            activation,
            dropout,
        }
    }

    pub fn zeros(cols: usize, rows: usize, activation: Activation) -> Self {
        Self {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
            activation,
            dropout: 0.0,
        }
    }

    fn validate(&self) -> Result<(), NnError> {
        if self.weights.len() != self.rows * self.cols || self.bias.len() != self.rows {
            return Err(NnError::Malformed(format!(
                "layer {}x{} has {} weights and {} biases",
                self.rows,
                self.cols,
                self.weights.len(),
                self.bias.len()
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(NnError::Malformed(format!("dropout {} not in [0,1)", self.dropout)));
        }
        Ok(())
    }

    /// Pre-activations for `batch` rows of `input` (row-major `batch × cols`).
    fn preactivate(&self, input: &[f64], batch: usize) -> Vec<f64> {
        let mut z = Vec::with_capacity(batch * self.rows);
        for _ in 0..batch {
            z.extend_from_slice(&self.bias);
        }
        gemm(
            batch,
            self.cols,
            self.rows,
            input,
            (self.cols, 1),
            &self.weights,
            (1, self.cols),
            1.0,
            &mut z,
            (self.rows, 1),
        );
        z
    }
}

/// Architecture of a plain feed-forward stack.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub units: usize,
    pub activation: Activation,
    pub dropout: f64,
}

impl LayerSpec {
    pub fn new(units: usize, activation: Activation, dropout: f64) -> Self {
        Self {
            units,
            activation,
            dropout,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNetwork {
    layers: Vec<DenseLayer>,
}

/// Per-layer activations saved by a training-mode forward pass.
pub struct ForwardCache {
    batch: usize,
    /// `inputs[0]` is the network input; `inputs[l]` is the (dropped-out)
    /// output of layer `l - 1`.
    inputs: Vec<Vec<f64>>,
    /// Activation outputs before dropout.
    activations: Vec<Vec<f64>>,
    masks: Vec<Option<Vec<f64>>>,
}

impl ForwardCache {
    /// Output of the last layer after dropout.
    pub fn output(&self) -> &[f64] {
        self.inputs.last().expect("cache has the network input")
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// Gradients in the same layout as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGrads {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl NetworkGrads {
    pub fn zeros_like(net: &DenseNetwork) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.bias) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }
}

impl DenseNetwork {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::Malformed("network has no layers".into()));
        }
        for l in &layers {
            l.validate()?;
        }
        for pair in layers.windows(2) {
            if pair[0].rows != pair[1].cols {
                return Err(NnError::Malformed(format!(
                    "layer output {} does not feed input {}",
                    pair[0].rows, pair[1].cols
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn random(input_dim: usize, specs: &[LayerSpec], seed: u64) -> Result<Self, NnError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cols = input_dim;
        let mut layers = Vec::with_capacity(specs.len());
        for s in specs {
            layers.push(DenseLayer::glorot(cols, s.units, s.activation, s.dropout, &mut rng));
            cols = s.units;
        }
        Self::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").rows
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Inference pass (no dropout) on one input vector.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        if x.len() != self.input_dim() {
            return Err(NnError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(self.forward_batch(x, 1))
    }

    /// Inference pass over `batch` row-major inputs.
    pub fn forward_batch(&self, inputs: &[f64], batch: usize) -> Vec<f64> {
        let mut current = inputs.to_vec();
        for layer in &self.layers {
            let mut z = layer.preactivate(&current, batch);
            z.iter_mut().for_each(|v| *v = layer.activation.apply(*v));
            current = z;
        }
        current
    }

    /// Training pass; dropout masks are drawn from `rng` in layer order.
    /// With `rng = None` dropout is disabled.
    pub fn forward_train(
        &self,
        inputs: &[f64],
        batch: usize,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> ForwardCache {
        let mut cache = ForwardCache {
            batch,
            inputs: vec![inputs.to_vec()],
            activations: Vec::with_capacity(self.layers.len()),
            masks: Vec::with_capacity(self.layers.len()),
        };
        for layer in &self.layers {
            let mut a = layer.preactivate(cache.output(), batch);
            a.iter_mut().for_each(|v| *v = layer.activation.apply(*v));
            let mask = match rng.as_deref_mut() {
                Some(rng) if layer.dropout > 0.0 => {
                    let keep = 1.0 - layer.dropout;
                    Some(
                        (0..a.len())
                            .map(|_| if rng.random_bool(keep) { 1.0 / keep } else { 0.0 })
                            .collect::<Vec<f64>>(),
                    )
                }
                _ => None,
            };
            let out = match &mask {
                Some(m) => a.iter().zip(m).map(|(v, k)| v * k).collect(),
                None => a.clone(),
            };
            cache.activations.push(a);
            cache.masks.push(mask);
            cache.inputs.push(out);
        }
        cache
    }

    /// Backpropagates `grad_out` (gradient w.r.t. the cached output) and
    /// returns parameter gradients. When `logit_grad` is true, `grad_out`
    /// is taken as the gradient w.r.t. the last layer's pre-activation.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &[f64], logit_grad: bool) -> NetworkGrads {
        let batch = cache.batch;
        let mut grads = NetworkGrads::zeros_like(self);
        let mut upstream = grad_out.to_vec();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let mut dz = upstream;
            if !(l == last && logit_grad) {
                if let Some(mask) = &cache.masks[l] {
                    dz.iter_mut().zip(mask).for_each(|(g, k)| *g *= k);
                }
                dz.iter_mut()
                    .zip(&cache.activations[l])
                    .for_each(|(g, a)| *g *= layer.activation.derivative(*a));
            }
            let input = &cache.inputs[l];
            // dW = dZᵀ · X
            gemm(
                layer.rows,
                batch,
                layer.cols,
                &dz,
                (1, layer.rows),
                input,
                (layer.cols, 1),
                0.0,
                &mut grads.weights[l],
                (layer.cols, 1),
            );
            let db = &mut grads.bias[l];
            for row in dz.chunks(layer.rows) {
                db.iter_mut().zip(row).for_each(|(b, g)| *b += g);
            }
            if l > 0 {
                // dX = dZ · W
                let mut dx = vec![0.0; batch * layer.cols];
                gemm(
                    batch,
                    layer.rows,
                    layer.cols,
                    &dz,
                    (layer.rows, 1),
                    &layer.weights,
                    (layer.cols, 1),
                    0.0,
                    &mut dx,
                    (layer.cols, 1),
                );
                upstream = dx;
            } else {
                upstream = Vec::new();
            }
        }
        grads
    }

    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    /// Inverse of [`flatten_params`](Self::flatten_params).
    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.parameter_count());
        let mut offset = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    /// Sum of squared weights (biases excluded).
    pub fn weight_norm_sq(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter())
            .map(|w| w * w)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_tanh_network_outputs_zero() {
        let net = DenseNetwork::new(vec![
            DenseLayer::zeros(4, 3, Activation::Tanh),
            DenseLayer::zeros(3, 2, Activation::Tanh),
        ])
        .unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn hand_set_layer() {
        let layer = DenseLayer {
            rows: 2,
            cols: 2,
            weights: vec![0.5, -1.0, 2.0, 0.25],
            bias: vec![0.1, -0.3],
            activation: Activation::Tanh,
            dropout: 0.0,
        };
        let net = DenseNetwork::new(vec![layer]).unwrap();
        let out = net.forward(&[1.0, 0.0]).unwrap();
        // tanh(0.5 + 0.1), tanh(2.0 - 0.3)
        assert!((out[0] - 0.6f64.tanh()).abs() < 1e-12);
        assert!((out[1] - 1.7f64.tanh()).abs() < 1e-12);
    }

    #[test]
    fn batch_matches_single() {
        let net = DenseNetwork::random(
            5,
            &[
                LayerSpec::new(7, Activation::Relu, 0.0),
                LayerSpec::new(3, Activation::Sigmoid, 0.0),
            ],
            3,
        )
        .unwrap();
        let xs: Vec<f64> = (0..15).map(|i| (i as f64 * 0.37).sin()).collect();
        let batch = net.forward_batch(&xs, 3);
        for r in 0..3 {
            let single = net.forward(&xs[r * 5..r * 5 + 5]).unwrap();
            for (a, b) in single.iter().zip(&batch[r * 3..r * 3 + 3]) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(DenseNetwork::new(vec![
            DenseLayer::zeros(4, 3, Activation::Tanh),
            DenseLayer::zeros(2, 2, Activation::Tanh),
        ])
        .is_err());
        let net = DenseNetwork::new(vec![DenseLayer::zeros(4, 3, Activation::Tanh)]).unwrap();
        assert!(matches!(
            net.forward(&[1.0]),
            Err(NnError::DimensionMismatch { expected: 4, got: 1 })
        ));
        let mut bad = DenseLayer::zeros(2, 2, Activation::Relu);
        bad.dropout = 1.0;
        assert!(DenseNetwork::new(vec![bad]).is_err());
    }

    #[test]
    fn stable_sigmoid_and_softplus() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        let p = probability(100.0);
        assert!(p < 1.0 && p > 0.0);
    }
}
