//! Plain fully connected network with rectified-linear hidden layers and a
//! linear output, plus the Adam optimizer that trains it. Everything is
//! hand-rolled over `Vec<f64>` so training stays deterministic and the
//! weights serialize without ceremony.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Feed-forward Q network. `dims` lists layer widths input first, so
/// `[74, 64, 128, 64, 3]` has three hidden layers and three outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNetwork {
    dims: Vec<usize>,
    /// Row-major `dims[l+1] x dims[l]` matrix per layer.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

/// Per-parameter buffer shaped like a [`QNetwork`]. Used for gradients and
/// optimizer moments.
#[derive(Debug, Clone)]
pub struct GradBuf {
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl QNetwork {
    /// He-style seeded initialization: weights drawn from
    /// `Normal(0, sqrt(2 / fan_in))`, biases zero.
    pub fn he_init(dims: &[usize], rng: &mut ChaCha8Rng) -> QNetwork {
        assert!(dims.len() >= 2, "need at least input and output layers");
        assert!(dims.iter().all(|&d| d > 0), "zero-width layer");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).unwrap();
            weights.push((0..fan_in * fan_out).map(|_| normal.sample(rng)).collect());
            biases.push(vec![0.0; fan_out]);
        }
        QNetwork {
            dims: dims.to_vec(),
            weights,
            biases,
        }
    }

    /// Rebuilds a network from serialized parts, checking shapes.
    pub fn from_parts(
        dims: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<QNetwork, String> {
        if dims.len() < 2 {
            return Err("need at least input and output layers".into());
        }
        if weights.len() != dims.len() - 1 || biases.len() != dims.len() - 1 {
            return Err(format!(
                "expected {} layers, got {} weight and {} bias blocks",
                dims.len() - 1,
                weights.len(),
                biases.len()
            ));
        }
        for (l, w) in dims.windows(2).enumerate() {
            if weights[l].len() != w[0] * w[1] {
                return Err(format!("layer {l}: weight block has wrong size"));
            }
            if biases[l].len() != w[1] {
                return Err(format!("layer {l}: bias block has wrong size"));
            }
        }
        Ok(QNetwork {
            dims,
            weights,
            biases,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .all(|block| block.iter().all(|v| v.is_finite()))
    }

    /// Action values for one input.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dims[0], "input width mismatch");
        let mut a = x.to_vec();
        let last = self.weights.len() - 1;
        for l in 0..self.weights.len() {
            let mut z = affine(&self.weights[l], &self.biases[l], &a, self.dims[l]);
            if l != last {
                for v in &mut z {
                    *v = v.max(0.0);
                }
            }
            a = z;
        }
        a
    }

    /// Forward pass keeping pre-activations for backprop.
    fn forward_trace(&self, x: &[f64]) -> Trace {
        let mut activations = vec![x.to_vec()];
        let mut preacts = Vec::new();
        let last = self.weights.len() - 1;
        for l in 0..self.weights.len() {
            let z = affine(
                &self.weights[l],
                &self.biases[l],
                &activations[l],
                self.dims[l],
            );
            preacts.push(z.clone());
            let a = if l != last {
                z.iter().map(|v| v.max(0.0)).collect()
            } else {
                z
            };
            activations.push(a);
        }
        Trace {
            activations,
            preacts,
        }
    }

    /// Accumulates into `grad` the gradient of `upstream * q[action]` for one
    /// input, where `upstream` is the loss derivative with respect to that
    /// output. Returns the full action-value vector as a byproduct.
    pub fn backprop_into(
        &self,
        x: &[f64],
        action: usize,
        upstream: f64,
        grad: &mut GradBuf,
    ) -> Vec<f64> {
        assert!(action < self.output_dim(), "action out of range");
        let trace = self.forward_trace(x);
        let layers = self.weights.len();
        let mut delta = vec![0.0; self.output_dim()];
        delta[action] = upstream;
        for l in (0..layers).rev() {
            let inputs = &trace.activations[l];
            let fan_in = self.dims[l];
            for (row, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                grad.biases[l][row] += d;
                let base = row * fan_in;
                for (col, input) in inputs.iter().enumerate() {
                    grad.weights[l][base + col] += d * input;
                }
            }
            if l > 0 {
                let mut prev = vec![0.0; fan_in];
                for (row, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    let base = row * fan_in;
                    for (col, p) in prev.iter_mut().enumerate() {
                        *p += d * self.weights[l][base + col];
                    }
                }
                // Rectifier gate: units that did not fire pass no gradient.
                for (p, z) in prev.iter_mut().zip(&trace.preacts[l - 1]) {
                    if *z <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
        trace.activations.last().unwrap().clone()
    }

    pub fn param_count(&self) -> usize {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .map(|b| b.len())
            .sum()
    }

    /// Flat parameter view for finite-difference checks. Weights come first
    /// layer by layer, then biases.
    pub fn get_param(&self, i: usize) -> f64 {
        *self.param_slot(i)
    }

    pub fn set_param(&mut self, i: usize, v: f64) {
        *self.param_slot_mut(i) = v;
    }

    fn param_slot(&self, mut i: usize) -> &f64 {
        for block in self.weights.iter().chain(self.biases.iter()) {
            if i < block.len() {
                return &block[i];
            }
            i -= block.len();
        }
        panic!("parameter index out of range");
    }

    fn param_slot_mut(&mut self, mut i: usize) -> &mut f64 {
        for block in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            if i < block.len() {
                return &mut block[i];
            }
            i -= block.len();
        }
        panic!("parameter index out of range");
    }
}

struct Trace {
    activations: Vec<Vec<f64>>,
    preacts: Vec<Vec<f64>>,
}

fn affine(weights: &[f64], biases: &[f64], input: &[f64], fan_in: usize) -> Vec<f64> {
    let mut out = biases.to_vec();
    for (row, o) in out.iter_mut().enumerate() {
        let base = row * fan_in;
        let mut acc = 0.0;
        for (col, x) in input.iter().enumerate() {
            acc += weights[base + col] * x;
        }
        *o += acc;
    }
    out
}

impl GradBuf {
    pub fn zeros_like(net: &QNetwork) -> GradBuf {
        GradBuf {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn reset(&mut self) {
        for block in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            block.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for block in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            block.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// Flat view matching [`QNetwork::get_param`] ordering.
    pub fn get(&self, mut i: usize) -> f64 {
        for block in self.weights.iter().chain(self.biases.iter()) {
            if i < block.len() {
                return block[i];
            }
            i -= block.len();
        }
        panic!("parameter index out of range");
    }
}

/// Adaptive moment estimation with the usual bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: GradBuf,
    v: GradBuf,
}

impl Adam {
    pub fn new(net: &QNetwork, lr: f64) -> Adam {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: GradBuf::zeros_like(net),
            v: GradBuf::zeros_like(net),
        }
    }

    pub fn step(&mut self, net: &mut QNetwork, grad: &GradBuf) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (block_idx, is_bias) in (0..net.weights.len())
            .map(|i| (i, false))
            .chain((0..net.biases.len()).map(|i| (i, true)))
        {
            let (params, grads, ms, vs) = if is_bias {
                (
                    &mut net.biases[block_idx],
                    &grad.biases[block_idx],
                    &mut self.m.biases[block_idx],
                    &mut self.v.biases[block_idx],
                )
            } else {
                (
                    &mut net.weights[block_idx],
                    &grad.weights[block_idx],
                    &mut self.m.weights[block_idx],
                    &mut self.v.weights[block_idx],
                )
            };
            for i in 0..params.len() {
                let g = grads[i];
                ms[i] = self.beta1 * ms[i] + (1.0 - self.beta1) * g;
                vs[i] = self.beta2 * vs[i] + (1.0 - self.beta2) * g * g;
                let m_hat = ms[i] / bc1;
                let v_hat = vs[i] / bc2;
                params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

/// Mean squared error of the taken action's value against its target, over a
/// batch of `(input, action, target)` rows.
pub fn batch_loss(net: &QNetwork, batch: &[(Vec<f64>, usize, f64)]) -> f64 {
    let mut acc = 0.0;
    for (x, action, y) in batch {
        let q = net.forward(x);
        let diff = q[*action] - y;
        acc += diff * diff;
    }
    acc / batch.len() as f64
}

/// Accumulates the analytic gradient of [`batch_loss`] into `grad`.
pub fn batch_loss_grad(
    net: &QNetwork,
    batch: &[(Vec<f64>, usize, f64)],
    grad: &mut GradBuf,
) -> f64 {
    grad.reset();
    let scale = 1.0 / batch.len() as f64;
    let mut acc = 0.0;
    for (x, action, y) in batch {
        let q = net.forward(x);
        let diff = q[*action] - y;
        acc += diff * diff;
        net.backprop_into(x, *action, 2.0 * diff * scale, grad);
    }
    acc * scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    #[test]
    fn forward_matches_hand_computation() {
        // One hidden unit: h = max(0, 2x - 1), q = [3h + 1, -h].
        let net = QNetwork::from_parts(
            vec![1, 1, 2],
            vec![vec![2.0], vec![3.0, -1.0]],
            vec![vec![-1.0], vec![1.0, 0.0]],
        )
        .unwrap();
        let q = net.forward(&[2.0]);
        assert_eq!(q, vec![10.0, -3.0]);
        // Below the rectifier knee the hidden unit is dead.
        let q = net.forward(&[0.0]);
        assert_eq!(q, vec![1.0, 0.0]);
    }

    #[test]
    fn he_init_is_seed_deterministic() {
        let a = QNetwork::he_init(&[4, 5, 3], &mut seeded_rng(7));
        let b = QNetwork::he_init(&[4, 5, 3], &mut seeded_rng(7));
        let c = QNetwork::he_init(&[4, 5, 3], &mut seeded_rng(8));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.is_finite());
        assert_eq!(a.param_count(), 4 * 5 + 5 * 3 + 5 + 3);
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut net = QNetwork::he_init(&[4, 5, 3], &mut seeded_rng(11));
        let mut rng = seeded_rng(12);
        let batch: Vec<(Vec<f64>, usize, f64)> = (0..8)
            .map(|i| {
                use rand::Rng;
                let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                (x, i % 3, rng.random_range(-2.0..2.0))
            })
            .collect();

        let mut grad = GradBuf::zeros_like(&net);
        batch_loss_grad(&net, &batch, &mut grad);

        for i in 0..net.param_count() {
            let orig = net.get_param(i);
            let eps = 1e-5 * orig.abs().max(1.0);
            net.set_param(i, orig + eps);
            let up = batch_loss(&net, &batch);
            net.set_param(i, orig - eps);
            let down = batch_loss(&net, &batch);
            net.set_param(i, orig);
            let numeric = (up - down) / (2.0 * eps);
            let analytic = grad.get(i);
            let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8);
            assert!(
                rel < 1e-4,
                "param {i}: analytic {analytic} vs numeric {numeric} (rel {rel})"
            );
        }
    }

    #[test]
    fn adam_first_step_size_is_learning_rate() {
        // With bias correction the very first update is lr * g / (|g| + eps),
        // which is lr to within eps for any nonzero gradient.
        let mut net = QNetwork::from_parts(vec![1, 1], vec![vec![5.0]], vec![vec![0.0]]).unwrap();
        let mut opt = Adam::new(&net, 0.01);
        let mut grad = GradBuf::zeros_like(&net);
        grad.weights[0][0] = 137.0;
        opt.step(&mut net, &grad);
        assert!((net.weights[0][0] - (5.0 - 0.01)).abs() < 1e-6);
    }

    #[test]
    fn adam_descends_a_quadratic() {
        // Minimize (w - 3)^2 over the lone weight of a 1x1 net.
        let mut net = QNetwork::from_parts(vec![1, 1], vec![vec![0.0]], vec![vec![0.0]]).unwrap();
        let mut opt = Adam::new(&net, 0.05);
        let mut grad = GradBuf::zeros_like(&net);
        for _ in 0..2_000 {
            let w = net.weights[0][0];
            grad.weights[0][0] = 2.0 * (w - 3.0);
            opt.step(&mut net, &grad);
        }
        // Fixed-rate adaptive steps hover near the optimum rather than
        // settling exactly, so the bound is the step scale, not machine eps.
        assert!((net.weights[0][0] - 3.0).abs() < 0.05);
    }

    #[test]
    fn rejects_malformed_parts() {
        assert!(QNetwork::from_parts(vec![2], vec![], vec![]).is_err());
        assert!(QNetwork::from_parts(vec![2, 1], vec![vec![1.0]], vec![vec![0.0]]).is_err());
        assert!(
            QNetwork::from_parts(vec![2, 1], vec![vec![1.0, 2.0]], vec![vec![0.0, 0.0]]).is_err()
        );
    }
}
