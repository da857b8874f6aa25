//! Normalized advantage function head.
//!
//! A single dense network maps an observation to six numbers
//! `[V, μ̃₁, μ̃₂, ℓ̃₁₁, ℓ₂₁, ℓ̃₂₂]`. The greedy action is `μ = tanh(μ̃)`, the
//! lower-triangular factor is `L = [[exp ℓ̃₁₁, 0], [ℓ₂₁, exp ℓ̃₂₂]]`, and
//!
//! ```text
//! Q(x, u) = V(x) - ½ (u - μ)ᵀ L Lᵀ (u - μ)
//! ```
//!
//! so `Q ≤ V` with equality at `u = μ`.

use rand::Rng;

use super::dense::{Activation, DenseNet};
use crate::environment::ACTION_DIM;
use crate::{Error, Result};

/// Width of the final linear layer.
pub const HEAD_OUTPUTS: usize = 1 + ACTION_DIM + 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NafOutput {
    pub value: f64,
    pub mu: [f64; ACTION_DIM],
    /// `[L₁₁, L₂₁, L₂₂]` after the diagonal exponential.
    pub l: [f64; 3],
}

impl NafOutput {
    fn decode(raw: &[f64]) -> Self {
        Self {
            value: raw[0],
            mu: [raw[1].tanh(), raw[2].tanh()],
            l: [raw[3].exp(), raw[4], raw[5].exp()],
        }
    }

    /// `Lᵀ (u - μ)`; the advantage is minus half its squared norm.
    fn whitened(&self, u: [f64; ACTION_DIM]) -> ([f64; 2], [f64; 2]) {
        let d = [u[0] - self.mu[0], u[1] - self.mu[1]];
        let [l11, l21, l22] = self.l;
        ([l11 * d[0] + l21 * d[1], l22 * d[1]], d)
    }

    pub fn advantage(&self, u: [f64; ACTION_DIM]) -> f64 {
        let (w, _) = self.whitened(u);
        -0.5 * (w[0] * w[0] + w[1] * w[1])
    }

    pub fn q_value(&self, u: [f64; ACTION_DIM]) -> f64 {
        self.value + self.advantage(u)
    }

    /// `P = L Lᵀ` as `[[p11, p12], [p21, p22]]`.
    pub fn precision(&self) -> [[f64; 2]; 2] {
        let [l11, l21, l22] = self.l;
        let off = l11 * l21;
        [[l11 * l11, off], [off, l21 * l21 + l22 * l22]]
    }
}

/// One regression sample for the Bellman loss.
#[derive(Clone, Copy, Debug)]
pub struct NafSample<'a> {
    pub observation: &'a [f64],
    pub action: [f64; ACTION_DIM],
    pub target: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NafHead {
    net: DenseNet,
}

impl NafHead {
    /// Trunk of `hidden` layers with `activation`, then the linear head.
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: &[usize],
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let (sizes, activations) = Self::shape(input_dim, hidden, activation);
        Ok(Self {
            net: DenseNet::new(&sizes, &activations, rng)?,
        })
    }

    pub fn from_net(net: DenseNet) -> Result<Self> {
        if net.output_dim() != HEAD_OUTPUTS {
            return Err(Error::mismatch(HEAD_OUTPUTS, net.output_dim()));
        }
        if net.activations().last() != Some(&Activation::Linear) {
            return Err(Error::InvalidInput("NAF output layer must be linear".into()));
        }
        Ok(Self { net })
    }

    fn shape(input_dim: usize, hidden: &[usize], activation: Activation) -> (Vec<usize>, Vec<Activation>) {
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(HEAD_OUTPUTS);
        let mut activations = vec![activation; hidden.len()];
        activations.push(Activation::Linear);
        (sizes, activations)
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn params(&self) -> &[f64] {
        self.net.params()
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        self.net.params_mut()
    }

    pub fn evaluate(&self, observation: &[f64]) -> Result<NafOutput> {
        Ok(NafOutput::decode(&self.net.forward(observation)?))
    }

    pub fn q_value(&self, observation: &[f64], action: [f64; ACTION_DIM]) -> Result<f64> {
        Ok(self.evaluate(observation)?.q_value(action))
    }

    /// Mean squared residual `mean (Q(x,u) - y)²` over `batch`, writing its
    /// gradient with respect to every parameter into `grads`.
    pub fn loss_and_grad(&self, batch: &[NafSample<'_>], grads: &mut [f64]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidInput("empty minibatch".into()));
        }
        if grads.len() != self.params().len() {
            return Err(Error::mismatch(self.params().len(), grads.len()));
        }
        grads.iter_mut().for_each(|g| *g = 0.0);
        let scale = 1.0 / batch.len() as f64;
        let mut trace = Vec::new();
        let mut loss = 0.0;
        for sample in batch {
            self.net.forward_traced(sample.observation, &mut trace)?;
            let raw = trace.last().expect("output layer");
            let out = NafOutput::decode(raw);
            let (w, d) = out.whitened(sample.action);
            let q = out.value - 0.5 * (w[0] * w[0] + w[1] * w[1]);
            let residual = q - sample.target;
            loss += residual * residual * scale;

            let g = 2.0 * residual * scale;
            let [l11, l21, l22] = out.l;
            // ∂Q/∂μ = L w (since ∂Q/∂d = -L w and d = u - μ).
            let dq_dmu = [l11 * w[0], l21 * w[0] + l22 * w[1]];
            let grad_out = [
                g,
                g * dq_dmu[0] * (1.0 - out.mu[0] * out.mu[0]),
                g * dq_dmu[1] * (1.0 - out.mu[1] * out.mu[1]),
                g * (-w[0] * d[0]) * l11,
                g * (-w[0] * d[1]),
                g * (-w[1] * d[1]) * l22,
            ];
            self.net.backward(&trace, &grad_out, grads);
        }
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use rand::Rng;

    fn head(seed: u64) -> NafHead {
        NafHead::new(5, &[8, 8], Activation::Tanh, &mut stream(seed, Stream::Init)).unwrap()
    }

    #[test]
    fn q_equals_v_at_mu() {
        let h = head(1);
        let obs = [0.1, -0.4, 0.9, 0.0, 0.3];
        let out = h.evaluate(&obs).unwrap();
        assert_eq!(out.q_value(out.mu), out.value);
        assert!(out.mu.iter().all(|m| m.abs() < 1.0));
    }

    #[test]
    fn degenerate_precision() {
        let mut h = head(2);
        // Push the diagonal pre-activations far negative and zero the
        // off-diagonal row so that P ≈ 0.
        let net = h.net.clone();
        let last = net.n_layers() - 1;
        let offset = net.layer_offset(last);
        let n_in = net.sizes()[last];
        let params = h.params_mut();
        for row in 3..6 {
            params[offset + row * n_in..offset + (row + 1) * n_in].fill(0.0);
        }
        let bias = offset + HEAD_OUTPUTS * n_in;
        params[bias + 3] = -40.0;
        params[bias + 4] = 0.0;
        params[bias + 5] = -40.0;
        let obs = [0.3; 5];
        let out = h.evaluate(&obs).unwrap();
        for u in [[-1.0, -1.0], [1.0, 0.2], [0.0, 0.9]] {
            assert!((out.q_value(u) - out.value).abs() < 1e-30);
        }
    }

    #[test]
    fn q_never_exceeds_v() {
        let h = head(3);
        let mut rng = stream(3, Stream::Noise);
        for _ in 0..500 {
            let obs: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let u = [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)];
            let out = h.evaluate(&obs).unwrap();
            assert!(out.q_value(u) <= out.value + 1e-12);
        }
    }

    #[test]
    fn precision_is_psd() {
        let out = NafOutput {
            value: 0.0,
            mu: [0.0, 0.0],
            l: [0.7, -1.3, 0.2],
        };
        let p = out.precision();
        assert_eq!(p[0][1], p[1][0]);
        let det = p[0][0] * p[1][1] - p[0][1] * p[1][0];
        assert!(p[0][0] > 0.0 && det >= 0.0);
        // Quadratic form through P matches the whitened form.
        let u = [0.4, -0.9];
        let quad = p[0][0] * u[0] * u[0] + 2.0 * p[0][1] * u[0] * u[1] + p[1][1] * u[1] * u[1];
        assert!((out.advantage(u) + 0.5 * quad).abs() < 1e-12);
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        let h = head(4);
        let obs = [0.2, 0.1, -0.3, 0.5, 0.0];
        let u = [0.3, -0.6];
        let target = h.q_value(&obs, u).unwrap();
        let mut grads = vec![1.0; h.params().len()];
        let loss = h
            .loss_and_grad(&[NafSample { observation: &obs, action: u, target }], &mut grads)
            .unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn duplicated_sample_matches_single() {
        let h = head(5);
        let obs = [0.2, 0.1, -0.3, 0.5, 1.0];
        let sample = NafSample {
            observation: &obs,
            action: [0.5, 0.5],
            target: 3.0,
        };
        let mut g1 = vec![0.0; h.params().len()];
        let mut g4 = vec![0.0; h.params().len()];
        let l1 = h.loss_and_grad(&[sample], &mut g1).unwrap();
        let l4 = h.loss_and_grad(&[sample; 4], &mut g4).unwrap();
        assert!((l1 - l4).abs() < 1e-12 * l1.max(1.0));
        for (a, b) in g1.iter().zip(&g4) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
        assert!(h.loss_and_grad(&[], &mut g1).is_err());
    }
}
