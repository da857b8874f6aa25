use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::{Error, Result};

pub const MAX_LAYERS: usize = 20;
pub const MAX_UNITS: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Linear => x,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_at_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Linear => 1.0,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Linear => "linear",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "linear" => Ok(Activation::Linear),
            other => Err(Error::InvalidInput(format!("unknown activation {other:?}"))),
        }
    }
}

/// Fully connected feed-forward network.
///
/// All parameters live in one flat vector so optimizers, target tracking
/// and checkpoints can treat them uniformly. Layer `l` stores its weight
/// matrix row-major (`out × in`) followed by its bias.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseNet {
    sizes: Vec<usize>,
    activations: Vec<Activation>,
    params: Vec<f64>,
}

impl DenseNet {
    /// `sizes` lists input width followed by each layer's width; one
    /// activation per layer. Weights are drawn from `U(-1/√fan_in, 1/√fan_in)`
    /// and biases start at zero.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], activations: &[Activation], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes, activations)?;
        let mut offset = 0;
        for l in 0..net.n_layers() {
            let (fan_in, fan_out) = (net.sizes[l], net.sizes[l + 1]);
            let bound = (fan_in as f64).sqrt().recip();
            for w in &mut net.params[offset..offset + fan_in * fan_out] {
                *w = rng.random_range(-bound..=bound);
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize], activations: &[Activation]) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidInput("network needs an input width and at least one layer".into()));
        }
        let n_layers = sizes.len() - 1;
        if n_layers > MAX_LAYERS {
            return Err(Error::InvalidInput(format!(
                "{n_layers} layers exceed the limit of {MAX_LAYERS}"
            )));
        }
        if activations.len() != n_layers {
            return Err(Error::mismatch(n_layers, activations.len()));
        }
        if let Some(&w) = sizes.iter().find(|&&w| w == 0) {
            return Err(Error::InvalidInput(format!("layer width {w} must be positive")));
        }
        if let Some(&w) = sizes[1..].iter().find(|&&w| w > MAX_UNITS) {
            return Err(Error::InvalidInput(format!(
                "layer width {w} exceeds the limit of {MAX_UNITS} units"
            )));
        }
        let n_params = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(Self {
            sizes: sizes.to_vec(),
            activations: activations.to_vec(),
            params: vec![0.0; n_params],
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("at least two sizes")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Weight and bias slices of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let offset = self.layer_offset(l);
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        let w = &self.params[offset..offset + n_in * n_out];
        let b = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
        (w, b)
    }

    pub(crate) fn layer_offset(&self, l: usize) -> usize {
        self.sizes[..=l].windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut trace = Vec::new();
        self.forward_traced(input, &mut trace)?;
        Ok(trace.pop().expect("trace holds every layer"))
    }

    /// Forward pass recording each layer's output (`trace[0]` is the input).
    pub fn forward_traced(&self, input: &[f64], trace: &mut Vec<Vec<f64>>) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::mismatch(self.input_dim(), input.len()));
        }
        trace.clear();
        trace.push(input.to_vec());
        let mut offset = 0;
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let act = self.activations[l];
            let weights = &self.params[offset..offset + n_in * n_out];
            let bias = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let x = &trace[l];
            let out: Vec<f64> = weights
                .chunks_exact(n_in)
                .zip(bias)
                .map(|(row, b)| act.apply(row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b))
                .collect();
            trace.push(out);
            offset += n_in * n_out + n_out;
        }
        Ok(())
    }

    /// Accumulates `∂loss/∂params` into `grads` given `∂loss/∂output` for a
    /// trace produced by [`DenseNet::forward_traced`].
    pub fn backward(&self, trace: &[Vec<f64>], grad_output: &[f64], grads: &mut [f64]) {
        debug_assert_eq!(grads.len(), self.params.len());
        debug_assert_eq!(trace.len(), self.sizes.len());
        let mut delta: Vec<f64> = grad_output.to_vec();
        let mut end = self.params.len();
        for l in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let offset = end - (n_in * n_out + n_out);
            let act = self.activations[l];
            for (d, &y) in delta.iter_mut().zip(&trace[l + 1]) {
                *d *= act.derivative_at_output(y);
            }
            let x = &trace[l];
            let (gw, gb) = grads[offset..end].split_at_mut(n_in * n_out);
            for ((row, gbi), &d) in gw.chunks_exact_mut(n_in).zip(gb.iter_mut()).zip(&delta) {
                *gbi += d;
                if d != 0.0 {
                    for (g, &xi) in row.iter_mut().zip(x) {
                        *g += d * xi;
                    }
                }
            }
            if l > 0 {
                let weights = &self.params[offset..offset + n_in * n_out];
                let mut next = vec![0.0; n_in];
                for (row, &d) in weights.chunks_exact(n_in).zip(&delta) {
                    if d != 0.0 {
                        for (n, &w) in next.iter_mut().zip(row) {
                            *n += d * w;
                        }
                    }
                }
                delta = next;
            }
            end = offset;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn zero_net_outputs_zero() {
        let net = DenseNet::zeros(&[4, 5, 3], &[Activation::Relu, Activation::Linear]).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn identity_layer() {
        let mut net = DenseNet::zeros(&[3, 3], &[Activation::Linear]).unwrap();
        for i in 0..3 {
            net.params_mut()[i * 3 + i] = 1.0;
        }
        assert_eq!(net.forward(&[0.2, -1.5, 7.0]).unwrap(), vec![0.2, -1.5, 7.0]);
    }

    #[test]
    fn shape_limits() {
        let relu = |n| vec![Activation::Relu; n];
        assert!(DenseNet::zeros(&[2; 22], &relu(21)).is_err());
        assert!(DenseNet::zeros(&[2; 21], &relu(20)).is_ok());
        assert!(DenseNet::zeros(&[2, 257, 1], &relu(2)).is_err());
        assert!(DenseNet::zeros(&[2, 256, 1], &relu(2)).is_ok());
        assert!(DenseNet::zeros(&[2, 3], &relu(2)).is_err());
        let net = DenseNet::zeros(&[2, 3], &relu(1)).unwrap();
        assert!(net.forward(&[1.0]).is_err());
    }

    #[test]
    fn init_bounds() {
        let mut rng = stream(1, Stream::Init);
        let net = DenseNet::new(&[16, 8, 2], &[Activation::Tanh, Activation::Linear], &mut rng).unwrap();
        let (w, b) = net.layer(0);
        assert!(w.iter().all(|w| w.abs() <= 0.25));
        assert!(b.iter().all(|&b| b == 0.0));
        let (w, _) = net.layer(1);
        assert!(w.iter().all(|w| w.abs() <= 8f64.sqrt().recip()));
    }

    #[test]
    fn activation_names() {
        for a in [Activation::Relu, Activation::Tanh, Activation::Linear] {
            assert_eq!(a.to_string().parse::<Activation>().unwrap(), a);
        }
        assert!("sigmoid".parse::<Activation>().is_err());
    }
}
