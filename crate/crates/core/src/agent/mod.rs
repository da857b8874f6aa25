//! NAF Q-learning agent.
//!
//! The agent explores with Ornstein-Uhlenbeck noise around its greedy action,
//! stores transitions in a replay buffer and regresses `Q(x, u)` onto
//! one-step Bellman targets computed with a slowly tracking target network.

mod noise;
mod replay;
mod training;

pub use noise::{OuConfig, OuNoise};
pub use replay::{ReplayBuffer, Transition};
pub use training::{
    run_training, run_training_with, transfer_training, transfer_training_with, EpisodeHook, TraceRow, TrainingTrace,
};

use crate::environment::{ObservationLayout, ACTION_DIM};
use crate::neural::{
    soft_update, Activation, Checkpoint, DenseNet, NafHead, NafSample, Optimizer, OptimizerKind, Tensor,
};
use crate::rng::{self, Stream};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkConfig {
    pub hidden_layers: usize,
    pub hidden_units: usize,
    pub activation: Activation,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            hidden_layers: 3,
            hidden_units: 64,
            activation: Activation::Relu,
        }
    }
}

impl NetworkConfig {
    pub fn hidden(&self) -> Vec<usize> {
        vec![self.hidden_units; self.hidden_layers]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub episodes: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub tau: f64,
    pub discount: f64,
    /// Environment steps collected before the first gradient update.
    pub warmup_steps: usize,
    pub updates_per_step: usize,
    /// Greedy evaluation cadence in episodes.
    pub eval_every: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub noise: OuConfig,
    pub network: NetworkConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 1000,
            batch_size: 64,
            buffer_capacity: 100_000,
            tau: 0.01,
            discount: 1.0,
            warmup_steps: 500,
            updates_per_step: 1,
            eval_every: 50,
            learning_rate: 1e-4,
            optimizer: OptimizerKind::Adam,
            noise: OuConfig::default(),
            network: NetworkConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidInput(msg));
        if self.batch_size == 0 {
            return fail("batch_size must be positive".into());
        }
        if self.buffer_capacity < self.batch_size {
            return fail(format!(
                "buffer_capacity {} is smaller than batch_size {}",
                self.buffer_capacity, self.batch_size
            ));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return fail(format!("tau must lie in (0, 1], got {}", self.tau));
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return fail(format!("discount must lie in [0, 1], got {}", self.discount));
        }
        if self.updates_per_step == 0 {
            return fail("updates_per_step must be positive".into());
        }
        if self.eval_every == 0 {
            return fail("eval_every must be positive".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.network.hidden_layers + 1 > crate::neural::MAX_LAYERS {
            return fail(format!(
                "{} hidden layers plus the output layer exceed {} layers",
                self.network.hidden_layers,
                crate::neural::MAX_LAYERS
            ));
        }
        self.noise.validate()
    }
}

/// `explore = false` returns the greedy action `μ(x)`; otherwise
/// `clip(μ(x) + noise, [-1, 1]²)`.
pub fn select_action(
    head: &NafHead,
    observation: &[f64],
    noise: &mut OuNoise,
    explore: bool,
) -> Result<[f64; ACTION_DIM]> {
    let mu = head.evaluate(observation)?.mu;
    if !explore {
        return Ok(mu);
    }
    let n = noise.sample();
    Ok([(mu[0] + n[0]).clamp(-1.0, 1.0), (mu[1] + n[1]).clamp(-1.0, 1.0)])
}

/// `r` for terminal transitions, otherwise `r + d · V_target(x')`, where
/// `V` is the exact maximum over actions of the quadratic `Q`.
pub fn bellman_targets(target: &NafHead, batch: &[&Transition], discount: f64) -> Result<Vec<f64>> {
    batch
        .iter()
        .map(|t| {
            if t.done || discount == 0.0 {
                Ok(t.reward)
            } else {
                Ok(t.reward + discount * target.evaluate(&t.next_observation)?.value)
            }
        })
        .collect()
}

pub struct NafAgent {
    online: NafHead,
    target: NafHead,
    optimizer: Optimizer,
    noise: OuNoise,
    buffer: ReplayBuffer,
    layout: ObservationLayout,
    horizon: usize,
    config: TrainConfig,
    grads: Vec<f64>,
}

impl NafAgent {
    pub fn new(layout: ObservationLayout, horizon: usize, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut init = rng::stream(config.seed, Stream::Init);
        let online = NafHead::new(layout.len(), &config.network.hidden(), config.network.activation, &mut init)?;
        Self::assemble(online.clone(), online, layout, horizon, config)
    }

    fn assemble(
        online: NafHead,
        target: NafHead,
        layout: ObservationLayout,
        horizon: usize,
        config: TrainConfig,
    ) -> Result<Self> {
        let n_params = online.params().len();
        Ok(Self {
            optimizer: Optimizer::new(config.optimizer, n_params, config.learning_rate),
            noise: OuNoise::new(config.noise, config.seed)?,
            buffer: ReplayBuffer::new(config.buffer_capacity, config.seed)?,
            grads: vec![0.0; n_params],
            online,
            target,
            layout,
            horizon,
            config,
        })
    }

    pub fn online(&self) -> &NafHead {
        &self.online
    }

    pub fn target(&self) -> &NafHead {
        &self.target
    }

    pub fn layout(&self) -> ObservationLayout {
        self.layout
    }

    /// Episode length the agent was last trained on.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn optimizer(&self) -> &Optimizer {
        &self.optimizer
    }

    pub fn select_action(&mut self, observation: &[f64], explore: bool) -> Result<[f64; ACTION_DIM]> {
        select_action(&self.online, observation, &mut self.noise, explore)
    }

    pub fn begin_episode(&mut self) {
        self.noise.reset();
    }

    pub fn remember(&mut self, transition: Transition) -> Result<()> {
        let len = self.layout.len();
        if transition.observation.len() != len {
            return Err(Error::mismatch(len, transition.observation.len()));
        }
        if transition.next_observation.len() != len {
            return Err(Error::mismatch(len, transition.next_observation.len()));
        }
        self.buffer.push(transition);
        Ok(())
    }

    /// One gradient step on the mean squared Bellman residual followed by a
    /// soft target update. `None` while the buffer holds fewer than
    /// `batch_size` transitions.
    pub fn train_step(&mut self) -> Result<Option<f64>> {
        let discount = self.config.discount;
        let batch_size = self.config.batch_size;
        let Some(batch) = self.buffer.sample(batch_size) else {
            return Ok(None);
        };
        let targets = bellman_targets(&self.target, &batch, discount)?;
        let samples: Vec<NafSample<'_>> = batch
            .iter()
            .zip(&targets)
            .map(|(t, &target)| NafSample {
                observation: &t.observation,
                action: t.action,
                target,
            })
            .collect();
        let loss = self.online.loss_and_grad(&samples, &mut self.grads)?;
        self.optimizer.step(self.online.params_mut(), &self.grads)?;
        soft_update(self.target.params_mut(), self.online.params(), self.config.tau)?;
        Ok(Some(loss))
    }

    /// Prepares the agent for episodes of length `horizon` under `config`.
    ///
    /// Network weights, target weights and optimizer moments are kept; the
    /// replay buffer is emptied because its bootstrapped values belong to the
    /// old horizon.
    pub fn retarget(&mut self, layout: ObservationLayout, horizon: usize, config: TrainConfig) -> Result<()> {
        config.validate()?;
        check_layout(&self.layout, &layout)?;
        if horizon < self.horizon {
            return Err(Error::IncompatibleCheckpoint(format!(
                "transfer must not shorten episodes: trained on p = {}, requested p' = {horizon}",
                self.horizon
            )));
        }
        if config.network != self.config.network {
            return Err(Error::IncompatibleCheckpoint(
                "network shape differs from the trained agent".into(),
            ));
        }
        if config.optimizer != self.optimizer.kind() {
            self.optimizer = Optimizer::new(config.optimizer, self.online.params().len(), config.learning_rate);
        }
        match &mut self.optimizer {
            Optimizer::Adam(a) => a.lr = config.learning_rate,
            Optimizer::Sgd(s) => s.lr = config.learning_rate,
        }
        if config.noise != *self.noise.config() {
            self.noise = OuNoise::new(config.noise, config.seed)?;
        }
        self.noise.reset();
        if config.buffer_capacity != self.buffer.capacity() {
            self.buffer = ReplayBuffer::new(config.buffer_capacity, config.seed)?;
        }
        self.buffer.clear();
        self.horizon = horizon;
        self.config = config;
        Ok(())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::default();
        let net = self.online.net();
        ck.set("format", "naf-agent");
        ck.set("layout.n_vertices", self.layout.n_vertices);
        ck.set("layout.n_edges", self.layout.n_edges);
        ck.set("layout.include_edge_terms", self.layout.include_edge_terms);
        ck.set("layout.include_step_index", self.layout.include_step_index);
        ck.set("horizon", self.horizon);
        ck.set("net.sizes", join(net.sizes()));
        ck.set("net.activations", join(net.activations()));
        ck.set("optimizer", self.optimizer.kind());
        ck.set("learning_rate", self.config.learning_rate);
        ck.set("seed", self.config.seed);
        ck.tensors.extend(net_tensors("online", net));
        ck.tensors.extend(net_tensors("target", self.target.net()));
        if let Optimizer::Adam(adam) = &self.optimizer {
            let (m, v) = adam.moments();
            ck.tensors.push(Tensor::vector("adam.m", m.to_vec()));
            ck.tensors.push(Tensor::vector("adam.v", v.to_vec()));
            ck.tensors.push(Tensor::vector("adam.t", vec![adam.steps() as f64]));
        }
        ck
    }

    /// Rebuilds an agent from a checkpoint for training on `horizon`-step
    /// episodes with observation `layout`.
    pub fn from_checkpoint(
        ck: &Checkpoint,
        layout: ObservationLayout,
        horizon: usize,
        config: TrainConfig,
    ) -> Result<Self> {
        if ck.get("format")? != "naf-agent" {
            return Err(Error::Checkpoint("not a NAF agent checkpoint".into()));
        }
        let stored = ObservationLayout {
            n_vertices: ck.parse("layout.n_vertices")?,
            n_edges: ck.parse("layout.n_edges")?,
            include_edge_terms: ck.parse("layout.include_edge_terms")?,
            include_step_index: ck.parse("layout.include_step_index")?,
        };
        check_layout(&stored, &layout)?;
        let trained_horizon: usize = ck.parse("horizon")?;
        let sizes: Vec<usize> = split(ck.get("net.sizes")?)?;
        let activations: Vec<Activation> = split(ck.get("net.activations")?)?;
        let online = NafHead::from_net(load_net("online", ck, &sizes, &activations)?)?;
        let target = NafHead::from_net(load_net("target", ck, &sizes, &activations)?)?;

        let expected_hidden = config.network.hidden();
        if sizes[1..sizes.len() - 1] != expected_hidden[..]
            || activations[..activations.len() - 1].iter().any(|a| *a != config.network.activation)
        {
            return Err(Error::IncompatibleCheckpoint(format!(
                "checkpoint network {sizes:?} does not match the configured hidden layers {expected_hidden:?}"
            )));
        }
        let stored_kind: OptimizerKind = ck.parse("optimizer")?;
        let mut agent = Self::assemble(online, target, stored, trained_horizon, config.clone())?;
        if stored_kind == OptimizerKind::Adam {
            if let Optimizer::Adam(adam) = &mut agent.optimizer {
                let m = ck.tensor("adam.m")?.data.clone();
                let v = ck.tensor("adam.v")?.data.clone();
                let t = ck.tensor("adam.t")?.data.first().copied().unwrap_or(0.0) as u64;
                adam.restore(m, v, t)?;
            }
        }
        agent.retarget(layout, horizon, config)?;
        Ok(agent)
    }
}

fn check_layout(trained: &ObservationLayout, requested: &ObservationLayout) -> Result<()> {
    if trained == requested {
        return Ok(());
    }
    let mut reasons = Vec::new();
    if trained.n_vertices != requested.n_vertices {
        reasons.push(format!("{} vertices vs {}", trained.n_vertices, requested.n_vertices));
    }
    if trained.n_edges != requested.n_edges {
        reasons.push(format!("{} edges vs {}", trained.n_edges, requested.n_edges));
    }
    if trained.include_edge_terms != requested.include_edge_terms {
        reasons.push(format!(
            "edge observables {} in the checkpoint but {} in the environment",
            on_off(trained.include_edge_terms),
            on_off(requested.include_edge_terms)
        ));
    }
    if trained.include_step_index != requested.include_step_index {
        reasons.push(format!(
            "step index {} in the checkpoint but {} in the environment",
            on_off(trained.include_step_index),
            on_off(requested.include_step_index)
        ));
    }
    Err(Error::IncompatibleCheckpoint(format!(
        "observation layout differs: {}",
        reasons.join("; ")
    )))
}

fn on_off(flag: bool) -> &'static str {
    if flag {
        "on"
    } else {
        "off"
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn split<T: std::str::FromStr>(raw: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(|s| {
            s.parse()
                .map_err(|_| Error::Checkpoint(format!("invalid list entry {s:?} in {raw:?}")))
        })
        .collect()
}

fn net_tensors(prefix: &str, net: &DenseNet) -> Vec<Tensor> {
    (0..net.n_layers())
        .flat_map(|l| {
            let (w, b) = net.layer(l);
            let (n_in, n_out) = (net.sizes()[l], net.sizes()[l + 1]);
            [
                Tensor::new(format!("{prefix}.layer{l}.weight"), vec![n_out, n_in], w.to_vec())
                    .expect("weight shape matches"),
                Tensor::vector(format!("{prefix}.layer{l}.bias"), b.to_vec()),
            ]
        })
        .collect()
}

fn load_net(prefix: &str, ck: &Checkpoint, sizes: &[usize], activations: &[Activation]) -> Result<DenseNet> {
    let mut net = DenseNet::zeros(sizes, activations)?;
    let mut params = Vec::with_capacity(net.params().len());
    for l in 0..net.n_layers() {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let w = ck.tensor(&format!("{prefix}.layer{l}.weight"))?;
        let b = ck.tensor(&format!("{prefix}.layer{l}.bias"))?;
        if w.shape != [n_out, n_in] || b.shape != [n_out] {
            return Err(Error::Checkpoint(format!(
                "layer {l} of {prefix} has shapes {:?}/{:?}, expected [{n_out}, {n_in}]/[{n_out}]",
                w.shape, b.shape
            )));
        }
        params.extend_from_slice(&w.data);
        params.extend_from_slice(&b.data);
    }
    net.params_mut().copy_from_slice(&params);
    Ok(net)
}
