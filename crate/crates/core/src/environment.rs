//! Episodic wrapper around the simulator.
//!
//! An episode starts from `|s⟩` and lasts `p` steps. Each step applies one
//! cost layer and one mixer layer chosen by the agent, then reports local
//! observables of the new state. Only the final step is rewarded.

use std::f64::consts::PI;

use crate::problems::MaxCutProblem;
use crate::simulator::{Angles, CostDiagonal, Statevector};
use crate::{Error, Result};

/// Dimension of the agent's action space (one cost and one mixer angle).
pub const ACTION_DIM: usize = 2;

#[derive(Clone, Debug)]
pub struct EnvConfig {
    pub problem: MaxCutProblem,
    /// Steps per episode.
    pub p: usize,
    pub include_edge_terms: bool,
    pub include_step_index: bool,
    pub reward_scale: f64,
    pub discount: f64,
}

impl EnvConfig {
    pub fn new(problem: MaxCutProblem, p: usize) -> Self {
        Self {
            problem,
            p,
            include_edge_terms: true,
            include_step_index: true,
            reward_scale: 1.0,
            discount: 1.0,
        }
    }

    pub fn layout(&self) -> ObservationLayout {
        ObservationLayout {
            n_vertices: self.problem.n_vertices(),
            n_edges: self.problem.n_edges(),
            include_edge_terms: self.include_edge_terms,
            include_step_index: self.include_step_index,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidInput("episode length p must be at least 1".into()));
        }
        if !(self.reward_scale.is_finite() && self.reward_scale > 0.0) {
            return Err(Error::InvalidInput(format!(
                "reward_scale must be positive, got {}",
                self.reward_scale
            )));
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(Error::InvalidInput(format!(
                "discount must lie in [0, 1], got {}",
                self.discount
            )));
        }
        Ok(())
    }
}

/// Shape of the observation vector:
/// `[⟨X_0⟩..⟨X_{N-1}⟩, ⟨Z_0⟩..⟨Z_{N-1}⟩, (⟨C_e⟩ per edge), (t/p)]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ObservationLayout {
    pub n_vertices: usize,
    pub n_edges: usize,
    pub include_edge_terms: bool,
    pub include_step_index: bool,
}

impl ObservationLayout {
    pub fn len(&self) -> usize {
        2 * self.n_vertices
            + if self.include_edge_terms { self.n_edges } else { 0 }
            + usize::from(self.include_step_index)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Agent-side action in `[-1, 1]²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Action {
    raw: [f64; ACTION_DIM],
}

impl Action {
    /// Clips each component into `[-1, 1]`. Non-finite components are rejected.
    pub fn new(raw: [f64; ACTION_DIM]) -> Result<Self> {
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite action {raw:?}")));
        }
        Ok(Self {
            raw: raw.map(|v| v.clamp(-1.0, 1.0)),
        })
    }

    pub fn raw(&self) -> [f64; ACTION_DIM] {
        self.raw
    }

    /// `γ = π(u₁+1)/2`, `β = π(u₂+1)`. The closed upper end of the raw box is
    /// folded to 0, which is the same layer up to global phase for β and
    /// keeps the angle types half-open.
    pub fn angles(&self) -> Angles {
        let gamma = PI * (self.raw[0] + 1.0) / 2.0;
        let beta = PI * (self.raw[1] + 1.0);
        let gamma = if gamma >= PI { 0.0 } else { gamma };
        let beta = if beta >= 2.0 * PI { 0.0 } else { beta };
        Angles::new(gamma, beta).expect("affine image of the clipped box")
    }

    /// Inverse of [`Action::angles`] on the half-open angle box.
    pub fn from_angles(angles: Angles) -> Self {
        Self {
            raw: [2.0 * angles.gamma() / PI - 1.0, angles.beta() / PI - 1.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

pub struct QaoaEnv {
    config: EnvConfig,
    cost: CostDiagonal,
    state: Statevector,
    step: usize,
}

impl QaoaEnv {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let cost = CostDiagonal::new(&config.problem)?;
        let state = Statevector::uniform(config.problem.n_vertices())?;
        Ok(Self {
            config,
            cost,
            state,
            step: 0,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn layout(&self) -> ObservationLayout {
        self.config.layout()
    }

    pub fn state(&self) -> &Statevector {
        &self.state
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.config.p
    }

    pub fn reset(&mut self) -> Vec<f64> {
        self.state = Statevector::uniform(self.config.problem.n_vertices())
            .expect("qubit count validated at construction");
        self.step = 0;
        self.observe()
    }

    pub fn step(&mut self, action: &Action) -> Result<StepResult> {
        if self.is_done() {
            return Err(Error::Contract(format!(
                "step called after the episode finished ({} of {} steps taken)",
                self.step, self.config.p
            )));
        }
        let angles = action.angles();
        self.state.apply_cost_layer(&self.cost, angles.gamma())?;
        self.state.apply_mixer_layer(angles.beta());
        self.step += 1;
        let done = self.is_done();
        let reward = if done {
            self.config.reward_scale * self.state.expect_cost(&self.cost)?
        } else {
            0.0
        };
        Ok(StepResult {
            observation: self.observe(),
            reward,
            done,
        })
    }

    /// Plays `actions` from a fresh reset and returns the discounted return
    /// from the first step, `d^(p-1) r_p` under terminal-only reward.
    pub fn episode_return(&mut self, actions: &[Action]) -> Result<f64> {
        if actions.len() != self.config.p {
            return Err(Error::mismatch(self.config.p, actions.len()));
        }
        self.reset();
        let mut ret = 0.0;
        let mut weight = 1.0;
        for action in actions {
            ret += weight * self.step(action)?.reward;
            weight *= self.config.discount;
        }
        Ok(ret)
    }

    fn observe(&self) -> Vec<f64> {
        let layout = self.layout();
        let local = self
            .state
            .local_observables(&self.config.problem)
            .expect("state and problem sizes agree");
        let mut obs = Vec::with_capacity(layout.len());
        obs.extend_from_slice(&local.x);
        obs.extend_from_slice(&local.z);
        if layout.include_edge_terms {
            obs.extend_from_slice(&local.edges);
        }
        if layout.include_step_index {
            obs.push(self.step as f64 / self.config.p as f64);
        }
        obs
    }
}
