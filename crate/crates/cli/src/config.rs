//! Experiment configuration file.
//!
//! TOML with fixed sections; unknown keys are rejected so that a typo can
//! never silently fall back to a default.

use std::path::{Path, PathBuf};

use qaoarl_core::agent::{NetworkConfig, OuConfig, TrainConfig};
use qaoarl_core::baseline::BfgsConfig;
use qaoarl_core::environment::EnvConfig;
use qaoarl_core::neural::{Activation, OptimizerKind};
use qaoarl_core::problems::{self, MaxCutProblem};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// One run per seed; each seed drives network init, noise and replay.
    pub seeds: Vec<u64>,
    pub problem: ProblemSection,
    pub env: EnvSection,
    pub agent: AgentSection,
    pub baseline: BaselineSection,
    pub transfer: TransferSection,
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphKind {
    /// Uniform random `degree`-regular graph.
    Regular,
    /// `round(n * degree / 2)` uniformly drawn edges.
    AverageDegree,
}

/// Either `file` or the generator keys, never both.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<GraphKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degree: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSection {
    pub p: usize,
    pub include_edge_terms: bool,
    pub include_step_index: bool,
    pub reward_scale: f64,
    /// Divide the reward by the edge count so that it lies in `[0, 1]`.
    pub normalize_reward: bool,
    pub discount: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentSection {
    pub episodes: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub tau: f64,
    pub warmup_steps: usize,
    pub updates_per_step: usize,
    pub eval_every: usize,
    pub learning_rate: f64,
    pub optimizer: String,
    pub hidden_layers: usize,
    pub hidden_units: usize,
    pub activation: String,
    pub ou_theta: f64,
    pub ou_mu: f64,
    pub ou_sigma: f64,
    pub ou_dt: f64,
    /// Episodes between checkpoint writes; 0 writes only the final one.
    pub checkpoint_every: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineSection {
    pub p_list: Vec<usize>,
    /// Circuit evaluations per depth. 0 matches the agent's budget:
    /// `episodes` training episodes plus the interleaved greedy ones.
    pub max_evals: usize,
    pub h: f64,
    pub grad_tol: f64,
    pub restarts: usize,
    pub max_iters: usize,
    /// Also train the agent at every depth and emit `naf` rows.
    pub with_agent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransferSection {
    pub p_list: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Rolling-mean window for the smoothed reward column; presentation only.
    pub rolling_window: usize,
    pub svg: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seeds: vec![1, 2, 3],
            problem: ProblemSection {
                file: None,
                kind: Some(GraphKind::Regular),
                n: Some(8),
                degree: Some(3.0),
                seed: Some(1),
            },
            env: EnvSection::default(),
            agent: AgentSection::default(),
            baseline: BaselineSection::default(),
            transfer: TransferSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl Default for EnvSection {
    fn default() -> Self {
        Self {
            p: 5,
            include_edge_terms: true,
            include_step_index: true,
            reward_scale: 1.0,
            normalize_reward: true,
            discount: 1.0,
        }
    }
}

impl Default for AgentSection {
    fn default() -> Self {
        let train = TrainConfig::default();
        Self {
            episodes: train.episodes,
            batch_size: train.batch_size,
            buffer_capacity: train.buffer_capacity,
            tau: train.tau,
            warmup_steps: train.warmup_steps,
            updates_per_step: train.updates_per_step,
            eval_every: train.eval_every,
            learning_rate: train.learning_rate,
            optimizer: train.optimizer.to_string(),
            hidden_layers: train.network.hidden_layers,
            hidden_units: train.network.hidden_units,
            activation: train.network.activation.to_string(),
            ou_theta: train.noise.theta,
            ou_mu: train.noise.mu,
            ou_sigma: train.noise.sigma,
            ou_dt: train.noise.dt,
            checkpoint_every: 0,
        }
    }
}

impl Default for BaselineSection {
    fn default() -> Self {
        let bfgs = BfgsConfig::default();
        Self {
            p_list: vec![1, 2, 3, 4, 5],
            max_evals: 0,
            h: bfgs.h,
            grad_tol: bfgs.grad_tol,
            restarts: bfgs.restarts,
            max_iters: bfgs.max_iters,
            with_agent: false,
        }
    }
}

impl Default for TransferSection {
    fn default() -> Self {
        Self { p_list: vec![4, 6, 8] }
    }
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: None,
            rolling_window: 100,
            svg: true,
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seeds: Vec<u64>,
    pub episodes: Option<usize>,
    pub p: Option<usize>,
    pub out: Option<PathBuf>,
}

fn invalid(field: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {message}"))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        // Relative graph files are resolved against the config's directory.
        if let (Some(file), Some(dir)) = (&config.problem.file, path.parent()) {
            if file.is_relative() {
                config.problem.file = Some(dir.join(file));
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    /// Applies overrides; `--p` also replaces the baseline depth list.
    pub fn apply(&mut self, overrides: &Overrides) {
        if !overrides.seeds.is_empty() {
            self.seeds = overrides.seeds.clone();
        }
        if let Some(episodes) = overrides.episodes {
            self.agent.episodes = episodes;
        }
        if let Some(p) = overrides.p {
            self.env.p = p;
            self.baseline.p_list = vec![p];
        }
        if let Some(out) = &overrides.out {
            self.output.dir = Some(out.clone());
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML, ignoring
    /// the output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output.dir = None;
        let digest = Sha256::digest(canonical.to_toml().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "at least one seed is required"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(invalid("seeds", "duplicate seed"));
        }
        self.problem_source()?;
        self.env_config_for(self.env.p.max(1), MaxCutProblem::new(2, [(0, 1)]).expect("edge"))?;
        self.train_config(0)?;
        self.bfgs_config(0)?;
        if self.output.rolling_window == 0 {
            return Err(invalid("output.rolling_window", "must be at least 1"));
        }
        Ok(())
    }

    fn problem_source(&self) -> Result<(), CliError> {
        let p = &self.problem;
        let generator = p.kind.is_some() || p.n.is_some() || p.degree.is_some() || p.seed.is_some();
        match (&p.file, generator) {
            (Some(_), true) => Err(invalid(
                "problem",
                "give either `file` or the generator keys (kind, n, degree, seed), not both",
            )),
            (None, false) => Err(invalid("problem", "no problem source: set `file` or `kind`/`n`/`degree`")),
            (Some(_), false) => Ok(()),
            (None, true) => {
                if p.kind.is_none() {
                    return Err(invalid("problem.kind", "missing (regular or average-degree)"));
                }
                if p.n.is_none() {
                    return Err(invalid("problem.n", "missing"));
                }
                if p.degree.is_none() {
                    return Err(invalid("problem.degree", "missing"));
                }
                Ok(())
            }
        }
    }

    pub fn problem(&self) -> Result<MaxCutProblem, CliError> {
        self.problem_source()?;
        let p = &self.problem;
        if let Some(file) = &p.file {
            return Ok(problems::load_problem(file)?);
        }
        let n = p.n.expect("checked");
        let degree = p.degree.expect("checked");
        let seed = p.seed.unwrap_or(0);
        match p.kind.as_ref().expect("checked") {
            GraphKind::Regular => {
                if degree.fract() != 0.0 || degree < 0.0 {
                    return Err(invalid("problem.degree", format!("{degree} is not a whole degree")));
                }
                problems::random_regular_graph(n, degree as usize, seed)
                    .map_err(|e| invalid("problem", e))
            }
            GraphKind::AverageDegree => {
                problems::random_graph_with_average_degree(n, degree, seed).map_err(|e| invalid("problem", e))
            }
        }
    }

    pub fn env_config_for(&self, p: usize, problem: MaxCutProblem) -> Result<EnvConfig, CliError> {
        let mut reward_scale = self.env.reward_scale;
        if self.env.normalize_reward {
            if problem.n_edges() == 0 {
                return Err(invalid("env.normalize_reward", "graph has no edges"));
            }
            reward_scale /= problem.n_edges() as f64;
        }
        let env = EnvConfig {
            problem,
            p,
            include_edge_terms: self.env.include_edge_terms,
            include_step_index: self.env.include_step_index,
            reward_scale,
            discount: self.env.discount,
        };
        env.validate().map_err(|e| invalid("env", e))?;
        Ok(env)
    }

    pub fn train_config(&self, seed: u64) -> Result<TrainConfig, CliError> {
        let a = &self.agent;
        let optimizer: OptimizerKind = a
            .optimizer
            .parse()
            .map_err(|_| invalid("agent.optimizer", format!("unknown optimizer {:?}", a.optimizer)))?;
        let activation: Activation = a
            .activation
            .parse()
            .map_err(|_| invalid("agent.activation", format!("unknown activation {:?}", a.activation)))?;
        let config = TrainConfig {
            episodes: a.episodes,
            batch_size: a.batch_size,
            buffer_capacity: a.buffer_capacity,
            tau: a.tau,
            discount: self.env.discount,
            warmup_steps: a.warmup_steps,
            updates_per_step: a.updates_per_step,
            eval_every: a.eval_every,
            learning_rate: a.learning_rate,
            optimizer,
            noise: OuConfig {
                theta: a.ou_theta,
                mu: a.ou_mu,
                sigma: a.ou_sigma,
                dt: a.ou_dt,
            },
            network: NetworkConfig {
                hidden_layers: a.hidden_layers,
                hidden_units: a.hidden_units,
                activation,
            },
            seed,
        };
        config.validate().map_err(|e| invalid("agent", e))?;
        Ok(config)
    }

    /// Evaluations one agent run of `episodes` episodes spends.
    pub fn agent_budget(&self) -> usize {
        let e = self.agent.episodes;
        let every = self.agent.eval_every.max(1);
        let greedy = if e == 0 { 0 } else { e / every + usize::from(e % every != 0) };
        e + greedy
    }

    pub fn bfgs_config(&self, seed: u64) -> Result<BfgsConfig, CliError> {
        let b = &self.baseline;
        let max_evals = if b.max_evals == 0 { self.agent_budget().max(1) } else { b.max_evals };
        if !(b.h.is_finite() && b.h > 0.0) {
            return Err(invalid("baseline.h", "must be positive"));
        }
        if b.restarts == 0 {
            return Err(invalid("baseline.restarts", "must be at least 1"));
        }
        if !(b.grad_tol.is_finite() && b.grad_tol > 0.0) {
            return Err(invalid("baseline.grad_tol", "must be positive"));
        }
        Ok(BfgsConfig {
            max_evals,
            h: b.h,
            grad_tol: b.grad_tol,
            restarts: b.restarts,
            max_iters: b.max_iters,
            seed,
        })
    }

    pub fn out_dir(&self) -> PathBuf {
        self.output
            .dir
            .clone()
            .or_else(|| std::env::var_os("QAOARL_OUT").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("runs"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_validate() {
        let config = ExperimentConfig::default();
        config.validate().unwrap();
        let back = ExperimentConfig::from_toml(&config.to_toml()).unwrap();
        assert_eq!(back, config);
        assert_eq!(back.hash(), config.hash());
        assert_eq!(config.hash().len(), 16);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml("[agent]\nepisode = 3\n").unwrap_err();
        assert!(err.to_string().contains("episode"), "{err}");
        assert!(ExperimentConfig::from_toml("bogus = 1\n").is_err());
    }

    #[test]
    fn problem_source_is_exclusive() {
        let config = ExperimentConfig::from_toml("[problem]\nfile = \"g.txt\"\nn = 4\n").unwrap();
        assert!(config.validate().unwrap_err().to_string().contains("problem"));
        let config = ExperimentConfig::from_toml("[problem]\nkind = \"regular\"\ndegree = 3\n").unwrap();
        assert!(config.validate().unwrap_err().to_string().contains("problem.n"));
    }

    #[test]
    fn overrides_and_budget() {
        let mut config = ExperimentConfig::default();
        config.apply(&Overrides {
            seeds: vec![7],
            episodes: Some(120),
            p: Some(2),
            out: None,
        });
        assert_eq!(config.seeds, vec![7]);
        assert_eq!(config.env.p, 2);
        assert_eq!(config.baseline.p_list, vec![2]);
        assert_eq!(config.agent_budget(), 120 + 3);
        config.agent.episodes = 100;
        assert_eq!(config.agent_budget(), 102);
        assert_eq!(config.bfgs_config(0).unwrap().max_evals, 102);
    }

    #[test]
    fn field_named_in_errors() {
        let mut config = ExperimentConfig::default();
        config.agent.activation = "sigmoid".into();
        assert!(config.validate().unwrap_err().to_string().contains("agent.activation"));
        let mut config = ExperimentConfig::default();
        config.env.discount = 2.0;
        assert!(config.validate().unwrap_err().to_string().contains("env"));
    }
}
