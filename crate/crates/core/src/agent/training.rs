use super::{NafAgent, TrainConfig, Transition};
use crate::environment::{Action, EnvConfig, QaoaEnv, ACTION_DIM};
use crate::{Error, Result};

/// Per-episode record of a training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    /// 1-based within the run.
    pub episode: usize,
    /// Terminal `⟨C⟩` of the exploratory episode (the reward with the
    /// environment's `reward_scale` divided out).
    pub noisy_reward: f64,
    /// Terminal `⟨C⟩` of the greedy evaluation run after this episode, if any.
    pub greedy_reward: Option<f64>,
    /// Best greedy reward seen so far in this run.
    pub best_greedy: Option<f64>,
    /// Mean loss of the gradient steps taken during this episode.
    pub loss_mean: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingTrace {
    pub p: usize,
    pub rows: Vec<TraceRow>,
    pub best_greedy: Option<f64>,
    /// Raw actions of the best greedy episode.
    pub best_greedy_actions: Vec<[f64; ACTION_DIM]>,
    pub best_noisy: Option<f64>,
    /// Complete circuit executions (training plus greedy evaluation episodes).
    pub evaluations: usize,
}

/// Called after every episode with the agent and the row just recorded.
pub type EpisodeHook<'a> = dyn FnMut(&NafAgent, &TraceRow) -> Result<()> + 'a;

/// Trains a fresh agent on `env_config` for `train_config.episodes` episodes.
pub fn run_training(env_config: &EnvConfig, train_config: &TrainConfig) -> Result<(TrainingTrace, NafAgent)> {
    run_training_with(env_config, train_config, &mut |_, _| Ok(()))
}

/// [`run_training`] with a per-episode hook, e.g. for periodic checkpoints.
pub fn run_training_with(
    env_config: &EnvConfig,
    train_config: &TrainConfig,
    hook: &mut EpisodeHook<'_>,
) -> Result<(TrainingTrace, NafAgent)> {
    let mut env = QaoaEnv::new(env_config.clone())?;
    let mut agent = NafAgent::new(env.layout(), env_config.p, train_config.clone())?;
    let trace = train_episodes(&mut agent, &mut env, train_config.episodes, hook)?;
    Ok((trace, agent))
}

/// Continues training `agent` on the longer episodes of `env_config`.
///
/// Parameters and optimizer moments carry over unchanged; the replay buffer
/// starts empty. `env_config.p` may equal the trained horizon (plain resume)
/// but not be shorter.
pub fn transfer_training(
    agent: &mut NafAgent,
    env_config: &EnvConfig,
    train_config: &TrainConfig,
) -> Result<TrainingTrace> {
    transfer_training_with(agent, env_config, train_config, &mut |_, _| Ok(()))
}

pub fn transfer_training_with(
    agent: &mut NafAgent,
    env_config: &EnvConfig,
    train_config: &TrainConfig,
    hook: &mut EpisodeHook<'_>,
) -> Result<TrainingTrace> {
    let mut env = QaoaEnv::new(env_config.clone())?;
    agent.retarget(env.layout(), env_config.p, train_config.clone())?;
    train_episodes(agent, &mut env, train_config.episodes, hook)
}

fn train_episodes(
    agent: &mut NafAgent,
    env: &mut QaoaEnv,
    episodes: usize,
    hook: &mut EpisodeHook<'_>,
) -> Result<TrainingTrace> {
    if env.layout() != agent.layout() {
        return Err(Error::IncompatibleCheckpoint(
            "agent and environment observation layouts differ".into(),
        ));
    }
    let eval_every = agent.config().eval_every;
    let warmup = agent.config().warmup_steps;
    let updates = agent.config().updates_per_step;
    let mut trace = TrainingTrace {
        p: env.config().p,
        ..TrainingTrace::default()
    };
    let mut total_steps = 0usize;
    let scale_back = 1.0 / env.config().reward_scale;

    for episode in 1..=episodes {
        agent.begin_episode();
        let mut obs = env.reset();
        let mut losses = Vec::new();
        let noisy_reward = scale_back * loop {
            let raw = agent.select_action(&obs, true)?;
            let action = Action::new(raw)?;
            let step = env.step(&action)?;
            agent.remember(Transition {
                observation: obs,
                action: action.raw(),
                reward: step.reward,
                next_observation: step.observation.clone(),
                done: step.done,
            })?;
            total_steps += 1;
            if total_steps >= warmup {
                for _ in 0..updates {
                    if let Some(loss) = agent.train_step()? {
                        losses.push(loss);
                    }
                }
            }
            obs = step.observation;
            if step.done {
                break step.reward;
            }
        };
        trace.evaluations += 1;
        trace.best_noisy = Some(trace.best_noisy.map_or(noisy_reward, |b| b.max(noisy_reward)));

        let greedy_reward = if episode % eval_every == 0 || episode == episodes {
            let (reward, actions) = greedy_episode(agent, env)?;
            let reward = scale_back * reward;
            trace.evaluations += 1;
            if trace.best_greedy.is_none_or(|b| reward > b) {
                trace.best_greedy = Some(reward);
                trace.best_greedy_actions = actions;
            }
            Some(reward)
        } else {
            None
        };

        let loss_mean = (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64);
        trace.rows.push(TraceRow {
            episode,
            noisy_reward,
            greedy_reward,
            best_greedy: trace.best_greedy,
            loss_mean,
        });
        hook(agent, trace.rows.last().expect("row just pushed"))?;
    }
    Ok(trace)
}

/// Runs one noise-free episode and returns its terminal reward and actions.
pub(crate) fn greedy_episode(agent: &mut NafAgent, env: &mut QaoaEnv) -> Result<(f64, Vec<[f64; ACTION_DIM]>)> {
    let mut obs = env.reset();
    let mut actions = Vec::with_capacity(env.config().p);
    loop {
        let raw = agent.select_action(&obs, false)?;
        let action = Action::new(raw)?;
        actions.push(action.raw());
        let step = env.step(&action)?;
        obs = step.observation;
        if step.done {
            return Ok((step.reward, actions));
        }
    }
}
