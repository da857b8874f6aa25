//! Subcommand implementations. Each returns the in-memory results it wrote
//! so that callers (and tests) need not re-parse the CSVs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use qaoarl_core::agent::{run_training_with, transfer_training_with, NafAgent, TraceRow, TrainingTrace};
use qaoarl_core::baseline::{bfgs_optimize, relative_error, BaselineResult};
use qaoarl_core::neural::Checkpoint;
use qaoarl_core::problems::{CutValue, MaxCutProblem, MAX_EXACT_VERTICES};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{fmt_f64, fmt_opt, rolling_mean, write_atomic, Table};
use crate::plot::chart_from_mean;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

const TRACE_HEADER: [&str; 5] = ["episode", "noisy_reward", "greedy_reward", "best_greedy", "loss_mean"];

/// Runs `f` over `items` on at most `jobs` threads, keeping input order.
fn parallel<T: Sync, R: Send>(
    jobs: usize,
    items: &[T],
    f: impl Fn(&T) -> Result<R, CliError> + Sync + Send,
) -> Result<Vec<R>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("jobs: {e}")))?;
    pool.install(|| items.par_iter().map(&f).collect())
}

fn exact_value(problem: &MaxCutProblem) -> Result<Option<CutValue>, CliError> {
    if problem.n_vertices() > MAX_EXACT_VERTICES {
        return Ok(None);
    }
    Ok(Some(problem.exact_maxcut()?.0))
}

fn base_table(header: &[&str], config_hash: &str, exact: Option<CutValue>) -> Table {
    let mut t = Table::new(header);
    t.meta("config_hash", config_hash).meta("code_version", CODE_VERSION);
    if let Some(e) = exact {
        t.meta("exact_maxcut", e.get());
    }
    t
}

fn trace_row(row: &TraceRow) -> Vec<String> {
    vec![
        row.episode.to_string(),
        fmt_f64(row.noisy_reward),
        fmt_opt(row.greedy_reward),
        fmt_opt(row.best_greedy),
        fmt_opt(row.loss_mean),
    ]
}

fn save_checkpoint(agent: &NafAgent, config_hash: &str, path: &Path) -> Result<(), CliError> {
    let mut ck = agent.to_checkpoint();
    ck.set("experiment.config_hash", config_hash);
    let mut bytes = Vec::new();
    ck.write_to(&mut bytes)?;
    write_atomic(path, &bytes)
}

/// Mean over seeds of aligned per-episode series. `best` entries stay
/// blank until every seed has a value.
fn mean_table(
    traces: &[Vec<(f64, Option<f64>)>],
    window: usize,
    config_hash: &str,
    exact: Option<CutValue>,
    seeds: &[u64],
) -> Table {
    let mut table = base_table(&["episode", "noisy_mean", "noisy_rolling", "best_greedy_mean"], config_hash, exact);
    table.meta("seeds", join(seeds)).meta("rolling_window", window);
    let len = traces.iter().map(Vec::len).min().unwrap_or(0);
    let k = traces.len().max(1) as f64;
    let noisy: Vec<f64> = (0..len).map(|i| traces.iter().map(|t| t[i].0).sum::<f64>() / k).collect();
    let rolling = rolling_mean(&noisy, window);
    for i in 0..len {
        let best: Option<f64> = traces
            .iter()
            .map(|t| t[i].1)
            .sum::<Option<f64>>()
            .map(|s| s / k);
        table.push(vec![(i + 1).to_string(), fmt_f64(noisy[i]), fmt_f64(rolling[i]), fmt_opt(best)]);
    }
    table
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

fn write_mean_and_plot(dir: &Path, table: &Table, title: &str, svg: bool) -> Result<(), CliError> {
    table.write(&dir.join("mean.csv"))?;
    if svg {
        write_atomic(&dir.join("reward.svg"), chart_from_mean(table, title).as_bytes())?;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub trace: TrainingTrace,
    pub wall_ms: u128,
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub dir: PathBuf,
    pub p: usize,
    pub exact: Option<CutValue>,
    pub runs: Vec<SeedRun>,
}

pub fn train(config: &ExperimentConfig, jobs: usize) -> Result<TrainReport, CliError> {
    config.validate()?;
    let problem = config.problem()?;
    let exact = exact_value(&problem)?;
    let p = config.env.p;
    let env = config.env_config_for(p, problem)?;
    let hash = config.hash();
    let dir = config.out_dir().join("train").join(format!("p{p}"));
    let every = config.agent.checkpoint_every;

    let runs = parallel(jobs, &config.seeds, |&seed| {
        let seed_dir = dir.join(format!("seed{seed}"));
        let ck_path = seed_dir.join("checkpoint.naf");
        let train_config = config.train_config(seed)?;
        let start = Instant::now();
        let mut hook_err = None;
        let (trace, agent) = run_training_with(&env, &train_config, &mut |agent, row| {
            if every > 0 && row.episode % every == 0 {
                if let Err(e) = save_checkpoint(agent, &hash, &ck_path) {
                    hook_err = Some(e);
                    return Err(qaoarl_core::Error::Checkpoint("checkpoint write failed".into()));
                }
            }
            Ok(())
        })
        .map_err(|e| hook_err.take().unwrap_or(CliError::Core(e)))?;
        let wall_ms = start.elapsed().as_millis();

        let mut table = base_table(&TRACE_HEADER, &hash, exact);
        table.meta("seed", seed).meta("p", p).meta("wall_ms", wall_ms);
        for row in &trace.rows {
            table.push(trace_row(row));
        }
        table.write(&seed_dir.join("trace.csv"))?;
        save_checkpoint(&agent, &hash, &ck_path)?;
        Ok(SeedRun { seed, trace, wall_ms })
    })?;

    let series: Vec<Vec<(f64, Option<f64>)>> = runs
        .iter()
        .map(|r| r.trace.rows.iter().map(|row| (row.noisy_reward, row.best_greedy)).collect())
        .collect();
    let mean = mean_table(&series, config.output.rolling_window, &hash, exact, &config.seeds);
    write_mean_and_plot(&dir, &mean, &format!("train p={p}"), config.output.svg)?;

    let mut summary = base_table(
        &["seed", "p", "best_greedy", "best_noisy", "evaluations", "ratio_to_exact"],
        &hash,
        exact,
    );
    for run in &runs {
        let ratio = exact.zip(run.trace.best_greedy).map(|(e, b)| b / e.get() as f64);
        summary.push(vec![
            run.seed.to_string(),
            p.to_string(),
            fmt_opt(run.trace.best_greedy),
            fmt_opt(run.trace.best_noisy),
            run.trace.evaluations.to_string(),
            fmt_opt(ratio),
        ]);
    }
    summary.write(&dir.join("summary.csv"))?;
    Ok(TrainReport { dir, p, exact, runs })
}

#[derive(Clone, Debug)]
pub struct TransferPhase {
    pub p: usize,
    pub trace: TrainingTrace,
}

#[derive(Clone, Debug)]
pub struct TransferRun {
    pub seed: u64,
    pub phases: Vec<TransferPhase>,
    pub wall_ms: u128,
}

#[derive(Clone, Debug)]
pub struct TransferReport {
    pub dir: PathBuf,
    pub exact: Option<CutValue>,
    pub runs: Vec<TransferRun>,
}

/// Chains training over `transfer.p_list`, each phase starting from the
/// previous phase's agent. With `checkpoint`, the first phase resumes from
/// it instead of starting fresh.
pub fn transfer(config: &ExperimentConfig, jobs: usize, checkpoint: Option<&Path>) -> Result<TransferReport, CliError> {
    config.validate()?;
    let p_list = &config.transfer.p_list;
    if p_list.is_empty() {
        return Err(CliError::Config("transfer.p_list: at least one depth is required".into()));
    }
    if p_list.windows(2).any(|w| w[1] <= w[0]) || p_list[0] == 0 {
        return Err(CliError::Config(format!(
            "transfer.p_list: depths must be positive and strictly ascending, got {p_list:?}"
        )));
    }
    let problem = config.problem()?;
    let exact = exact_value(&problem)?;
    let hash = config.hash();
    let dir = config.out_dir().join("transfer");
    let initial = match checkpoint {
        Some(path) => Some(Checkpoint::load(path)?),
        None => None,
    };

    let runs = parallel(jobs, &config.seeds, |&seed| {
        let seed_dir = dir.join(format!("seed{seed}"));
        let train_config = config.train_config(seed)?;
        let start = Instant::now();
        let mut agent: Option<NafAgent> = None;
        let mut phases = Vec::new();
        for &p in p_list {
            let env = config.env_config_for(p, problem.clone())?;
            let mut noop = |_: &NafAgent, _: &TraceRow| Ok(());
            let trace = match (agent.as_mut(), &initial) {
                (Some(a), _) => transfer_training_with(a, &env, &train_config, &mut noop)?,
                (None, Some(ck)) => {
                    let mut a = NafAgent::from_checkpoint(ck, env.layout(), p, train_config.clone())?;
                    let t = transfer_training_with(&mut a, &env, &train_config, &mut noop)?;
                    agent = Some(a);
                    t
                }
                (None, None) => {
                    let (t, a) = run_training_with(&env, &train_config, &mut noop)?;
                    agent = Some(a);
                    t
                }
            };
            save_checkpoint(
                agent.as_ref().expect("set in the first phase"),
                &hash,
                &seed_dir.join(format!("checkpoint-p{p}.naf")),
            )?;
            phases.push(TransferPhase { p, trace });
        }
        let wall_ms = start.elapsed().as_millis();

        let mut table = base_table(
            &["phase", "p", "episode", "global_episode", "noisy_reward", "greedy_reward", "best_greedy", "loss_mean"],
            &hash,
            exact,
        );
        table.meta("seed", seed).meta("p_list", join(p_list)).meta("wall_ms", wall_ms);
        let mut global = 0usize;
        for (i, phase) in phases.iter().enumerate() {
            for row in &phase.trace.rows {
                global += 1;
                let mut cells = vec![(i + 1).to_string(), phase.p.to_string(), row.episode.to_string(), global.to_string()];
                cells.extend(trace_row(row).into_iter().skip(1));
                table.push(cells);
            }
        }
        table.write(&seed_dir.join("trace.csv"))?;
        Ok(TransferRun { seed, phases, wall_ms })
    })?;

    let mut inset = base_table(&["p", "seed", "best_greedy", "evaluations"], &hash, exact);
    for (k, &p) in p_list.iter().enumerate() {
        for run in &runs {
            let phase = &run.phases[k];
            inset.push(vec![
                p.to_string(),
                run.seed.to_string(),
                fmt_opt(phase.trace.best_greedy),
                phase.trace.evaluations.to_string(),
            ]);
        }
    }
    inset.write(&dir.join("inset.csv"))?;

    // The concatenated series uses the best greedy reward of the current phase.
    let series: Vec<Vec<(f64, Option<f64>)>> = runs
        .iter()
        .map(|r| {
            r.phases
                .iter()
                .flat_map(|ph| ph.trace.rows.iter().map(|row| (row.noisy_reward, row.best_greedy)))
                .collect()
        })
        .collect();
    let mut mean = mean_table(&series, config.output.rolling_window, &hash, exact, &config.seeds);
    mean.meta("p_list", join(p_list));
    write_mean_and_plot(&dir, &mean, &format!("transfer p={}", join(p_list)), config.output.svg)?;
    Ok(TransferReport { dir, exact, runs })
}

#[derive(Clone, Debug)]
pub struct ComparisonRow {
    pub p: usize,
    pub method: &'static str,
    pub seed: u64,
    pub best: f64,
    pub relative_error: Option<f64>,
    pub evaluations: usize,
    pub budget_exhausted: bool,
}

#[derive(Clone, Debug)]
pub struct BaselineReport {
    pub path: PathBuf,
    pub exact: Option<CutValue>,
    pub rows: Vec<ComparisonRow>,
    pub bfgs: Vec<BaselineResult>,
}

/// BFGS (and optionally the agent) at every depth of `baseline.p_list`.
pub fn baseline(config: &ExperimentConfig, jobs: usize) -> Result<BaselineReport, CliError> {
    config.validate()?;
    let problem = config.problem()?;
    let exact = exact_value(&problem)?;
    let hash = config.hash();
    let mut p_list = config.baseline.p_list.clone();
    p_list.sort_unstable();
    p_list.dedup();
    if p_list.is_empty() {
        return Err(CliError::Config("baseline.p_list: at least one depth is required".into()));
    }
    let tasks: Vec<(usize, u64)> = p_list
        .iter()
        .flat_map(|&p| config.seeds.iter().map(move |&s| (p, s)))
        .collect();
    let rel = |best: f64| -> Result<Option<f64>, CliError> {
        exact.map(|e| relative_error(best, e)).transpose().map_err(CliError::from)
    };

    let bfgs = parallel(jobs, &tasks, |&(p, seed)| Ok(bfgs_optimize(&problem, p, &config.bfgs_config(seed)?)?))?;
    let mut rows = Vec::new();
    for (&(p, seed), r) in tasks.iter().zip(&bfgs) {
        rows.push(ComparisonRow {
            p,
            method: "bfgs",
            seed,
            best: r.best_cost,
            relative_error: rel(r.best_cost)?,
            evaluations: r.evaluations,
            budget_exhausted: r.budget_exhausted,
        });
    }
    if config.baseline.with_agent {
        let agent_tasks: Vec<(usize, u64)> = tasks.iter().copied().filter(|&(p, _)| p > 0).collect();
        let traces = parallel(jobs, &agent_tasks, |&(p, seed)| {
            let env = config.env_config_for(p, problem.clone())?;
            let (trace, _) = run_training_with(&env, &config.train_config(seed)?, &mut |_, _| Ok(()))?;
            Ok(trace)
        })?;
        for (&(p, seed), t) in agent_tasks.iter().zip(&traces) {
            let best = t.best_greedy.unwrap_or(f64::NAN);
            rows.push(ComparisonRow {
                p,
                method: "naf",
                seed,
                best,
                relative_error: if best.is_finite() { rel(best)? } else { None },
                evaluations: t.evaluations,
                budget_exhausted: false,
            });
        }
    }
    rows.sort_by(|a, b| (a.p, a.method, a.seed).cmp(&(b.p, b.method, b.seed)));

    let mut table = base_table(
        &["p", "method", "seed", "best", "relative_error", "evaluations", "budget_exhausted"],
        &hash,
        exact,
    );
    table.meta("seeds", join(&config.seeds));
    for r in &rows {
        table.push(vec![
            r.p.to_string(),
            r.method.to_string(),
            r.seed.to_string(),
            fmt_f64(r.best),
            fmt_opt(r.relative_error),
            r.evaluations.to_string(),
            r.budget_exhausted.to_string(),
        ]);
    }
    let path = config.out_dir().join("baseline").join("comparison.csv");
    table.write(&path)?;
    Ok(BaselineReport { path, exact, rows, bfgs })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactReport {
    pub value: CutValue,
    /// Character `i` is the side of vertex `i`.
    pub witness: String,
}

pub fn exact(problem: &MaxCutProblem) -> Result<ExactReport, CliError> {
    let (value, bits) = problem.exact_maxcut()?;
    let witness = (0..problem.n_vertices())
        .map(|i| if bits >> i & 1 == 1 { '1' } else { '0' })
        .collect();
    Ok(ExactReport { value, witness })
}
