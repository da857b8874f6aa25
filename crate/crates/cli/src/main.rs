use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qaoarl_cli::commands::{self, CODE_VERSION};
use qaoarl_cli::{plot, CliError, ExperimentConfig, Overrides};
use qaoarl_core::problems::load_problem;

#[derive(Parser)]
#[command(name = "qaoarl", version, about = "QAOA angle control by continuous-action Q-learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML). Built-in defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config and QAOARL_OUT.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run seed; repeat for several runs.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Parallel runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the agent for every seed at depth env.p.
    Train(Common),
    /// Chain training over transfer.p_list.
    Transfer {
        #[command(flatten)]
        common: Common,
        /// Resume the first phase from this checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Multi-start BFGS at every depth of baseline.p_list.
    Baseline {
        #[command(flatten)]
        common: Common,
        /// Also train the agent at each depth for a side-by-side comparison.
        #[arg(long)]
        with_agent: bool,
    },
    /// Exact maximum cut of the configured problem or a graph file.
    Exact {
        #[arg(long, conflicts_with = "graph")]
        config: Option<PathBuf>,
        /// Edge-list file: vertex count, then one `i j` pair per line.
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Regenerate SVG charts from the mean.csv files under a directory.
    Plot {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the default configuration.
    DefaultConfig,
}

fn load(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    config.apply(&Overrides {
        seeds: common.seeds.clone(),
        episodes: common.episodes,
        p: common.p,
        out: common.out.clone(),
    });
    Ok(config)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(common) => {
            let report = commands::train(&load(&common)?, common.jobs)?;
            for run in &report.runs {
                println!(
                    "seed {} p {} best_greedy {} evaluations {} wall_ms {}",
                    run.seed,
                    report.p,
                    run.trace.best_greedy.map_or("-".into(), |b| format!("{b:.6}")),
                    run.trace.evaluations,
                    run.wall_ms
                );
            }
            if let Some(e) = report.exact {
                println!("exact maxcut {e}");
            }
            println!("wrote {}", report.dir.display());
        }
        Command::Transfer { common, checkpoint } => {
            let report = commands::transfer(&load(&common)?, common.jobs, checkpoint.as_deref())?;
            for run in &report.runs {
                for phase in &run.phases {
                    println!(
                        "seed {} p {} best_greedy {}",
                        run.seed,
                        phase.p,
                        phase.trace.best_greedy.map_or("-".into(), |b| format!("{b:.6}"))
                    );
                }
            }
            println!("wrote {}", report.dir.display());
        }
        Command::Baseline { common, with_agent } => {
            let mut config = load(&common)?;
            config.baseline.with_agent |= with_agent;
            let report = commands::baseline(&config, common.jobs)?;
            for r in &report.rows {
                println!(
                    "p {} {} seed {} best {:.6} relative_error {} evaluations {}",
                    r.p,
                    r.method,
                    r.seed,
                    r.best,
                    r.relative_error.map_or("-".into(), |e| format!("{e:.6}")),
                    r.evaluations
                );
            }
            println!("wrote {}", report.path.display());
        }
        Command::Exact { config, graph } => {
            let problem = match (config, graph) {
                (_, Some(path)) => load_problem(&path)?,
                (Some(path), None) => ExperimentConfig::load(&path)?.problem()?,
                (None, None) => ExperimentConfig::default().problem()?,
            };
            let report = commands::exact(&problem)?;
            println!("maxcut {}", report.value);
            println!("witness {}", report.witness);
        }
        Command::Plot { out } => {
            let root = out.unwrap_or_else(|| ExperimentConfig::default().out_dir());
            for path in plot::replot(&root)? {
                println!("wrote {}", path.display());
            }
        }
        Command::DefaultConfig => {
            println!("# qaoarl {CODE_VERSION} default configuration");
            print!("{}", ExperimentConfig::default().to_toml());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
