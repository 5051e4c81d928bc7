use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tiger_core::cli::{
    self, config_reference, load_config, run_ablate, run_eval, run_plot, run_stats, run_train, study_preset, Axis,
    PastSelf, TrainConfig,
};
use tiger_core::envs::EvalMetric;
use tiger_core::tgraph::{log_self_history_rule, GraphParams};
use tiger_core::Error;

#[derive(Parser)]
#[command(name = "tiger", version, about = "Temporal-graph value decomposition for cooperative MARL")]
struct Cli {
    /// Print every configuration key with its default and exit.
    #[arg(long)]
    help_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated seed list, overriding `train.seeds`.
    #[arg(long, value_delimiter = ',')]
    seed: Option<Vec<u64>>,
    /// Output directory, overriding `io.out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Environment steps per seed, overriding `train.total_env_steps`.
    #[arg(long)]
    steps: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<TrainConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => load_config(p)?,
            None => TrainConfig::default(),
        };
        if let Some(s) = &self.seed {
            cfg.train.seeds = s.clone();
        }
        if let Some(o) = &self.out {
            cfg.io.out_dir = o.clone();
        }
        if let Some(n) = self.steps {
            cfg.train.total_env_steps = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train every configured seed and write metrics, checkpoints and an aggregate.
    Train {
        #[command(flatten)]
        common: Common,
        /// Continue from existing checkpoints in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Greedy evaluation of a checkpoint.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
    },
    /// Sweep graph parameters and tabulate final performance.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Preconfigured grid: 1 static neighbours, 2 self history,
        /// 3 neighbour history, 4 static x temporal depth.
        #[arg(long)]
        study: Option<u32>,
        /// Custom axis `name=v1,v2,...` (k_stat_nbr, k_past_self, k_past_nbr, depth).
        #[arg(long)]
        grid: Vec<String>,
    },
    /// Node and edge counts of one episode's temporal graph.
    Stats {
        #[command(flatten)]
        common: Common,
        #[arg(long = "agents", short = 'n')]
        n_agents: Option<usize>,
        #[arg(long, short = 't')]
        horizon: Option<usize>,
        #[arg(long)]
        k_stat_nbr: Option<f64>,
        /// Integer or `log-rule`.
        #[arg(long)]
        k_past_self: Option<String>,
        #[arg(long)]
        k_past_nbr: Option<usize>,
    },
    /// Learning-curve chart and flat series file from metrics files or run directories.
    Plot {
        #[command(flatten)]
        common: Common,
        inputs: Vec<PathBuf>,
    },
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Train { common, resume } => {
            let cfg = common.load()?;
            cli::commands::warn_if_short(&cfg);
            let reports = run_train(&cfg, resume)?;
            for r in &reports {
                let last = r.rows.last().map(|row| row.eval_metric).unwrap_or(f64::NAN);
                println!("seed {}: final eval {last:.4}", r.seed);
            }
            println!("wrote {}", cfg.io.out_dir.display());
        }
        Command::Eval {
            common,
            checkpoint,
            episodes,
        } => {
            let seed = common.seed.as_ref().and_then(|s| s.first().copied());
            let res = run_eval(&checkpoint, episodes, seed)?;
            println!("{:.4} ({:.4}) over {} episodes", res.mean, res.std, res.values.len());
        }
        Command::Ablate { common, study, grid } => {
            let cfg = common.load()?;
            let mut axes = match study {
                Some(s) => study_preset(s)?,
                None => Vec::new(),
            };
            for g in &grid {
                axes.push(Axis::parse(g)?);
            }
            let (_, table) = run_ablate(&cfg, &axes)?;
            print!("{table}");
        }
        Command::Stats {
            common,
            n_agents,
            horizon,
            k_stat_nbr,
            k_past_self,
            k_past_nbr,
        } => {
            let cfg = common.load()?;
            let spec = cfg.env_spec();
            let n = n_agents.unwrap_or(spec.n_agents());
            let t = horizon.unwrap_or(spec.horizon());
            let base = cfg.graph_params();
            let past_self = match k_past_self.as_deref() {
                None => match cfg.graph.k_past_self {
                    PastSelf::Steps(k) => k,
                    PastSelf::Rule(_) => log_self_history_rule(n, t),
                },
                Some("log-rule") => log_self_history_rule(n, t),
                Some(s) => s
                    .parse()
                    .map_err(|_| Error::Config(format!("--k-past-self {s:?} is neither an integer nor log-rule")))?,
            };
            let params = GraphParams::new(
                k_stat_nbr.unwrap_or(base.k_stat_nbr),
                past_self,
                k_past_nbr.unwrap_or(base.k_past_nbr),
            )?;
            print!("{}", run_stats(n, t, &params));
        }
        Command::Plot { common, inputs } => {
            let cfg = common.load()?;
            let y_label = match cfg.env_spec().metric() {
                EvalMetric::WinRate => "win rate",
                EvalMetric::Return => "return",
            };
            let curves = run_plot(&inputs, &cfg.io.out_dir, cfg.eval.interval, y_label)?;
            println!("plotted {} curve(s) into {}", curves.len(), cfg.io.out_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TIGER_LOG", "info")).init();
    let cli = Cli::parse();
    if cli.help_config {
        print!("{}", config_reference());
        return ExitCode::SUCCESS;
    }
    let Some(cmd) = cli.command else {
        eprintln!("no subcommand given; see --help");
        return ExitCode::from(2);
    };
    match run(cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
