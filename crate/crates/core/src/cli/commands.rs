use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};

use super::checkpoint::Checkpoint;
use super::config::{PastSelf, TrainConfig};
use super::metrics::{aggregate, read_metrics, truncate_metrics, write_aggregate, MetricsRow, MetricsWriter};
use crate::error::{Error, Result};
use crate::learner::{EvalResult, Trainer};
use crate::tgraph::{episode_graph_stats, GraphParams};

pub fn metrics_path(out_dir: &Path, seed: u64) -> PathBuf {
    out_dir.join(format!("metrics_seed{seed}.csv"))
}

pub fn checkpoint_path(out_dir: &Path, seed: u64) -> PathBuf {
    out_dir.join(format!("checkpoint_seed{seed}.bin"))
}

pub fn aggregate_path(out_dir: &Path) -> PathBuf {
    out_dir.join("aggregate.csv")
}

/// Outcome of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedReport {
    pub seed: u64,
    pub rows: Vec<MetricsRow>,
}

impl SeedReport {
    pub fn final_metric(&self) -> Option<f64> {
        self.rows.last().map(|r| r.eval_metric)
    }
}

/// Settings that may legitimately differ between a checkpoint and the
/// invocation resuming it.
fn same_experiment(a: &TrainConfig, b: &TrainConfig) -> bool {
    let strip = |c: &TrainConfig| {
        let mut c = c.clone();
        c.train.total_env_steps = 0;
        c.train.seeds.clear();
        c.io = Default::default();
        c
    };
    strip(a) == strip(b)
}

/// Trains one seed to `config.train.total_env_steps`, resuming from the
/// seed's checkpoint in `config.io.out_dir` when `resume` is set and one exists.
pub fn train_seed(config: &TrainConfig, seed: u64, resume: bool) -> Result<SeedReport> {
    train_seed_until(config, seed, resume, None)
}

/// As [`train_seed`], but stops dead right after the first periodic
/// checkpoint at or beyond `halt_at`, the way a killed process would.
pub fn train_seed_until(config: &TrainConfig, seed: u64, resume: bool, halt_at: Option<u64>) -> Result<SeedReport> {
    let out = &config.io.out_dir;
    std::fs::create_dir_all(out)?;
    let metrics_file = metrics_path(out, seed);
    let ckpt_file = checkpoint_path(out, seed);

    let mut trainer = if resume && ckpt_file.exists() {
        let ckpt = Checkpoint::load(&ckpt_file)?;
        let (saved, tr) = ckpt.restore()?;
        if !same_experiment(&saved, config) || tr.seed != seed {
            return Err(Error::Checkpoint(format!(
                "{} was written by a different configuration",
                ckpt_file.display()
            )));
        }
        if metrics_file.exists() {
            truncate_metrics(&metrics_file, tr.env_steps)?;
        }
        info!("seed {seed}: resuming at {} env steps", tr.env_steps);
        tr
    } else {
        if metrics_file.exists() {
            std::fs::remove_file(&metrics_file)?;
        }
        Trainer::new(config.learner_config(), config.env_spec(), seed)?
    };

    let mut writer = MetricsWriter::append(&metrics_file)?;
    let started = Instant::now();
    let wall = |started: &Instant| {
        if config.io.record_wall_time {
            started.elapsed().as_secs_f64()
        } else {
            0.0
        }
    };
    let total = config.train.total_env_steps;
    let interval = config.eval.interval;
    let ckpt_interval = config.io.checkpoint_interval;
    let mut last_eval = read_metrics(&metrics_file)?.last().map(|r| r.env_steps);

    let mut record = |tr: &mut Trainer, last_eval: &mut Option<u64>| -> Result<()> {
        let eval: EvalResult = tr.evaluate(config.eval.episodes)?;
        let row = MetricsRow::new(tr.env_steps, tr.take_mean_loss(), &eval, tr.epsilon(), wall(&started), seed);
        writer.write(&row)?;
        *last_eval = Some(tr.env_steps);
        info!(
            "seed {seed} step {} eps {:.3} loss {:.4} eval {:.3} ({:.3})",
            row.env_steps, row.epsilon, row.train_loss, row.eval_metric, row.eval_std
        );
        Ok(())
    };

    if last_eval.is_none() {
        record(&mut trainer, &mut last_eval)?;
    }
    while trainer.env_steps < total {
        let before = trainer.env_steps;
        trainer.run_episode()?;
        let now = trainer.env_steps;
        if now / interval > before / interval {
            record(&mut trainer, &mut last_eval)?;
        }
        if ckpt_interval > 0 && now / ckpt_interval > before / ckpt_interval && now < total {
            Checkpoint::capture(config, &trainer).save(&ckpt_file)?;
            if halt_at.is_some_and(|h| now >= h) {
                return Ok(SeedReport {
                    seed,
                    rows: read_metrics(&metrics_file)?,
                });
            }
        }
    }
    if last_eval != Some(trainer.env_steps) {
        record(&mut trainer, &mut last_eval)?;
    }
    Checkpoint::capture(config, &trainer).save(&ckpt_file)?;
    Ok(SeedReport {
        seed,
        rows: read_metrics(&metrics_file)?,
    })
}

/// Trains every configured seed, then writes the cross-seed aggregate.
pub fn run_train(config: &TrainConfig, resume: bool) -> Result<Vec<SeedReport>> {
    config.validate()?;
    std::fs::create_dir_all(&config.io.out_dir)?;
    std::fs::write(config.io.out_dir.join("config.toml"), config.to_toml_string())?;
    let mut reports = Vec::new();
    for &seed in &config.train.seeds {
        reports.push(train_seed(config, seed, resume)?);
    }
    let runs: Vec<Vec<MetricsRow>> = reports.iter().map(|r| r.rows.clone()).collect();
    write_aggregate(&aggregate_path(&config.io.out_dir), &aggregate(&runs, config.eval.interval))?;
    Ok(reports)
}

/// Greedy evaluation of a saved checkpoint.
pub fn run_eval(checkpoint: &Path, episodes: usize, seed: Option<u64>) -> Result<EvalResult> {
    let (config, mut tr) = Checkpoint::load(checkpoint)?.restore()?;
    match seed {
        Some(s) => {
            let mut env = config.env_spec().build()?;
            crate::learner::evaluate(env.as_mut(), &tr.model, config.env_spec().metric(), episodes, s)
        }
        None => tr.evaluate(episodes),
    }
}

/// Values swept along one ablation axis.
#[derive(Debug, Clone, PartialEq)]
pub enum Axis {
    KStatNbr(Vec<f64>),
    KPastSelf(Vec<PastSelf>),
    KPastNbr(Vec<usize>),
    /// Self and neighbour history depth moved together.
    Depth(Vec<usize>),
}

impl Axis {
    fn len(&self) -> usize {
        match self {
            Axis::KStatNbr(v) => v.len(),
            Axis::KPastSelf(v) => v.len(),
            Axis::KPastNbr(v) | Axis::Depth(v) => v.len(),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Axis::KStatNbr(_) => "k_stat_nbr",
            Axis::KPastSelf(_) => "k_past_self",
            Axis::KPastNbr(_) => "k_past_nbr",
            Axis::Depth(_) => "depth",
        }
    }

    fn apply(&self, k: usize, cfg: &mut TrainConfig) -> String {
        match self {
            Axis::KStatNbr(v) => {
                cfg.graph.k_stat_nbr = v[k];
                format!("k_stat_nbr={}", v[k])
            }
            Axis::KPastSelf(v) => {
                cfg.graph.k_past_self = v[k];
                format!("k_past_self={}", v[k])
            }
            Axis::KPastNbr(v) => {
                cfg.graph.k_past_nbr = v[k];
                format!("k_past_nbr={}", v[k])
            }
            Axis::Depth(v) => {
                cfg.graph.k_past_self = PastSelf::Steps(v[k]);
                cfg.graph.k_past_nbr = v[k];
                format!("depth={}", v[k])
            }
        }
    }

    /// Parses `name=v1,v2,...`.
    pub fn parse(spec: &str) -> Result<Self> {
        let usage = |msg: String| Error::Config(format!("grid axis {spec:?}: {msg}"));
        let (name, values) = spec
            .split_once('=')
            .ok_or_else(|| usage("expected name=v1,v2,...".into()))?;
        let items: Vec<&str> = values.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        let ints = || -> Result<Vec<usize>> {
            items
                .iter()
                .map(|s| s.parse().map_err(|_| usage(format!("{s:?} is not a non-negative integer"))))
                .collect()
        };
        Ok(match name.trim() {
            "k_stat_nbr" => Axis::KStatNbr(
                items
                    .iter()
                    .map(|s| s.parse().map_err(|_| usage(format!("{s:?} is not a number"))))
                    .collect::<Result<_>>()?,
            ),
            "k_past_self" => Axis::KPastSelf(
                items
                    .iter()
                    .map(|s| match *s {
                        "log-rule" => Ok(PastSelf::Rule(super::config::LogRule::LogRule)),
                        s => s
                            .parse()
                            .map(PastSelf::Steps)
                            .map_err(|_| usage(format!("{s:?} is neither an integer nor log-rule"))),
                    })
                    .collect::<Result<_>>()?,
            ),
            "k_past_nbr" => Axis::KPastNbr(ints()?),
            "depth" => Axis::Depth(ints()?),
            other => return Err(usage(format!("unknown axis {other:?}"))),
        })
    }
}

/// The four preconfigured sweeps.
pub fn study_preset(study: u32) -> Result<Vec<Axis>> {
    let stat = Axis::KStatNbr(vec![0.1, 0.5, 0.9]);
    Ok(match study {
        1 => vec![stat],
        2 => vec![Axis::KPastSelf(vec![
            PastSelf::Steps(0),
            PastSelf::Steps(1),
            PastSelf::Rule(super::config::LogRule::LogRule),
        ])],
        3 => vec![Axis::KPastNbr(vec![0, 1, 2])],
        4 => vec![stat, Axis::Depth(vec![0, 1, 2])],
        other => return Err(Error::Config(format!("unknown study {other}; presets are 1-4"))),
    })
}

/// Cartesian product of the axes applied to `base`, with a label per cell.
pub fn expand_grid(base: &TrainConfig, axes: &[Axis]) -> Result<Vec<(String, TrainConfig)>> {
    if axes.is_empty() || axes.iter().any(|a| a.len() == 0) {
        return Err(Error::Config("ablation grid is empty: give --study or at least one non-empty --grid axis".into()));
    }
    let mut cells = vec![(Vec::<String>::new(), base.clone())];
    for axis in axes {
        let mut next = Vec::with_capacity(cells.len() * axis.len());
        for (labels, cfg) in &cells {
            for k in 0..axis.len() {
                let mut cfg = cfg.clone();
                let mut labels = labels.clone();
                labels.push(axis.apply(k, &mut cfg));
                next.push((labels, cfg));
            }
        }
        cells = next;
    }
    cells
        .into_iter()
        .map(|(labels, mut cfg)| {
            let label = labels.join(" ");
            cfg.io.out_dir = base.io.out_dir.join(labels.join("_"));
            cfg.validate()?;
            Ok((label, cfg))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationCell {
    pub label: String,
    pub mean: f64,
    pub std: f64,
}

impl AblationCell {
    pub fn formatted(&self) -> String {
        format!("{:.3} ({:.3})", self.mean, self.std)
    }
}

/// Summary table of final metric per cell; the best mean is starred.
pub fn render_ablation(axes: &[Axis], cells: &[AblationCell]) -> String {
    let names: Vec<&str> = axes.iter().map(Axis::name).collect();
    let width = cells.iter().map(|c| c.label.len()).max().unwrap_or(0).max(6);
    let mut out = format!("{:<width$}  final mean (std)   [{}]\n", "config", names.join(" x "));
    let best = (0..cells.len()).reduce(|b, i| if cells[i].mean > cells[b].mean { i } else { b });
    for (i, c) in cells.iter().enumerate() {
        let mark = if Some(i) == best { " *" } else { "" };
        out.push_str(&format!("{:<width$}  {}{}\n", c.label, c.formatted(), mark));
    }
    if let Some(b) = best {
        out.push_str(&format!("best: {} = {}\n", cells[b].label, cells[b].formatted()));
    }
    out
}

pub fn run_ablate(base: &TrainConfig, axes: &[Axis]) -> Result<(Vec<AblationCell>, String)> {
    let grid = expand_grid(base, axes)?;
    info!("ablation: {} configurations", grid.len());
    let mut cells = Vec::with_capacity(grid.len());
    for (label, cfg) in grid {
        info!("ablation cell {label}");
        let reports = run_train(&cfg, false)?;
        let finals: Vec<f64> = reports.iter().filter_map(SeedReport::final_metric).collect();
        let (mean, std) = crate::learner::mean_std(&finals);
        cells.push(AblationCell { label, mean, std });
    }
    let table = render_ablation(axes, &cells);
    std::fs::write(base.io.out_dir.join("ablation.txt"), &table)?;
    Ok((cells, table))
}

/// Node and edge accounting for an `n_agents` x `horizon` episode.
pub fn run_stats(n_agents: usize, horizon: usize, params: &GraphParams) -> String {
    episode_graph_stats(n_agents, horizon, params).render()
}

pub fn warn_if_short(config: &TrainConfig) {
    if config.train.total_env_steps < config.train.epsilon_anneal_steps {
        warn!(
            "training stops at {} env steps, before epsilon finishes annealing at {}",
            config.train.total_env_steps, config.train.epsilon_anneal_steps
        );
    }
}
