use super::checkpoint::Checkpoint;
use super::commands::{expand_grid, metrics_path, render_ablation, study_preset, AblationCell, Axis};
use super::config::{config_reference, PastSelf, TrainConfig};
use super::metrics::{aggregate, read_metrics, truncate_metrics, MetricsRow, MetricsWriter};
use crate::error::Error;
use crate::learner::Trainer;
use crate::marl::Algorithm;

fn row(step: u64, metric: f64, seed: u64) -> MetricsRow {
    MetricsRow {
        env_steps: step,
        train_loss: f64::NAN,
        eval_metric: metric,
        eval_std: 0.0,
        epsilon: 1.0,
        wall_seconds: 0.0,
        seed,
    }
}

#[test]
fn empty_file_gives_defaults() {
    let cfg = TrainConfig::from_toml_str("", "empty").unwrap();
    assert_eq!(cfg, TrainConfig::default());
    let l = cfg.learner_config();
    assert_eq!(l.td.gamma, 0.99);
    assert_eq!(l.td.lambda, 0.8);
    assert_eq!(l.adam.lr, 5e-4);
    assert_eq!(l.buffer_capacity, 5000);
    assert_eq!(l.batch_size, 32);
    assert_eq!(l.target_update_interval, 200);
    assert_eq!(l.grad_clip, 10.0);
    assert_eq!((l.schedule.start, l.schedule.end, l.schedule.anneal_steps), (1.0, 0.05, 200_000));
}

#[test]
fn default_config_round_trips() {
    let cfg = TrainConfig::default();
    let text = cfg.to_toml_string();
    assert_eq!(TrainConfig::from_toml_str(&text, "rt").unwrap(), cfg);
}

#[test]
fn out_of_range_reports_key_and_line() {
    let err = TrainConfig::from_toml_str("[env]\nname = \"gather\"\n\n[graph]\nk_stat_nbr = 1.5\n", "cfg.toml").unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, Error::Config(_)));
    assert!(msg.contains("graph.k_stat_nbr"), "{msg}");
    assert!(msg.contains("cfg.toml:5"), "{msg}");
}

#[test]
fn unknown_key_rejected_with_line() {
    let err = TrainConfig::from_toml_str("[train]\ngamma = 0.9\nbogus = 1\n", "cfg.toml").unwrap_err();
    match err {
        Error::Parse { line, msg, .. } => {
            assert_eq!(line, 3);
            assert!(msg.contains("bogus"), "{msg}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn log_rule_resolves_per_environment() {
    let cfg = TrainConfig::from_toml_str("[graph]\nk_past_self = \"log-rule\"\n", "c").unwrap();
    assert_eq!(cfg.graph_params().k_past_self, 4);
    let cfg = TrainConfig::from_toml_str("[env]\nname = \"tag\"\n[graph]\nk_past_self = \"log-rule\"\n", "c").unwrap();
    assert_eq!(cfg.graph_params().k_past_self, 7);
    let cfg = TrainConfig::from_toml_str("[graph]\nk_past_self = 3\n", "c").unwrap();
    assert_eq!(cfg.graph.k_past_self, PastSelf::Steps(3));
}

#[test]
fn reference_lists_every_section() {
    let text = config_reference();
    for key in ["[env]", "[env.gather]", "[env.tag]", "[algo]", "[graph]", "[train]", "[eval]", "[io]", "epsilon_anneal_steps = 200000"] {
        assert!(text.contains(key), "missing {key}");
    }
}

#[test]
fn metrics_append_truncate_and_prefix_parse() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    {
        let mut w = MetricsWriter::append(&path).unwrap();
        for k in 0..4 {
            w.write(&row(k * 10, k as f64, 0)).unwrap();
        }
        assert!(w.write(&row(30, 0.0, 0)).is_err());
    }
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("env_steps,train_loss,eval_metric,eval_std,epsilon,wall_seconds,seed\n"));
    assert!(!text.contains('\r'));
    let rows = read_metrics(&path).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].train_loss.is_nan());

    // A file cut right after any complete line still parses.
    let lines: Vec<&str> = text.lines().collect();
    for k in 1..=lines.len() {
        let p = dir.path().join(format!("prefix{k}.csv"));
        std::fs::write(&p, lines[..k].join("\n") + "\n").unwrap();
        assert_eq!(read_metrics(&p).unwrap().len(), k - 1);
    }

    truncate_metrics(&path, 15).unwrap();
    assert_eq!(read_metrics(&path).unwrap().len(), 2);
    let mut w = MetricsWriter::append(&path).unwrap();
    w.write(&row(20, 9.0, 0)).unwrap();
    assert_eq!(read_metrics(&path).unwrap().last().unwrap().eval_metric, 9.0);
}

#[test]
fn malformed_metrics_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(
        &path,
        "env_steps,train_loss,eval_metric,eval_std,epsilon,wall_seconds,seed\n0,NaN,0.5,0,1,0,0\n10,x,0.5,0,1,0,0\n",
    )
    .unwrap();
    match read_metrics(&path).unwrap_err() {
        Error::Parse { line, .. } => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn aggregate_aligns_rows_by_position() {
    let a = vec![row(0, 0.2, 0), row(10_003, 0.4, 0)];
    let b = vec![row(0, 0.4, 1), row(10_001, 0.8, 1), row(20_000, 1.0, 1)];
    let agg = aggregate(&[a, b], 10_000);
    assert_eq!(agg.len(), 2);
    assert_eq!(agg[1].env_steps, 10_000);
    assert!((agg[1].mean - 0.6).abs() < 1e-15);
    assert!((agg[1].std - 0.2).abs() < 1e-15);
    assert_eq!(agg[1].n_seeds, 2);
}

fn tiny_config(out: &std::path::Path) -> TrainConfig {
    let mut cfg = TrainConfig::default();
    cfg.env.gather.n_agents = 3;
    cfg.algo.name = Algorithm::TigerMix;
    cfg.algo.agent_hidden = 8;
    cfg.algo.gat_dim = 4;
    cfg.algo.time_dim = 3;
    cfg.algo.attn_dim = 4;
    cfg.algo.embed_dim = 4;
    cfg.train.batch_size = 4;
    cfg.train.buffer_capacity = 16;
    cfg.train.total_env_steps = 120;
    cfg.train.seeds = vec![3];
    cfg.eval.interval = 50;
    cfg.eval.episodes = 4;
    cfg.io.out_dir = out.to_path_buf();
    cfg.io.checkpoint_interval = 60;
    cfg
}

#[test]
fn checkpoint_bytes_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let mut tr = Trainer::new(cfg.learner_config(), cfg.env_spec(), 3).unwrap();
    while tr.train_steps < 3 {
        tr.run_episode().unwrap();
    }
    let ck = Checkpoint::capture(&cfg, &tr);
    let bytes = ck.to_bytes();
    assert_eq!(&bytes[..4], b"TGRC");
    let loaded = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(loaded.to_bytes(), bytes);
    let (cfg2, tr2) = loaded.restore().unwrap();
    assert_eq!(cfg2, cfg);
    assert_eq!(Checkpoint::capture(&cfg2, &tr2).to_bytes(), bytes);
    assert_eq!(tr2.model.online, tr.model.online);
    assert_eq!(tr2.model.adam, tr.model.adam);
    assert_eq!(tr2.buffer, tr.buffer);

    assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(Checkpoint::from_bytes(&bad), Err(Error::Checkpoint(_))));
}

fn bit_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

#[test]
fn resume_matches_uninterrupted_run() {
    let full_dir = tempfile::tempdir().unwrap();
    let cut_dir = tempfile::tempdir().unwrap();
    let full = tiny_config(full_dir.path());
    super::run_train(&full, false).unwrap();

    let cut = tiny_config(cut_dir.path());
    let report = super::commands::train_seed_until(&cut, 3, false, Some(60)).unwrap();
    let halted = report.rows.last().unwrap().env_steps;
    assert!(halted < 120);
    // Simulate a crash that left a row past the checkpoint.
    let extra = row(10_000, 0.0, 3);
    MetricsWriter::append(&metrics_path(cut_dir.path(), 3)).unwrap().write(&extra).unwrap();
    super::run_train(&cut, true).unwrap();

    let blocks = |d: &std::path::Path| Checkpoint::load(&d.join("checkpoint_seed3.bin")).unwrap().blocks;
    let (a, b) = (blocks(full_dir.path()), blocks(cut_dir.path()));
    assert!(a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.0 == y.0 && bit_eq(&x.1, &y.1)));
    for name in ["metrics_seed3.csv", "aggregate.csv"] {
        let a = std::fs::read(full_dir.path().join(name)).unwrap();
        let b = std::fs::read(cut_dir.path().join(name)).unwrap();
        assert!(a == b, "{name} differs");
    }
}

#[test]
fn grids_and_presets() {
    let base = TrainConfig::default();
    assert_eq!(expand_grid(&base, &study_preset(1).unwrap()).unwrap().len(), 3);
    assert_eq!(expand_grid(&base, &study_preset(4).unwrap()).unwrap().len(), 9);
    let cells = expand_grid(&base, &study_preset(2).unwrap()).unwrap();
    assert_eq!(cells[2].1.graph_params().k_past_self, 4);
    assert!(matches!(expand_grid(&base, &[]), Err(Error::Config(_))));
    assert!(matches!(expand_grid(&base, &[Axis::KPastNbr(vec![])]), Err(Error::Config(_))));
    assert!(study_preset(5).is_err());
    assert_eq!(Axis::parse("k_past_self=0,log-rule").unwrap(), Axis::KPastSelf(vec![PastSelf::Steps(0), PastSelf::Rule(super::config::LogRule::LogRule)]));
    assert!(Axis::parse("k_past_self=x").is_err());
    assert!(expand_grid(&base, &[Axis::parse("k_stat_nbr=1.5").unwrap()]).is_err());
}

#[test]
fn ablation_table_shows_mean_and_std() {
    let cells = vec![
        AblationCell { label: "k_stat_nbr=0.1".into(), mean: 0.5, std: 0.1 },
        AblationCell { label: "k_stat_nbr=0.5".into(), mean: 0.75, std: 0.05 },
    ];
    let table = render_ablation(&study_preset(1).unwrap(), &cells);
    assert!(table.contains("0.750 (0.050) *"), "{table}");
    assert!(table.contains("best: k_stat_nbr=0.5 = 0.750 (0.050)"), "{table}");
}
