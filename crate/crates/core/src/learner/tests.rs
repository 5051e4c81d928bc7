use super::*;
use crate::diffcore::Tape;
use crate::envs::{Env, EnvSpec, Gather, GatherConfig};
use crate::rng::seeded;

fn small_config(algorithm: Algorithm) -> LearnerConfig {
    LearnerConfig {
        algorithm,
        dims: NetDims {
            agent_hidden: 8,
            gat_dim: 4,
            time_dim: 3,
            attn_dim: 4,
            embed_dim: 4,
        },
        batch_size: 4,
        buffer_capacity: 16,
        ..Default::default()
    }
}

fn gather(n: usize) -> Gather {
    Gather::new(GatherConfig {
        n_agents: n,
        ..Default::default()
    })
    .unwrap()
}

fn model_for(env: &dyn Env, cfg: &LearnerConfig, seed: u64) -> Model {
    Model::new(cfg, env.n_agents(), env.obs_dim(), env.state_dim(), env.n_actions(), &mut seeded(seed)).unwrap()
}

#[test]
fn epsilon_schedule_points() {
    let s = Schedule::default();
    assert_eq!(epsilon_at(&s, 0), 1.0);
    assert_eq!(epsilon_at(&s, 200_000), 0.05);
    assert!((epsilon_at(&s, 100_000) - 0.525).abs() < 1e-15);
    assert_eq!(epsilon_at(&s, 10_000_000), 0.05);
    let mut prev = f64::INFINITY;
    for step in (0..250_000).step_by(5_000) {
        let e = epsilon_at(&s, step);
        assert!(e <= prev);
        prev = e;
    }
}

#[test]
fn lambda_zero_is_one_step_td() {
    let r = [1.0, -2.0, 3.0];
    let q = [0.5, 4.0, 0.0];
    let y = lambda_returns(&r, &q, 0.9, 0.0);
    for t in 0..3 {
        assert!((y[t] - (r[t] + 0.9 * q[t])).abs() < 1e-15);
    }
}

#[test]
fn lambda_one_gamma_one_is_monte_carlo() {
    let r = [1.0, -2.0, 3.0, 0.5];
    let y = td_lambda_targets(&r, &[7.0, 8.0, 9.0, 10.0], &TdLambdaConfig { gamma: 1.0, lambda: 1.0 });
    assert_eq!(y, vec![2.5, 1.5, 3.5, 0.5]);
}

#[test]
fn three_step_hand_unroll() {
    let (g, l) = (0.99, 0.8);
    let r = [1.0, 0.0, 2.0];
    let q_hat = [0.0, 3.0, 5.0];
    let y2 = 2.0;
    let y1 = 0.0 + g * ((1.0 - l) * 5.0 + l * y2);
    let y0 = 1.0 + g * ((1.0 - l) * 3.0 + l * y1);
    let y = td_lambda_targets(&r, &q_hat, &TdLambdaConfig { gamma: g, lambda: l });
    assert_eq!(y, vec![y0, y1, y2]);
}

#[test]
fn config_validation() {
    assert!(LearnerConfig::default().validate().is_ok());
    let bad = LearnerConfig {
        td: TdLambdaConfig { gamma: 1.0, lambda: 0.8 },
        ..Default::default()
    };
    assert!(bad.validate().is_err());
    let bad = LearnerConfig {
        batch_size: 64,
        buffer_capacity: 32,
        ..Default::default()
    };
    assert!(bad.validate().is_err());
}

fn dummy_episode(tag: f64) -> EpisodeBatch {
    EpisodeBatch {
        obs: vec![Tensor2::filled(1, 1, tag)],
        states: vec![vec![tag]],
        actions: vec![vec![0]],
        rewards: vec![tag],
        won: false,
    }
}

use crate::diffcore::Tensor2;

#[test]
fn buffer_is_fifo_and_samples_distinct() {
    let mut buf = ReplayBuffer::new(3);
    for k in 0..5 {
        buf.push(dummy_episode(k as f64));
    }
    assert_eq!(buf.len(), 3);
    let kept: Vec<f64> = buf.iter().map(|e| e.rewards[0]).collect();
    assert_eq!(kept, vec![2.0, 3.0, 4.0]);
    let mut rng = seeded(0);
    for _ in 0..50 {
        let mut s: Vec<f64> = buf.sample(3, &mut rng).unwrap().iter().map(|e| e.rewards[0]).collect();
        s.sort_by(f64::total_cmp);
        assert_eq!(s, vec![2.0, 3.0, 4.0]);
    }
    assert!(buf.sample(4, &mut rng).is_err());
}

#[test]
fn collect_episode_is_deterministic_and_counts_steps() {
    let cfg = small_config(Algorithm::TigerMix);
    let mut env = gather(3);
    let model = model_for(&env, &cfg, 1);
    let run = |env: &mut Gather| {
        let mut steps = 1_000;
        let ep = collect_episode(env, &model, &cfg.schedule, &mut steps, &mut seeded(9)).unwrap();
        (ep, steps)
    };
    let (a, sa) = run(&mut env);
    let (b, sb) = run(&mut env);
    assert_eq!(a, b);
    assert!(a.len() <= 8);
    assert_eq!(sa, 1_000 + a.len() as u64);
    assert_eq!(sa, sb);
}

#[test]
fn replay_reproduces_rollout_bitwise() {
    let cfg = small_config(Algorithm::TigerMix);
    let mut env = gather(4);
    let model = model_for(&env, &cfg, 2);
    let mut rng = seeded(3);
    let mut steps = 0;
    let eps: Vec<EpisodeBatch> = (0..3)
        .map(|_| collect_episode(&mut env, &model, &cfg.schedule, &mut steps, &mut rng).unwrap())
        .collect();

    // Re-run each episode alone, step by step, as the rollout does.
    let mut tape = Tape::new();
    let refs: Vec<&EpisodeBatch> = eps.iter().collect();
    let out = model.unroll(&mut tape, &model.online, &refs).unwrap();
    for (b, ep) in eps.iter().enumerate() {
        let mut single = Tape::new();
        let alone = model.unroll(&mut single, &model.online, &[ep]).unwrap();
        for t in 0..ep.len() {
            assert_eq!(out[t].graphs[b], alone[t].graphs[0]);
            let n = model.n_agents;
            for i in 0..n {
                assert_eq!(tape.value(out[t].q).row(b * n + i), single.value(alone[t].q).row(i));
            }
        }
    }
}

#[test]
fn targets_isolated_until_sync() {
    let cfg = LearnerConfig {
        target_update_interval: 3,
        ..small_config(Algorithm::Qmix)
    };
    let spec = EnvSpec::Gather(GatherConfig {
        n_agents: 3,
        ..Default::default()
    });
    let mut tr = Trainer::new(cfg, spec, 4).unwrap();
    let initial_target = tr.model.target.clone();
    while tr.train_steps < 2 {
        tr.run_episode().unwrap();
    }
    assert_eq!(tr.model.target, initial_target);
    assert_ne!(tr.model.online, initial_target);
    tr.run_episode().unwrap();
    assert_eq!(tr.train_steps, 3);
    assert_eq!(tr.model.target, tr.model.online);
}

#[test]
fn warm_up_then_update() {
    let spec = EnvSpec::Gather(GatherConfig {
        n_agents: 3,
        ..Default::default()
    });
    let mut tr = Trainer::new(small_config(Algorithm::Vdn), spec, 5).unwrap();
    let (_, first) = tr.run_episode().unwrap();
    assert_eq!(first, TrainOutcome::WarmingUp { have: 1, need: 4 });
    for _ in 0..3 {
        tr.run_episode().unwrap();
    }
    assert_eq!(tr.train_steps, 1);
}

#[test]
fn duplicate_episodes_share_loss() {
    let cfg = small_config(Algorithm::TigerMix);
    let mut env = gather(3);
    let model = model_for(&env, &cfg, 6);
    let mut steps = 0;
    let ep = collect_episode(&mut env, &model, &cfg.schedule, &mut steps, &mut seeded(7)).unwrap();
    let loss = |eps: &[&EpisodeBatch]| {
        let mut tape = Tape::new();
        let l = td_loss(&model, &mut tape, &model.online, &model.target, eps, &cfg.td).unwrap();
        tape.value(l).get(0, 0)
    };
    let one = loss(&[&ep]);
    let two = loss(&[&ep, &ep]);
    assert!((one - two).abs() < 1e-12 * one.abs().max(1.0));
}

#[test]
fn overfits_a_single_episode() {
    for algo in [Algorithm::Vdn, Algorithm::Qmix, Algorithm::TigerMix] {
        let cfg = LearnerConfig {
            batch_size: 1,
            adam: crate::diffcore::AdamConfig {
                lr: 3e-3,
                ..Default::default()
            },
            ..small_config(algo)
        };
        let spec = EnvSpec::Gather(GatherConfig {
            n_agents: 3,
            ..Default::default()
        });
        let mut tr = Trainer::new(cfg.clone(), spec, 8).unwrap();
        let mut env = gather(3);
        let mut steps = 0;
        let ep = collect_episode(&mut env, &tr.model, &cfg.schedule, &mut steps, &mut seeded(1)).unwrap();
        tr.buffer.push(ep);
        let mut losses = Vec::new();
        for _ in 0..50 {
            match tr.train_step().unwrap() {
                TrainOutcome::Updated { loss, .. } => losses.push(loss),
                other => panic!("{other:?}"),
            }
        }
        assert!(losses[..20].windows(2).all(|w| w[1] < w[0]), "{algo}: {losses:?}");
        assert!(losses[49] < 0.75 * losses[0], "{algo}: {} -> {}", losses[0], losses[49]);
    }
}

#[test]
fn evaluation_is_seeded() {
    let cfg = small_config(Algorithm::TigerMix);
    let mut env = gather(3);
    let model = model_for(&env, &cfg, 10);
    let a = evaluate(&mut env, &model, crate::envs::EvalMetric::WinRate, 8, 42).unwrap();
    let b = evaluate(&mut env, &model, crate::envs::EvalMetric::WinRate, 8, 42).unwrap();
    assert_eq!(a, b);
    assert!(a.values.iter().all(|&v| v == 0.0 || v == 1.0));
}

#[test]
fn uniform_policy_rarely_wins_with_five_agents() {
    let mut env = gather(5);
    let mut rng = seeded(11);
    let episodes = 4_000;
    let mut wins = 0;
    for _ in 0..episodes {
        env.reset(&mut rng).unwrap();
        loop {
            let acts: Vec<usize> = (0..5).map(|_| rand::Rng::random_range(&mut rng, 0..3)).collect();
            let r = env.step(&acts).unwrap();
            if r.terminated {
                wins += usize::from(env.is_win(&r.info));
                break;
            }
        }
    }
    let rate = wins as f64 / episodes as f64;
    assert!(rate < 0.1, "{rate}");
}
