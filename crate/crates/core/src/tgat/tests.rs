use super::*;
use crate::diffcore::gradcheck;
use crate::rng::seeded;
use crate::tgraph::{build_temporal_neighborhood, GraphParams};
use rand::Rng as _;

const D0: usize = 4;
const DT: usize = 3;
const DH: usize = 5;
const OBS: usize = 2;

fn setup(seed: u64) -> (ParamStore, TemporalEncoder) {
    let mut rng = seeded(seed);
    let mut store = ParamStore::new();
    let time = TimeEncoder::new(&mut store, "time", DT);
    *store.get_mut(time.phase) = Tensor2::row_vector((0..DT).map(|_| rng.random_range(-1.0..1.0)).collect());
    let tgat = TgatParams::new(&mut store, "tgat", D0, DT, DH, OBS, 6, 3, &mut rng);
    (store, TemporalEncoder { time, tgat })
}

fn rand_vec(n: usize, rng: &mut Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn vec_mat(v: &[f64], m: &Tensor2) -> Vec<f64> {
    (0..m.cols()).map(|c| (0..m.rows()).map(|r| v[r] * m.get(r, c)).sum()).collect()
}

/// Scalar-loop evaluation of single-head attention over `Z`.
fn oracle_attention(store: &ParamStore, p: &TgatParams, z: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let q = vec_mat(&z[0], store.get(p.w_q));
    let keys: Vec<Vec<f64>> = z[1..].iter().map(|r| vec_mat(r, store.get(p.w_k))).collect();
    let vals: Vec<Vec<f64>> = z[1..].iter().map(|r| vec_mat(r, store.get(p.w_v))).collect();
    let logits: Vec<f64> = keys.iter().map(|k| k.iter().zip(&q).map(|(a, b)| a * b).sum()).collect();
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ex: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = ex.iter().sum();
    let alpha: Vec<f64> = ex.iter().map(|e| e / s).collect();
    let msg = (0..p.latent_dim)
        .map(|c| alpha.iter().zip(&vals).map(|(a, v)| a * v[c]).sum())
        .collect();
    (alpha, msg)
}

#[test]
fn time_encoding_matches_cosine() {
    let (store, enc) = setup(1);
    let omega = store.get(enc.time.omega).data().to_vec();
    let phase = store.get(enc.time.phase).data().to_vec();
    for dt in [0usize, 1, 7] {
        let phi = time_encode(&store, &enc.time, dt);
        for k in 0..DT {
            assert!((phi[k] - (omega[k] * dt as f64 + phase[k]).cos()).abs() < 1e-15);
        }
    }
    assert!((store.get(enc.time.omega).data()[0] - 1.0).abs() < 1e-15);
    assert!((store.get(enc.time.omega).data()[DT - 1] - 0.01).abs() < 1e-15);
}

#[test]
fn attention_matches_scalar_oracle() {
    let (store, enc) = setup(2);
    let mut rng = seeded(3);
    let self_embed = rand_vec(D0, &mut rng);
    let nbrs: Vec<(Vec<f64>, usize)> = vec![(rand_vec(D0, &mut rng), 4), (rand_vec(D0, &mut rng), 3), (rand_vec(D0, &mut rng), 4)];
    let z = build_feature_matrix(&store, &enc.time, &self_embed, &nbrs, 4).unwrap();
    assert_eq!(z.shape(), (4, D0 + DT));
    assert_eq!(&z.row(2)[D0..], time_encode(&store, &enc.time, 1).as_slice());

    let rows: Vec<Vec<f64>> = (0..z.rows()).map(|r| z.row(r).to_vec()).collect();
    let (alpha, msg) = oracle_attention(&store, &enc.tgat, &rows);
    let out = temporal_attention(&store, &enc.tgat, &z).unwrap();
    assert!((out.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    for (a, b) in out.weights.iter().zip(&alpha) {
        assert!((a - b).abs() < 1e-12);
    }
    for (a, b) in out.message.iter().zip(&msg) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn neighbour_order_does_not_change_message() {
    let (store, enc) = setup(4);
    let mut rng = seeded(5);
    let me = rand_vec(D0, &mut rng);
    let nbrs: Vec<(Vec<f64>, usize)> = (0..4).map(|k| (rand_vec(D0, &mut rng), 6 - k)).collect();
    let mut rev = nbrs.clone();
    rev.reverse();
    let a = temporal_attention(&store, &enc.tgat, &build_feature_matrix(&store, &enc.time, &me, &nbrs, 6).unwrap()).unwrap();
    let b = temporal_attention(&store, &enc.tgat, &build_feature_matrix(&store, &enc.time, &me, &rev, 6).unwrap()).unwrap();
    for (x, y) in a.message.iter().zip(&b.message) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn empty_neighbourhood_gives_zero_message() {
    let (store, enc) = setup(6);
    let z = build_feature_matrix(&store, &enc.time, &[0.3; D0], &[], 0).unwrap();
    let out = temporal_attention(&store, &enc.tgat, &z).unwrap();
    assert!(out.weights.is_empty());
    assert_eq!(out.message, vec![0.0; DH]);
}

#[test]
fn future_neighbour_rejected() {
    let (store, enc) = setup(6);
    assert!(build_feature_matrix(&store, &enc.time, &[0.0; D0], &[(vec![0.0; D0], 3)], 2).is_err());
}

#[test]
fn fuse_matches_direct_evaluation() {
    let (store, enc) = setup(7);
    let msg = [0.5, -0.2, 0.1, 0.9, -0.4];
    let obs = [1.0, -1.0];
    let x: Vec<f64> = msg.iter().chain(&obs).copied().collect();
    let l0 = &enc.tgat.fuse_in;
    let l1 = &enc.tgat.fuse_out;
    let mut h = vec_mat(&x, store.get(l0.weight));
    for (v, b) in h.iter_mut().zip(store.get(l0.bias).data()) {
        *v = (*v + b).max(0.0);
    }
    let mut y = vec_mat(&h, store.get(l1.weight));
    for (v, b) in y.iter_mut().zip(store.get(l1.bias).data()) {
        *v += b;
    }
    let out = fuse(&store, &enc.tgat, &msg, &obs).unwrap();
    for (a, b) in out.iter().zip(&y) {
        assert!((a - b).abs() < 1e-12);
    }
}

fn history(n: usize, steps: usize, rng: &mut Rng) -> NodeHistory {
    let mut h = NodeHistory::new();
    for _ in 0..steps {
        h.push(Tensor2::from_vec(n, D0, rand_vec(n * D0, rng)).unwrap());
    }
    h
}

#[test]
fn encode_all_matches_per_agent_pipeline() {
    let (store, enc) = setup(8);
    let mut rng = seeded(9);
    let n = 4;
    let t = 3;
    let hist = history(n, t + 1, &mut rng);
    let obs = Tensor2::from_vec(n, OBS, rand_vec(n * OBS, &mut rng)).unwrap();
    let graph = build_temporal_neighborhood(n, &[(0, 1), (1, 3)], t, &GraphParams::new(0.5, 2, 1).unwrap());
    let all = encode_all(&store, &enc, &graph, &hist, &obs).unwrap();
    assert_eq!(all.shape(), (n, 3));
    for i in 0..n {
        let nbrs: Vec<(Vec<f64>, usize)> = graph
            .neighborhood(i)
            .iter()
            .map(|node| (hist.get(*node).unwrap().to_vec(), node.t))
            .collect();
        let z = build_feature_matrix(&store, &enc.time, hist.at(t).unwrap().row(i), &nbrs, t).unwrap();
        let att = temporal_attention(&store, &enc.tgat, &z).unwrap();
        let h = fuse(&store, &enc.tgat, &att.message, obs.row(i)).unwrap();
        for (a, b) in all.row(i).iter().zip(&h) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn neighbour_embedding_changes_output() {
    let (mut store, enc) = setup(10);
    *store.get_mut(enc.tgat.fuse_in.bias) = Tensor2::filled(1, 6, 1.0);
    let mut rng = seeded(11);
    let n = 3;
    let mut hist = history(n, 2, &mut rng);
    let obs = Tensor2::zeros(n, OBS);
    let graph = build_temporal_neighborhood(n, &[(0, 1)], 1, &GraphParams::new(0.5, 1, 1).unwrap());
    let before = encode_all(&store, &enc, &graph, &hist, &obs).unwrap();
    let mut past = hist.at(0).unwrap().clone();
    past.row_mut(1).iter_mut().for_each(|v| *v += 0.5);
    let mut edited = NodeHistory::new();
    edited.push(past);
    edited.push(hist.at(1).unwrap().clone());
    hist = edited;
    let after = encode_all(&store, &enc, &graph, &hist, &obs).unwrap();
    assert_ne!(before.row(0), after.row(0));
    // Agent 2 is isolated and has no self history reaching agent 1.
    assert_eq!(before.row(2), after.row(2));
}

#[test]
fn missing_history_is_consistency_error() {
    let (store, enc) = setup(12);
    let mut rng = seeded(13);
    let hist = history(3, 1, &mut rng);
    let graph = build_temporal_neighborhood(3, &[(0, 1)], 2, &GraphParams::new(0.5, 1, 1).unwrap());
    let err = encode_all(&store, &enc, &graph, &hist, &Tensor2::zeros(3, OBS)).unwrap_err();
    assert!(matches!(err, Error::Consistency(_)), "{err}");
}

#[test]
fn encode_step_gradient_check() {
    let (mut store, enc) = setup(14);
    let mut rng = seeded(15);
    let n = 3;
    let t = 2;
    let hist = history(n, t, &mut rng);
    let cur = store.add("cur", Tensor2::from_vec(n, D0, rand_vec(n * D0, &mut rng)).unwrap());
    let obs = store.add("obs", Tensor2::from_vec(n, OBS, rand_vec(n * OBS, &mut rng)).unwrap());
    let graph = build_temporal_neighborhood(n, &[(0, 1), (0, 2)], t, &GraphParams::new(0.7, 1, 2).unwrap());
    let err = gradcheck::max_rel_error(&store, |s| {
        let mut tape = Tape::new();
        let c = tape.param(s, cur);
        let o = tape.param(s, obs);
        let out = enc.encode_batch(&mut tape, s, std::slice::from_ref(&graph), c, &hist, o)?;
        let sq = tape.square(out);
        Ok((tape, sq))
    });
    assert!(err < 1e-4, "relative error {err}");
}

#[test]
fn batched_encoding_matches_single_episodes_bitwise() {
    let (store, enc) = setup(16);
    let mut rng = seeded(17);
    let n = 3;
    let t = 2;
    let params = GraphParams::new(0.7, 1, 2).unwrap();
    let graphs = [
        build_temporal_neighborhood(n, &[(0, 1), (1, 2)], t, &params),
        build_temporal_neighborhood(n, &[(0, 2)], t, &params),
    ];
    let singles: Vec<(NodeHistory, Tensor2)> = (0..2)
        .map(|_| (history(n, t + 1, &mut rng), Tensor2::from_vec(n, OBS, rand_vec(n * OBS, &mut rng)).unwrap()))
        .collect();
    let mut joint = NodeHistory::new();
    for tau in 0..=t {
        joint.push(Tensor2::vcat(&[singles[0].0.at(tau).unwrap(), singles[1].0.at(tau).unwrap()]).unwrap());
    }
    let obs = Tensor2::vcat(&[&singles[0].1, &singles[1].1]).unwrap();
    let mut tape = Tape::new();
    let cur = tape.constant(joint.at(t).unwrap().clone());
    let o = tape.constant(obs);
    let out = enc.encode_batch(&mut tape, &store, &graphs, cur, &joint, o).unwrap();
    for b in 0..2 {
        let alone = encode_all(&store, &enc, &graphs[b], &singles[b].0, &singles[b].1).unwrap();
        for i in 0..n {
            assert_eq!(tape.value(out).row(b * n + i), alone.row(i));
        }
    }
}
