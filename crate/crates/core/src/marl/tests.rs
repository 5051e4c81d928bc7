use super::*;
use crate::rng::seeded;

fn rand_vec(n: usize, scale: f64, rng: &mut Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

fn randomize(store: &mut ParamStore, rng: &mut Rng) {
    for id in store.ids().collect::<Vec<_>>() {
        for v in store.get_mut(id).data_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
    }
}

#[test]
fn zero_params_give_zero_values() {
    let mut store = ParamStore::new();
    let net = AgentNet::new(&mut store, "agent", 4, 8, 3, 0, &mut seeded(0));
    for id in store.ids().collect::<Vec<_>>() {
        store.get_mut(id).data_mut().fill(0.0);
    }
    let (q, _) = agent_forward(&store, &net, &[1.0, 2.0, 3.0, 4.0], &net.initial_hidden(), None).unwrap();
    assert_eq!(q, vec![0.0; 3]);
    let mut rng = seeded(1);
    assert_eq!(select_actions(&[q], 0.0, &mut rng, None).unwrap(), vec![0]);
}

#[test]
fn agent_forward_is_pure_and_shared() {
    let mut store = ParamStore::new();
    let net = AgentNet::new(&mut store, "agent", 3, 8, 4, 2, &mut seeded(2));
    let h = AgentHidden {
        h1: vec![0.1; 8],
        h2: vec![-0.2; 8],
    };
    let a = agent_forward(&store, &net, &[0.5, 0.0, -1.0], &h, Some(&[0.3, 0.3])).unwrap();
    let b = agent_forward(&store, &net, &[0.5, 0.0, -1.0], &h, Some(&[0.3, 0.3])).unwrap();
    assert_eq!(a, b);

    // Two agents batched through the shared parameters.
    let mut tape = Tape::new();
    let o = tape.constant(Tensor2::from_rows(&[vec![0.5, 0.0, -1.0], vec![0.5, 0.0, -1.0]]).unwrap());
    let h1 = tape.constant(Tensor2::from_rows(&[h.h1.clone(), h.h1.clone()]).unwrap());
    let h2 = tape.constant(Tensor2::from_rows(&[h.h2.clone(), h.h2.clone()]).unwrap());
    let (_, top) = net.recurrent(&mut tape, &store, o, h1, h2).unwrap();
    let e = tape.constant(Tensor2::from_rows(&[vec![0.3, 0.3], vec![0.3, 0.3]]).unwrap());
    let q = net.q_values(&mut tape, &store, top, Some(e)).unwrap();
    assert_eq!(tape.value(q).row(0), tape.value(q).row(1));
    assert_eq!(tape.value(q).row(0), a.0.as_slice());
}

#[test]
fn embedding_changes_action_values() {
    let mut store = ParamStore::new();
    let net = AgentNet::new(&mut store, "agent", 3, 8, 4, 2, &mut seeded(3));
    let h = net.initial_hidden();
    let (a, _) = agent_forward(&store, &net, &[0.1, 0.2, 0.3], &h, Some(&[0.0, 0.0])).unwrap();
    let (b, _) = agent_forward(&store, &net, &[0.1, 0.2, 0.3], &h, Some(&[0.5, 0.0])).unwrap();
    assert_ne!(a, b);
    assert!(agent_forward(&store, &net, &[0.1, 0.2, 0.3], &h, None).is_err());
}

#[test]
fn greedy_selection_and_ties() {
    let mut rng = seeded(4);
    assert_eq!(select_actions(&[vec![1.0, 3.0, 2.0]], 0.0, &mut rng, None).unwrap(), vec![1]);
    assert_eq!(select_actions(&[vec![2.0, 2.0, 1.0]], 0.0, &mut rng, None).unwrap(), vec![0]);
    let mask = vec![vec![true, false, true]];
    assert_eq!(select_actions(&[vec![1.0, 3.0, 2.0]], 0.0, &mut rng, Some(&mask)).unwrap(), vec![2]);
    let none = vec![vec![false, false, false]];
    assert!(matches!(
        select_actions(&[vec![1.0, 3.0, 2.0]], 0.5, &mut rng, Some(&none)),
        Err(Error::Domain(_))
    ));
    assert!(select_actions(&[vec![1.0]], 1.5, &mut rng, None).is_err());
}

#[test]
fn greedy_invariant_to_positive_affine_maps() {
    let mut rng = seeded(5);
    for _ in 0..200 {
        let q = rand_vec(6, 5.0, &mut rng);
        let a = rng.random_range(0.01..10.0);
        let b = rng.random_range(-10.0..10.0);
        let t: Vec<f64> = q.iter().map(|v| a * v + b).collect();
        let mut r = seeded(0);
        assert_eq!(
            select_actions(&[q], 0.0, &mut r, None).unwrap(),
            select_actions(&[t], 0.0, &mut r, None).unwrap()
        );
    }
}

#[test]
fn full_exploration_is_uniform() {
    let mut rng = seeded(6);
    let mut counts = [0usize; 5];
    let draws = 10_000;
    for _ in 0..draws {
        let a = select_actions(&[vec![9.0, 0.0, 0.0, 0.0, 0.0]], 1.0, &mut rng, None).unwrap();
        counts[a[0]] += 1;
    }
    let expected = draws as f64 / 5.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 99.9th percentile of χ² with 4 degrees of freedom.
    assert!(chi2 < 18.467, "chi2 {chi2}, counts {counts:?}");
}

#[test]
fn vdn_sum_and_unit_gradient() {
    assert_eq!(vdn_mix(&[1.0, 2.0, 3.0]), 6.0);
    assert_eq!(vdn_mix(&[0.0; 4]), 0.0);
    let mut store = ParamStore::new();
    let q = store.add("q", Tensor2::from_rows(&[vec![0.3, -1.2, 4.0], vec![2.0, 0.0, -0.5]]).unwrap());
    let mut tape = Tape::new();
    let qv = tape.param(&store, q);
    let dummy = tape.constant(Tensor2::zeros(2, 1));
    let out = Mixer::Vdn.forward(&mut tape, &store, qv, dummy).unwrap();
    assert_eq!(tape.value(out).data(), &[0.3 - 1.2 + 4.0, 1.5]);
    let g = tape.backward(out, &store).unwrap();
    assert!(g.get(q).data().iter().all(|&v| v == 1.0));
}

fn random_mixer(n: usize, cond: usize, seed: u64) -> (ParamStore, QmixMixer) {
    let mut rng = seeded(seed);
    let mut store = ParamStore::new();
    let m = QmixMixer::new(&mut store, "mixer", n, cond, &mut rng);
    randomize(&mut store, &mut rng);
    (store, m)
}

#[test]
fn qmix_monotone_under_perturbation() {
    let mut rng = seeded(7);
    for trial in 0..100 {
        let (store, m) = random_mixer(4, 5, 100 + trial);
        let cond = rand_vec(5, 2.0, &mut rng);
        let q = rand_vec(4, 3.0, &mut rng);
        let base = qmix_mix(&store, &m, &q, &cond).unwrap();
        for i in 0..4 {
            let mut up = q.clone();
            up[i] += 0.1;
            assert!(qmix_mix(&store, &m, &up, &cond).unwrap() >= base - 1e-12);
            let h = 1e-6;
            let mut lo = q.clone();
            lo[i] -= h;
            let mut hi = q.clone();
            hi[i] += h;
            let fd = (qmix_mix(&store, &m, &hi, &cond).unwrap() - qmix_mix(&store, &m, &lo, &cond).unwrap()) / (2.0 * h);
            assert!(fd >= -1e-9, "trial {trial}: dQ/dq_{i} = {fd}");
        }
    }
}

#[test]
fn zero_output_weights_leave_only_bias() {
    let (mut store, m) = random_mixer(3, 2, 8);
    store.get_mut(m.hyper_w1[1].weight).data_mut().fill(0.0);
    store.get_mut(m.hyper_w1[1].bias).data_mut().fill(0.0);
    store.get_mut(m.hyper_w2[1].weight).data_mut().fill(0.0);
    store.get_mut(m.hyper_w2[1].bias).data_mut().fill(0.0);
    let cond = [0.4, -0.7];
    let a = qmix_mix(&store, &m, &[1.0, 2.0, 3.0], &cond).unwrap();
    let b = qmix_mix(&store, &m, &[-5.0, 9.0, 0.0], &cond).unwrap();
    assert_eq!(a, b);
}

#[test]
fn tiger_mix_reduces_to_padded_qmix() {
    let n = 3;
    let (store, m) = random_mixer(n, 2 + n * 4, 9);
    let state = [0.5, -0.5];
    let zeros = vec![vec![0.0; 4]; n];
    let padded: Vec<f64> = state.iter().copied().chain(std::iter::repeat_n(0.0, n * 4)).collect();
    let q = [0.2, 0.4, -0.1];
    assert_eq!(
        tiger_mix(&store, &m, &q, &state, &zeros).unwrap(),
        qmix_mix(&store, &m, &q, &padded).unwrap()
    );
    let mut moved = zeros.clone();
    moved[1][2] = 0.8;
    assert_ne!(
        tiger_mix(&store, &m, &q, &state, &moved).unwrap(),
        tiger_mix(&store, &m, &q, &state, &zeros).unwrap()
    );
    assert!(matches!(
        tiger_mix(&store, &m, &q, &state, &zeros[..2]),
        Err(Error::Domain(_))
    ));
}

#[test]
fn mixer_gradient_nonnegative_on_tape() {
    let mut rng = seeded(10);
    for trial in 0..50 {
        let (mut store, m) = random_mixer(3, 4, 200 + trial);
        let q = store.add("q", Tensor2::from_vec(2, 3, rand_vec(6, 2.0, &mut rng)).unwrap());
        let c = Tensor2::from_vec(2, 4, rand_vec(8, 2.0, &mut rng)).unwrap();
        let mut tape = Tape::new();
        let qv = tape.param(&store, q);
        let cv = tape.constant(c);
        let out = Mixer::Hyper(m).forward(&mut tape, &store, qv, cv).unwrap();
        let g = tape.backward(out, &store).unwrap();
        assert!(g.get(q).data().iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn algorithm_names_round_trip() {
    for a in [Algorithm::Vdn, Algorithm::Qmix, Algorithm::TigerMix] {
        assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
    }
    assert!("iql".parse::<Algorithm>().is_err());
}
