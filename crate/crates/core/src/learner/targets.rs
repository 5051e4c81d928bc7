use super::TdLambdaConfig;

/// λ-returns by backward recursion:
/// `y_t = r_t + γ·[(1-λ)·next_q[t] + λ·y_{t+1}]`.
///
/// `next_q[t]` is the bootstrap value of the state after step `t`; the entry
/// for the final step also seeds `y_T`, so a terminal episode passes 0 there.
pub fn lambda_returns(rewards: &[f64], next_q: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    assert_eq!(rewards.len(), next_q.len(), "one bootstrap value per step");
    let mut out = vec![0.0; rewards.len()];
    let Some(&last) = next_q.last() else { return out };
    let mut y_next = last;
    for t in (0..rewards.len()).rev() {
        let y = rewards[t] + gamma * ((1.0 - lambda) * next_q[t] + lambda * y_next);
        out[t] = y;
        y_next = y;
    }
    out
}

/// Targets for a terminal episode given target-network values
/// `q_hat[t] = Q̂_tot(s_t, ·)` for every step; the step after the last is
/// worth zero.
pub fn td_lambda_targets(rewards: &[f64], q_hat: &[f64], cfg: &TdLambdaConfig) -> Vec<f64> {
    let n = rewards.len();
    let next_q: Vec<f64> = (0..n).map(|t| if t + 1 < n { q_hat[t + 1] } else { 0.0 }).collect();
    lambda_returns(rewards, &next_q, cfg.gamma, cfg.lambda)
}
