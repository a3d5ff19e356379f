use crate::neural::{ACT_DIM, OBS_DIM};

/// Transitions gathered by one rollout.
///
/// `done[t]` marks the last step of an episode. Rewards are stored already
/// divided by the reward scale; a truncated step additionally carries the
/// discounted critic estimate of the state it was cut off in.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBuffer {
    pub obs: Vec<[f64; OBS_DIM]>,
    pub raw_actions: Vec<[f64; ACT_DIM]>,
    pub old_log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    /// Unscaled environment rewards, for logging.
    pub raw_rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            obs: Vec::with_capacity(n),
            raw_actions: Vec::with_capacity(n),
            old_log_probs: Vec::with_capacity(n),
            rewards: Vec::with_capacity(n),
            raw_rewards: Vec::with_capacity(n),
            values: Vec::with_capacity(n),
            dones: Vec::with_capacity(n),
            advantages: Vec::new(),
            returns: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        obs: [f64; OBS_DIM],
        raw_action: [f64; ACT_DIM],
        old_log_prob: f64,
        reward: f64,
        raw_reward: f64,
        value: f64,
        done: bool,
    ) {
        self.obs.push(obs);
        self.raw_actions.push(raw_action);
        self.old_log_probs.push(old_log_prob);
        self.rewards.push(reward);
        self.raw_rewards.push(raw_reward);
        self.values.push(value);
        self.dones.push(done);
    }

    /// Fills advantages (normalized) and value targets (unnormalized).
    pub fn finalize(&mut self, gamma: f64, lambda: f64, last_value: f64) {
        let (adv, ret) = compute_gae(&self.rewards, &self.values, &self.dones, last_value, gamma, lambda);
        self.returns = ret;
        self.advantages = adv;
        normalize_advantages(&mut self.advantages);
    }

    pub fn is_finalized(&self) -> bool {
        self.advantages.len() == self.len() && self.returns.len() == self.len()
    }
}

/// Generalized advantage estimation. Returns `(advantages, value_targets)`
/// before any normalization.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert!(values.len() == n && dones.len() == n, "rollout arrays differ in length");
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 < n { values[t + 1] } else { last_value };
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
    }
    let targets = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, targets)
}

/// Shifts to zero mean and scales to unit (population) standard deviation.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = var.sqrt() + 1e-8;
    for a in adv.iter_mut() {
        *a = (*a - mean) / std;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_terminal_step() {
        let (a, t) = compute_gae(&[1.0], &[0.0], &[true], 123.0, 0.99, 0.95);
        assert_eq!(a, vec![1.0]);
        assert_eq!(t, vec![1.0]);
    }

    #[test]
    fn two_step_recurrence() {
        let (a, _) = compute_gae(&[0.0, 1.0], &[0.5, 0.5], &[false, true], 0.0, 1.0, 1.0);
        assert_eq!(a, vec![0.5, 0.5]);
    }

    #[test]
    fn zero_discount_collapses() {
        let r = [0.3, -1.0, 2.0];
        let v = [0.1, 0.2, -0.4];
        let (a, _) = compute_gae(&r, &v, &[false, false, false], 9.0, 0.0, 0.95);
        for k in 0..3 {
            assert_eq!(a[k], r[k] - v[k]);
        }
    }

    #[test]
    fn bootstrap_from_last_value() {
        let (a, _) = compute_gae(&[0.0], &[0.0], &[false], 2.0, 0.5, 1.0);
        assert_eq!(a, vec![1.0]);
    }

    #[test]
    fn normalization_moments() {
        let mut a = vec![1.0, 2.0, 3.0, 4.0];
        normalize_advantages(&mut a);
        let mean: f64 = a.iter().sum::<f64>() / 4.0;
        let var: f64 = a.iter().map(|x| x * x).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-6);
    }
}
