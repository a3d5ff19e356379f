use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::buffer::RolloutBuffer;
use super::loss::{minibatch_loss_and_grad, LossStats, Sample};
use super::{PpoError, PpoHyperparams};
use crate::controller::{act, ControllerMode, GainBounds, Sampling};
use crate::episode::{LegRecord, LegStatus, LegTracker};
use crate::exec::Exec;
use crate::metrics::MetricParams;
use crate::neural::{self, normalize_observation, AdamState, NetworkParams};
use crate::rng::{stream_rng, STREAM_INIT, STREAM_POLICY, STREAM_SHUFFLE, STREAM_TARGETS};
use crate::simenv::{DroneEnv, SimConfig, TargetSource};

/// Side information from one rollout.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutStats {
    /// Legs that closed during the rollout, with the rollout step index at
    /// which each closed.
    pub legs: Vec<(usize, LegRecord)>,
    pub episode_lengths: Vec<u32>,
    /// Critic estimate of the state after the last step.
    pub last_value: f64,
}

/// Runs the stochastic policy for `n` steps. Episodes that end are reset in
/// place; an episode in flight at the end carries over to the next call.
#[allow(clippy::too_many_arguments)]
pub fn collect_rollout(
    env: &mut DroneEnv,
    tracker: &mut LegTracker,
    params: &NetworkParams,
    bounds: &GainBounds,
    n: usize,
    rng: &mut ChaCha8Rng,
    hp: &PpoHyperparams,
) -> Result<(RolloutBuffer, RolloutStats), PpoError> {
    let mode = ControllerMode::adaptive(params.clone());
    let mut buf = RolloutBuffer::with_capacity(n);
    let mut stats = RolloutStats::default();
    for t in 0..n {
        let before = env.state().clone();
        let signal = env.observation();
        let a = act(&mode, &signal, before.target, before.position, bounds, Sampling::Stochastic(rng))?;
        let out = env.step(a.v_cmd)?;
        let mut reward = out.reward / hp.reward_scale;
        if out.truncated {
            // cut off by the cap, not a failure: bootstrap from the critic
            let v_next = neural::forward(params, &normalize_observation(&out.observation)).value;
            reward += hp.gamma * v_next;
        }
        buf.push(
            normalize_observation(&signal),
            a.raw_action.expect("adaptive mode returns a raw action"),
            a.log_prob.expect("adaptive mode returns a log-prob"),
            reward,
            out.reward,
            a.value.expect("adaptive mode returns a value"),
            out.episode_done,
        );
        for leg in tracker.observe_step(&before, env.state(), &out) {
            stats.legs.push((t, leg));
        }
        if out.episode_done {
            stats.episode_lengths.push(env.state().episode_timestep);
            env.reset();
            tracker.begin(env.state());
        }
    }
    stats.last_value = neural::forward(params, &normalize_observation(&env.observation())).value;
    Ok((buf, stats))
}

/// A leg closed during training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainLeg {
    pub iteration: usize,
    /// Global training timestep at which the leg closed.
    pub timestep: usize,
    pub leg: LegRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// One-based.
    pub iteration: usize,
    /// Timesteps consumed so far, this iteration included.
    pub timestep: usize,
    pub rollout_steps: usize,
    /// Mean unscaled reward per step.
    pub mean_reward_raw: f64,
    pub mean_episode_length: Option<f64>,
    pub legs_closed: usize,
    pub legs_completed: usize,
    /// Mean over closed legs, unreached legs counting as 0 m/s.
    pub mean_leg_effective_speed: Option<f64>,
    /// Mean over legs that settled.
    pub settling_time_s: Option<f64>,
    /// Mean over legs with a defined overshoot.
    pub overshoot_m: Option<f64>,
    /// Minibatch means averaged over every update of the iteration.
    pub surrogate: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub epoch_clip_fractions: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub iterations: Vec<IterationRecord>,
    pub legs: Vec<TrainLeg>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn dump_minibatch(samples: &[Sample], stats: &LossStats) -> String {
    let mut s = format!("{stats:?}\nobs,raw_action,old_log_prob,advantage,value_target\n");
    for x in samples {
        s.push_str(&format!("{:?},{:?},{},{},{}\n", x.obs, x.raw_action, x.old_log_prob, x.advantage, x.value_target));
    }
    s
}

/// Stateful training loop, advanced one iteration at a time.
pub struct Trainer {
    hp: PpoHyperparams,
    bounds: GainBounds,
    exec: Exec,
    params: NetworkParams,
    adam: AdamState,
    env: DroneEnv,
    tracker: LegTracker,
    policy_rng: ChaCha8Rng,
    shuffle_rng: ChaCha8Rng,
    consumed: usize,
    iteration: usize,
}

impl Trainer {
    pub fn new(sim: SimConfig, hp: PpoHyperparams, bounds: GainBounds, exec: Exec) -> Result<Self, PpoError> {
        hp.validate()?;
        bounds.validate()?;
        let mut init_rng = stream_rng(hp.seed, STREAM_INIT);
        let mut params = NetworkParams::init(&mut init_rng);
        params.log_std_mut().fill(hp.log_std_init);
        params.clamp_log_std();
        let metric = MetricParams::from(&sim);
        let env = DroneEnv::with_targets(sim, TargetSource::Random(stream_rng(hp.seed, STREAM_TARGETS)))?;
        let mut tracker = LegTracker::new(metric);
        tracker.begin(env.state());
        Ok(Self {
            adam: AdamState::for_params(&params, hp.lr),
            policy_rng: stream_rng(hp.seed, STREAM_POLICY),
            shuffle_rng: stream_rng(hp.seed, STREAM_SHUFFLE),
            hp,
            bounds,
            exec,
            params,
            env,
            tracker,
            consumed: 0,
            iteration: 0,
        })
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn into_params(self) -> NetworkParams {
        self.params
    }

    pub fn hyperparams(&self) -> &PpoHyperparams {
        &self.hp
    }

    pub fn is_done(&self) -> bool {
        self.consumed >= self.hp.total_timesteps
    }

    /// Episodes started by the training environment so far.
    pub fn episodes_started(&self) -> u64 {
        self.env.episodes_started()
    }

    /// Rollout, advantage estimation and `epochs` passes of minibatch updates.
    pub fn step_iteration(&mut self) -> Result<(IterationRecord, Vec<TrainLeg>), PpoError> {
        let hp = &self.hp;
        let n = hp.horizon.min(hp.total_timesteps - self.consumed);
        let iteration = self.iteration + 1;
        let (mut buf, stats) =
            collect_rollout(&mut self.env, &mut self.tracker, &self.params, &self.bounds, n, &mut self.policy_rng, hp)?;
        buf.finalize(hp.gamma, hp.gae_lambda, stats.last_value);

        let samples: Vec<Sample> = (0..buf.len())
            .map(|i| Sample {
                obs: buf.obs[i],
                raw_action: buf.raw_actions[i],
                old_log_prob: buf.old_log_probs[i],
                advantage: buf.advantages[i],
                value_target: buf.returns[i],
            })
            .collect();
        let coeffs = hp.coeffs();
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut sums = LossStats::default();
        let mut updates = 0usize;
        let mut epoch_clip = Vec::with_capacity(hp.epochs);
        let mut batch = Vec::with_capacity(hp.minibatch);
        for epoch in 0..hp.epochs {
            order.shuffle(&mut self.shuffle_rng);
            let (mut clipped, mut seen) = (0.0, 0usize);
            for (mb, idx) in order.chunks(hp.minibatch).enumerate() {
                batch.clear();
                batch.extend(idx.iter().map(|&i| samples[i]));
                let (st, mut grad) = minibatch_loss_and_grad(&self.params, &batch, &coeffs, self.exec);
                if !st.is_finite() || grad.check_finite().is_err() {
                    return Err(PpoError::NonFiniteLoss { iteration, epoch, minibatch: mb, dump: dump_minibatch(&batch, &st) });
                }
                if hp.max_grad_norm > 0.0 {
                    let norm = grad.dot(&grad).sqrt();
                    if norm > hp.max_grad_norm {
                        grad.scale(hp.max_grad_norm / norm);
                    }
                }
                self.adam.adam_step(&mut self.params, &grad);
                self.params.clamp_log_std();
                sums.surrogate += st.surrogate;
                sums.value_loss += st.value_loss;
                sums.entropy += st.entropy;
                sums.clip_fraction += st.clip_fraction;
                clipped += st.clip_fraction * batch.len() as f64;
                seen += batch.len();
                updates += 1;
            }
            epoch_clip.push(clipped / seen.max(1) as f64);
        }
        self.consumed += n;
        self.iteration = iteration;

        let base = self.consumed - n;
        let legs: Vec<TrainLeg> = stats
            .legs
            .iter()
            .map(|&(t, leg)| TrainLeg { iteration, timestep: base + t + 1, leg })
            .collect();
        let u = updates.max(1) as f64;
        let record = IterationRecord {
            iteration,
            timestep: self.consumed,
            rollout_steps: n,
            mean_reward_raw: buf.raw_rewards.iter().sum::<f64>() / n as f64,
            mean_episode_length: mean(stats.episode_lengths.iter().map(|&l| f64::from(l))),
            legs_closed: legs.len(),
            legs_completed: legs.iter().filter(|l| l.leg.status == LegStatus::Completed).count(),
            mean_leg_effective_speed: mean(legs.iter().map(|l| l.leg.metrics.effective_speed)),
            settling_time_s: mean(legs.iter().filter_map(|l| l.leg.metrics.settling_time)),
            overshoot_m: mean(legs.iter().filter_map(|l| l.leg.metrics.overshoot)),
            surrogate: sums.surrogate / u,
            value_loss: sums.value_loss / u,
            entropy: sums.entropy / u,
            clip_fraction: sums.clip_fraction / u,
            epoch_clip_fractions: epoch_clip,
        };
        Ok((record, legs))
    }
}

/// Trains until `total_timesteps` are consumed. `on_iteration` sees each
/// record, the legs it closed and the updated parameters.
pub fn train<F>(
    sim: SimConfig,
    hp: PpoHyperparams,
    bounds: GainBounds,
    exec: Exec,
    mut on_iteration: F,
) -> Result<(NetworkParams, TrainReport), PpoError>
where
    F: FnMut(&IterationRecord, &[TrainLeg], &NetworkParams) -> Result<(), String>,
{
    let mut trainer = Trainer::new(sim, hp, bounds, exec)?;
    let mut report = TrainReport::default();
    while !trainer.is_done() {
        let (record, legs) = trainer.step_iteration()?;
        on_iteration(&record, &legs, trainer.params()).map_err(PpoError::Callback)?;
        report.iterations.push(record);
        report.legs.extend(legs);
    }
    Ok((trainer.into_params(), report))
}
