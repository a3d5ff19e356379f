//! Proximal policy optimization for the gain-scheduling policy.

mod buffer;
mod loss;
mod train;

pub use buffer::{compute_gae, normalize_advantages, RolloutBuffer};
pub use loss::{
    clipped_surrogate, combined_objective, minibatch_loss, minibatch_loss_and_grad, minibatch_stats, value_loss, LossCoeffs,
    LossStats, Sample,
};
pub use train::{collect_rollout, train, IterationRecord, RolloutStats, TrainLeg, TrainReport, Trainer};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::ControllerError;
use crate::simenv::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoHyperparams {
    pub clip_epsilon: f64,
    pub gamma: f64,
    /// 1.0 gives Monte Carlo advantages; the critic is then only a baseline.
    pub gae_lambda: f64,
    /// Value-loss coefficient.
    pub c1: f64,
    /// Entropy coefficient.
    pub c2: f64,
    /// Rollout length per iteration.
    pub horizon: usize,
    pub epochs: usize,
    pub minibatch: usize,
    pub total_timesteps: usize,
    pub lr: f64,
    pub seed: u64,
    /// Environment rewards are divided by this before storage.
    pub reward_scale: f64,
    /// Initial value of the state-independent policy log standard deviation.
    pub log_std_init: f64,
    /// Global gradient-norm clip applied before each Adam step; 0 disables.
    pub max_grad_norm: f64,
}

impl Default for PpoHyperparams {
    fn default() -> Self {
        Self {
            clip_epsilon: 0.2,
            gamma: 0.99,
            gae_lambda: 1.0,
            c1: 0.5,
            c2: 0.01,
            horizon: 1024,
            epochs: 10,
            minibatch: 64,
            total_timesteps: 20_000,
            lr: 3e-4,
            seed: 0,
            reward_scale: 1000.0,
            log_std_init: 0.0,
            max_grad_norm: 0.0,
        }
    }
}

impl PpoHyperparams {
    pub fn validate(&self) -> Result<(), PpoError> {
        let bad = |m: &str| Err(PpoError::InvalidConfig(m.to_string()));
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return bad("clip_epsilon must lie in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if !(self.c1 >= 0.0 && self.c2 >= 0.0 && self.c1.is_finite() && self.c2.is_finite()) {
            return bad("c1 and c2 must be >= 0");
        }
        if self.horizon == 0 || self.epochs == 0 || self.minibatch == 0 || self.total_timesteps == 0 {
            return bad("horizon, epochs, minibatch and total_timesteps must be >= 1");
        }
        if self.minibatch > self.horizon {
            return bad("minibatch must not exceed horizon");
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad("lr must be > 0");
        }
        if !(self.reward_scale.is_finite() && self.reward_scale > 0.0) {
            return bad("reward_scale must be > 0");
        }
        if !self.log_std_init.is_finite() {
            return bad("log_std_init must be finite");
        }
        if !(self.max_grad_norm.is_finite() && self.max_grad_norm >= 0.0) {
            return bad("max_grad_norm must be >= 0");
        }
        Ok(())
    }

    pub fn coeffs(&self) -> LossCoeffs {
        LossCoeffs { epsilon: self.clip_epsilon, c1: self.c1, c2: self.c2 }
    }

    /// Number of rollout/update iterations; the last rollout may be short.
    pub fn iterations(&self) -> usize {
        self.total_timesteps.div_ceil(self.horizon)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PpoError {
    #[error("invalid PPO config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error("non-finite loss at iteration {iteration}, epoch {epoch}, minibatch {minibatch}")]
    NonFiniteLoss { iteration: usize, epoch: usize, minibatch: usize, dump: String },
    #[error("iteration callback failed: {0}")]
    Callback(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iteration_arithmetic() {
        let hp = PpoHyperparams::default();
        assert_eq!(hp.iterations(), 20);
        assert_eq!(PpoHyperparams { total_timesteps: 1024, ..hp.clone() }.iterations(), 1);
        assert_eq!(PpoHyperparams { total_timesteps: 1025, ..hp }.iterations(), 2);
    }

    #[test]
    fn validation() {
        assert!(PpoHyperparams::default().validate().is_ok());
        let base = PpoHyperparams::default();
        assert!(PpoHyperparams { clip_epsilon: 1.0, ..base.clone() }.validate().is_err());
        assert!(PpoHyperparams { gamma: 0.0, ..base.clone() }.validate().is_err());
        assert!(PpoHyperparams { minibatch: 2048, ..base.clone() }.validate().is_err());
        assert!(PpoHyperparams { c2: -0.1, ..base }.validate().is_err());
    }
}
