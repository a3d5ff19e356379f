//! Flat `key = value` run configuration.
//!
//! Every key has a default and unknown keys are rejected. The resolved
//! config is written into each run directory as `config.toml`.

use std::env;
use std::fs;
use std::path::{Path, PathBuf};

use airpid::metrics::Aggregate;
use airpid::planner::{Clearance, CostMode, DEFAULT_HALF_EXTENT};
use airpid::ppo::PpoHyperparams;
use airpid::{Aabb, GainBounds, Gains, SimConfig, Vec3};
use serde::{Deserialize, Serialize};

use crate::error::AppError;

pub const OUT_ENV: &str = "AIRPID_OUT";
pub const SNAPSHOT_NAME: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,

    // simulator
    pub dt: f64,
    pub tau_v: f64,
    pub workspace_min: [f64; 3],
    pub workspace_max: [f64; 3],
    pub settle_tolerance: f64,
    pub hold_steps: u32,
    pub episode_cap: u32,
    pub wind: [f64; 3],
    pub step_penalty: f64,
    pub fault_penalty: f64,
    pub max_command_speed: f64,
    pub reward_exponent_cap: f64,

    // ppo
    pub clip_epsilon: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub c1: f64,
    pub c2: f64,
    pub horizon: usize,
    pub epochs: usize,
    pub minibatch: usize,
    pub total_timesteps: usize,
    pub lr: f64,
    pub reward_scale: f64,
    pub log_std_init: f64,
    pub max_grad_norm: f64,

    // gains
    pub kp_max: f64,
    pub ki_max: f64,
    pub kd_max: f64,
    pub baseline_kp: f64,
    pub baseline_ki: f64,
    pub baseline_kd: f64,

    // evaluation
    pub eval_episodes: usize,
    /// Truncated legs at least this long count as failures; shorter ones are
    /// left out of the success rate.
    pub eval_leg_timeout: u32,
    pub aggregate: Aggregate,

    // planner
    pub plan_resolution: f64,
    pub plan_half_extent: [f64; 3],
    pub plan_cost: CostMode,
    pub plan_clearance: Clearance,
    pub setpoint_rate: f64,
    /// Seconds simulated after the last setpoint when following a plan.
    pub follow_extra_time: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sim = SimConfig::default();
        let hp = PpoHyperparams::default();
        let b = GainBounds::default();
        Self {
            seed: 0,
            out_dir: PathBuf::from("runs/default"),
            dt: sim.dt,
            tau_v: sim.tau_v,
            workspace_min: sim.workspace.min.to_array(),
            workspace_max: sim.workspace.max.to_array(),
            settle_tolerance: sim.settle_tolerance,
            hold_steps: sim.hold_steps,
            episode_cap: sim.episode_cap,
            wind: sim.wind.to_array(),
            step_penalty: sim.step_penalty,
            fault_penalty: sim.fault_penalty,
            max_command_speed: sim.max_command_speed,
            reward_exponent_cap: sim.reward_exponent_cap,
            clip_epsilon: hp.clip_epsilon,
            gamma: hp.gamma,
            gae_lambda: hp.gae_lambda,
            c1: hp.c1,
            c2: hp.c2,
            horizon: hp.horizon,
            epochs: hp.epochs,
            minibatch: hp.minibatch,
            total_timesteps: hp.total_timesteps,
            lr: hp.lr,
            reward_scale: hp.reward_scale,
            log_std_init: hp.log_std_init,
            max_grad_norm: hp.max_grad_norm,
            kp_max: b.kp_max,
            ki_max: b.ki_max,
            kd_max: b.kd_max,
            baseline_kp: 4.0,
            baseline_ki: 0.5,
            baseline_kd: 0.0,
            eval_episodes: 20,
            eval_leg_timeout: 500,
            aggregate: Aggregate::Median,
            plan_resolution: 0.25,
            plan_half_extent: DEFAULT_HALF_EXTENT.to_array(),
            plan_cost: CostMode::default(),
            plan_clearance: Clearance::default(),
            setpoint_rate: 1.0,
            follow_extra_time: 20.0,
        }
    }
}

fn positive(key: &str, v: f64) -> Result<(), AppError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(AppError::Config(format!("key `{key}`: must be a finite number > 0, got {v}")))
    }
}

fn finite(key: &str, v: &[f64]) -> Result<(), AppError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(AppError::Config(format!("key `{key}`: must be finite")))
    }
}

fn nonzero(key: &str, v: usize) -> Result<(), AppError> {
    if v > 0 {
        Ok(())
    } else {
        Err(AppError::Config(format!("key `{key}`: must be >= 1")))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, AppError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| AppError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults when `path` is `None`; a missing file is a config error.
    pub fn load(path: Option<&Path>) -> Result<Self, AppError> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| AppError::Config(format!("cannot read {}: {e}", p.display())))?;
                Self::parse(&text).map_err(|e| match e {
                    AppError::Config(msg) => AppError::Config(format!("{}: {msg}", p.display())),
                    other => other,
                })
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    pub fn validate(&self) -> Result<(), AppError> {
        positive("dt", self.dt)?;
        positive("tau_v", self.tau_v)?;
        positive("settle_tolerance", self.settle_tolerance)?;
        positive("max_command_speed", self.max_command_speed)?;
        positive("reward_exponent_cap", self.reward_exponent_cap)?;
        finite("workspace_min", &self.workspace_min)?;
        finite("workspace_max", &self.workspace_max)?;
        finite("wind", &self.wind)?;
        finite("step_penalty", &[self.step_penalty])?;
        finite("fault_penalty", &[self.fault_penalty])?;
        for i in 0..3 {
            if self.workspace_max[i] <= self.workspace_min[i] {
                return Err(AppError::Config(format!(
                    "keys `workspace_min`/`workspace_max`: axis {i} is empty ({} >= {})",
                    self.workspace_min[i], self.workspace_max[i]
                )));
            }
        }
        if self.hold_steps < 1 {
            return Err(AppError::Config("key `hold_steps`: must be >= 1".into()));
        }
        if self.episode_cap <= self.hold_steps {
            return Err(AppError::Config(format!(
                "key `episode_cap`: must exceed hold_steps ({} <= {})",
                self.episode_cap, self.hold_steps
            )));
        }
        if !(self.clip_epsilon.is_finite() && self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(AppError::Config(format!("key `clip_epsilon`: must lie in (0, 1), got {}", self.clip_epsilon)));
        }
        for (key, v) in [("gamma", self.gamma), ("gae_lambda", self.gae_lambda)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(AppError::Config(format!("key `{key}`: must lie in [0, 1], got {v}")));
            }
        }
        for (key, v) in [("c1", self.c1), ("c2", self.c2), ("max_grad_norm", self.max_grad_norm)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(AppError::Config(format!("key `{key}`: must be >= 0, got {v}")));
            }
        }
        nonzero("horizon", self.horizon)?;
        nonzero("epochs", self.epochs)?;
        nonzero("minibatch", self.minibatch)?;
        nonzero("total_timesteps", self.total_timesteps)?;
        positive("lr", self.lr)?;
        positive("reward_scale", self.reward_scale)?;
        finite("log_std_init", &[self.log_std_init])?;
        positive("kp_max", self.kp_max)?;
        positive("ki_max", self.ki_max)?;
        positive("kd_max", self.kd_max)?;
        for (key, v) in [("baseline_kp", self.baseline_kp), ("baseline_ki", self.baseline_ki), ("baseline_kd", self.baseline_kd)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(AppError::Config(format!("key `{key}`: must be >= 0, got {v}")));
            }
        }
        nonzero("eval_episodes", self.eval_episodes)?;
        positive("plan_resolution", self.plan_resolution)?;
        if !self.plan_half_extent.iter().all(|x| x.is_finite() && *x >= 0.0) {
            return Err(AppError::Config("key `plan_half_extent`: must be finite and >= 0".into()));
        }
        positive("setpoint_rate", self.setpoint_rate)?;
        if !(self.follow_extra_time.is_finite() && self.follow_extra_time >= 0.0) {
            return Err(AppError::Config("key `follow_extra_time`: must be >= 0".into()));
        }
        // backstop for anything the core checks that is not covered above
        self.sim().validate().map_err(|e| AppError::Config(e.to_string()))?;
        self.ppo().validate().map_err(|e| AppError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn workspace(&self) -> Aabb {
        Aabb::new(Vec3::from_array(self.workspace_min), Vec3::from_array(self.workspace_max))
    }

    pub fn sim(&self) -> SimConfig {
        SimConfig {
            dt: self.dt,
            tau_v: self.tau_v,
            workspace: self.workspace(),
            settle_tolerance: self.settle_tolerance,
            hold_steps: self.hold_steps,
            episode_cap: self.episode_cap,
            seed: self.seed,
            wind: Vec3::from_array(self.wind),
            step_penalty: self.step_penalty,
            fault_penalty: self.fault_penalty,
            max_command_speed: self.max_command_speed,
            reward_exponent_cap: self.reward_exponent_cap,
        }
    }

    pub fn ppo(&self) -> PpoHyperparams {
        PpoHyperparams {
            clip_epsilon: self.clip_epsilon,
            gamma: self.gamma,
            gae_lambda: self.gae_lambda,
            c1: self.c1,
            c2: self.c2,
            horizon: self.horizon,
            epochs: self.epochs,
            minibatch: self.minibatch,
            total_timesteps: self.total_timesteps,
            lr: self.lr,
            seed: self.seed,
            reward_scale: self.reward_scale,
            log_std_init: self.log_std_init,
            max_grad_norm: self.max_grad_norm,
        }
    }

    pub fn bounds(&self) -> GainBounds {
        GainBounds { kp_max: self.kp_max, ki_max: self.ki_max, kd_max: self.kd_max }
    }

    pub fn baseline(&self) -> Gains {
        Gains::new(self.baseline_kp, self.baseline_ki, self.baseline_kd)
    }

    /// Output directory: the `--out` flag, then `AIRPID_OUT`, then `out_dir`.
    pub fn resolve_out(&mut self, flag: Option<&Path>) {
        if let Some(p) = flag {
            self.out_dir = p.to_path_buf();
        } else if let Some(p) = env::var_os(OUT_ENV).filter(|p| !p.is_empty()) {
            self.out_dir = PathBuf::from(p);
        }
    }

    /// Creates the output directory and writes the config snapshot into it.
    pub fn prepare_out_dir(&self) -> Result<PathBuf, AppError> {
        let dir = self.out_dir.clone();
        fs::create_dir_all(&dir).map_err(AppError::io(&dir))?;
        let snap = dir.join(SNAPSHOT_NAME);
        fs::write(&snap, self.to_toml()).map_err(AppError::io(&snap))?;
        Ok(dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_snapshot() {
        let cfg = RunConfig { gae_lambda: 0.95, seed: 17, ..Default::default() };
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn empty_file_means_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::parse("learning_rate = 0.1").unwrap_err().to_string();
        assert!(err.contains("learning_rate"), "{err}");
    }

    #[test]
    fn invalid_value_is_named() {
        let err = RunConfig::parse("tau_v = -1.0").unwrap_err().to_string();
        assert!(err.contains("tau_v"), "{err}");
        let err = RunConfig::parse("episode_cap = 10").unwrap_err().to_string();
        assert!(err.contains("episode_cap"), "{err}");
        let err = RunConfig::parse("plan_cost = \"manhattan\"").unwrap_err().to_string();
        assert!(err.contains("plan_cost"), "{err}");
    }

    #[test]
    fn default_config_matches_library_defaults() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.ppo(), PpoHyperparams::default());
        assert_eq!(cfg.sim(), SimConfig::default());
        assert_eq!(cfg.bounds(), GainBounds::default());
    }
}
