//! Diagonal Gaussian policy distribution over raw (pre-squash) actions.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{ACT_DIM, LOG_STD_MAX, LOG_STD_MIN};

/// ln(2π)
pub const LOG_2PI: f64 = 1.837_877_066_409_345_5;

pub fn log_prob(action: &[f64; ACT_DIM], mean: &[f64; ACT_DIM], log_std: &[f64; ACT_DIM]) -> f64 {
    let mut lp = 0.0;
    for k in 0..ACT_DIM {
        let sigma = log_std[k].exp();
        let z = (action[k] - mean[k]) / sigma;
        lp += -0.5 * z * z - log_std[k] - 0.5 * LOG_2PI;
    }
    lp
}

pub fn entropy(log_std: &[f64; ACT_DIM]) -> f64 {
    log_std.iter().map(|l| l + 0.5 * (LOG_2PI + 1.0)).sum()
}

/// Draws a raw action and returns it with its log-density. `log_std` is
/// clamped to the admissible range before use.
pub fn sample_action<R: Rng + ?Sized>(
    mean: &[f64; ACT_DIM],
    log_std: &[f64; ACT_DIM],
    rng: &mut R,
) -> ([f64; ACT_DIM], f64) {
    let mut clamped = [0.0; ACT_DIM];
    let mut action = [0.0; ACT_DIM];
    for k in 0..ACT_DIM {
        clamped[k] = log_std[k].clamp(LOG_STD_MIN, LOG_STD_MAX);
        let eps: f64 = rng.sample(StandardNormal);
        action[k] = mean[k] + clamped[k].exp() * eps;
    }
    (action, log_prob(&action, mean, &clamped))
}
