use crate::exec::Exec;
use crate::neural::{self, backward, forward, NetworkParams, OutputGrads, ACT_DIM, OBS_DIM};

/// Per-sample terms of the clipped objective: `min(r A, clip(r, 1-ε, 1+ε) A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon) * advantage;
    unclipped.min(clipped)
}

pub fn value_loss(pred: &[f64], target: &[f64]) -> f64 {
    assert_eq!(pred.len(), target.len());
    if pred.is_empty() {
        return 0.0;
    }
    pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64
}

/// Objective to maximize; the optimizer minimizes its negation.
pub fn combined_objective(surrogate: f64, vloss: f64, entropy: f64, c1: f64, c2: f64) -> f64 {
    surrogate - c1 * vloss + c2 * entropy
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCoeffs {
    pub epsilon: f64,
    pub c1: f64,
    pub c2: f64,
}

/// One training sample as seen by the loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub obs: [f64; OBS_DIM],
    pub raw_action: [f64; ACT_DIM],
    pub old_log_prob: f64,
    pub advantage: f64,
    pub value_target: f64,
}

/// Minibatch means of the objective terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossStats {
    pub surrogate: f64,
    pub unclipped_surrogate: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub objective: f64,
    pub clip_fraction: f64,
    pub mean_ratio: f64,
}

impl LossStats {
    pub fn is_finite(&self) -> bool {
        [self.surrogate, self.value_loss, self.entropy, self.objective, self.mean_ratio]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Default)]
struct Partial {
    surrogate: f64,
    unclipped: f64,
    value_loss: f64,
    entropy: f64,
    clipped: usize,
    ratio: f64,
}

impl Partial {
    fn add(&mut self, o: &Partial) {
        self.surrogate += o.surrogate;
        self.unclipped += o.unclipped;
        self.value_loss += o.value_loss;
        self.entropy += o.entropy;
        self.clipped += o.clipped;
        self.ratio += o.ratio;
    }
}

// Samples per gradient chunk. Fixed so that the chunk partition, and hence
// the floating-point summation order, does not depend on the thread count.
const CHUNK: usize = 16;

fn chunk_pass(params: &NetworkParams, chunk: &[Sample], n_total: f64, k: &LossCoeffs, grads: Option<&mut NetworkParams>) -> Partial {
    let mut p = Partial::default();
    let mut grads = grads;
    for s in chunk {
        let out = forward(params, &s.obs);
        let lp = neural::log_prob(&s.raw_action, &out.mean, &out.log_std);
        let ratio = (lp - s.old_log_prob).exp();
        let unclipped = ratio * s.advantage;
        let surr = clipped_surrogate(ratio, s.advantage, k.epsilon);
        let ent = neural::entropy(&out.log_std);
        let verr = out.value - s.value_target;
        p.surrogate += surr;
        p.unclipped += unclipped;
        p.value_loss += verr * verr;
        p.entropy += ent;
        p.ratio += ratio;
        if (ratio - 1.0).abs() > k.epsilon {
            p.clipped += 1;
        }
        if let Some(g) = grads.as_deref_mut() {
            // d surr / d log_prob: r A on the unclipped branch, 0 when clipping wins
            let dsurr_dlp = if unclipped <= surr { unclipped } else { 0.0 };
            let mut up = OutputGrads::default();
            for j in 0..ACT_DIM {
                let var = (2.0 * out.log_std[j]).exp();
                let diff = s.raw_action[j] - out.mean[j];
                let dlp_dmean = diff / var;
                let dlp_dlogstd = diff * diff / var - 1.0;
                up.mean[j] = -dsurr_dlp * dlp_dmean / n_total;
                up.log_std[j] = -(dsurr_dlp * dlp_dlogstd + k.c2) / n_total;
            }
            up.value = k.c1 * 2.0 * verr / n_total;
            backward(params, &out.trace, &up, g);
        }
    }
    p
}

fn finish(p: Partial, n: f64, k: &LossCoeffs, count: usize) -> LossStats {
    let surrogate = p.surrogate / n;
    let value_loss = p.value_loss / n;
    let entropy = p.entropy / n;
    LossStats {
        surrogate,
        unclipped_surrogate: p.unclipped / n,
        value_loss,
        entropy,
        objective: combined_objective(surrogate, value_loss, entropy, k.c1, k.c2),
        clip_fraction: p.clipped as f64 / count.max(1) as f64,
        mean_ratio: p.ratio / n,
    }
}

/// Objective terms on a minibatch without gradients.
pub fn minibatch_stats(params: &NetworkParams, samples: &[Sample], k: &LossCoeffs) -> LossStats {
    let n = samples.len().max(1) as f64;
    finish(chunk_pass(params, samples, n, k, None), n, k, samples.len())
}

/// The negated objective; the quantity the optimizer minimizes.
pub fn minibatch_loss(params: &NetworkParams, samples: &[Sample], k: &LossCoeffs) -> f64 {
    -minibatch_stats(params, samples, k).objective
}

/// Objective terms and the gradient of the negated objective.
///
/// The batch is split into fixed chunks evaluated by `exec`; chunk gradients
/// are summed in chunk order, so every strategy yields the same bits.
pub fn minibatch_loss_and_grad(params: &NetworkParams, samples: &[Sample], k: &LossCoeffs, exec: Exec) -> (LossStats, NetworkParams) {
    let n = samples.len().max(1) as f64;
    let parts = exec.map_chunks(samples, CHUNK, |chunk| {
        let mut g = NetworkParams::zeros();
        let p = chunk_pass(params, chunk, n, k, Some(&mut g));
        (p, g)
    });
    let mut total = Partial::default();
    let mut grad = NetworkParams::zeros();
    for (p, g) in &parts {
        total.add(p);
        grad.add_scaled(g, 1.0);
    }
    (finish(total, n, k, samples.len()), grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surrogate_examples() {
        assert_eq!(clipped_surrogate(1.0, 0.7, 0.2), 0.7);
        assert_eq!(clipped_surrogate(1.5, 1.0, 0.2), 1.2);
        assert!((clipped_surrogate(0.5, -1.0, 0.2) - (-0.8)).abs() < 1e-15);
    }

    #[test]
    fn value_loss_examples() {
        assert_eq!(value_loss(&[2.0], &[2.0]), 0.0);
        assert_eq!(value_loss(&[1.0], &[3.0]), 4.0);
        assert_eq!(value_loss(&[0.0, 0.0], &[1.0, -1.0]), 1.0);
    }

    #[test]
    fn objective_examples() {
        assert_eq!(combined_objective(0.3, 5.0, 7.0, 0.0, 0.0), 0.3);
        let j = combined_objective(1.0, 4.0, 4.256815, 0.5, 0.01);
        assert!((j - (-0.9574318)).abs() < 1e-7);
    }
}
