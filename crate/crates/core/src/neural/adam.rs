use super::NetworkParams;

/// Bias-corrected Adam. Steps descend on the supplied gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self { m: vec![0.0; n_params], v: vec![0.0; n_params], step: 0, lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn for_params(params: &NetworkParams, lr: f64) -> Self {
        Self::new(params.len(), lr)
    }

    /// Updates `params` in place: `p -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len(), "adam: parameter shape mismatch");
        assert_eq!(grads.len(), self.m.len(), "adam: gradient shape mismatch");
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }

    pub fn adam_step(&mut self, params: &mut NetworkParams, grads: &NetworkParams) {
        self.update(params.as_mut_slice(), grads.as_slice());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut a = AdamState::new(2, 1e-3);
        a.m = vec![1.0, -2.0];
        a.v = vec![4.0, 1.0];
        a.step = 3;
        let mut p = vec![0.5, 0.25];
        let before = p.clone();
        a.update(&mut p, &[0.0, 0.0]);
        assert_eq!(a.m, vec![0.9, -1.8]);
        assert!((a.v[0] - 3.996).abs() < 1e-15);
        // moments still nonzero, so params move slightly
        assert_ne!(p, before);

        let mut fresh = AdamState::new(2, 1e-3);
        let mut q = vec![0.5, 0.25];
        fresh.update(&mut q, &[0.0, 0.0]);
        assert_eq!(q, vec![0.5, 0.25]);
        assert_eq!(fresh.m, vec![0.0, 0.0]);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut a = AdamState::new(3, 3e-4);
        let mut p = vec![0.0; 3];
        a.update(&mut p, &[2.0, -0.5, 1e-3]);
        for (x, s) in p.iter().zip([-1.0, 1.0, -1.0]) {
            assert!((x - s * 3e-4).abs() < 1e-8, "{x}");
        }
    }

    #[test]
    fn two_step_hand_trace() {
        // one parameter, gradient 1.0 then 1.0, lr 0.1
        // t=1: m=0.1 v=0.001 m_hat=1 v_hat=1 -> p = -0.1/(1+1e-8)
        // t=2: m=0.19 v=0.001999 m_hat=0.19/0.19=1 v_hat=0.001999/0.001999=1 -> p -= 0.1/(1+1e-8)
        let mut a = AdamState::new(1, 0.1);
        let mut p = vec![0.0];
        a.update(&mut p, &[1.0]);
        assert!((p[0] + 0.1 / (1.0 + 1e-8)).abs() < 1e-15);
        a.update(&mut p, &[1.0]);
        assert!((a.m[0] - 0.19).abs() < 1e-15);
        assert!((a.v[0] - 0.001999).abs() < 1e-15);
        assert!((p[0] + 0.2 / (1.0 + 1e-8)).abs() < 1e-12);
        assert_eq!(a.step, 2);
    }
}
