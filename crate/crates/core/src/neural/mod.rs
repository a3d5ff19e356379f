//! Shared-trunk actor-critic network with hand-written backpropagation.
//!
//! ```text
//! obs(3) -> tanh(W1 obs + b1)(64) -> tanh(W2 h1 + b2)(64) -+-> Wp h2 + bp  (3 means)
//!                                                           +-> Wv h2 + bv  (value)
//! log_std(3): state-independent, clamped to [-5, 2]
//! ```
//!
//! All parameters live in one flat `f64` buffer in checkpoint order, which
//! keeps the optimizer, finite-difference checks and serialization trivial.

mod adam;
mod checkpoint;
mod gaussian;

pub use adam::AdamState;
pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointError, CHECKPOINT_MAGIC};
pub use gaussian::{entropy, log_prob, sample_action, LOG_2PI};

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::simenv::ErrorSignal;

pub const OBS_DIM: usize = 3;
pub const HIDDEN: usize = 64;
pub const ACT_DIM: usize = 3;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Fixed affine observation scaling applied before the trunk.
pub const OBS_SCALE: [f64; OBS_DIM] = [10.0, 2.0, 50.0];

const W1: usize = 0;
const B1: usize = W1 + HIDDEN * OBS_DIM;
const W2: usize = B1 + HIDDEN;
const B2: usize = W2 + HIDDEN * HIDDEN;
const WP: usize = B2 + HIDDEN;
const BP: usize = WP + ACT_DIM * HIDDEN;
const LOG_STD: usize = BP + ACT_DIM;
const WV: usize = LOG_STD + ACT_DIM;
const BV: usize = WV + HIDDEN;
pub const PARAM_COUNT: usize = BV + 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("non-finite network parameter at flat index {0}")]
    NonFiniteParameter(usize),
    #[error("parameter buffer has {got} entries, expected {expected}")]
    ShapeMismatch { got: usize, expected: usize },
}

pub fn normalize_observation(signal: &ErrorSignal) -> [f64; OBS_DIM] {
    [signal.pe / OBS_SCALE[0], signal.dpe / OBS_SCALE[1], signal.ipe / OBS_SCALE[2]]
}

/// Network parameters (or a gradient with the same shape).
///
/// Weight matrices are stored row-major as `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    data: Vec<f64>,
}

impl NetworkParams {
    pub fn zeros() -> Self {
        Self { data: vec![0.0; PARAM_COUNT] }
    }

    pub fn from_flat(data: Vec<f64>) -> Result<Self, NetworkError> {
        if data.len() != PARAM_COUNT {
            return Err(NetworkError::ShapeMismatch { got: data.len(), expected: PARAM_COUNT });
        }
        Ok(Self { data })
    }

    /// Orthogonal initialization: gain sqrt(2) for the trunk, 0.01 for the
    /// policy head, 1.0 for the value head. Biases and `log_std` start at 0.
    pub fn init<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut p = Self::zeros();
        let trunk_gain = std::f64::consts::SQRT_2;
        orthogonal_fill(&mut p.data[W1..B1], HIDDEN, OBS_DIM, trunk_gain, rng);
        orthogonal_fill(&mut p.data[W2..B2], HIDDEN, HIDDEN, trunk_gain, rng);
        orthogonal_fill(&mut p.data[WP..BP], ACT_DIM, HIDDEN, 0.01, rng);
        orthogonal_fill(&mut p.data[WV..BV], 1, HIDDEN, 1.0, rng);
        p
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn w1(&self) -> &[f64] {
        &self.data[W1..B1]
    }
    pub fn b1(&self) -> &[f64] {
        &self.data[B1..W2]
    }
    pub fn w2(&self) -> &[f64] {
        &self.data[W2..B2]
    }
    pub fn b2(&self) -> &[f64] {
        &self.data[B2..WP]
    }
    pub fn policy_weights(&self) -> &[f64] {
        &self.data[WP..BP]
    }
    pub fn policy_bias(&self) -> &[f64] {
        &self.data[BP..LOG_STD]
    }
    pub fn policy_bias_mut(&mut self) -> &mut [f64] {
        &mut self.data[BP..LOG_STD]
    }
    pub fn log_std(&self) -> &[f64] {
        &self.data[LOG_STD..WV]
    }
    pub fn log_std_mut(&mut self) -> &mut [f64] {
        &mut self.data[LOG_STD..WV]
    }
    pub fn value_weights(&self) -> &[f64] {
        &self.data[WV..BV]
    }
    pub fn value_bias(&self) -> f64 {
        self.data[BV]
    }
    pub fn set_value_bias(&mut self, b: f64) {
        self.data[BV] = b;
    }

    /// Flat index range of the two trunk layers.
    pub fn trunk_range() -> std::ops::Range<usize> {
        W1..WP
    }

    pub fn clamp_log_std(&mut self) {
        for v in self.log_std_mut() {
            *v = v.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }

    pub fn check_finite(&self) -> Result<(), NetworkError> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(NetworkError::NonFiniteParameter(i)),
            None => Ok(()),
        }
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &NetworkParams, scale: f64) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn dot(&self, other: &NetworkParams) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }
}

/// Activations cached by [`forward`] for [`backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub obs: [f64; OBS_DIM],
    pub h1: [f64; HIDDEN],
    pub h2: [f64; HIDDEN],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub mean: [f64; ACT_DIM],
    /// Clamped log standard deviations.
    pub log_std: [f64; ACT_DIM],
    pub value: f64,
    pub trace: ForwardTrace,
}

/// Upstream gradients of a scalar loss with respect to the network outputs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OutputGrads {
    pub mean: [f64; ACT_DIM],
    pub log_std: [f64; ACT_DIM],
    pub value: f64,
}

fn affine_tanh<const OUT: usize>(w: &[f64], b: &[f64], x: &[f64]) -> [f64; OUT] {
    let n_in = x.len();
    let mut out = [0.0; OUT];
    for (j, o) in out.iter_mut().enumerate() {
        let row = &w[j * n_in..(j + 1) * n_in];
        let z = b[j] + row.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>();
        *o = z.tanh();
    }
    out
}

pub fn forward(params: &NetworkParams, obs: &[f64; OBS_DIM]) -> ForwardOutput {
    let h1: [f64; HIDDEN] = affine_tanh(params.w1(), params.b1(), obs);
    let h2: [f64; HIDDEN] = affine_tanh(params.w2(), params.b2(), &h1);

    let wp = params.policy_weights();
    let bp = params.policy_bias();
    let mut mean = [0.0; ACT_DIM];
    for (k, m) in mean.iter_mut().enumerate() {
        let row = &wp[k * HIDDEN..(k + 1) * HIDDEN];
        *m = bp[k] + row.iter().zip(&h2).map(|(w, h)| w * h).sum::<f64>();
    }
    let mut log_std = [0.0; ACT_DIM];
    for (l, raw) in log_std.iter_mut().zip(params.log_std()) {
        *l = raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
    }
    let value = params.value_bias()
        + params.value_weights().iter().zip(&h2).map(|(w, h)| w * h).sum::<f64>();

    ForwardOutput { mean, log_std, value, trace: ForwardTrace { obs: *obs, h1, h2 } }
}

/// Checked variant of [`forward`] that rejects non-finite parameters.
pub fn try_forward(params: &NetworkParams, obs: &[f64; OBS_DIM]) -> Result<ForwardOutput, NetworkError> {
    params.check_finite()?;
    Ok(forward(params, obs))
}

/// Accumulates `d loss / d params` into `grads` by reverse-mode
/// differentiation through the cached trace.
pub fn backward(params: &NetworkParams, trace: &ForwardTrace, up: &OutputGrads, grads: &mut NetworkParams) {
    let g = &mut grads.data;

    // heads
    let mut dh2 = [0.0; HIDDEN];
    for k in 0..ACT_DIM {
        let dm = up.mean[k];
        if dm != 0.0 {
            let row = WP + k * HIDDEN;
            for i in 0..HIDDEN {
                g[row + i] += dm * trace.h2[i];
                dh2[i] += dm * params.data[row + i];
            }
        }
        g[BP + k] += dm;
    }
    for k in 0..ACT_DIM {
        let raw = params.data[LOG_STD + k];
        // clamp passes gradient only inside its range
        if (LOG_STD_MIN..=LOG_STD_MAX).contains(&raw) {
            g[LOG_STD + k] += up.log_std[k];
        }
    }
    if up.value != 0.0 {
        for i in 0..HIDDEN {
            g[WV + i] += up.value * trace.h2[i];
            dh2[i] += up.value * params.data[WV + i];
        }
    }
    g[BV] += up.value;

    // second trunk layer
    let mut dz2 = [0.0; HIDDEN];
    for j in 0..HIDDEN {
        dz2[j] = dh2[j] * (1.0 - trace.h2[j] * trace.h2[j]);
    }
    let mut dh1 = [0.0; HIDDEN];
    for j in 0..HIDDEN {
        let d = dz2[j];
        if d == 0.0 {
            continue;
        }
        let row = W2 + j * HIDDEN;
        for i in 0..HIDDEN {
            g[row + i] += d * trace.h1[i];
            dh1[i] += d * params.data[row + i];
        }
        g[B2 + j] += d;
    }

    // first trunk layer
    for j in 0..HIDDEN {
        let d = dh1[j] * (1.0 - trace.h1[j] * trace.h1[j]);
        if d == 0.0 {
            continue;
        }
        let row = W1 + j * OBS_DIM;
        for i in 0..OBS_DIM {
            g[row + i] += d * trace.obs[i];
        }
        g[B1 + j] += d;
    }
}

/// Fills a `rows x cols` row-major block with a scaled (semi-)orthogonal
/// matrix built by Gram-Schmidt on Gaussian vectors.
fn orthogonal_fill<R: Rng + ?Sized>(out: &mut [f64], rows: usize, cols: usize, gain: f64, rng: &mut R) {
    debug_assert_eq!(out.len(), rows * cols);
    // orthonormalize along the shorter dimension
    let (n_vec, dim) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n_vec);
    while basis.len() < n_vec {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for b in &basis {
            let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= proj * y;
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n < 1e-10 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= n);
        basis.push(v);
    }
    for r in 0..rows {
        for c in 0..cols {
            let v = if rows <= cols { basis[r][c] } else { basis[c][r] };
            out[r * cols + c] = gain * v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;

    #[test]
    fn layout_is_contiguous() {
        assert_eq!(PARAM_COUNT, 64 * 3 + 64 + 64 * 64 + 64 + 3 * 64 + 3 + 3 + 64 + 1);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let p = NetworkParams::zeros();
        let out = forward(&p, &[0.3, -1.0, 2.0]);
        assert_eq!(out.mean, [0.0; 3]);
        assert_eq!(out.value, 0.0);
        assert_eq!(out.log_std, [0.0; 3]);
    }

    #[test]
    fn bias_only_value_is_constant() {
        let mut p = NetworkParams::zeros();
        p.set_value_bias(1.75);
        for obs in [[0.0, 0.0, 0.0], [1.0, -3.0, 0.2], [-9.0, 4.0, 7.0]] {
            assert_eq!(forward(&p, &obs).value, 1.75);
        }
    }

    #[test]
    fn init_is_orthogonal_and_seeded() {
        let a = NetworkParams::init(&mut seeded_rng(5));
        let b = NetworkParams::init(&mut seeded_rng(5));
        assert_eq!(a, b);
        // W1 is 64x3: its three columns are orthonormal up to the gain.
        let w1 = a.w1();
        for c1 in 0..3 {
            for c2 in 0..3 {
                let d: f64 = (0..64).map(|r| w1[r * 3 + c1] * w1[r * 3 + c2]).sum();
                let expect = if c1 == c2 { 2.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-12, "{c1},{c2}: {d}");
            }
        }
        assert!(a.b1().iter().all(|&b| b == 0.0));
        assert!(a.log_std().iter().all(|&l| l == 0.0));
        let pw = a.policy_weights();
        let row_norm: f64 = pw[..64].iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((row_norm - 0.01).abs() < 1e-12);
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let p = NetworkParams::init(&mut seeded_rng(1));
        let out = forward(&p, &[0.1, 0.2, 0.3]);
        let mut g = NetworkParams::zeros();
        backward(&p, &out.trace, &OutputGrads::default(), &mut g);
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_input_kills_first_layer_weight_gradient() {
        let mut p = NetworkParams::zeros();
        p.set_value_bias(0.5);
        let out = forward(&p, &[0.0; 3]);
        let mut g = NetworkParams::zeros();
        let up = OutputGrads { value: 2.0 * (out.value - 3.0), ..Default::default() };
        backward(&p, &out.trace, &up, &mut g);
        assert!(g.w1().iter().all(|&v| v == 0.0));
        assert!(g.w2().iter().all(|&v| v == 0.0));
        assert_eq!(g.value_bias(), -5.0);
    }

    #[test]
    fn non_finite_params_rejected() {
        let mut p = NetworkParams::zeros();
        p.as_mut_slice()[10] = f64::NAN;
        assert_eq!(try_forward(&p, &[0.0; 3]), Err(NetworkError::NonFiniteParameter(10)));
        assert!(NetworkParams::from_flat(vec![0.0; 3]).is_err());
    }
}
