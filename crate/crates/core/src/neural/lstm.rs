//! A single LSTM layer: weights, forward recurrence with cached activations,
//! and backpropagation through time.
//!
//! Gate blocks are stacked in the order input, forget, candidate, output:
//!
//! ```text
//! z = W x_t + U h_{t-1} + b
//! i = σ(z_i)   f = σ(z_f)   g = tanh(z_g)   o = σ(z_o)
//! c_t = f ⊙ c_{t-1} + i ⊙ g
//! h_t = o ⊙ tanh(c_t)
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Gate weights of one layer. `w` is `4H × D`, `u` is `4H × H`, both
/// row-major; `b` has `4H` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayerWeights {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    pub b: Vec<f64>,
}

impl LstmLayerWeights {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            w: vec![0.0; 4 * hidden_dim * input_dim],
            u: vec![0.0; 4 * hidden_dim * hidden_dim],
            b: vec![0.0; 4 * hidden_dim],
        }
    }

    /// Uniform ±1/√H weights, zero biases except the forget gate at 1.
    pub fn init(input_dim: usize, hidden_dim: usize, rng: &mut impl Rng) -> Self {
        let mut l = Self::zeros(input_dim, hidden_dim);
        let a = 1.0 / (hidden_dim as f64).sqrt();
        for v in l.w.iter_mut().chain(l.u.iter_mut()) {
            *v = rng.random_range(-a..a);
        }
        l.b[hidden_dim..2 * hidden_dim].fill(1.0);
        l
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().chain(&self.u).chain(&self.b).all(|v| v.is_finite())
    }

    /// Run the recurrence over `steps` inputs of width `input_dim` stored
    /// back to back in `x`, from zero initial state.
    pub fn forward(&self, x: &[f64], steps: usize) -> LayerCache {
        let (d, h) = (self.input_dim, self.hidden_dim);
        debug_assert_eq!(x.len(), steps * d);
        let mut cache = LayerCache {
            gates: vec![0.0; steps * 4 * h],
            c: vec![0.0; steps * h],
            tanh_c: vec![0.0; steps * h],
            h: vec![0.0; steps * h],
            hidden_dim: h,
        };
        let mut z = vec![0.0; 4 * h];
        let zero = vec![0.0; h];
        for t in 0..steps {
            let xt = &x[t * d..(t + 1) * d];
            let (h_prev, c_prev): (&[f64], &[f64]) = if t == 0 {
                (&zero, &zero)
            } else {
                (&cache.h[(t - 1) * h..t * h], &cache.c[(t - 1) * h..t * h])
            };
            for r in 0..4 * h {
                z[r] = self.b[r]
                    + dot(&self.w[r * d..(r + 1) * d], xt)
                    + dot(&self.u[r * h..(r + 1) * h], h_prev);
            }
            let gates = &mut cache.gates[t * 4 * h..(t + 1) * 4 * h];
            for k in 0..h {
                gates[k] = sigmoid(z[k]);
                gates[h + k] = sigmoid(z[h + k]);
                gates[2 * h + k] = z[2 * h + k].tanh();
                gates[3 * h + k] = sigmoid(z[3 * h + k]);
            }
            let mut c_new = vec![0.0; h];
            for k in 0..h {
                c_new[k] = gates[h + k] * c_prev[k] + gates[k] * gates[2 * h + k];
            }
            for k in 0..h {
                let tc = c_new[k].tanh();
                cache.tanh_c[t * h + k] = tc;
                cache.h[t * h + k] = gates[3 * h + k] * tc;
                cache.c[t * h + k] = c_new[k];
            }
        }
        cache
    }

    /// Backpropagate `dh_out` (gradient of the loss w.r.t. each `h_t`) through
    /// the recurrence, accumulating into `grad`. Returns the gradient w.r.t.
    /// the inputs when `want_dx` is set.
    pub fn backward(
        &self,
        x: &[f64],
        cache: &LayerCache,
        dh_out: &[f64],
        grad: &mut LstmLayerWeights,
        want_dx: bool,
    ) -> Option<Vec<f64>> {
        let (d, h) = (self.input_dim, self.hidden_dim);
        let steps = cache.steps();
        let mut dx = want_dx.then(|| vec![0.0; steps * d]);
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];
        let zero = vec![0.0; h];
        for t in (0..steps).rev() {
            let gates = &cache.gates[t * 4 * h..(t + 1) * 4 * h];
            let tanh_c = &cache.tanh_c[t * h..(t + 1) * h];
            let (h_prev, c_prev): (&[f64], &[f64]) = if t == 0 {
                (&zero, &zero)
            } else {
                (&cache.h[(t - 1) * h..t * h], &cache.c[(t - 1) * h..t * h])
            };
            for k in 0..h {
                let (i, f, g, o) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
                let dh = dh_out[t * h + k] + dh_next[k];
                let d_o = dh * tanh_c[k];
                let dc = dh * o * (1.0 - tanh_c[k] * tanh_c[k]) + dc_next[k];
                let di = dc * g;
                let dg = dc * i;
                let df = dc * c_prev[k];
                dc_next[k] = dc * f;
                dz[k] = di * i * (1.0 - i);
                dz[h + k] = df * f * (1.0 - f);
                dz[2 * h + k] = dg * (1.0 - g * g);
                dz[3 * h + k] = d_o * o * (1.0 - o);
            }
            let xt = &x[t * d..(t + 1) * d];
            dh_next.fill(0.0);
            for r in 0..4 * h {
                let g = dz[r];
                if g == 0.0 {
                    continue;
                }
                grad.b[r] += g;
                axpy(g, xt, &mut grad.w[r * d..(r + 1) * d]);
                axpy(g, h_prev, &mut grad.u[r * h..(r + 1) * h]);
                axpy(g, &self.u[r * h..(r + 1) * h], &mut dh_next);
                if let Some(dx) = dx.as_mut() {
                    axpy(g, &self.w[r * d..(r + 1) * d], &mut dx[t * d..(t + 1) * d]);
                }
            }
        }
        dx
    }
}

/// Activations saved by [`LstmLayerWeights::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerCache {
    /// Post-activation gates `[i, f, g, o]` per step.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
    hidden_dim: usize,
}

impl LayerCache {
    pub fn steps(&self) -> usize {
        self.h.len() / self.hidden_dim
    }

    pub fn hidden(&self, t: usize) -> &[f64] {
        &self.h[t * self.hidden_dim..(t + 1) * self.hidden_dim]
    }
}
