//! Two-layer sequence network with a per-step dense head.
//!
//! With [`Bridge::RepeatFinal`] this is the encoder-decoder: the encoder's
//! last hidden state is fed to the decoder at every step. With
//! [`Bridge::PerStep`] the second layer reads the first layer's hidden state
//! at the same step (a stacked many-to-many LSTM).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lstm::{axpy, dot, LayerCache, LstmLayerWeights};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bridge {
    RepeatFinal,
    PerStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub timesteps: usize,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub bridge: Bridge,
}

impl Hyper {
    pub fn new(input_dim: usize) -> Self {
        Self {
            timesteps: 48,
            input_dim,
            hidden_dim: 64,
            lr: 1e-3,
            batch_size: 32,
            max_epochs: 500,
            patience: 10,
            seed: 0,
            bridge: Bridge::RepeatFinal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmEncoderDecoder {
    pub encoder: LstmLayerWeights,
    pub decoder: LstmLayerWeights,
    pub dense_w: Vec<f64>,
    pub dense_b: f64,
    pub hyper: Hyper,
}

/// Output of [`LstmEncoderDecoder::forward`].
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub prediction: Vec<f64>,
    encoder: LayerCache,
    decoder_input: Vec<f64>,
    decoder: LayerCache,
}

/// Gradients with the same shapes as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub encoder: LstmLayerWeights,
    pub decoder: LstmLayerWeights,
    pub dense_w: Vec<f64>,
    pub dense_b: f64,
}

impl Gradients {
    pub fn zeros_like(net: &LstmEncoderDecoder) -> Self {
        Self {
            encoder: LstmLayerWeights::zeros(net.encoder.input_dim, net.encoder.hidden_dim),
            decoder: LstmLayerWeights::zeros(net.decoder.input_dim, net.decoder.hidden_dim),
            dense_w: vec![0.0; net.dense_w.len()],
            dense_b: 0.0,
        }
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        vec![
            &self.encoder.w,
            &self.encoder.u,
            &self.encoder.b,
            &self.decoder.w,
            &self.decoder.u,
            &self.decoder.b,
            &self.dense_w,
            std::slice::from_ref(&self.dense_b),
        ]
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            &mut self.encoder.w,
            &mut self.encoder.u,
            &mut self.encoder.b,
            &mut self.decoder.w,
            &mut self.decoder.u,
            &mut self.decoder.b,
            &mut self.dense_w,
            std::slice::from_mut(&mut self.dense_b),
        ]
    }

    /// `self += other`.
    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.slices_mut().into_iter().zip(other.slices()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|x| *x *= k);
        }
    }
}

impl LstmEncoderDecoder {
    /// Randomly initialized network (seeded by `hyper.seed`).
    pub fn new(hyper: Hyper) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        let h = hyper.hidden_dim;
        let encoder = LstmLayerWeights::init(hyper.input_dim, h, &mut rng);
        let decoder = LstmLayerWeights::init(h, h, &mut rng);
        let a = 1.0 / (h as f64).sqrt();
        let dense_w = (0..h).map(|_| rand::Rng::random_range(&mut rng, -a..a)).collect();
        Self {
            encoder,
            decoder,
            dense_w,
            dense_b: 0.0,
            hyper,
        }
    }

    /// All parameters zero.
    pub fn zeros(hyper: Hyper) -> Self {
        let h = hyper.hidden_dim;
        Self {
            encoder: LstmLayerWeights::zeros(hyper.input_dim, h),
            decoder: LstmLayerWeights::zeros(h, h),
            dense_w: vec![0.0; h],
            dense_b: 0.0,
            hyper,
        }
    }

    pub fn param_slices(&self) -> Vec<&[f64]> {
        vec![
            &self.encoder.w,
            &self.encoder.u,
            &self.encoder.b,
            &self.decoder.w,
            &self.decoder.u,
            &self.decoder.b,
            &self.dense_w,
            std::slice::from_ref(&self.dense_b),
        ]
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            &mut self.encoder.w,
            &mut self.encoder.u,
            &mut self.encoder.b,
            &mut self.decoder.w,
            &mut self.decoder.u,
            &mut self.decoder.b,
            &mut self.dense_w,
            std::slice::from_mut(&mut self.dense_b),
        ]
    }

    pub fn n_params(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.param_slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    /// Check internal consistency of dimensions.
    pub fn validate(&self) -> Result<()> {
        let h = self.hyper.hidden_dim;
        let ok = self.encoder.input_dim == self.hyper.input_dim
            && self.encoder.hidden_dim == h
            && self.decoder.input_dim == h
            && self.decoder.hidden_dim == h
            && self.dense_w.len() == h
            && self.encoder.w.len() == 4 * h * self.hyper.input_dim
            && self.encoder.u.len() == 4 * h * h
            && self.decoder.w.len() == 4 * h * h
            && self.decoder.u.len() == 4 * h * h
            && self.encoder.b.len() == 4 * h
            && self.decoder.b.len() == 4 * h;
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch("network dimensions are inconsistent".into()))
        }
    }

    fn check_input(&self, inputs: &[f64]) -> Result<usize> {
        let d = self.hyper.input_dim;
        if d == 0 || inputs.len() % d != 0 || inputs.is_empty() {
            return Err(Error::ShapeMismatch(format!(
                "input of {} values is not a whole number of {d}-wide steps",
                inputs.len()
            )));
        }
        Ok(inputs.len() / d)
    }

    /// Run the network over one window (`steps × input_dim`, row-major).
    pub fn forward(&self, inputs: &[f64]) -> Result<ForwardPass> {
        let steps = self.check_input(inputs)?;
        let h = self.hyper.hidden_dim;
        let encoder = self.encoder.forward(inputs, steps);
        let decoder_input = match self.hyper.bridge {
            Bridge::RepeatFinal => encoder.hidden(steps - 1).repeat(steps),
            Bridge::PerStep => encoder.h.clone(),
        };
        let decoder = self.decoder.forward(&decoder_input, steps);
        let prediction = (0..steps)
            .map(|t| dot(&self.dense_w, &decoder.h[t * h..(t + 1) * h]) + self.dense_b)
            .collect();
        Ok(ForwardPass {
            prediction,
            encoder,
            decoder_input,
            decoder,
        })
    }

    pub fn predict_window(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(inputs)?.prediction)
    }

    /// Exact gradients of the window MSE `mean_t (ŷ_t − y_t)²`. Returns the
    /// gradients and the loss.
    pub fn backward(&self, inputs: &[f64], pass: &ForwardPass, target: &[f64]) -> Result<(Gradients, f64)> {
        let steps = self.check_input(inputs)?;
        if target.len() != steps || pass.prediction.len() != steps {
            return Err(Error::ShapeMismatch(format!(
                "target has {} steps, window has {steps}",
                target.len()
            )));
        }
        let h = self.hyper.hidden_dim;
        let mut grads = Gradients::zeros_like(self);
        let mut loss = 0.0;
        let mut dh_dec = vec![0.0; steps * h];
        for t in 0..steps {
            let err = pass.prediction[t] - target[t];
            loss += err * err;
            let dy = 2.0 * err / steps as f64;
            grads.dense_b += dy;
            axpy(dy, pass.decoder.hidden(t), &mut grads.dense_w);
            axpy(dy, &self.dense_w, &mut dh_dec[t * h..(t + 1) * h]);
        }
        loss /= steps as f64;
        let dx_dec = self
            .decoder
            .backward(&pass.decoder_input, &pass.decoder, &dh_dec, &mut grads.decoder, true)
            .expect("requested input gradient");
        let dh_enc = match self.hyper.bridge {
            Bridge::RepeatFinal => {
                let mut d = vec![0.0; steps * h];
                let last = &mut d[(steps - 1) * h..];
                for t in 0..steps {
                    axpy(1.0, &dx_dec[t * h..(t + 1) * h], last);
                }
                d
            }
            Bridge::PerStep => dx_dec,
        };
        self.encoder
            .backward(inputs, &pass.encoder, &dh_enc, &mut grads.encoder, false);
        Ok((grads, loss))
    }

    /// Window MSE without gradients.
    pub fn loss(&self, inputs: &[f64], target: &[f64]) -> Result<f64> {
        let pred = self.predict_window(inputs)?;
        if pred.len() != target.len() {
            return Err(Error::ShapeMismatch("target length".into()));
        }
        Ok(pred.iter().zip(target).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / pred.len() as f64)
    }
}
