//! Windowing, mini-batch Adam training with early stopping, and prediction.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::network::{Gradients, LstmEncoderDecoder};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::series::{TimePoint, PERIODS_PER_DAY};

/// One training/prediction sample: `timesteps × d` inputs (row-major) and
/// the matching targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub start: TimePoint,
    pub inputs: Vec<f64>,
    pub target: Vec<f64>,
}

/// Cut `data`/`target` into non-overlapping windows of `timesteps` rows.
/// Windows are aligned to day boundaries: leading rows before the first
/// period-0 row are skipped, and a trailing partial window is dropped.
pub fn window(data: &FeatureMatrix, target: &[f64], timesteps: usize) -> Result<Vec<Window>> {
    let n = data.n_rows();
    if target.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{n} feature rows but {} targets",
            target.len()
        )));
    }
    if timesteps == 0 || n < timesteps {
        return Err(Error::TooShort { rows: n, timesteps });
    }
    let offset = if PERIODS_PER_DAY % timesteps == 0 {
        data.index()
            .iter()
            .position(|tp| tp.period as usize % timesteps == 0)
            .unwrap_or(n)
    } else {
        0
    };
    let count = (n - offset) / timesteps;
    if count == 0 {
        return Err(Error::TooShort { rows: n - offset, timesteps });
    }
    let d = data.n_cols();
    let cols: Vec<&[f64]> = (0..d).map(|j| data.values(j)).collect();
    Ok((0..count)
        .map(|w| {
            let lo = offset + w * timesteps;
            let mut inputs = Vec::with_capacity(timesteps * d);
            for r in lo..lo + timesteps {
                inputs.extend(cols.iter().map(|c| c[r]));
            }
            Window {
                start: data.index()[lo],
                inputs,
                target: target[lo..lo + timesteps].to_vec(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    pub stopped_early: bool,
    /// 1-based epoch whose weights were returned.
    pub best_epoch: usize,
}

impl TrainReport {
    pub fn best_validation_loss(&self) -> f64 {
        self.validation_loss[self.best_epoch - 1]
    }
}

fn flat_params(net: &LstmEncoderDecoder) -> Vec<f64> {
    net.param_slices().concat()
}

fn set_flat_params(net: &mut LstmEncoderDecoder, flat: &[f64]) {
    let mut k = 0;
    for s in net.param_slices_mut() {
        s.copy_from_slice(&flat[k..k + s.len()]);
        k += s.len();
    }
}

fn check_window(net: &LstmEncoderDecoder, w: &Window) -> Result<()> {
    let t = w.target.len();
    if t == 0 || w.inputs.len() != t * net.hyper.input_dim {
        return Err(Error::ShapeMismatch(format!(
            "window with {} inputs and {t} targets does not fit input_dim {}",
            w.inputs.len(),
            net.hyper.input_dim
        )));
    }
    Ok(())
}

/// Mean per-window gradient and mean loss over `batch`, accumulated in order.
pub fn batch_gradient(net: &LstmEncoderDecoder, batch: &[&Window]) -> Result<(Gradients, f64)> {
    let mut total = Gradients::zeros_like(net);
    let mut loss = 0.0;
    for w in batch {
        check_window(net, w)?;
        let pass = net.forward(&w.inputs)?;
        let (g, l) = net.backward(&w.inputs, &pass, &w.target)?;
        total.add(&g);
        loss += l;
    }
    let k = batch.len().max(1) as f64;
    total.scale(1.0 / k);
    Ok((total, loss / k))
}

/// Mean window MSE.
pub fn mean_loss(net: &LstmEncoderDecoder, windows: &[Window]) -> Result<f64> {
    let mut s = 0.0;
    for w in windows {
        check_window(net, w)?;
        s += net.loss(&w.inputs, &w.target)?;
    }
    Ok(s / windows.len().max(1) as f64)
}

/// Number of trailing windows held out for validation.
pub fn validation_count(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1))
}

/// Mini-batch Adam on the chronologically first windows, early-stopped on the
/// last `validation_fraction` of them. Returns the weights of the epoch with
/// the lowest validation loss.
pub fn train(
    mut net: LstmEncoderDecoder,
    windows: &[Window],
    validation_fraction: f64,
) -> Result<(LstmEncoderDecoder, TrainReport)> {
    if windows.len() < 2 {
        return Err(Error::TooFewWindows(windows.len()));
    }
    net.validate()?;
    for w in windows {
        check_window(&net, w)?;
    }
    let n_val = validation_count(windows.len(), validation_fraction);
    let (train_set, val_set) = windows.split_at(windows.len() - n_val);
    let hyper = net.hyper.clone();
    let cfg = AdamConfig::with_lr(hyper.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed ^ 0x5eed_0f_ba7c4);
    let mut state = AdamState::new(net.n_params());
    let mut params = flat_params(&net);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut report = TrainReport {
        epochs_run: 0,
        train_loss: Vec::new(),
        validation_loss: Vec::new(),
        stopped_early: false,
        best_epoch: 0,
    };
    let mut best = net.clone();
    let mut best_val = f64::INFINITY;
    let mut wait = 0;
    let batch_size = hyper.batch_size.max(1);

    for epoch in 1..=hyper.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch_size) {
            let batch: Vec<&Window> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (g, l) = batch_gradient(&net, &batch)?;
            epoch_loss += l * batch.len() as f64;
            adam_step(&mut params, &g.slices().concat(), &mut state, cfg)?;
            set_flat_params(&mut net, &params);
        }
        let val = mean_loss(&net, val_set)?;
        report.epochs_run = epoch;
        report.train_loss.push(epoch_loss / train_set.len() as f64);
        report.validation_loss.push(val);
        if val < best_val {
            best_val = val;
            best = net.clone();
            report.best_epoch = epoch;
            wait = 0;
        } else {
            wait += 1;
            if wait >= hyper.patience.max(1) {
                report.stopped_early = true;
                break;
            }
        }
    }
    if report.best_epoch == 0 {
        // validation loss was never finite; keep the final weights
        report.best_epoch = report.epochs_run.max(1);
        best = net;
    }
    Ok((best, report))
}

/// Full-batch Adam that reverts any step which increases the training loss
/// and divides the learning rate by ten instead. Returns the loss after each
/// epoch, which is therefore non-increasing. Diagnostic only.
pub fn train_backtracking(
    mut net: LstmEncoderDecoder,
    windows: &[Window],
    epochs: usize,
) -> Result<(LstmEncoderDecoder, Vec<f64>)> {
    if windows.is_empty() {
        return Err(Error::TooFewWindows(0));
    }
    let all: Vec<&Window> = windows.iter().collect();
    let mut cfg = AdamConfig::with_lr(net.hyper.lr);
    let mut state = AdamState::new(net.n_params());
    let mut params = flat_params(&net);
    let mut current = mean_loss(&net, windows)?;
    let mut losses = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let (g, _) = batch_gradient(&net, &all)?;
        let (saved_params, saved_state) = (params.clone(), state.clone());
        adam_step(&mut params, &g.slices().concat(), &mut state, cfg)?;
        set_flat_params(&mut net, &params);
        let next = mean_loss(&net, windows)?;
        if next > current || !next.is_finite() {
            params = saved_params;
            state = saved_state;
            set_flat_params(&mut net, &params);
            cfg.lr /= 10.0;
        } else {
            current = next;
        }
        losses.push(current);
    }
    Ok((net, losses))
}

/// Concatenated per-window predictions.
pub fn predict(net: &LstmEncoderDecoder, windows: &[Window]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(windows.len() * net.hyper.timesteps);
    for w in windows {
        if w.inputs.len() % net.hyper.input_dim.max(1) != 0 {
            return Err(Error::ShapeMismatch("window width".into()));
        }
        out.extend(net.predict_window(&w.inputs)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::ColumnKind;
    use crate::neural::network::{Bridge, Hyper};
    use chrono::NaiveDate;
    use rand::Rng;

    fn matrix(n: usize, d: usize, first_period: u8) -> FeatureMatrix {
        let s = TimePoint::new(NaiveDate::from_ymd_opt(2020, 3, 1).unwrap(), first_period).unwrap();
        let mut m = FeatureMatrix::new((0..n as i64).map(|i| s.offset(i)).collect());
        for j in 0..d {
            m.push(
                format!("x{j}"),
                ColumnKind::Continuous,
                (0..n).map(|i| ((i * (j + 1)) as f64 * 0.37).sin()).collect(),
            )
            .unwrap();
        }
        m
    }

    fn small_hyper(d: usize, hidden: usize, seed: u64) -> Hyper {
        Hyper {
            timesteps: 48,
            hidden_dim: hidden,
            lr: 1e-2,
            batch_size: 4,
            max_epochs: 30,
            patience: 5,
            seed,
            ..Hyper::new(d)
        }
    }

    fn toy_windows(days: usize, d: usize) -> Vec<Window> {
        let m = matrix(days * 48, d, 0);
        let y: Vec<f64> = (0..days * 48).map(|i| 0.3 * m.values(0)[i] + 0.1).collect();
        window(&m, &y, 48).unwrap()
    }

    #[test]
    fn window_counts_and_partition() {
        let m = matrix(96, 2, 0);
        let y: Vec<f64> = (0..96).map(|i| i as f64).collect();
        let w = window(&m, &y, 48).unwrap();
        assert_eq!(w.len(), 2);
        let joined: Vec<f64> = w.iter().flat_map(|w| w.target.clone()).collect();
        assert_eq!(joined, y);
        assert_eq!(w[1].inputs[0], m.values(0)[48]);
        assert_eq!(w[1].inputs[1], m.values(1)[48]);

        let short = matrix(47, 2, 0);
        assert!(matches!(window(&short, &y[..47], 48), Err(Error::TooShort { .. })));
    }

    #[test]
    fn window_skips_to_day_boundary() {
        let m = matrix(120, 1, 40);
        let y: Vec<f64> = (0..120).map(|i| i as f64).collect();
        let w = window(&m, &y, 48).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w[0].start.period, 0);
        assert_eq!(w[0].target[0], 8.0);
    }

    #[test]
    fn too_few_windows() {
        let w = toy_windows(1, 2);
        let net = LstmEncoderDecoder::new(small_hyper(2, 4, 1));
        assert!(matches!(train(net, &w, 0.1), Err(Error::TooFewWindows(1))));
    }

    #[test]
    fn training_is_deterministic() {
        let w = toy_windows(12, 2);
        let (a, ra) = train(LstmEncoderDecoder::new(small_hyper(2, 4, 9)), &w, 0.2).unwrap();
        let (b, rb) = train(LstmEncoderDecoder::new(small_hyper(2, 4, 9)), &w, 0.2).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
    }

    #[test]
    fn best_epoch_has_minimum_validation_loss() {
        let w = toy_windows(12, 2);
        let (net, r) = train(LstmEncoderDecoder::new(small_hyper(2, 4, 3)), &w, 0.2).unwrap();
        assert_eq!(r.validation_loss.len(), r.epochs_run);
        assert!(r.best_epoch >= 1 && r.best_epoch <= r.epochs_run);
        let min = r.validation_loss.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(r.best_validation_loss(), min);
        let val = &w[w.len() - validation_count(w.len(), 0.2)..];
        assert_eq!(mean_loss(&net, val).unwrap(), min);
    }

    #[test]
    fn patience_zero_stops_at_first_non_improving_epoch() {
        let w = toy_windows(10, 2);
        let hyper = Hyper {
            patience: 0,
            lr: 0.5,
            max_epochs: 200,
            ..small_hyper(2, 4, 2)
        };
        let (_, r) = train(LstmEncoderDecoder::new(hyper), &w, 0.2).unwrap();
        assert!(r.stopped_early);
        let v = &r.validation_loss;
        let last = v.len() - 1;
        assert!(v[last] >= v[..last].iter().cloned().fold(f64::INFINITY, f64::min));
        for k in 1..last {
            assert!(v[k] < v[..k].iter().cloned().fold(f64::INFINITY, f64::min));
        }
    }

    #[test]
    fn zero_target_converges() {
        let m = matrix(8 * 48, 2, 0);
        let w = window(&m, &vec![0.0; 8 * 48], 48).unwrap();
        let hyper = Hyper {
            max_epochs: 200,
            patience: 200,
            lr: 1e-2,
            ..small_hyper(2, 4, 5)
        };
        let (_, r) = train(LstmEncoderDecoder::new(hyper), &w, 0.1).unwrap();
        let final_loss = *r.train_loss.last().unwrap();
        assert!(final_loss < 1e-6, "train loss {final_loss}");
    }

    #[test]
    fn backtracking_loss_is_non_increasing() {
        let w = toy_windows(4, 2);
        let hyper = Hyper {
            lr: 0.3,
            ..small_hyper(2, 3, 8)
        };
        let (_, losses) = train_backtracking(LstmEncoderDecoder::new(hyper), &w, 40).unwrap();
        assert!(losses.windows(2).all(|p| p[1] <= p[0]));
    }

    #[test]
    fn predict_shapes_and_repeatability() {
        let w = toy_windows(3, 2);
        let net = LstmEncoderDecoder::new(small_hyper(2, 4, 4));
        let p = predict(&net, &w[..1]).unwrap();
        assert_eq!(p.len(), 48);
        assert_eq!(predict(&net, &w).unwrap(), predict(&net, &w).unwrap());

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let hot = Window {
            start: w[0].start,
            inputs: (0..96).map(|_| rng.random_range(-1e4..1e4)).collect(),
            target: vec![0.0; 48],
        };
        assert!(predict(&net, &[hot]).unwrap().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn per_step_bridge_trains() {
        let w = toy_windows(8, 2);
        let hyper = Hyper {
            bridge: Bridge::PerStep,
            ..small_hyper(2, 4, 6)
        };
        let (_, r) = train(LstmEncoderDecoder::new(hyper), &w, 0.25).unwrap();
        assert!(r.train_loss.last().unwrap() < &r.train_loss[0]);
    }
}
