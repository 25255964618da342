//! Oracle computations shared by the per-area tests and the acceptance run.
#![allow(dead_code)]

use chrono::NaiveDate;
use hyena_core::ensembles::{feature_importance, fit_forest, ForestParams};
use hyena_core::evaluation::{mape, per_hour_rmse, rmse};
use hyena_core::features::{ColumnKind, FeatureMatrix};
use hyena_core::linear::{recompose, residual};
use hyena_core::neural::{Bridge, Hyper, LstmEncoderDecoder};
use hyena_core::numerics::{ols_fit, pca_fit, pca_inverse, pca_transform};
use hyena_core::series::TimePoint;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn index(n: usize) -> Vec<TimePoint> {
    let start = TimePoint::day_start(NaiveDate::from_ymd_opt(2020, 1, 1).unwrap());
    (0..n as i64).map(|i| start.offset(i)).collect()
}

pub fn matrix(cols: &[Vec<f64>]) -> FeatureMatrix {
    let mut m = FeatureMatrix::new(index(cols[0].len()));
    for (j, c) in cols.iter().enumerate() {
        m.push(format!("x{j}"), ColumnKind::Continuous, c.clone()).unwrap();
    }
    m
}

/// Largest relative error between the analytic gradient and central finite
/// differences (step 1e-5) over every parameter of one random tiny network
/// (hidden 3, input 2, 4 timesteps).
pub fn gradient_max_rel_error(bridge: Bridge, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hyper = Hyper {
        timesteps: 4,
        hidden_dim: 3,
        seed,
        bridge,
        ..Hyper::new(2)
    };
    let mut net = LstmEncoderDecoder::new(hyper);
    // perturb biases away from their initial values so every path is exercised
    for s in net.param_slices_mut() {
        for v in s.iter_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
    }
    let x: Vec<f64> = (0..8).map(|_| rng.random_range(-1.5..1.5)).collect();
    let y: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();

    let pass = net.forward(&x).unwrap();
    let (grads, _) = net.backward(&x, &pass, &y).unwrap();
    let analytic: Vec<f64> = grads.slices().concat();

    let h = 1e-5;
    let sizes: Vec<usize> = net.param_slices().iter().map(|s| s.len()).collect();
    let mut worst = 0.0f64;
    let mut k = 0;
    for (block, &len) in sizes.iter().enumerate() {
        for i in 0..len {
            let orig = net.param_slices()[block][i];
            net.param_slices_mut()[block][i] = orig + h;
            let up = net.loss(&x, &y).unwrap();
            net.param_slices_mut()[block][i] = orig - h;
            let down = net.loss(&x, &y).unwrap();
            net.param_slices_mut()[block][i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[k];
            let denom = a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((a - numeric).abs() / denom);
            k += 1;
        }
    }
    assert_eq!(k, analytic.len());
    worst
}

/// Worst relative coefficient deviation of `ols_fit` from the SVD
/// pseudo-inverse solution over `n` random well-conditioned systems
/// (rows ≤ 200, intercept plus ≤ 19 columns).
pub fn ols_oracle_worst(n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let p = rng.random_range(1..=19usize);
        let rows = rng.random_range(p + 5..=200usize);
        let cols: Vec<Vec<f64>> = (0..p)
            .map(|_| {
                let scale = rng.random_range(0.5..5.0);
                let shift = rng.random_range(-3.0..3.0);
                (0..rows)
                    .map(|_| shift + scale * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        let y: Vec<f64> = (0..rows).map(|_| rng.random_range(-10.0..10.0)).collect();
        let fit = ols_fit(&matrix(&cols), &y, 0.0).unwrap();

        let design = DMatrix::from_fn(rows, p + 1, |i, j| if j == 0 { 1.0 } else { cols[j - 1][i] });
        let pinv = design.pseudo_inverse(1e-12).unwrap();
        let beta = pinv * DVector::from_vec(y);
        for (a, b) in fit.coefficients.iter().zip(beta.iter()) {
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    worst
}

pub fn correlated_cols(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Vec<Vec<f64>> {
    let latent: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    (0..p)
        .map(|_| {
            let w: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            (0..n)
                .map(|i| {
                    (0..3).map(|k| w[k] * latent[k][i]).sum::<f64>()
                        + 0.3 * rng.sample::<f64, _>(StandardNormal)
                })
                .collect()
        })
        .collect()
}

pub struct PcaChecks {
    /// max |uᵢ·uⱼ − δᵢⱼ| over 20 random fits
    pub orthonormality: f64,
    /// reconstruction SSE for k = 1..=p
    pub reconstruction: Vec<f64>,
    /// angle (radians) between the first component of rank-1 data and the
    /// generating direction
    pub rank_one_angle: f64,
}

impl PcaChecks {
    pub fn non_increasing(&self) -> bool {
        self.reconstruction.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-12)
    }
}

pub fn pca_checks(seed: u64) -> PcaChecks {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut orth = 0.0f64;
    for _ in 0..20 {
        let p = rng.random_range(2..=12usize);
        let m = matrix(&correlated_cols(&mut rng, 150, p));
        let fit = pca_fit(&m, p).unwrap();
        for (a, u) in fit.components.iter().enumerate() {
            for (b, v) in fit.components.iter().enumerate() {
                let dot: f64 = u.iter().zip(v).map(|(x, y)| x * y).sum();
                orth = orth.max((dot - if a == b { 1.0 } else { 0.0 }).abs());
            }
        }
    }

    let p = 10;
    let m = matrix(&correlated_cols(&mut rng, 300, p));
    let reconstruction = (1..=p)
        .map(|k| {
            let fit = pca_fit(&m, k).unwrap();
            let back = pca_inverse(&fit, &pca_transform(&fit, &m).unwrap()).unwrap();
            (0..p)
                .map(|j| {
                    m.values(j)
                        .iter()
                        .zip(back.values(j))
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                })
                .sum()
        })
        .collect();

    let dir = [3.0, -1.0, 2.0, 0.5, -4.0];
    let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
    let u: Vec<f64> = dir.iter().map(|d| d / norm).collect();
    let t: Vec<f64> = (0..200).map(|_| rng.sample(StandardNormal)).collect();
    let cols: Vec<Vec<f64>> = u.iter().map(|w| t.iter().map(|s| 7.0 + s * w).collect()).collect();
    let fit = pca_fit(&matrix(&cols), 1).unwrap();
    let cos: f64 = fit.components[0].iter().zip(&u).map(|(a, b)| a * b).sum::<f64>().abs();

    PcaChecks {
        orthonormality: orth,
        reconstruction,
        rank_one_angle: cos.min(1.0).acos(),
    }
}

/// Worst relative deviation of mape / rmse / per-hour RMSE from direct
/// formula evaluation over `n` random vectors, and the worst residual /
/// recompose round-trip error relative to the operands.
pub fn metric_oracle_worst(n: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut round_trip = 0.0f64;
    let rel = |got: f64, want: f64| (got - want).abs() / want.abs().max(1.0);
    for _ in 0..n {
        let len = rng.random_range(1..=500usize);
        let a: Vec<f64> = (0..len).map(|_| rng.random_range(1_000.0..50_000.0)).collect();
        let f: Vec<f64> = a.iter().map(|x| x + rng.random_range(-3_000.0..3_000.0)).collect();

        let mut ape = 0.0;
        let mut se = 0.0;
        for i in 0..len {
            ape += (f[i] - a[i]).abs() / a[i].abs();
            se += (f[i] - a[i]).powi(2);
        }
        worst = worst.max(rel(mape(&a, &f).unwrap(), ape / len as f64 * 100.0));
        worst = worst.max(rel(rmse(&a, &f).unwrap(), (se / len as f64).sqrt()));

        // hours grouped independently: the clock hour of a period is period / 2
        let idx = index(len);
        let got = per_hour_rmse(&a, &f, &idx).unwrap();
        assert_eq!(got.len(), 24);
        for (h, g) in got.iter().enumerate() {
            let sq: Vec<f64> = (0..len)
                .filter(|&i| idx[i].period as usize / 2 == h)
                .map(|i| (f[i] - a[i]).powi(2))
                .collect();
            let want = if sq.is_empty() {
                0.0
            } else {
                (sq.iter().sum::<f64>() / sq.len() as f64).sqrt()
            };
            worst = worst.max(rel(*g, want));
        }

        let eps = residual(&f, &a).unwrap();
        let back = recompose(&f, &eps).unwrap();
        for i in 0..len {
            round_trip = round_trip.max((back[i] - a[i]).abs() / a[i].abs().max(f[i].abs()));
        }
    }
    (worst, round_trip)
}

/// Importance share of the driving feature when `y` depends on `a` only and
/// `b` is pure noise; forest with the benchmark depth and split settings.
pub fn single_driver_importance(n_trees: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2_000;
    let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = a
        .iter()
        .map(|x| 3.0 * x + x * x + 0.05 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut m = FeatureMatrix::new(index(n));
    m.push("A", ColumnKind::Continuous, a).unwrap();
    m.push("B_noise", ColumnKind::Continuous, b).unwrap();
    let params = ForestParams {
        n_trees,
        ..ForestParams::random_forest(seed)
    };
    let forest = fit_forest(&m, &y, &params).unwrap();
    feature_importance(&forest).get("A").unwrap()
}
