//! OLS, PCA and metrics checked against independent computations.

mod common;

use common::{correlated_cols, matrix, metric_oracle_worst, ols_oracle_worst, pca_checks};
use hyena_core::linear::{recompose, residual};
use hyena_core::numerics::{ols_fit, pca_fit, pca_inverse, pca_transform};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[test]
fn ols_matches_pseudo_inverse_on_100_systems() {
    let worst = ols_oracle_worst(100, 11);
    assert!(worst < 1e-8, "max relative deviation {worst:e}");
}

#[test]
fn pca_components_orthonormal_and_reconstruction_monotone() {
    let c = pca_checks(3);
    assert!(c.orthonormality < 1e-8, "{:e}", c.orthonormality);
    assert!(c.non_increasing(), "{:?}", c.reconstruction);
    assert!(c.rank_one_angle < 1e-6, "angle {:e}", c.rank_one_angle);
}

#[test]
fn full_rank_pca_reconstructs_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let m = matrix(&correlated_cols(&mut rng, 300, 6));
    let fit = pca_fit(&m, 6).unwrap();
    let back = pca_inverse(&fit, &pca_transform(&fit, &m).unwrap()).unwrap();
    for j in 0..6 {
        for (a, b) in m.values(j).iter().zip(back.values(j)) {
            assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
        }
    }
}

#[test]
fn metrics_match_direct_formulas_on_1000_vectors() {
    let (worst, round_trip) = metric_oracle_worst(1000, 9);
    assert!(worst < 1e-9, "metric deviation {worst:e}");
    assert!(round_trip <= 1e-12, "round trip {round_trip:e}");
}

proptest! {
    #[test]
    fn residual_then_recompose_round_trips(
        pairs in prop::collection::vec((1.0f64..60_000.0, -5_000.0f64..5_000.0), 1..200)
    ) {
        let y: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let yhat: Vec<f64> = pairs.iter().map(|p| p.0 + p.1).collect();
        let eps = residual(&yhat, &y).unwrap();
        let back = recompose(&yhat, &eps).unwrap();
        // relative to the operands' magnitude, the scale of one rounding
        for ((b, a), f) in back.iter().zip(&y).zip(&yhat) {
            prop_assert!((b - a).abs() <= 1e-12 * a.abs().max(f.abs()));
        }
        // and the other way: residual of a recomposed forecast is the residual
        let again = residual(&yhat, &back).unwrap();
        for (e2, e) in again.iter().zip(&eps) {
            prop_assert!((e2 - e).abs() <= 1e-12 * yhat.iter().fold(1.0f64, |m, v| m.max(v.abs())));
        }
    }

    #[test]
    fn ols_intercept_absorbs_constant_shift(shift in -1_000.0f64..1_000.0, seed in 0u64..1_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols: Vec<Vec<f64>> = (0..3).map(|_| (0..40).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let y: Vec<f64> = (0..40).map(|_| rng.sample(StandardNormal)).collect();
        let ys: Vec<f64> = y.iter().map(|v| v + shift).collect();
        let m = matrix(&cols);
        let a = ols_fit(&m, &y, 0.0).unwrap();
        let b = ols_fit(&m, &ys, 0.0).unwrap();
        prop_assert!((b.intercept() - a.intercept() - shift).abs() < 1e-8 * shift.abs().max(1.0));
        for j in 1..4 {
            prop_assert!((a.coefficients[j] - b.coefficients[j]).abs() < 1e-8);
        }
    }
}
