//! Seasonal linear models: the stage-1 calendar model, the GEFCom-style
//! "vanilla" benchmark, and the residual algebra linking stage 1 to stage 2.
//!
//! The vanilla benchmark follows the published GEFCom2012 form: trend, month
//! dummies, weekday×period dummies, a cubic in temperature, and month×T^k and
//! period×T^k interactions for k = 1..3. Temperature is the station mean,
//! centered on its training mean (same fitted values, better conditioning).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{mean_temperature, Block, ColumnKind, FeatureMatrix, FeatureRecipe};
use crate::ingest::Dataset;
use crate::numerics::{ols_fit, ols_predict, OlsFit};
use crate::series::{DayRange, HalfHourSeries, TimePoint, Unit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinearKind {
    Stage1,
    HongVanilla,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalLinearModel {
    pub kind: LinearKind,
    pub fit: OlsFit,
    pub recipe: FeatureRecipe,
    /// Columns dropped because they were constant over the training rows
    /// (e.g. the dummy of a month absent from the training range).
    pub dropped_columns: Vec<String>,
    pub train_range: DayRange,
}

impl SeasonalLinearModel {
    pub fn predict(&self, data: &Dataset, range: DayRange) -> Result<Vec<f64>> {
        self.predict_span(data, range.start(), range.end())
    }

    pub fn predict_span(&self, data: &Dataset, from: TimePoint, to: TimePoint) -> Result<Vec<f64>> {
        let m = self.recipe.build_span(data, from, to)?;
        ols_predict(&self.fit, &m)
    }
}

/// Regressors of the stage-1 model: month, period and weekday dummies, the
/// public-holiday dummy, trend and installed capacity. No weather.
pub fn stage1_recipe(trend_origin: TimePoint) -> FeatureRecipe {
    FeatureRecipe::new(
        vec![
            Block::Months,
            Block::TimeOfDay,
            Block::Weekdays,
            Block::PublicHoliday,
            Block::Trend,
            Block::Capacity,
        ],
        trend_origin,
    )
}

/// Load values over `[from, to)`; the range must lie inside the series and be
/// gap-free.
pub fn load_values(load: &HalfHourSeries, from: TimePoint, to: TimePoint) -> Result<Vec<f64>> {
    if to <= load.start() || from >= load.end() {
        return Err(Error::NoOverlap);
    }
    let s = load.slice_time(from, to)?;
    if let Some(i) = s.missing().iter().position(|&m| m) {
        return Err(Error::MissingData(format!("load gap at {}", s.time_at(i))));
    }
    Ok(s.values().to_vec())
}

/// Columns that carry no information over the training rows: constant
/// dummies and all-zero interaction columns.
fn uninformative_columns(m: &FeatureMatrix) -> Vec<String> {
    m.columns()
        .iter()
        .filter(|c| {
            let first = c.values[0];
            let constant = c.values.iter().all(|&v| v == first);
            constant && (c.kind == ColumnKind::Dummy || first == 0.0)
        })
        .map(|c| c.name.clone())
        .collect()
}

fn fit_recipe(
    kind: LinearKind,
    mut recipe: FeatureRecipe,
    data: &Dataset,
    train: DayRange,
    ridge: f64,
) -> Result<SeasonalLinearModel> {
    let y = load_values(&data.load, train.start(), train.end())?;
    let m = recipe.build(data, train)?;
    let mut dropped = uninformative_columns(&m);
    let mut m = m.drop_columns(&dropped);
    // A dummy block whose reference level never occurs in the training rows
    // is aliased with the intercept (and its temperature interactions with
    // the main effect). An aliased column lies in the span of the others, so
    // dropping it leaves the fitted values unchanged.
    let fit = loop {
        match ols_fit(&m, &y, ridge) {
            Err(Error::RankDeficient(name)) if m.column(&name).is_some() && m.n_cols() > 1 => {
                m = m.drop_columns(std::slice::from_ref(&name));
                dropped.push(name);
            }
            other => break other?,
        }
    };
    recipe.columns = Some(m.names());
    Ok(SeasonalLinearModel {
        kind,
        fit,
        recipe,
        dropped_columns: dropped,
        train_range: train,
    })
}

/// Fit the stage-1 calendar model on `train`.
pub fn fit_stage1(data: &Dataset, train: DayRange, ridge: f64) -> Result<SeasonalLinearModel> {
    fit_recipe(LinearKind::Stage1, stage1_recipe(train.start()), data, train, ridge)
}

/// Fit the vanilla benchmark on `train` using the station-mean temperature.
pub fn fit_hong_vanilla(data: &Dataset, train: DayRange, ridge: f64) -> Result<SeasonalLinearModel> {
    let t = mean_temperature(data, train.start(), train.end())?;
    let center = t.iter().sum::<f64>() / t.len() as f64;
    let recipe = FeatureRecipe::new(
        vec![Block::HongVanilla {
            temp_center: center,
        }],
        train.start(),
    );
    fit_recipe(LinearKind::HongVanilla, recipe, data, train, ridge)
}

/// `ε = ŷ − y`: the linear forecast minus the actual load.
pub fn residual(yhat: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    if yhat.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "forecast has {} values, actual has {}",
            yhat.len(),
            y.len()
        )));
    }
    Ok(yhat.iter().zip(y).map(|(f, a)| f - a).collect())
}

/// Final forecast `ŷ − ε̂`.
pub fn recompose(yhat: &[f64], eps_hat: &[f64]) -> Result<Vec<f64>> {
    if yhat.len() != eps_hat.len() {
        return Err(Error::DimensionMismatch(format!(
            "forecast has {} values, residual has {}",
            yhat.len(),
            eps_hat.len()
        )));
    }
    Ok(yhat.iter().zip(eps_hat).map(|(f, e)| f - e).collect())
}

/// Residual series aligned to the load index it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSeries(pub HalfHourSeries);

impl ResidualSeries {
    pub fn compute(yhat: &[f64], actual: &HalfHourSeries) -> Result<Self> {
        let eps = residual(yhat, actual.values())?;
        Ok(Self(HalfHourSeries::new(actual.start(), eps, Unit::Megawatt)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{generate_synthetic, SyntheticSpec};
    use chrono::{Duration, NaiveDate};

    fn spec(days: usize) -> SyntheticSpec {
        SyntheticSpec {
            n_days: days,
            ..SyntheticSpec::default()
        }
    }

    fn range(first: NaiveDate, days: i64) -> DayRange {
        DayRange::new(first, first + Duration::days(days - 1)).unwrap()
    }

    #[test]
    fn residual_sign_and_identities() {
        assert_eq!(residual(&[100.0], &[90.0]).unwrap(), vec![10.0]);
        assert_eq!(residual(&[5.0, 6.0], &[5.0, 6.0]).unwrap(), vec![0.0, 0.0]);
        let y = [90.0, 80.5];
        let yhat = [100.0, 70.25];
        let eps = residual(&yhat, &y).unwrap();
        assert_eq!(recompose(&yhat, &eps).unwrap(), y.to_vec());
        assert_eq!(recompose(&yhat, &[0.0, 0.0]).unwrap(), yhat.to_vec());
        assert!(matches!(
            recompose(&[0.0; 48], &[0.0; 47]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(residual(&[0.0; 2], &[0.0; 3]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn stage1_pure_seasonal_fits_closely() {
        let s = SyntheticSpec {
            noise_sd_mw: 0.0,
            temp_sensitivity: 0.0,
            solar_suppression_coeff: 0.0,
            // additive dummies approximate the multiplicative product; keep
            // the cross terms second order
            weekly_factors: vec![1.0, 1.0, 1.0, 1.0, 0.99, 0.96, 0.95],
            monthly_factors: vec![1.04, 1.03, 1.02, 1.0, 0.98, 0.97, 0.96, 0.97, 0.98, 1.0, 1.02, 1.03],
            ..spec(400)
        };
        let data = generate_synthetic(&s).unwrap().dataset;
        let train = range(s.start_date, 400);
        let model = fit_stage1(&data, train, 0.0).unwrap();
        // 11 months + 47 periods + 6 weekdays + holiday + trend + 2 capacity + intercept
        assert_eq!(model.fit.coefficients.len(), 69);
        assert!(model.dropped_columns.is_empty());
        let yhat = model.predict(&data, train).unwrap();
        let y = data.load.values();
        let mape = 100.0 / y.len() as f64
            * y.iter().zip(&yhat).map(|(a, f)| ((a - f) / a).abs()).sum::<f64>();
        assert!(mape < 0.5, "in-sample MAPE {mape}");
    }

    #[test]
    fn stage1_outside_data_is_no_overlap() {
        let data = generate_synthetic(&spec(30)).unwrap().dataset;
        let far = range(NaiveDate::from_ymd_opt(2030, 1, 1).unwrap(), 10);
        assert!(matches!(fit_stage1(&data, far, 0.0), Err(Error::NoOverlap)));
    }

    #[test]
    fn stage1_drops_absent_months() {
        let data = generate_synthetic(&spec(60)).unwrap().dataset;
        let model = fit_stage1(&data, range(data.load.start().date, 60), 0.0).unwrap();
        assert!(model.dropped_columns.contains(&"M_5".to_string()));
        assert!(model.fit.column_names.contains(&"M_2".to_string()));
    }

    #[test]
    fn absent_reference_month_is_aliased_away() {
        // March..May only: January never occurs, so the month dummies plus
        // intercept are collinear until one present month becomes reference
        let s = SyntheticSpec {
            start_date: NaiveDate::from_ymd_opt(2019, 3, 1).unwrap(),
            ..spec(92)
        };
        let data = generate_synthetic(&s).unwrap().dataset;
        let model = fit_stage1(&data, range(s.start_date, 92), 0.0).unwrap();
        let months: Vec<&String> = model.fit.column_names.iter().filter(|c| c.starts_with("M_")).collect();
        assert_eq!(months.len(), 2);
        assert!(model.dropped_columns.iter().any(|c| c == "M_5" || c == "M_3" || c == "M_4"));
    }

    #[test]
    fn vanilla_fits_cubic_temperature_response() {
        // noiseless load whose temperature response lies inside the model class
        let s = SyntheticSpec {
            noise_sd_mw: 0.0,
            solar_suppression_coeff: 0.0,
            ..spec(120)
        };
        let data = generate_synthetic(&s).unwrap().dataset;
        let train = range(s.start_date, 120);
        let model = fit_hong_vanilla(&data, train, 0.0).unwrap();
        let yhat = model.predict(&data, train).unwrap();
        let y = data.load.values();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let ss_res: f64 = y.iter().zip(&yhat).map(|(a, f)| (a - f).powi(2)).sum();
        let ss_tot: f64 = y.iter().map(|a| (a - mean).powi(2)).sum();
        assert!(1.0 - ss_res / ss_tot > 0.99);
        let mean_resid = y.iter().zip(&yhat).map(|(a, f)| a - f).sum::<f64>() / y.len() as f64;
        assert!(mean_resid.abs() < 1e-8);
    }

    #[test]
    fn vanilla_without_temperature_fails() {
        let mut data = generate_synthetic(&spec(20)).unwrap().dataset;
        data.stations.clear();
        let train = range(data.load.start().date, 20);
        assert!(matches!(
            fit_hong_vanilla(&data, train, 0.0),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
