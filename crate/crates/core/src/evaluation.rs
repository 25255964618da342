//! Error metrics, the day-ahead backtest, and report tables.
//!
//! Weather over the test day is taken from observations, i.e. treated as a
//! perfect forecast. Load is only visible up to the start of the day being
//! forecast.

use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::linear::load_values;
use crate::series::{DayRange, TimePoint, PERIODS_PER_DAY};

fn check_len(a: &[f64], f: &[f64]) -> Result<()> {
    if a.len() != f.len() {
        return Err(Error::DimensionMismatch(format!(
            "actual has {} values, forecast has {}",
            a.len(),
            f.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::DimensionMismatch("no values to score".into()));
    }
    Ok(())
}

/// Mean absolute percentage error, in percent.
pub fn mape(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    check_len(actual, forecast)?;
    let mut s = 0.0;
    for (i, (a, f)) in actual.iter().zip(forecast).enumerate() {
        if *a == 0.0 {
            return Err(Error::ZeroActual(i));
        }
        s += ((a - f) / a).abs();
    }
    Ok(100.0 * s / actual.len() as f64)
}

pub fn rmse(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    check_len(actual, forecast)?;
    let s: f64 = actual.iter().zip(forecast).map(|(a, f)| (a - f) * (a - f)).sum();
    Ok((s / actual.len() as f64).sqrt())
}

/// RMSE within each clock hour (periods `2h` and `2h+1` pooled). Hours with
/// no observations report 0.
pub fn per_hour_rmse(actual: &[f64], forecast: &[f64], index: &[TimePoint]) -> Result<Vec<f64>> {
    check_len(actual, forecast)?;
    if index.len() != actual.len() {
        return Err(Error::DimensionMismatch(format!(
            "index has {} entries, series has {}",
            index.len(),
            actual.len()
        )));
    }
    let mut sum = [0.0; 24];
    let mut count = [0usize; 24];
    for ((a, f), tp) in actual.iter().zip(forecast).zip(index) {
        let h = tp.hour();
        sum[h] += (a - f) * (a - f);
        count[h] += 1;
    }
    Ok((0..24)
        .map(|h| if count[h] == 0 { 0.0 } else { (sum[h] / count[h] as f64).sqrt() })
        .collect())
}

/// What a model may see when forecasting one day: the dataset with load
/// truncated at the start of that day.
pub struct DayContext<'a> {
    pub day: NaiveDate,
    pub data: &'a Dataset,
}

impl DayContext<'_> {
    /// Historical load over `[from, to)`; anything at or after the start of
    /// the forecast day is refused.
    pub fn load(&self, from: TimePoint, to: TimePoint) -> Result<Vec<f64>> {
        let cutoff = TimePoint::day_start(self.day);
        if to > cutoff {
            return Err(Error::Leakage(format!(
                "load requested up to {to} while forecasting {}",
                self.day
            )));
        }
        load_values(&self.data.load, from, to)
    }
}

/// A trained model that produces day-ahead forecasts.
pub trait Forecaster {
    fn name(&self) -> &str;
    /// End (exclusive) of the load history the model was fitted on.
    fn trained_through(&self) -> TimePoint;
    /// The 48 half-hourly forecasts for `ctx.day`.
    fn forecast_day(&self, ctx: &DayContext) -> Result<Vec<f64>>;
}

/// Predicts a single constant (the training-load mean, typically).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanForecaster {
    pub value: f64,
    pub trained_through: TimePoint,
}

impl MeanForecaster {
    /// Mean of the load over `train`.
    pub fn fit(data: &Dataset, train: DayRange) -> Result<Self> {
        let y = load_values(&data.load, train.start(), train.end())?;
        Ok(Self {
            value: y.iter().sum::<f64>() / y.len() as f64,
            trained_through: train.end(),
        })
    }
}

impl Forecaster for MeanForecaster {
    fn name(&self) -> &str {
        "mean"
    }

    fn trained_through(&self) -> TimePoint {
        self.trained_through
    }

    fn forecast_day(&self, _ctx: &DayContext) -> Result<Vec<f64>> {
        Ok(vec![self.value; PERIODS_PER_DAY])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub model: String,
    pub mape: f64,
    pub rmse: f64,
    pub per_hour_rmse: Vec<f64>,
    pub forecast: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub test_range: DayRange,
    pub index: Vec<TimePoint>,
    pub actual: Vec<f64>,
    /// Sorted by model name.
    pub models: Vec<ModelScore>,
}

impl BacktestReport {
    pub fn model(&self, name: &str) -> Option<&ModelScore> {
        self.models.iter().find(|m| m.model == name)
    }

    /// Score a set of already-produced forecasts against `actual`.
    pub fn from_forecasts(
        test_range: DayRange,
        index: Vec<TimePoint>,
        actual: Vec<f64>,
        forecasts: Vec<(String, Vec<f64>)>,
    ) -> Result<Self> {
        let mut models = Vec::with_capacity(forecasts.len());
        for (model, forecast) in forecasts {
            models.push(ModelScore {
                mape: mape(&actual, &forecast)?,
                rmse: rmse(&actual, &forecast)?,
                per_hour_rmse: per_hour_rmse(&actual, &forecast, &index)?,
                model,
                forecast,
            });
        }
        models.sort_by(|a, b| a.model.cmp(&b.model));
        Ok(Self {
            test_range,
            index,
            actual,
            models,
        })
    }

    /// Write `report_summary.csv`, `report_hourly.csv` and `report_trace.csv`
    /// into `dir`.
    pub fn write_csvs(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("report_summary.csv"))?;
        w.write_record(["model", "mape", "rmse"])?;
        for m in &self.models {
            w.write_record([m.model.clone(), m.mape.to_string(), m.rmse.to_string()])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("report_hourly.csv"))?;
        w.write_record(["model", "hour", "rmse"])?;
        for m in &self.models {
            for (h, v) in m.per_hour_rmse.iter().enumerate() {
                w.write_record([m.model.clone(), h.to_string(), v.to_string()])?;
            }
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("report_trace.csv"))?;
        w.write_record(["date", "period", "actual", "model", "forecast"])?;
        for m in &self.models {
            for ((tp, a), f) in self.index.iter().zip(&self.actual).zip(&m.forecast) {
                w.write_record([
                    tp.date.to_string(),
                    tp.period.to_string(),
                    a.to_string(),
                    m.model.clone(),
                    f.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Day-by-day forecasts of every model over `test`, scored against the
/// observed load.
pub fn backtest(models: &[&dyn Forecaster], data: &Dataset, test: DayRange) -> Result<BacktestReport> {
    for m in models {
        if m.trained_through() > test.start() {
            return Err(Error::Leakage(format!(
                "model `{}` was trained on load up to {}, after the test start {}",
                m.name(),
                m.trained_through(),
                test.start()
            )));
        }
    }
    let actual = load_values(&data.load, test.start(), test.end()).map_err(|e| match e {
        Error::NoOverlap => Error::MissingData(format!("no load over the test range {test}")),
        other => other,
    })?;
    let mut forecasts: Vec<(String, Vec<f64>)> = models
        .iter()
        .map(|m| (m.name().to_string(), Vec::with_capacity(actual.len())))
        .collect();
    for day in test.days() {
        let visible = data.with_load_before(TimePoint::day_start(day))?;
        let ctx = DayContext { day, data: &visible };
        for (m, (_, out)) in models.iter().zip(forecasts.iter_mut()) {
            let f = m
                .forecast_day(&ctx)
                .map_err(|e| e.context(format!("model `{}` on {day}", m.name())))?;
            if f.len() != PERIODS_PER_DAY {
                return Err(Error::ShapeMismatch(format!(
                    "model `{}` returned {} values for {day}",
                    m.name(),
                    f.len()
                )));
            }
            out.extend(f);
        }
    }
    BacktestReport::from_forecasts(test, test.time_points(), actual, forecasts)
}
