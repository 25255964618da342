//! The CLI verbs as library functions.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use crate::error::{Error, Result, ResultExt};
use crate::evaluation::{backtest, BacktestReport, DayContext, Forecaster};
use crate::ingest::{generate_synthetic, Dataset, StationWeather};
use crate::linear::{fit_stage1, load_values, residual};
use crate::series::{fill_gaps_month_hour_mean, DayRange, HalfHourSeries, TimePoint};

use super::artifact;
use super::config::{PipelineConfig, Ranges};
use super::models::{exogenous_recipe, screen_features, FitPlan, HyenaTrainInfo, NamedModel, Screening};

pub fn artifact_path(out: &Path, model: &str) -> PathBuf {
    out.join("models").join(format!("{model}.artifact"))
}

fn fill(s: &HalfHourSeries) -> Result<HalfHourSeries> {
    if s.has_gaps() {
        fill_gaps_month_hour_mean(s)
    } else {
        Ok(s.clone())
    }
}

/// The data a training run may use: load strictly before the test range,
/// with remaining gaps filled from (month, period) means.
pub fn training_data(data: &Dataset, ranges: &Ranges) -> Result<Dataset> {
    let mut d = data.with_load_before(ranges.test.start())?;
    d.load = fill(&d.load).context("filling load gaps")?;
    d.stations = d
        .stations
        .iter()
        .map(|st| {
            StationWeather::new(
                st.station_id.clone(),
                fill(&st.temperature)?,
                fill(&st.wind_speed)?,
                fill(&st.solar_radiation)?,
            )
        })
        .collect::<Result<_>>()
        .context("filling weather gaps")?;
    Ok(d)
}

fn write_residuals(path: &Path, info: &HyenaTrainInfo) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["date", "period", "stage1_forecast", "actual", "residual"])?;
    for i in 0..info.index.len() {
        let tp = info.index[i];
        w.write_record([
            tp.date.to_string(),
            tp.period.to_string(),
            info.stage1_forecast[i].to_string(),
            info.actual[i].to_string(),
            info.residual[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Fit every configured model on data before the test range and persist the
/// artifacts, training reports, stage-2 targets and the resolved config
/// under `out`.
pub fn cmd_train(config: &PipelineConfig, out: &Path) -> Result<Vec<NamedModel>> {
    config.validate()?;
    let ranges = config.resolve_ranges()?;
    let data = config.load_data().context("loading data")?;
    let data = training_data(&data, &ranges)?;
    let fingerprint = config.fingerprint()?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("config.resolved.toml"), config.to_toml_string()?)?;

    let plan = FitPlan {
        data: &data,
        ranges,
        config,
    };
    let mut names = config.models.clone();
    names.sort();
    names.dedup();
    let mut models = Vec::with_capacity(names.len());
    for name in &names {
        let (model, info) = plan.fit(name).context(format!("training {name}"))?;
        artifact::save(&artifact_path(out, name), name, &fingerprint, &model)?;
        if let Some(report) = model.train_report() {
            std::fs::write(
                out.join(format!("train_report_{name}.json")),
                serde_json::to_string_pretty(report)?,
            )?;
        }
        if let Some(info) = info {
            write_residuals(&out.join("hyena_residuals.csv"), &info)?;
        }
        models.push(model);
    }
    Ok(models)
}

/// Read an artifact of any model kind.
pub fn load_model(path: &Path) -> Result<(NamedModel, String)> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::MissingArtifact(path.to_path_buf()))
        }
        Err(e) => return Err(e.into()),
    };
    let kind = text
        .lines()
        .next()
        .and_then(|h| h.split(' ').find_map(|f| f.strip_prefix("kind=")))
        .ok_or_else(|| Error::ArtifactVersionMismatch("malformed header".into()))?
        .to_string();
    let env: artifact::Envelope<NamedModel> = artifact::decode(&kind, &text)?;
    Ok((env.model, env.fingerprint))
}

/// Backtest the trained models over the test range and write the three
/// report CSVs into `out`.
pub fn cmd_evaluate(config: &PipelineConfig, out: &Path) -> Result<BacktestReport> {
    config.validate()?;
    let ranges = config.resolve_ranges()?;
    let fingerprint = config.fingerprint()?;
    let mut names = config.models.clone();
    names.sort();
    names.dedup();
    let mut models = Vec::with_capacity(names.len());
    for name in &names {
        let (model, fp) = load_model(&artifact_path(out, name))?;
        if fp != fingerprint {
            return Err(Error::ArtifactVersionMismatch(format!(
                "{name} was trained with different settings"
            )));
        }
        models.push(model);
    }
    let data = config.load_data().context("loading data")?;
    let refs: Vec<&dyn Forecaster> = models.iter().map(|m| m as &dyn Forecaster).collect();
    let report = backtest(&refs, &data, ranges.test)?;
    report.write_csvs(out)?;
    Ok(report)
}

/// Day-ahead forecasts from one artifact for every day of `range`, written
/// as `date,period,forecast` rows to `out_file`.
pub fn cmd_forecast(config: &PipelineConfig, artifact: &Path, range: DayRange, out_file: &Path) -> Result<Vec<f64>> {
    config.validate()?;
    let (model, _) = load_model(artifact)?;
    let data = config.load_data().context("loading data")?;
    let mut values = Vec::with_capacity(range.len());
    for day in range.days() {
        let visible = data.with_load_before(TimePoint::day_start(day))?;
        let f = model
            .forecast_day(&DayContext { day, data: &visible })
            .context(format!("forecasting {day}"))?;
        values.extend(f);
    }
    if let Some(dir) = out_file.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(out_file)?;
    w.write_record(["date", "period", "forecast"])?;
    for (tp, v) in range.time_points().iter().zip(&values) {
        w.write_record([tp.date.to_string(), tp.period.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(values)
}

/// Write the configured synthetic dataset (with the pipeline seed) as CSV
/// files plus its ground truth.
pub fn cmd_synth(config: &PipelineConfig, out: &Path) -> Result<()> {
    config.validate()?;
    let spec = config
        .synthetic_spec()
        .ok_or_else(|| Error::Config("`synth` needs a [data.synthetic] section".into()))?;
    let s = generate_synthetic(&spec)?;
    s.dataset.write_files(out)?;
    std::fs::write(out.join("ground_truth.json"), serde_json::to_string_pretty(&s.ground_truth)?)?;
    Ok(())
}

/// Extra-trees importance of the stage-2 candidate features against the
/// stage-1 residual; writes `importance.csv`.
pub fn cmd_importance(config: &PipelineConfig, out: &Path) -> Result<Screening> {
    config.validate()?;
    let ranges = config.resolve_ranges()?;
    let data = training_data(&config.load_data()?, &ranges)?;
    let stage2 = ranges.stage2;
    let lin = fit_stage1(&data, ranges.stage1, config.ridge)?;
    let eps = residual(
        &lin.predict(&data, stage2)?,
        &load_values(&data.load, stage2.start(), stage2.end())?,
    )?;
    let m = exogenous_recipe(&data, stage2.start(), &config.features.lags)?.build(&data, stage2)?;
    let sc = screen_features(
        &m,
        &eps,
        config.features.screen_trees.max(1),
        config.features.screen_threshold,
        config.seed ^ 0x5c4e,
    )?;
    std::fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("importance.csv"))?;
    w.write_record(["feature", "importance", "cumulative", "selected"])?;
    let mut cum = 0.0;
    for (name, v) in sc.importance.ranked() {
        cum += v;
        let selected = sc.selected.contains(&name);
        w.write_record([name, v.to_string(), cum.to_string(), selected.to_string()])?;
    }
    w.flush()?;
    Ok(sc)
}

/// Parse `YYYY-MM-DD`.
pub fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| Error::Config(format!("bad date `{s}`: {e}")))
}

/// Process exit code for an error: 2 configuration, 3 data, 4 artifact.
pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::Config(_) | Error::InvalidSpec(_) => 2,
        Error::Parse { .. }
        | Error::Schema(_)
        | Error::NonMonotonicTime { .. }
        | Error::MissingData(_)
        | Error::NoOverlap
        | Error::EmptyBucket { .. }
        | Error::NonPositiveValue(_)
        | Error::ZeroActual(_)
        | Error::Io(_)
        | Error::Csv(_) => 3,
        Error::MissingArtifact(_) | Error::ArtifactVersionMismatch(_) => 4,
        _ => 1,
    }
}
