//! Trainable forecasters: the two-stage hybrid and the benchmarks, all
//! behind the backtest's [`Forecaster`] trait.

use serde::{Deserialize, Serialize};

use crate::ensembles::{feature_importance, fit_forest, predict_forest, FeatureImportance, Forest, ForestParams};
use crate::error::{Error, Result, ResultExt};
use crate::evaluation::{DayContext, Forecaster};
use crate::features::{standardize, Block, FeatureMatrix, FeatureRecipe, LagSpec, Standardizer, WeatherVars};
use crate::ingest::Dataset;
use crate::linear::{fit_hong_vanilla, fit_stage1, load_values, recompose, residual, SeasonalLinearModel};
use crate::neural::{self, Bridge, Hyper, LstmEncoderDecoder, TrainReport};
use crate::numerics::{pca_fit, pca_transform, PcaTransformParams};
use crate::series::{DayRange, ScaleParams, TimePoint, PERIODS_PER_DAY};

use super::config::NeuralSettings;

/// Exogenous inputs shared by the stage-2 network and the non-linear
/// benchmarks: per-station weather, lagged temperature and solar, installed
/// capacity, clock/season encoding, weekday and holiday dummies. Never load.
pub fn exogenous_recipe(data: &Dataset, trend_origin: TimePoint, lags: &[usize]) -> Result<FeatureRecipe> {
    let mut recipe = FeatureRecipe::new(
        vec![
            Block::Weather(WeatherVars {
                temperature: true,
                solar: true,
                wind: true,
            }),
            Block::Capacity,
            Block::TimeEncoding,
            Block::Weekdays,
            Block::PublicHoliday,
            Block::SchoolHoliday,
        ],
        trend_origin,
    );
    if !lags.is_empty() {
        for st in &data.stations {
            recipe.lags.push(LagSpec::new(format!("{}_temp", st.station_id), lags.iter().copied())?);
            recipe.lags.push(LagSpec::new(format!("{}_solar", st.station_id), lags.iter().copied())?);
        }
    }
    Ok(recipe)
}

/// First day from which a recipe with lags can be built on `data`.
pub fn first_buildable_day(data: &Dataset, recipe: &FeatureRecipe) -> chrono::NaiveDate {
    let lag_days = recipe.max_lag().div_ceil(PERIODS_PER_DAY) as i64;
    let weather_start = data
        .stations
        .iter()
        .map(|s| s.start())
        .max()
        .unwrap_or(data.load.start());
    let first = weather_start.max(data.load.start());
    let first_day = if first.period == 0 {
        first.date
    } else {
        first.date + chrono::Duration::days(1)
    };
    first_day + chrono::Duration::days(lag_days)
}

/// Screen features by extra-trees importance against `target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Screening {
    pub importance: FeatureImportance,
    /// Selected columns in their original order.
    pub selected: Vec<String>,
    pub threshold: f64,
}

pub fn screen_features(m: &FeatureMatrix, target: &[f64], n_trees: usize, threshold: f64, seed: u64) -> Result<Screening> {
    let forest = fit_forest(m, target, &ForestParams::extra_trees(n_trees, seed))?;
    let importance = feature_importance(&forest);
    let selected = if importance.no_splits {
        m.names()
    } else {
        let mut keep = Vec::new();
        let mut cum = 0.0;
        for (name, v) in importance.ranked() {
            if cum >= threshold || v <= 0.0 {
                break;
            }
            cum += v;
            keep.push(name);
        }
        m.names().into_iter().filter(|n| keep.contains(n)).collect()
    };
    Ok(Screening {
        importance,
        selected,
        threshold,
    })
}

/// An LSTM sequence model over standardized (optionally PCA-reduced) inputs
/// with a min-max scaled (optionally log-transformed) target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceModel {
    pub recipe: FeatureRecipe,
    pub standardizer: Standardizer,
    pub pca: Option<PcaTransformParams>,
    pub log_target: bool,
    pub target_scale: ScaleParams,
    pub net: LstmEncoderDecoder,
    pub report: TrainReport,
    pub train_range: DayRange,
}

pub struct SequenceSpec<'a> {
    pub recipe: FeatureRecipe,
    pub pca_k: Option<usize>,
    pub log_target: bool,
    pub bridge: Bridge,
    pub settings: &'a NeuralSettings,
    pub seed: u64,
}

impl SequenceModel {
    /// Fit on whole days of `range`; `target` holds one value per half-hour.
    pub fn fit(data: &Dataset, range: DayRange, target: &[f64], spec: SequenceSpec) -> Result<Self> {
        let raw = spec.recipe.build(data, range)?;
        let (std_m, standardizer) = standardize(&raw, 0..raw.n_rows())?;
        let (inputs, pca) = match spec.pca_k {
            Some(k) => {
                let p = pca_fit(&std_m, k)?;
                (pca_transform(&p, &std_m)?, Some(p))
            }
            None => (std_m, None),
        };
        let t: Vec<f64> = if spec.log_target {
            target
                .iter()
                .enumerate()
                .map(|(i, &v)| if v > 0.0 { Ok(v.ln()) } else { Err(Error::NonPositiveValue(i)) })
                .collect::<Result<_>>()?
        } else {
            target.to_vec()
        };
        let target_scale = ScaleParams::fit_minmax(&t)?;
        let scaled = target_scale.forward_all(&t);
        let windows = neural::window(&inputs, &scaled, PERIODS_PER_DAY)?;
        let s = spec.settings;
        let hyper = Hyper {
            timesteps: PERIODS_PER_DAY,
            input_dim: inputs.n_cols(),
            hidden_dim: s.hidden_dim,
            lr: s.lr,
            batch_size: s.batch_size,
            max_epochs: s.max_epochs,
            patience: s.patience,
            seed: spec.seed,
            bridge: spec.bridge,
        };
        let (net, report) = neural::train(LstmEncoderDecoder::new(hyper), &windows, s.validation_fraction)?;
        Ok(Self {
            recipe: spec.recipe,
            standardizer,
            pca,
            log_target: spec.log_target,
            target_scale,
            net,
            report,
            train_range: range,
        })
    }

    pub fn inputs(&self, data: &Dataset, range: DayRange) -> Result<FeatureMatrix> {
        let m = self.standardizer.apply(&self.recipe.build(data, range)?)?;
        match &self.pca {
            Some(p) => pca_transform(p, &m),
            None => Ok(m),
        }
    }

    /// Forecasts over whole days of `range`, on the original target scale.
    pub fn predict(&self, data: &Dataset, range: DayRange) -> Result<Vec<f64>> {
        let m = self.inputs(data, range)?;
        let windows = neural::window(&m, &vec![0.0; m.n_rows()], PERIODS_PER_DAY)?;
        let scaled = neural::predict(&self.net, &windows)?;
        let mut out = self.target_scale.inverse_all(&scaled);
        if self.log_target {
            out.iter_mut().for_each(|v| *v = v.exp());
        }
        Ok(out)
    }
}

/// The two-stage hybrid: a seasonal linear forecast corrected by an LSTM
/// encoder-decoder forecast of its residual, `ŷ − ε̂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyenaModel {
    pub stage1: SeasonalLinearModel,
    pub stage2: SequenceModel,
    pub screening: Option<Screening>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyenaTrainInfo {
    pub index: Vec<TimePoint>,
    pub stage1_forecast: Vec<f64>,
    pub actual: Vec<f64>,
    /// Stage-2 target, `stage1_forecast − actual`.
    pub residual: Vec<f64>,
}

pub struct HyenaSettings<'a> {
    pub ridge: f64,
    pub lags: &'a [usize],
    pub screen: Option<(usize, f64)>,
    pub neural: &'a NeuralSettings,
    pub seed: u64,
}

impl HyenaModel {
    pub fn fit(data: &Dataset, stage1: DayRange, stage2: DayRange, s: HyenaSettings) -> Result<(Self, HyenaTrainInfo)> {
        let lin = fit_stage1(data, stage1, s.ridge).context("stage 1")?;
        let yhat = lin.predict(data, stage2).context("stage-1 forecast over the stage-2 range")?;
        let y = load_values(&data.load, stage2.start(), stage2.end())?;
        let eps = residual(&yhat, &y)?;

        let mut recipe = exogenous_recipe(data, stage2.start(), s.lags)?;
        let screening = match s.screen {
            Some((trees, threshold)) => {
                let m = recipe.build(data, stage2)?;
                let sc = screen_features(&m, &eps, trees, threshold, s.seed ^ 0x5c4e)?;
                recipe.columns = Some(sc.selected.clone());
                Some(sc)
            }
            None => None,
        };
        let stage2_model = SequenceModel::fit(
            data,
            stage2,
            &eps,
            SequenceSpec {
                recipe,
                pca_k: None,
                log_target: false,
                bridge: Bridge::RepeatFinal,
                settings: s.neural,
                seed: s.seed,
            },
        )
        .context("stage 2")?;
        let info = HyenaTrainInfo {
            index: stage2.time_points(),
            stage1_forecast: yhat,
            actual: y,
            residual: eps,
        };
        Ok((
            Self {
                stage1: lin,
                stage2: stage2_model,
                screening,
            },
            info,
        ))
    }

    pub fn residual_scaler(&self) -> ScaleParams {
        self.stage2.target_scale
    }

    pub fn predict(&self, data: &Dataset, range: DayRange) -> Result<Vec<f64>> {
        let yhat = self.stage1.predict(data, range)?;
        let eps_hat = self.stage2.predict(data, range)?;
        recompose(&yhat, &eps_hat)
    }
}

/// Random-forest benchmark on the exogenous feature set (trees are invariant
/// to per-column affine scaling, so inputs are used unscaled).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub recipe: FeatureRecipe,
    pub forest: Forest,
    pub train_range: DayRange,
}

impl ForestModel {
    pub fn fit(data: &Dataset, range: DayRange, lags: &[usize], params: &ForestParams) -> Result<Self> {
        let recipe = exogenous_recipe(data, range.start(), lags)?;
        let m = recipe.build(data, range)?;
        let y = load_values(&data.load, range.start(), range.end())?;
        Ok(Self {
            forest: fit_forest(&m, &y, params)?,
            recipe,
            train_range: range,
        })
    }

    pub fn predict(&self, data: &Dataset, range: DayRange) -> Result<Vec<f64>> {
        predict_forest(&self.forest, &self.recipe.build(data, range)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelKind {
    Hyena(HyenaModel),
    Linear(SeasonalLinearModel),
    Forest(ForestModel),
    Sequence(SequenceModel),
}

/// A trained model with the name it is reported under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedModel {
    pub name: String,
    pub trained_through: TimePoint,
    pub model: ModelKind,
}

impl NamedModel {
    pub fn predict(&self, data: &Dataset, range: DayRange) -> Result<Vec<f64>> {
        match &self.model {
            ModelKind::Hyena(m) => m.predict(data, range),
            ModelKind::Linear(m) => m.predict(data, range),
            ModelKind::Forest(m) => m.predict(data, range),
            ModelKind::Sequence(m) => m.predict(data, range),
        }
    }

    pub fn train_report(&self) -> Option<&TrainReport> {
        match &self.model {
            ModelKind::Hyena(m) => Some(&m.stage2.report),
            ModelKind::Sequence(m) => Some(&m.report),
            _ => None,
        }
    }
}

impl Forecaster for NamedModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn trained_through(&self) -> TimePoint {
        self.trained_through
    }

    fn forecast_day(&self, ctx: &DayContext) -> Result<Vec<f64>> {
        self.predict(ctx.data, DayRange::new(ctx.day, ctx.day)?)
    }
}

/// Everything needed to fit the models of one run.
pub struct FitPlan<'a> {
    pub data: &'a Dataset,
    pub ranges: super::config::Ranges,
    pub config: &'a super::config::PipelineConfig,
}

impl FitPlan<'_> {
    /// Range the benchmarks train on: all pre-test days on which the
    /// exogenous features can be built.
    pub fn benchmark_range(&self) -> Result<DayRange> {
        let pre = self.ranges.pre_test();
        let recipe = exogenous_recipe(self.data, pre.start(), &self.config.features.lags)?;
        let first = first_buildable_day(self.data, &recipe).max(pre.first);
        DayRange::new(first, pre.last)
    }

    fn seed(&self, offset: u64) -> u64 {
        self.config.seed.wrapping_add(offset)
    }

    pub fn fit(&self, name: &str) -> Result<(NamedModel, Option<HyenaTrainInfo>)> {
        let c = self.config;
        let through = self.ranges.pre_test().end();
        let mut info = None;
        let model = match name {
            "hyena" => {
                let screen = c
                    .features
                    .screen
                    .then_some((c.features.screen_trees, c.features.screen_threshold));
                let (m, i) = HyenaModel::fit(
                    self.data,
                    self.ranges.stage1,
                    self.ranges.stage2,
                    HyenaSettings {
                        ridge: c.ridge,
                        lags: &c.features.lags,
                        screen,
                        neural: &c.neural,
                        seed: self.seed(0),
                    },
                )?;
                info = Some(i);
                ModelKind::Hyena(m)
            }
            "hong_vanilla" => ModelKind::Linear(fit_hong_vanilla(self.data, self.ranges.pre_test(), c.ridge)?),
            "random_forest" => ModelKind::Forest(ForestModel::fit(
                self.data,
                self.benchmark_range()?,
                &c.features.lags,
                &c.forest.params(self.seed(3)),
            )?),
            "lstm" | "lstm_ae" => {
                let range = self.benchmark_range()?;
                let y = load_values(&self.data.load, range.start(), range.end())?;
                let plain = name == "lstm";
                ModelKind::Sequence(SequenceModel::fit(
                    self.data,
                    range,
                    &y,
                    SequenceSpec {
                        recipe: exogenous_recipe(self.data, range.start(), &c.features.lags)?,
                        pca_k: plain.then_some(c.features.pca_k),
                        log_target: true,
                        bridge: if plain { Bridge::PerStep } else { Bridge::RepeatFinal },
                        settings: &c.neural,
                        seed: self.seed(if plain { 1 } else { 2 }),
                    },
                )?)
            }
            other => return Err(Error::Config(format!("unknown model `{other}`"))),
        };
        Ok((
            NamedModel {
                name: name.to_string(),
                trained_through: through,
                model,
            },
            info,
        ))
    }
}
