//! Named design matrices and the builders that fill them.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::f64::consts::PI;
use std::ops::Range;
use std::path::Path;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Dataset, HolidayCalendar};
use crate::series::{DayRange, HalfHourSeries, TimePoint, PERIODS_PER_DAY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnKind {
    /// Binary 0/1 indicator; passed through by [`standardize`].
    Dummy,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub values: Vec<f64>,
}

/// Column-major design matrix aligned to a time index.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureMatrix {
    index: Vec<TimePoint>,
    columns: Vec<Column>,
}

impl FeatureMatrix {
    pub fn new(index: Vec<TimePoint>) -> Self {
        Self {
            index,
            columns: Vec::new(),
        }
    }

    /// Build from row-major data with the given column names (all continuous).
    pub fn from_rows(index: Vec<TimePoint>, names: &[&str], rows: &[Vec<f64>]) -> Result<Self> {
        let mut m = Self::new(index);
        for (j, name) in names.iter().enumerate() {
            let col = rows.iter().map(|r| r[j]).collect();
            m.push(*name, ColumnKind::Continuous, col)?;
        }
        Ok(m)
    }

    pub fn push(&mut self, name: impl Into<String>, kind: ColumnKind, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if values.len() != self.index.len() {
            return Err(Error::DimensionMismatch(format!(
                "column `{name}` has {} rows, index has {}",
                values.len(),
                self.index.len()
            )));
        }
        if self.columns.iter().any(|c| c.name == name) {
            return Err(Error::DuplicateColumn(name));
        }
        self.columns.push(Column { name, kind, values });
        Ok(())
    }

    pub fn index(&self) -> &[TimePoint] {
        &self.index
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.index.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn values(&self, j: usize) -> &[f64] {
        &self.columns[j].values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.columns[col].values[row]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c.values[i]).collect()
    }

    /// Row-major copy of the data.
    pub fn to_row_major(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows()).map(|i| self.row(i)).collect()
    }

    /// Keep only `names`, in that order.
    pub fn select(&self, names: &[String]) -> Result<Self> {
        let mut out = Self::new(self.index.clone());
        for n in names {
            let c = self
                .column(n)
                .ok_or_else(|| Error::UnknownColumn(n.clone()))?;
            out.columns.push(c.clone());
        }
        Ok(out)
    }

    pub fn drop_columns(&self, names: &[String]) -> Self {
        Self {
            index: self.index.clone(),
            columns: self
                .columns
                .iter()
                .filter(|c| !names.contains(&c.name))
                .cloned()
                .collect(),
        }
    }

    pub fn slice_rows(&self, rows: Range<usize>) -> Self {
        Self {
            index: self.index[rows.clone()].to_vec(),
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    kind: c.kind,
                    values: c.values[rows.clone()].to_vec(),
                })
                .collect(),
        }
    }

    /// Rows whose time point lies in `[from, to)`.
    pub fn slice_time(&self, from: TimePoint, to: TimePoint) -> Self {
        let a = self.index.partition_point(|t| *t < from);
        let b = self.index.partition_point(|t| *t < to);
        self.slice_rows(a..b.max(a))
    }

    /// Write as CSV with leading `date,period` columns.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["date".to_string(), "period".to_string()];
        header.extend(self.names());
        w.write_record(&header)?;
        for (i, tp) in self.index.iter().enumerate() {
            let mut rec = vec![tp.date.to_string(), tp.period.to_string()];
            rec.extend(self.columns.iter().map(|c| c.values[i].to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Lagged copies of one column, in half-hour steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagSpec {
    pub variable: String,
    pub lags: BTreeSet<usize>,
}

impl LagSpec {
    pub fn new(variable: impl Into<String>, lags: impl IntoIterator<Item = usize>) -> Result<Self> {
        let variable = variable.into();
        let lags: BTreeSet<usize> = lags.into_iter().collect();
        if lags.is_empty() || lags.contains(&0) {
            return Err(Error::Config(format!(
                "lag set for `{variable}` must be non-empty with all lags >= 1"
            )));
        }
        Ok(Self { variable, lags })
    }

    pub fn max_lag(&self) -> usize {
        self.lags.iter().next_back().copied().unwrap_or(0)
    }
}

fn dummy(flag: bool) -> f64 {
    if flag {
        1.0
    } else {
        0.0
    }
}

fn weekday_index(tp: &TimePoint) -> usize {
    tp.date.weekday().num_days_from_monday() as usize
}

/// Month dummies `M_2..M_12` (January is the reference level).
pub fn month_dummies(index: &[TimePoint], m: &mut FeatureMatrix) -> Result<()> {
    for month in 2..=12 {
        let col = index.iter().map(|t| dummy(t.month() == month)).collect();
        m.push(format!("M_{month}"), ColumnKind::Dummy, col)?;
    }
    Ok(())
}

/// Weekday dummies `wd_2..wd_7` (ISO numbering, Monday is the reference level).
pub fn weekday_dummies(index: &[TimePoint], m: &mut FeatureMatrix) -> Result<()> {
    for wd in 1..7 {
        let col = index.iter().map(|t| dummy(weekday_index(t) == wd)).collect();
        m.push(format!("wd_{}", wd + 1), ColumnKind::Dummy, col)?;
    }
    Ok(())
}

/// Period dummies `tod_1..tod_47` (period 0 is the reference level).
pub fn tod_dummies(index: &[TimePoint], m: &mut FeatureMatrix) -> Result<()> {
    for p in 1..PERIODS_PER_DAY as u8 {
        let col = index.iter().map(|t| dummy(t.period == p)).collect();
        m.push(format!("tod_{p}"), ColumnKind::Dummy, col)?;
    }
    Ok(())
}

/// `Trend`: half-hours elapsed since `origin`.
pub fn trend(index: &[TimePoint], origin: TimePoint, m: &mut FeatureMatrix) -> Result<()> {
    let col = index.iter().map(|t| t.steps_since(origin) as f64).collect();
    m.push("Trend", ColumnKind::Continuous, col)
}

/// Month, weekday and period dummies plus the trend counter.
pub fn calendar_features(index: &[TimePoint], trend_origin: TimePoint) -> Result<FeatureMatrix> {
    let mut m = FeatureMatrix::new(index.to_vec());
    month_dummies(index, &mut m)?;
    weekday_dummies(index, &mut m)?;
    tod_dummies(index, &mut m)?;
    trend(index, trend_origin, &mut m)?;
    Ok(m)
}

/// `h_public` and `h_school`, constant within a day.
pub fn holiday_features(index: &[TimePoint], cal: &HolidayCalendar) -> Result<FeatureMatrix> {
    let mut m = FeatureMatrix::new(index.to_vec());
    let public = index.iter().map(|t| dummy(cal.is_public(t.date))).collect();
    let school = index.iter().map(|t| dummy(cal.is_school(t.date))).collect();
    m.push("h_public", ColumnKind::Dummy, public)?;
    m.push("h_school", ColumnKind::Dummy, school)?;
    Ok(m)
}

/// Columns `name` and `name2` holding T and T² (no centering).
pub fn temperature_polynomial(temp: &HalfHourSeries, name: &str) -> Result<FeatureMatrix> {
    let mut m = FeatureMatrix::new(temp.time_points());
    m.push(name, ColumnKind::Continuous, temp.values().to_vec())?;
    let sq = temp.values().iter().map(|t| t * t).collect();
    m.push(format!("{name}2"), ColumnKind::Continuous, sq)?;
    Ok(m)
}

/// Smooth clock and season encodings: `period`, `tod_sin`, `tod_cos`,
/// `doy_sin`, `doy_cos`.
pub fn time_encoding(index: &[TimePoint]) -> Result<FeatureMatrix> {
    let mut m = FeatureMatrix::new(index.to_vec());
    let tod = |t: &TimePoint| 2.0 * PI * t.period as f64 / PERIODS_PER_DAY as f64;
    let doy = |t: &TimePoint| 2.0 * PI * (t.date.ordinal0() as f64) / 365.25;
    m.push("period", ColumnKind::Continuous, index.iter().map(|t| t.period as f64).collect())?;
    m.push("tod_sin", ColumnKind::Continuous, index.iter().map(|t| tod(t).sin()).collect())?;
    m.push("tod_cos", ColumnKind::Continuous, index.iter().map(|t| tod(t).cos()).collect())?;
    m.push("doy_sin", ColumnKind::Continuous, index.iter().map(|t| doy(t).sin()).collect())?;
    m.push("doy_cos", ColumnKind::Continuous, index.iter().map(|t| doy(t).cos()).collect())?;
    Ok(m)
}

/// `C_solar` and `C_wind` from the daily capacity table.
pub fn capacity_features(index: &[TimePoint], data: &Dataset) -> Result<FeatureMatrix> {
    let mut solar = Vec::with_capacity(index.len());
    let mut wind = Vec::with_capacity(index.len());
    for t in index {
        let rec = data
            .capacity_on(t.date)
            .ok_or_else(|| Error::MissingData(format!("no capacity record on or before {}", t.date)))?;
        solar.push(rec.solar_capacity_mw);
        wind.push(rec.wind_capacity_mw);
    }
    let mut m = FeatureMatrix::new(index.to_vec());
    m.push("C_solar", ColumnKind::Continuous, solar)?;
    m.push("C_wind", ColumnKind::Continuous, wind)?;
    Ok(m)
}

fn series_window(s: &HalfHourSeries, from: TimePoint, to: TimePoint, what: &str) -> Result<Vec<f64>> {
    let w = s
        .slice_time(from, to)
        .map_err(|_| Error::MissingData(format!("{what} does not cover {from}..{to}")))?;
    if let Some(i) = w.missing().iter().position(|&m| m) {
        return Err(Error::MissingData(format!("{what} has a gap at {}", w.time_at(i))));
    }
    Ok(w.values().to_vec())
}

/// Per-station weather columns `<id>_temp`, `<id>_solar`, `<id>_wind` over
/// the contiguous range `[from, to)`.
pub fn weather_features(data: &Dataset, from: TimePoint, to: TimePoint, which: WeatherVars) -> Result<FeatureMatrix> {
    let index: Vec<TimePoint> = (0..to.steps_since(from)).map(|i| from.offset(i)).collect();
    let mut m = FeatureMatrix::new(index);
    for st in &data.stations {
        let id = &st.station_id;
        if which.temperature {
            let v = series_window(&st.temperature, from, to, &format!("{id} temperature"))?;
            m.push(format!("{id}_temp"), ColumnKind::Continuous, v)?;
        }
        if which.solar {
            let v = series_window(&st.solar_radiation, from, to, &format!("{id} solar"))?;
            m.push(format!("{id}_solar"), ColumnKind::Continuous, v)?;
        }
        if which.wind {
            let v = series_window(&st.wind_speed, from, to, &format!("{id} wind"))?;
            m.push(format!("{id}_wind"), ColumnKind::Continuous, v)?;
        }
    }
    Ok(m)
}

/// Station-mean temperature over `[from, to)`.
pub fn mean_temperature(data: &Dataset, from: TimePoint, to: TimePoint) -> Result<Vec<f64>> {
    if data.stations.is_empty() {
        return Err(Error::DimensionMismatch("no temperature series supplied".into()));
    }
    let n = to.steps_since(from) as usize;
    let mut acc = vec![0.0; n];
    for st in &data.stations {
        let v = series_window(&st.temperature, from, to, &format!("{} temperature", st.station_id))?;
        for (a, b) in acc.iter_mut().zip(v) {
            *a += b;
        }
    }
    let k = data.stations.len() as f64;
    acc.iter_mut().for_each(|a| *a /= k);
    Ok(acc)
}

/// Add `<var>_lag<k>` columns and drop the first max-lag rows so every
/// remaining row has real lagged values.
pub fn lag_features(m: &FeatureMatrix, specs: &[LagSpec]) -> Result<FeatureMatrix> {
    let max_lag = specs.iter().map(LagSpec::max_lag).max().unwrap_or(0);
    if max_lag >= m.n_rows() {
        return Err(Error::LagTooLarge {
            lag: max_lag,
            len: m.n_rows(),
        });
    }
    let rows = max_lag..m.n_rows();
    let mut out = m.slice_rows(rows.clone());
    for spec in specs {
        let src = m
            .column(&spec.variable)
            .ok_or_else(|| Error::UnknownColumn(spec.variable.clone()))?;
        for &k in &spec.lags {
            let values = rows.clone().map(|i| src.values[i - k]).collect();
            out.push(format!("{}_lag{k}", spec.variable), src.kind, values)?;
        }
    }
    Ok(out)
}

/// Concatenate columns over the intersection of the blocks' indexes.
pub fn assemble(blocks: &[FeatureMatrix]) -> Result<FeatureMatrix> {
    let Some(first) = blocks.first() else {
        return Err(Error::NoOverlap);
    };
    let mut common: Vec<TimePoint> = first.index.clone();
    for b in &blocks[1..] {
        if b.index != common {
            let set: HashSet<TimePoint> = b.index.iter().copied().collect();
            common.retain(|t| set.contains(t));
        }
    }
    if common.is_empty() {
        return Err(Error::NoOverlap);
    }
    let mut out = FeatureMatrix::new(common.clone());
    for b in blocks {
        let rows: Vec<usize> = if b.index == common {
            (0..common.len()).collect()
        } else {
            let pos: HashMap<TimePoint, usize> =
                b.index.iter().enumerate().map(|(i, t)| (*t, i)).collect();
            common.iter().map(|t| pos[t]).collect()
        };
        for c in &b.columns {
            let values = rows.iter().map(|&i| c.values[i]).collect();
            out.push(c.name.clone(), c.kind, values)?;
        }
    }
    Ok(out)
}

/// Per-column affine scaling fitted on a subset of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub passthrough: Vec<bool>,
}

impl Standardizer {
    pub fn apply(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        if m.names() != self.names {
            return Err(Error::ColumnMismatch {
                expected: self.names.clone(),
                actual: m.names(),
            });
        }
        let mut out = FeatureMatrix::new(m.index.clone());
        for (j, c) in m.columns.iter().enumerate() {
            let values = if self.passthrough[j] {
                c.values.clone()
            } else {
                c.values
                    .iter()
                    .map(|v| (v - self.mean[j]) / self.sd[j])
                    .collect()
            };
            out.columns.push(Column {
                name: c.name.clone(),
                kind: c.kind,
                values,
            });
        }
        Ok(out)
    }
}

/// Standardize non-dummy columns with mean and sample sd (n − 1) of the
/// `fit_rows`. Dummy columns pass through unchanged.
pub fn standardize(m: &FeatureMatrix, fit_rows: Range<usize>) -> Result<(FeatureMatrix, Standardizer)> {
    let n = fit_rows.len();
    if n < 2 || fit_rows.end > m.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "standardize needs >= 2 fit rows within {} rows, got {fit_rows:?}",
            m.n_rows()
        )));
    }
    let mut st = Standardizer {
        names: m.names(),
        mean: Vec::with_capacity(m.n_cols()),
        sd: Vec::with_capacity(m.n_cols()),
        passthrough: Vec::with_capacity(m.n_cols()),
    };
    for c in &m.columns {
        let x = &c.values[fit_rows.clone()];
        if c.kind == ColumnKind::Dummy {
            st.mean.push(0.0);
            st.sd.push(1.0);
            st.passthrough.push(true);
            continue;
        }
        let mean = x.iter().sum::<f64>() / n as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        if !(sd > 1e-12 * mean.abs().max(1.0)) {
            return Err(Error::ZeroVariance(c.name.clone()));
        }
        st.mean.push(mean);
        st.sd.push(sd);
        st.passthrough.push(false);
    }
    Ok((st.apply(m)?, st))
}

/// GEFCom-style "vanilla" regressors: trend, month dummies, weekday×period
/// interaction dummies, a cubic in (centered) temperature and its month and
/// period interactions.
pub fn hong_vanilla_features(index: &[TimePoint], temp: &[f64], temp_center: f64, trend_origin: TimePoint) -> Result<FeatureMatrix> {
    if temp.len() != index.len() {
        return Err(Error::DimensionMismatch(format!(
            "temperature has {} rows, index has {}",
            temp.len(),
            index.len()
        )));
    }
    let mut m = FeatureMatrix::new(index.to_vec());
    trend(index, trend_origin, &mut m)?;
    month_dummies(index, &mut m)?;
    for wd in 0..7 {
        for p in 0..PERIODS_PER_DAY {
            if wd == 0 && p == 0 {
                continue;
            }
            let col = index
                .iter()
                .map(|t| dummy(weekday_index(t) == wd && t.period as usize == p))
                .collect();
            m.push(format!("wd{}_tod{p}", wd + 1), ColumnKind::Dummy, col)?;
        }
    }
    let powers: Vec<[f64; 3]> = temp
        .iter()
        .map(|t| {
            let x = t - temp_center;
            [x, x * x, x * x * x]
        })
        .collect();
    for k in 0..3 {
        m.push(format!("T^{}", k + 1), ColumnKind::Continuous, powers.iter().map(|p| p[k]).collect())?;
    }
    for month in 2..=12 {
        for k in 0..3 {
            let col = index
                .iter()
                .zip(&powers)
                .map(|(t, p)| if t.month() == month { p[k] } else { 0.0 })
                .collect();
            m.push(format!("M_{month}xT^{}", k + 1), ColumnKind::Continuous, col)?;
        }
    }
    for period in 1..PERIODS_PER_DAY as u8 {
        for k in 0..3 {
            let col = index
                .iter()
                .zip(&powers)
                .map(|(t, p)| if t.period == period { p[k] } else { 0.0 })
                .collect();
            m.push(format!("tod_{period}xT^{}", k + 1), ColumnKind::Continuous, col)?;
        }
    }
    Ok(m)
}

/// Which weather variables to draw per station.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeatherVars {
    pub temperature: bool,
    pub solar: bool,
    pub wind: bool,
}

/// One group of columns produced by a [`FeatureRecipe`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Block {
    Months,
    Weekdays,
    TimeOfDay,
    Trend,
    PublicHoliday,
    SchoolHoliday,
    Capacity,
    TimeEncoding,
    Weather(WeatherVars),
    /// Station-mean temperature and its square (`T`, `T2`).
    TemperaturePolynomial,
    HongVanilla { temp_center: f64 },
}

/// Reproducible feature construction: which blocks, which lags, and the
/// final column selection a model was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecipe {
    pub blocks: Vec<Block>,
    pub lags: Vec<LagSpec>,
    pub trend_origin: TimePoint,
    /// Final column set in order; `None` keeps everything built.
    pub columns: Option<Vec<String>>,
}

impl FeatureRecipe {
    pub fn new(blocks: Vec<Block>, trend_origin: TimePoint) -> Self {
        Self {
            blocks,
            lags: Vec::new(),
            trend_origin,
            columns: None,
        }
    }

    pub fn max_lag(&self) -> usize {
        self.lags.iter().map(LagSpec::max_lag).max().unwrap_or(0)
    }

    /// Build the matrix for the half-hours of `range`.
    pub fn build(&self, data: &Dataset, range: DayRange) -> Result<FeatureMatrix> {
        self.build_span(data, range.start(), range.end())
    }

    pub fn build_span(&self, data: &Dataset, from: TimePoint, to: TimePoint) -> Result<FeatureMatrix> {
        let max_lag = self.max_lag();
        let ext = from.offset(-(max_lag as i64));
        let index: Vec<TimePoint> = (0..to.steps_since(ext)).map(|i| ext.offset(i)).collect();
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let block = match b {
                Block::Months => {
                    let mut m = FeatureMatrix::new(index.clone());
                    month_dummies(&index, &mut m)?;
                    m
                }
                Block::Weekdays => {
                    let mut m = FeatureMatrix::new(index.clone());
                    weekday_dummies(&index, &mut m)?;
                    m
                }
                Block::TimeOfDay => {
                    let mut m = FeatureMatrix::new(index.clone());
                    tod_dummies(&index, &mut m)?;
                    m
                }
                Block::Trend => {
                    let mut m = FeatureMatrix::new(index.clone());
                    trend(&index, self.trend_origin, &mut m)?;
                    m
                }
                Block::PublicHoliday => holiday_features(&index, &data.holidays)?
                    .select(&["h_public".to_string()])?,
                Block::SchoolHoliday => holiday_features(&index, &data.holidays)?
                    .select(&["h_school".to_string()])?,
                Block::Capacity => capacity_features(&index, data)?,
                Block::TimeEncoding => time_encoding(&index)?,
                Block::Weather(which) => weather_features(data, ext, to, *which)?,
                Block::TemperaturePolynomial => {
                    let t = mean_temperature(data, ext, to)?;
                    let s = HalfHourSeries::new(ext, t, crate::series::Unit::Kelvin);
                    temperature_polynomial(&s, "T")?
                }
                Block::HongVanilla { temp_center } => {
                    let t = mean_temperature(data, ext, to)?;
                    hong_vanilla_features(&index, &t, *temp_center, self.trend_origin)?
                }
            };
            blocks.push(block);
        }
        let mut m = assemble(&blocks)?;
        if max_lag > 0 {
            m = lag_features(&m, &self.lags)?;
        }
        match &self.columns {
            Some(cols) => m.select(cols),
            None => Ok(m),
        }
    }
}
