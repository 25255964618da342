//! File loaders for load, weather, capacity and holiday data, their writers,
//! and a seeded synthetic dataset generator with known ground truth.
//!
//! File formats (all comma separated, `.` decimal separator, empty field =
//! missing value):
//!
//! | file     | header                                               | rows        |
//! |----------|------------------------------------------------------|-------------|
//! | load     | `date,period,load_mw`                                | half-hourly |
//! | weather  | `station_id,datetime_utc,temperature_k,wind_ms,solar_wm2` | hourly |
//! | capacity | `date,solar_mw,wind_mw`                              | daily       |
//! | holidays | `date,kind` (`public` or `school`)                   | one per day |

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fs::File;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{HalfHourSeries, TimePoint, Unit, PERIODS_PER_DAY};

/// Weather observations for one station, upsampled to half-hourly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationWeather {
    pub station_id: String,
    pub temperature: HalfHourSeries,
    pub wind_speed: HalfHourSeries,
    pub solar_radiation: HalfHourSeries,
}

impl StationWeather {
    pub fn new(
        station_id: impl Into<String>,
        temperature: HalfHourSeries,
        wind_speed: HalfHourSeries,
        solar_radiation: HalfHourSeries,
    ) -> Result<Self> {
        let aligned = [&wind_speed, &solar_radiation]
            .iter()
            .all(|s| s.start() == temperature.start() && s.len() == temperature.len());
        if !aligned {
            return Err(Error::DimensionMismatch(
                "station series must share start and length".into(),
            ));
        }
        Ok(Self {
            station_id: station_id.into(),
            temperature,
            wind_speed,
            solar_radiation,
        })
    }

    pub fn start(&self) -> TimePoint {
        self.temperature.start()
    }

    pub fn end(&self) -> TimePoint {
        self.temperature.end()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HolidayCalendar {
    pub public_holidays: BTreeSet<NaiveDate>,
    pub school_holidays: BTreeSet<NaiveDate>,
}

impl HolidayCalendar {
    pub fn is_public(&self, date: NaiveDate) -> bool {
        self.public_holidays.contains(&date)
    }

    pub fn is_school(&self, date: NaiveDate) -> bool {
        self.school_holidays.contains(&date)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityRecord {
    pub date: NaiveDate,
    pub solar_capacity_mw: f64,
    pub wind_capacity_mw: f64,
}

/// Everything the models consume.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub load: HalfHourSeries,
    pub stations: Vec<StationWeather>,
    pub holidays: HolidayCalendar,
    pub capacity: Vec<CapacityRecord>,
}

/// Paths of the four input files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataPaths {
    pub load: std::path::PathBuf,
    pub weather: std::path::PathBuf,
    pub capacity: std::path::PathBuf,
    pub holidays: std::path::PathBuf,
}

impl Dataset {
    pub fn load_files(paths: &DataPaths) -> Result<Self> {
        Ok(Self {
            load: load_load_csv(&paths.load)?,
            stations: load_weather_csv(&paths.weather)?,
            holidays: load_holidays_csv(&paths.holidays)?,
            capacity: load_capacity_csv(&paths.capacity)?,
        })
    }

    /// Write the dataset as the four CSV files into `dir`.
    pub fn write_files(&self, dir: &Path) -> Result<DataPaths> {
        std::fs::create_dir_all(dir)?;
        let paths = DataPaths {
            load: dir.join("load.csv"),
            weather: dir.join("weather.csv"),
            capacity: dir.join("capacity.csv"),
            holidays: dir.join("holidays.csv"),
        };
        write_load_csv(&self.load, &paths.load)?;
        write_weather_csv(&self.stations, &paths.weather)?;
        write_capacity_csv(&self.capacity, &paths.capacity)?;
        write_holidays_csv(&self.holidays, &paths.holidays)?;
        Ok(paths)
    }

    /// Capacity on `date`, carrying the last record forward past the end.
    pub fn capacity_on(&self, date: NaiveDate) -> Option<CapacityRecord> {
        let i = self.capacity.partition_point(|r| r.date <= date);
        (i > 0).then(|| self.capacity[i - 1])
    }

    /// Copy with the load truncated to end before `cutoff`.
    pub fn with_load_before(&self, cutoff: TimePoint) -> Result<Self> {
        let end = cutoff.min(self.load.end());
        let mut out = self.clone();
        out.load = self.load.slice_time(self.load.start(), end)?;
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// parsing helpers

fn parse_err(path: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        reason: reason.into(),
    }
}

fn open(path: &Path, expected: &[&str]) -> Result<csv::Reader<File>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = rdr.headers()?.clone();
    for (i, name) in expected.iter().enumerate() {
        if headers.get(i) != Some(*name) {
            return Err(Error::Schema(
                headers.get(i).unwrap_or(name).to_string(),
            ));
        }
    }
    if headers.len() != expected.len() {
        return Err(Error::Schema(
            headers.get(expected.len()).unwrap_or("?").to_string(),
        ));
    }
    Ok(rdr)
}

fn parse_date(path: &Path, line: usize, s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|e| parse_err(path, line, format!("bad date `{s}`: {e}")))
}

fn parse_opt_f64(path: &Path, line: usize, s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    let v: f64 = s
        .parse()
        .map_err(|_| parse_err(path, line, format!("bad number `{s}`")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("non-finite number `{s}`")));
    }
    Ok(Some(v))
}

fn parse_datetime(path: &Path, line: usize, s: &str) -> Result<NaiveDateTime> {
    const FORMATS: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ];
    let s = s.trim_end_matches('Z');
    FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .ok_or_else(|| parse_err(path, line, format!("bad datetime `{s}`")))
}

fn last_sunday(year: i32, month: u32) -> NaiveDate {
    let first_next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)
    }
    .expect("valid month");
    let mut d = first_next - Duration::days(1);
    while d.weekday() != Weekday::Sun {
        d -= Duration::days(1);
    }
    d
}

/// Stretch or squeeze a local-time day of `n` periods onto 48 UTC periods by
/// linear interpolation at period midpoints.
fn normalize_day(values: &[Option<f64>]) -> Vec<Option<f64>> {
    let n = values.len();
    if n == PERIODS_PER_DAY {
        return values.to_vec();
    }
    (0..PERIODS_PER_DAY)
        .map(|p| {
            let pos = ((p as f64 + 0.5) * n as f64 / PERIODS_PER_DAY as f64 - 0.5)
                .clamp(0.0, (n - 1) as f64);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            let w = pos - lo as f64;
            match (values[lo], values[hi]) {
                (Some(a), Some(b)) => Some(a + w * (b - a)),
                _ => None,
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// load

/// Read a half-hourly load file.
///
/// Rows must be strictly increasing in `(date, period)`. A day numbered up to
/// period 49 (clock change in autumn) or a last-Sunday-of-March day numbered
/// up to 45 is resampled onto 48 periods. Missing rows become gaps.
pub fn load_load_csv(path: &Path) -> Result<HalfHourSeries> {
    let mut rdr = open(path, &["date", "period", "load_mw"])?;
    let mut days: BTreeMap<NaiveDate, Vec<Option<f64>>> = BTreeMap::new();
    let mut last: Option<(NaiveDate, u32)> = None;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let date = parse_date(path, line, &rec[0])?;
        let period: u32 = rec[1]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad period `{}`", &rec[1])))?;
        if period >= 50 {
            return Err(parse_err(path, line, format!("period {period} out of range")));
        }
        if last.is_some_and(|l| (date, period) <= l) {
            return Err(Error::NonMonotonicTime {
                path: path.display().to_string(),
                line,
            });
        }
        last = Some((date, period));
        let v = parse_opt_f64(path, line, &rec[2])?;
        let day = days.entry(date).or_default();
        if day.len() <= period as usize {
            day.resize(period as usize + 1, None);
        }
        day[period as usize] = v;
    }
    let (Some(&first), Some(&last_day)) = (days.keys().next(), days.keys().next_back()) else {
        return Err(parse_err(path, 1, "no data rows"));
    };
    let n_days = (last_day - first).num_days() as usize + 1;
    let mut values = Vec::with_capacity(n_days * PERIODS_PER_DAY);
    for k in 0..n_days {
        let date = first + Duration::days(k as i64);
        match days.get(&date) {
            Some(day) => {
                let n = day.len();
                let short = n == 46 && date == last_sunday(date.year(), 3);
                if n > PERIODS_PER_DAY || short {
                    values.extend(normalize_day(day));
                } else {
                    values.extend(day.iter().copied());
                    values.resize(values.len() + PERIODS_PER_DAY - n, None);
                }
            }
            None => values.resize(values.len() + PERIODS_PER_DAY, None),
        }
    }
    // drop trailing periods past the last row of a partial final day
    let last_period = days[&last_day].len().min(PERIODS_PER_DAY);
    values.truncate((n_days - 1) * PERIODS_PER_DAY + last_period.max(1));
    Ok(HalfHourSeries::from_options(
        TimePoint::day_start(first),
        values,
        Unit::Megawatt,
    ))
}

pub fn write_load_csv(s: &HalfHourSeries, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["date", "period", "load_mw"])?;
    for i in 0..s.len() {
        let tp = s.time_at(i);
        let v = s.get(i).map(|v| v.to_string()).unwrap_or_default();
        w.write_record([tp.date.to_string(), tp.period.to_string(), v])?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// weather

/// Upsample hourly readings (`hourly[k]` at `start + 2k` half-hours) to
/// half-hourly: odd periods are the mean of their two neighbours and the
/// final reading extends flat by one half-hour.
pub fn upsample_hourly(hourly: &[Option<f64>]) -> Vec<Option<f64>> {
    let mut out = Vec::with_capacity(hourly.len() * 2);
    for (k, &v) in hourly.iter().enumerate() {
        out.push(v);
        let next = match hourly.get(k + 1) {
            Some(&n) => n.zip(v).map(|(a, b)| 0.5 * (a + b)),
            None => v,
        };
        out.push(next);
    }
    out
}

pub fn load_weather_csv(path: &Path) -> Result<Vec<StationWeather>> {
    let mut rdr = open(
        path,
        &[
            "station_id",
            "datetime_utc",
            "temperature_k",
            "wind_ms",
            "solar_wm2",
        ],
    )?;
    type Reading = [Option<f64>; 3];
    let mut stations: Vec<(String, Vec<(NaiveDateTime, Reading)>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let id = rec[0].to_string();
        let ts = parse_datetime(path, line, &rec[1])?;
        if ts.minute() != 0 || ts.second() != 0 {
            return Err(parse_err(path, line, "weather readings must be on the hour"));
        }
        let reading = [
            parse_opt_f64(path, line, &rec[2])?,
            parse_opt_f64(path, line, &rec[3])?,
            parse_opt_f64(path, line, &rec[4])?,
        ];
        let idx = match stations.iter().position(|(s, _)| *s == id) {
            Some(i) => i,
            None => {
                stations.push((id, Vec::new()));
                stations.len() - 1
            }
        };
        let rows = &mut stations[idx].1;
        if rows.last().is_some_and(|(prev, _)| ts <= *prev) {
            return Err(Error::NonMonotonicTime {
                path: path.display().to_string(),
                line,
            });
        }
        rows.push((ts, reading));
    }
    if stations.is_empty() {
        return Err(parse_err(path, 1, "no data rows"));
    }
    stations
        .into_iter()
        .map(|(id, rows)| {
            let t0 = rows[0].0;
            let start = TimePoint::new(t0.date(), (t0.hour() * 2) as u8)?;
            let n_hours = ((rows.last().unwrap().0 - t0).num_hours() + 1) as usize;
            let mut grid: Vec<Reading> = vec![[None; 3]; n_hours];
            for (ts, r) in rows {
                grid[(ts - t0).num_hours() as usize] = r;
            }
            let column = |j: usize, unit| {
                let hourly: Vec<Option<f64>> = grid.iter().map(|r| r[j]).collect();
                HalfHourSeries::from_options(start, upsample_hourly(&hourly), unit)
            };
            StationWeather::new(
                id,
                column(0, Unit::Kelvin),
                column(1, Unit::MetresPerSecond),
                column(2, Unit::WattsPerSquareMetre),
            )
        })
        .collect()
}

/// Write the hourly (even-period) readings of every station.
pub fn write_weather_csv(stations: &[StationWeather], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "station_id",
        "datetime_utc",
        "temperature_k",
        "wind_ms",
        "solar_wm2",
    ])?;
    let fmt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for st in stations {
        for i in (0..st.temperature.len()).step_by(2) {
            let tp = st.temperature.time_at(i);
            let ts = tp
                .date
                .and_hms_opt(tp.period as u32 / 2, 0, 0)
                .expect("valid hour");
            w.write_record([
                st.station_id.clone(),
                ts.format("%Y-%m-%dT%H:%M:%S").to_string(),
                fmt(st.temperature.get(i)),
                fmt(st.wind_speed.get(i)),
                fmt(st.solar_radiation.get(i)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// capacity and holidays

/// Daily installed capacity. Empty fields carry the previous day's value.
pub fn load_capacity_csv(path: &Path) -> Result<Vec<CapacityRecord>> {
    let mut rdr = open(path, &["date", "solar_mw", "wind_mw"])?;
    let mut out: Vec<CapacityRecord> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let date = parse_date(path, line, &rec[0])?;
        if out.last().is_some_and(|r| date <= r.date) {
            return Err(Error::NonMonotonicTime {
                path: path.display().to_string(),
                line,
            });
        }
        let prev = out.last().copied();
        let field = |j: usize, carry: Option<f64>| -> Result<f64> {
            let v = parse_opt_f64(path, line, &rec[j])?
                .or(carry)
                .ok_or_else(|| parse_err(path, line, "missing capacity with no prior value"))?;
            if v < 0.0 {
                return Err(parse_err(path, line, "negative capacity"));
            }
            Ok(v)
        };
        let solar = field(1, prev.map(|p| p.solar_capacity_mw))?;
        let wind = field(2, prev.map(|p| p.wind_capacity_mw))?;
        out.push(CapacityRecord {
            date,
            solar_capacity_mw: solar,
            wind_capacity_mw: wind,
        });
    }
    Ok(out)
}

pub fn write_capacity_csv(records: &[CapacityRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["date", "solar_mw", "wind_mw"])?;
    for r in records {
        w.write_record([
            r.date.to_string(),
            r.solar_capacity_mw.to_string(),
            r.wind_capacity_mw.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_holidays_csv(path: &Path) -> Result<HolidayCalendar> {
    let mut rdr = open(path, &["date", "kind"])?;
    let mut cal = HolidayCalendar::default();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let date = parse_date(path, line, &rec[0])?;
        match &rec[1] {
            "public" => cal.public_holidays.insert(date),
            "school" => cal.school_holidays.insert(date),
            other => return Err(parse_err(path, line, format!("unknown holiday kind `{other}`"))),
        };
    }
    Ok(cal)
}

pub fn write_holidays_csv(cal: &HolidayCalendar, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["date", "kind"])?;
    let rows = cal
        .public_holidays
        .iter()
        .map(|d| (*d, "public"))
        .chain(cal.school_holidays.iter().map(|d| (*d, "school")));
    for (d, kind) in rows {
        w.write_record([d.to_string(), kind.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// synthetic data

/// Parameters of the synthetic demand generator.
///
/// `load = base * daily[period] * weekly[weekday] * monthly[month]
///        + temp_sensitivity * (T - comfort_temp_k)^2
///        - solar_suppression_coeff * solar + noise`
///
/// where `T` and `solar` are the station means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub n_days: usize,
    pub start_date: NaiveDate,
    pub n_stations: usize,
    pub base_load_mw: f64,
    /// 48 factors, period 0 first.
    pub daily_shape: Vec<f64>,
    /// 7 factors, Monday first.
    pub weekly_factors: Vec<f64>,
    /// 12 factors, January first.
    pub monthly_factors: Vec<f64>,
    pub temp_sensitivity: f64,
    pub comfort_temp_k: f64,
    pub solar_suppression_coeff: f64,
    pub noise_sd_mw: f64,
}

/// A GB-like intraday profile: overnight trough, morning ramp, tea-time peak.
pub fn default_daily_shape() -> Vec<f64> {
    (0..PERIODS_PER_DAY)
        .map(|p| {
            let h = (p as f64 + 0.5) / 2.0;
            let trough = -0.16 * (-((h - 4.5) / 2.5).powi(2)).exp();
            let morning = 0.12 / (1.0 + (-(h - 7.5) * 1.5).exp());
            let evening = 0.14 * (-((h - 17.75) / 1.6).powi(2)).exp();
            let late = -0.14 / (1.0 + (-(h - 21.5) * 1.2).exp());
            0.9 + trough + morning + evening + late
        })
        .collect()
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            n_days: 730,
            // 730 days ending on 14 Feb 2020, so a 10% test tail is a winter
            // window like the real-data default
            start_date: NaiveDate::from_ymd_opt(2018, 2, 15).expect("valid date"),
            n_stations: 3,
            base_load_mw: 28_000.0,
            daily_shape: default_daily_shape(),
            weekly_factors: vec![1.0, 1.01, 1.01, 1.0, 0.97, 0.86, 0.82],
            monthly_factors: vec![
                1.12, 1.10, 1.04, 0.97, 0.92, 0.88, 0.87, 0.88, 0.92, 0.98, 1.06, 1.11,
            ],
            temp_sensitivity: 8.0,
            comfort_temp_k: 291.0,
            solar_suppression_coeff: 10.0,
            noise_sd_mw: 250.0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidSpec(m.to_string()));
        if self.n_days < 14 {
            return fail("n_days must be at least 14");
        }
        if self.n_stations == 0 {
            return fail("n_stations must be at least 1");
        }
        if self.daily_shape.len() != PERIODS_PER_DAY
            || self.daily_shape.iter().any(|&v| !(v > 0.0))
        {
            return fail("daily_shape must hold 48 strictly positive factors");
        }
        if self.weekly_factors.len() != 7 || self.weekly_factors.iter().any(|&v| !(v > 0.0)) {
            return fail("weekly_factors must hold 7 positive factors");
        }
        if self.monthly_factors.len() != 12 || self.monthly_factors.iter().any(|&v| !(v > 0.0)) {
            return fail("monthly_factors must hold 12 positive factors");
        }
        if !(self.noise_sd_mw >= 0.0) {
            return fail("noise_sd_mw must be non-negative");
        }
        if !(self.base_load_mw > 0.0) {
            return fail("base_load_mw must be positive");
        }
        Ok(())
    }

    /// The noise-free seasonal product at `tp`.
    pub fn seasonal_load(&self, tp: TimePoint) -> f64 {
        self.base_load_mw
            * self.daily_shape[tp.period as usize]
            * self.weekly_factors[tp.date.weekday().num_days_from_monday() as usize]
            * self.monthly_factors[tp.month() as usize - 1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub dataset: Dataset,
    pub ground_truth: SyntheticSpec,
}

fn annual_phase(date: NaiveDate, peak_doy: f64) -> f64 {
    (2.0 * PI * (date.ordinal() as f64 - peak_doy) / 365.25).cos()
}

/// Linear interpolation between per-day anomalies anchored at noon.
fn daily_anomaly(anoms: &[f64], day: usize, hour: f64) -> f64 {
    let x = day as f64 + (hour - 12.0) / 24.0;
    let lo = x.floor().clamp(0.0, (anoms.len() - 1) as f64);
    let i = lo as usize;
    let j = (i + 1).min(anoms.len() - 1);
    let w = (x - lo).clamp(0.0, 1.0);
    anoms[i] + w * (anoms[j] - anoms[i])
}

fn synthetic_holidays(first: NaiveDate, last: NaiveDate) -> HolidayCalendar {
    let mut cal = HolidayCalendar::default();
    for year in first.year()..=last.year() {
        let ymd = |m, d| NaiveDate::from_ymd_opt(year, m, d).expect("valid date");
        let last_monday = |m| {
            let mut d = last_sunday(year, m) + Duration::days(1);
            if d.month() != m {
                d -= Duration::days(7);
            }
            d
        };
        for d in [
            ymd(1, 1),
            last_monday(5),
            last_monday(8),
            ymd(12, 25),
            ymd(12, 26),
        ] {
            cal.public_holidays.insert(d);
        }
        let mut add_school = |from: NaiveDate, to: NaiveDate| {
            let mut d = from;
            while d <= to {
                cal.school_holidays.insert(d);
                d += Duration::days(1);
            }
        };
        add_school(ymd(1, 1), ymd(1, 3));
        add_school(ymd(4, 6), ymd(4, 19));
        add_school(ymd(7, 22), ymd(8, 31));
        add_school(ymd(10, 24), ymd(10, 30));
        add_school(ymd(12, 20), ymd(12, 31));
    }
    cal.public_holidays.retain(|d| first <= *d && *d <= last);
    cal.school_holidays.retain(|d| first <= *d && *d <= last);
    cal
}

/// Generate a dataset from `spec`; a pure function of the spec.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let n_days = spec.n_days;
    let first = spec.start_date;
    let last = first + Duration::days(n_days as i64 - 1);
    let n_hours = n_days * 24;

    // shared and per-station daily weather anomalies (AR(1) across days)
    let ar1 = |phi: f64, sd: f64, n: usize, rng: &mut ChaCha8Rng| {
        let mut x = 0.0;
        (0..n)
            .map(|_| {
                x = phi * x + sd * std_normal.sample(rng);
                x
            })
            .collect::<Vec<f64>>()
    };
    let temp_shared = ar1(0.75, 2.2, n_days, &mut rng);
    let wind_shared = ar1(0.6, 1.5, n_days, &mut rng);
    let cloud_shared: Vec<f64> = (0..n_days).map(|_| rng.random::<f64>()).collect();

    let mut stations = Vec::with_capacity(spec.n_stations);
    for s in 0..spec.n_stations {
        let offset_k = 1.5 * (s as f64 - (spec.n_stations as f64 - 1.0) / 2.0);
        let temp_local = ar1(0.5, 0.8, n_days, &mut rng);
        let wind_local = ar1(0.5, 0.8, n_days, &mut rng);
        let cloud_local: Vec<f64> = (0..n_days).map(|_| rng.random::<f64>()).collect();
        let mut temp = Vec::with_capacity(n_hours);
        let mut wind = Vec::with_capacity(n_hours);
        let mut solar = Vec::with_capacity(n_hours);
        for day in 0..n_days {
            let date = first + Duration::days(day as i64);
            let season = annual_phase(date, 196.0);
            let summer = annual_phase(date, 172.0);
            let half_day = 6.0 + 2.5 * summer;
            let peak = 250.0 + 275.0 * (1.0 + summer);
            let cloud = 0.15 + 0.85 * (0.6 * cloud_shared[day] + 0.4 * cloud_local[day]);
            for hour in 0..24 {
                let h = hour as f64;
                let diurnal = -(2.0 * PI * (h - 4.0) / 24.0).cos();
                let t = 283.0 + offset_k + 8.0 * season + 3.5 * diurnal
                    + daily_anomaly(&temp_shared, day, h)
                    + daily_anomaly(&temp_local, day, h)
                    + 0.2 * std_normal.sample(&mut rng);
                let w = (6.0 - 1.5 * season
                    + daily_anomaly(&wind_shared, day, h)
                    + daily_anomaly(&wind_local, day, h)
                    + 0.3 * std_normal.sample(&mut rng))
                .max(0.0);
                let x = (h - (12.0 - half_day)) / (2.0 * half_day);
                let clear = if (0.0..=1.0).contains(&x) {
                    peak * (PI * x).sin()
                } else {
                    0.0
                };
                let r = (clear * cloud * (1.0 + 0.03 * std_normal.sample(&mut rng))).max(0.0);
                temp.push(Some(t));
                wind.push(Some(w));
                solar.push(Some(r));
            }
        }
        let start = TimePoint::day_start(first);
        let st = StationWeather::new(
            format!("S{:02}", s + 1),
            HalfHourSeries::from_options(start, upsample_hourly(&temp), Unit::Kelvin),
            HalfHourSeries::from_options(start, upsample_hourly(&wind), Unit::MetresPerSecond),
            HalfHourSeries::from_options(start, upsample_hourly(&solar), Unit::WattsPerSquareMetre),
        )?;
        stations.push(st);
    }

    let n = n_days * PERIODS_PER_DAY;
    let start = TimePoint::day_start(first);
    let mut load = Vec::with_capacity(n);
    let noise = Normal::new(0.0, spec.noise_sd_mw.max(0.0))
        .map_err(|e| Error::InvalidSpec(e.to_string()))?;
    for i in 0..n {
        let tp = start.offset(i as i64);
        let t: f64 = stations
            .iter()
            .map(|s| s.temperature.values()[i])
            .sum::<f64>()
            / spec.n_stations as f64;
        let r: f64 = stations
            .iter()
            .map(|s| s.solar_radiation.values()[i])
            .sum::<f64>()
            / spec.n_stations as f64;
        let eps = if spec.noise_sd_mw > 0.0 {
            noise.sample(&mut rng)
        } else {
            0.0
        };
        load.push(
            spec.seasonal_load(tp) + spec.temp_sensitivity * (t - spec.comfort_temp_k).powi(2)
                - spec.solar_suppression_coeff * r
                + eps,
        );
    }

    let mut capacity = Vec::with_capacity(n_days);
    let (mut solar_cap, mut wind_cap) = (9_000.0f64, 5_000.0f64);
    for day in 0..n_days {
        solar_cap += 4.0 * rng.random::<f64>() + if rng.random::<f64>() < 0.02 { 60.0 } else { 0.0 };
        wind_cap += 2.0 * rng.random::<f64>() + if rng.random::<f64>() < 0.02 { 40.0 } else { 0.0 };
        // round to whole kW so the CSV round trip is exact and compact
        capacity.push(CapacityRecord {
            date: first + Duration::days(day as i64),
            solar_capacity_mw: (solar_cap * 1000.0).round() / 1000.0,
            wind_capacity_mw: (wind_cap * 1000.0).round() / 1000.0,
        });
    }

    Ok(SyntheticData {
        dataset: Dataset {
            load: HalfHourSeries::new(start, load, Unit::Megawatt),
            stations,
            holidays: synthetic_holidays(first, last),
            capacity,
        },
        ground_truth: spec.clone(),
    })
}
