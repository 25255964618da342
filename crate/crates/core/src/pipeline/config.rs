//! Versioned TOML configuration.
//!
//! ```toml
//! version = 1
//! seed = 7
//! models = ["hyena", "hong_vanilla", "random_forest", "lstm", "lstm_ae"]
//!
//! [data.synthetic]        # or [data.files] with load/weather/capacity/holidays
//! n_days = 730
//!
//! [ranges]                # optional; see `resolve_ranges`
//! stage1 = ["2018-02-15", "2018-12-03"]
//! stage2 = ["2018-12-04", "2019-12-03"]
//! test   = ["2019-12-04", "2020-02-14"]
//! ```

use std::path::Path;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ensembles::ForestParams;
use crate::error::{Error, Result};
use crate::ingest::{DataPaths, Dataset, SyntheticSpec};
use crate::series::DayRange;

pub const CONFIG_VERSION: u32 = 1;

pub const MODEL_NAMES: [&str; 5] = ["hong_vanilla", "hyena", "lstm", "lstm_ae", "random_forest"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub files: Option<DataPaths>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            synthetic: Some(SyntheticSpec::default()),
            files: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangesConfig {
    pub stage1: [NaiveDate; 2],
    pub stage2: [NaiveDate; 2],
    pub test: [NaiveDate; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSettings {
    /// Half-hour lags applied to every station's temperature and solar.
    pub lags: Vec<usize>,
    /// Screen stage-2 features with extremely randomized trees.
    pub screen: bool,
    /// Keep the most important features up to this cumulative importance.
    pub screen_threshold: f64,
    pub screen_trees: usize,
    /// PCA components for the plain LSTM benchmark.
    pub pca_k: usize,
}

impl Default for FeatureSettings {
    fn default() -> Self {
        Self {
            lags: vec![1, 2, 3, 48, 96],
            screen: true,
            screen_threshold: 0.95,
            screen_trees: 50,
            pca_k: 9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuralSettings {
    pub hidden_dim: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
}

impl Default for NeuralSettings {
    fn default() -> Self {
        Self {
            hidden_dim: 64,
            lr: 1e-3,
            batch_size: 32,
            max_epochs: 500,
            patience: 10,
            validation_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestSettings {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
}

impl Default for ForestSettings {
    fn default() -> Self {
        let p = ForestParams::random_forest(0);
        Self {
            n_trees: p.n_trees,
            max_depth: p.max_depth,
            min_samples_split: p.min_samples_split,
        }
    }
}

impl ForestSettings {
    pub fn params(&self, seed: u64) -> ForestParams {
        ForestParams {
            n_trees: self.n_trees,
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            ..ForestParams::random_forest(seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_models")]
    pub models: Vec<String>,
    /// Ridge penalty for the linear models (0 = plain OLS).
    #[serde(default)]
    pub ridge: f64,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranges: Option<RangesConfig>,
    #[serde(default)]
    pub features: FeatureSettings,
    #[serde(default)]
    pub neural: NeuralSettings,
    #[serde(default)]
    pub forest: ForestSettings,
}

fn default_seed() -> u64 {
    7
}

fn default_models() -> Vec<String> {
    MODEL_NAMES.iter().map(|s| s.to_string()).collect()
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: default_seed(),
            models: default_models(),
            ridge: 0.0,
            data: DataConfig::default(),
            ranges: None,
            features: FeatureSettings::default(),
            neural: NeuralSettings::default(),
            forest: ForestSettings::default(),
        }
    }
}

/// Train ranges for the two stages and the held-out test range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranges {
    pub stage1: DayRange,
    pub stage2: DayRange,
    pub test: DayRange,
}

impl Ranges {
    /// Everything before the test range that either stage trains on.
    pub fn pre_test(&self) -> DayRange {
        DayRange {
            first: self.stage1.first.min(self.stage2.first),
            last: self.stage1.last.max(self.stage2.last),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stage1.overlaps(&self.stage2) {
            return Err(Error::Config(format!(
                "stage-1 range {} overlaps stage-2 range {}",
                self.stage1, self.stage2
            )));
        }
        for (name, r) in [("stage-1", self.stage1), ("stage-2", self.stage2)] {
            if r.last >= self.test.first {
                return Err(Error::Config(format!(
                    "{name} range {r} does not end before the test range {}",
                    self.test
                )));
            }
        }
        Ok(())
    }
}

fn day_range(pair: [NaiveDate; 2]) -> Result<DayRange> {
    DayRange::new(pair[0], pair[1])
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// The synthetic spec with the pipeline seed applied.
    pub fn synthetic_spec(&self) -> Option<SyntheticSpec> {
        self.data.synthetic.clone().map(|s| SyntheticSpec {
            seed: self.seed,
            ..s
        })
    }

    /// Check everything that can be checked without loading data.
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        match (&self.data.synthetic, &self.data.files) {
            (Some(s), None) => s.validate().map_err(|e| Error::Config(e.to_string()))?,
            (None, Some(_)) => {}
            _ => {
                return Err(Error::Config(
                    "exactly one of [data.synthetic] and [data.files] must be given".into(),
                ))
            }
        }
        if self.models.is_empty() {
            return Err(Error::Config("no models selected".into()));
        }
        for m in &self.models {
            if !MODEL_NAMES.contains(&m.as_str()) {
                return Err(Error::Config(format!(
                    "unknown model `{m}` (known: {})",
                    MODEL_NAMES.join(", ")
                )));
            }
        }
        if let Some(r) = &self.ranges {
            Ranges {
                stage1: day_range(r.stage1)?,
                stage2: day_range(r.stage2)?,
                test: day_range(r.test)?,
            }
            .validate()?;
        }
        let f = &self.features;
        if f.lags.iter().any(|&l| l == 0) {
            return Err(Error::Config("lags must be positive".into()));
        }
        if !(f.screen_threshold > 0.0 && f.screen_threshold <= 1.0) {
            return Err(Error::Config("screen_threshold must lie in (0, 1]".into()));
        }
        if f.screen && f.screen_trees == 0 {
            return Err(Error::Config("screen_trees must be >= 1".into()));
        }
        if f.pca_k == 0 {
            return Err(Error::Config("pca_k must be >= 1".into()));
        }
        let n = &self.neural;
        if n.hidden_dim == 0 || n.batch_size == 0 || n.max_epochs == 0 {
            return Err(Error::Config("hidden_dim, batch_size and max_epochs must be >= 1".into()));
        }
        if !(n.lr > 0.0 && n.lr.is_finite()) {
            return Err(Error::Config("lr must be positive".into()));
        }
        if !(n.validation_fraction > 0.0 && n.validation_fraction < 1.0) {
            return Err(Error::Config("validation_fraction must lie in (0, 1)".into()));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::Config("ridge must be non-negative".into()));
        }
        self.forest
            .params(self.seed)
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    /// Load the configured dataset (generating it when synthetic).
    pub fn load_data(&self) -> Result<Dataset> {
        match (self.synthetic_spec(), &self.data.files) {
            (Some(spec), _) => Ok(crate::ingest::generate_synthetic(&spec)?.dataset),
            (None, Some(paths)) => Dataset::load_files(paths),
            (None, None) => Err(Error::Config("no data source".into())),
        }
    }

    /// Explicit ranges, or the defaults: a 40/50/10 split of the synthetic
    /// days, or 2014–2016 / 2017–2019 / 1 Jan–14 Feb 2020 for real data.
    pub fn resolve_ranges(&self) -> Result<Ranges> {
        let ranges = if let Some(r) = &self.ranges {
            Ranges {
                stage1: day_range(r.stage1)?,
                stage2: day_range(r.stage2)?,
                test: day_range(r.test)?,
            }
        } else if let Some(spec) = &self.data.synthetic {
            let n = spec.n_days as i64;
            let n1 = (0.4 * n as f64).round() as i64;
            let n3 = ((0.1 * n as f64).round() as i64).max(1);
            let n2 = n - n1 - n3;
            if n1 < 1 || n2 < 1 {
                return Err(Error::Config(format!("{n} synthetic days are too few to split")));
            }
            let s = spec.start_date;
            Ranges {
                stage1: DayRange::new(s, s + Duration::days(n1 - 1))?,
                stage2: DayRange::new(s + Duration::days(n1), s + Duration::days(n1 + n2 - 1))?,
                test: DayRange::new(s + Duration::days(n1 + n2), s + Duration::days(n - 1))?,
            }
        } else {
            let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).expect("valid date");
            Ranges {
                stage1: DayRange::new(d(2014, 1, 1), d(2016, 12, 31))?,
                stage2: DayRange::new(d(2017, 1, 1), d(2019, 12, 31))?,
                test: DayRange::new(d(2020, 1, 1), d(2020, 2, 14))?,
            }
        };
        ranges.validate()?;
        Ok(ranges)
    }

    /// Hash of every setting that influences fitted models. Data file
    /// locations are excluded so relocating inputs doesn't change artifacts.
    pub fn fingerprint(&self) -> Result<String> {
        let mut c = self.clone();
        c.data.files = None;
        c.models.sort();
        let text = serde_json::to_string(&c)?;
        Ok(hex::encode(Sha256::digest(text.as_bytes())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = PipelineConfig::default();
        let s = c.to_toml_string().unwrap();
        assert_eq!(PipelineConfig::from_toml_str(&s).unwrap(), c);
    }

    #[test]
    fn minimal_file_uses_defaults() {
        let c = PipelineConfig::from_toml_str("version = 1\n").unwrap();
        assert_eq!(c, PipelineConfig::default());
        let r = c.resolve_ranges().unwrap();
        assert_eq!((r.stage1.n_days(), r.stage2.n_days(), r.test.n_days()), (292, 365, 73));
        assert_eq!(r.stage2.first, r.stage1.last + Duration::days(1));
        assert_eq!(r.test.last, NaiveDate::from_ymd_opt(2020, 2, 14).unwrap());
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            "version = 2\n",
            "version = 1\nmodels = [\"arima\"]\n",
            "version = 1\nbogus = 3\n",
            "version = 1\n[neural]\nlr = -1.0\n",
            "version = 1\n[forest]\nmin_samples_split = 1\n",
        ] {
            assert!(matches!(PipelineConfig::from_toml_str(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn overlapping_ranges_rejected() {
        let s = r#"
version = 1
[ranges]
stage1 = ["2018-01-01", "2018-06-30"]
stage2 = ["2018-06-01", "2019-06-30"]
test = ["2019-07-01", "2019-07-31"]
"#;
        assert!(matches!(PipelineConfig::from_toml_str(s), Err(Error::Config(_))));
        let s = r#"
version = 1
[ranges]
stage1 = ["2018-01-01", "2018-06-30"]
stage2 = ["2018-07-01", "2019-07-10"]
test = ["2019-07-01", "2019-07-31"]
"#;
        assert!(matches!(PipelineConfig::from_toml_str(s), Err(Error::Config(_))));
    }

    #[test]
    fn real_data_default_split() {
        let c = PipelineConfig {
            data: DataConfig {
                synthetic: None,
                files: Some(DataPaths {
                    load: "l.csv".into(),
                    weather: "w.csv".into(),
                    capacity: "c.csv".into(),
                    holidays: "h.csv".into(),
                }),
            },
            ..PipelineConfig::default()
        };
        let r = c.resolve_ranges().unwrap();
        assert_eq!(r.stage1.to_string(), "2014-01-01..=2016-12-31");
        assert_eq!(r.test.n_days(), 45);
    }

    #[test]
    fn fingerprint_ignores_file_locations() {
        let mut a = PipelineConfig::default();
        a.data = DataConfig {
            synthetic: None,
            files: Some(DataPaths {
                load: "a/l.csv".into(),
                weather: "a/w.csv".into(),
                capacity: "a/c.csv".into(),
                holidays: "a/h.csv".into(),
            }),
        };
        let mut b = a.clone();
        b.data.files.as_mut().unwrap().load = "b/l.csv".into();
        assert_eq!(a.fingerprint().unwrap(), b.fingerprint().unwrap());
        b.seed = 8;
        assert_ne!(a.fingerprint().unwrap(), b.fingerprint().unwrap());
    }
}
