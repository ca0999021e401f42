use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use powerstate_core::classify::{Averaging, ForestParams};
use powerstate_core::cluster::KMeansParams;
use powerstate_core::impute::ImputationPolicy;
use powerstate_core::time::DEFAULT_PATTERN;
use powerstate_core::{PhaseMode, TimestampFormat};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImputationConfig {
    pub enabled: bool,
    #[serde(flatten)]
    pub policy: ImputationPolicy,
}

impl Default for ImputationConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            policy: ImputationPolicy::default(),
        }
    }
}

/// Dates may be written as TOML date literals or as `YYYY-MM-DD` strings.
mod dates {
    use chrono::NaiveDate;
    use serde::de::Error;
    use serde::{Deserialize, Deserializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Literal(toml::value::Datetime),
        Text(String),
    }

    impl Repr {
        fn date<E: Error>(self) -> Result<NaiveDate, E> {
            match self {
                Repr::Text(t) => t.parse().map_err(|e| E::custom(format!("date '{t}': {e}"))),
                Repr::Literal(dt) => match (dt.date, dt.time) {
                    (Some(d), None) => NaiveDate::from_ymd_opt(d.year.into(), d.month.into(), d.day.into())
                        .ok_or_else(|| E::custom(format!("invalid date {dt}"))),
                    _ => Err(E::custom(format!("expected a plain date, got {dt}"))),
                },
            }
        }
    }

    pub fn option<'de, D: Deserializer<'de>>(d: D) -> Result<Option<NaiveDate>, D::Error> {
        Option::<Repr>::deserialize(d)?.map(Repr::date).transpose()
    }

    pub fn list<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<NaiveDate>, D::Error> {
        Vec::<Repr>::deserialize(d)?.into_iter().map(Repr::date).collect()
    }
}

/// Everything a run depends on besides the data files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub location: String,
    pub data_dir: PathBuf,
    pub output_dir: PathBuf,
    pub timestamp_format: String,
    /// Harmonics grid period for gap detection and imputation.
    pub grid_period_ms: i64,
    pub resample_period_ms: i64,
    pub phase_mode: PhaseMode,
    pub standardize: bool,
    /// Fixed number of states; skips the sweep.
    pub k: Option<usize>,
    pub k_min: usize,
    pub k_max: usize,
    /// Clustering window, inclusive calendar days. Unset means all data.
    #[serde(deserialize_with = "dates::option")]
    pub train_start: Option<NaiveDate>,
    #[serde(deserialize_with = "dates::option")]
    pub train_end: Option<NaiveDate>,
    /// Classifier training window; defaults to the clustering window.
    #[serde(deserialize_with = "dates::option")]
    pub forest_train_start: Option<NaiveDate>,
    #[serde(deserialize_with = "dates::option")]
    pub forest_train_end: Option<NaiveDate>,
    #[serde(deserialize_with = "dates::list")]
    pub eval_dates: Vec<NaiveDate>,
    pub averaging: Averaging,
    pub seed: u64,
    pub imputation: ImputationConfig,
    pub kmeans: KMeansParams,
    pub forest: ForestParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            location: "india-4".into(),
            data_dir: PathBuf::from("data"),
            output_dir: PathBuf::from("out"),
            timestamp_format: DEFAULT_PATTERN.into(),
            grid_period_ms: 500,
            resample_period_ms: 60_000,
            phase_mode: PhaseMode::MeanOfPhases,
            standardize: false,
            k: None,
            k_min: 1,
            k_max: 20,
            train_start: None,
            train_end: None,
            forest_train_start: None,
            forest_train_end: None,
            eval_dates: Vec::new(),
            averaging: Averaging::Macro,
            seed: 42,
            imputation: ImputationConfig::default(),
            kmeans: KMeansParams::default(),
            forest: ForestParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if self.location.is_empty() || self.location.contains(['/', '\\']) {
            return bad("location must be a plain directory name");
        }
        if self.grid_period_ms <= 0 || self.resample_period_ms <= 0 {
            return bad("periods must be positive");
        }
        if self.k_min == 0 || self.k_min > self.k_max {
            return bad("need 1 <= k_min <= k_max");
        }
        if self.k == Some(0) {
            return bad("k must be at least 1");
        }
        if let (Some(a), Some(b)) = (self.train_start, self.train_end) {
            if a > b {
                return bad("train_start is after train_end");
            }
        }
        if let (Some(a), Some(b)) = (self.forest_train_start, self.forest_train_end) {
            if a > b {
                return bad("forest_train_start is after forest_train_end");
            }
        }
        self.timestamp()?;
        Ok(())
    }

    pub fn timestamp(&self) -> Result<TimestampFormat, CliError> {
        self.timestamp_format
            .parse()
            .map_err(|e| CliError::Config(format!("timestamp format: {e}")))
    }

    /// SHA-256 of the effective config, ignoring where outputs are written.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        hex::encode(Sha256::digest(c.to_toml().as_bytes()))
    }

    pub fn location_dir(&self) -> PathBuf {
        self.data_dir.join(&self.location)
    }

    pub fn forest_window(&self) -> (Option<NaiveDate>, Option<NaiveDate>) {
        (
            self.forest_train_start.or(self.train_start),
            self.forest_train_end.or(self.train_end),
        )
    }
}

/// Command-line values that override the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub location: Option<String>,
    pub data_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub timestamp_format: Option<String>,
    pub phase_mode: Option<PhaseMode>,
    pub standardize: bool,
    pub k: Option<usize>,
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    pub train_start: Option<NaiveDate>,
    pub train_end: Option<NaiveDate>,
    pub forest_train_start: Option<NaiveDate>,
    pub forest_train_end: Option<NaiveDate>,
    pub dates: Option<Vec<NaiveDate>>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(self, c: &mut PipelineConfig) {
        macro_rules! set {
            ($($field:ident => $target:ident),* $(,)?) => {
                $(if let Some(v) = self.$field { c.$target = v; })*
            };
        }
        set!(
            location => location,
            data_dir => data_dir,
            output_dir => output_dir,
            timestamp_format => timestamp_format,
            phase_mode => phase_mode,
            k_min => k_min,
            k_max => k_max,
            dates => eval_dates,
            seed => seed,
        );
        if self.k.is_some() {
            c.k = self.k;
        }
        if self.standardize {
            c.standardize = true;
        }
        for (v, slot) in [
            (self.train_start, &mut c.train_start),
            (self.train_end, &mut c.train_end),
            (self.forest_train_start, &mut c.forest_train_start),
            (self.forest_train_end, &mut c.forest_train_end),
        ] {
            if v.is_some() {
                *slot = v;
            }
        }
    }
}
