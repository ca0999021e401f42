//! Clustering observations: odd current harmonics on a one-minute grid.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{is_missing, TimestampedFrame, MISSING};
use crate::schema::{harmonic_channel, odd_orders, Quantity, PHASES};
use crate::time::{iso_millis, parse_iso};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("missing required column '{0}'")]
    MissingColumn(String),
    #[error("no resampling window contains data")]
    EmptyWindowSpan,
    #[error("feature matrix cell ({row}, {feature}) is missing or not finite")]
    MissingValue { row: usize, feature: usize },
    #[error("feature matrix shape: {0}")]
    Shape(String),
    #[error("feature matrix is already standardized")]
    AlreadyScaled,
    #[error("features do not match: {0}")]
    FeatureMismatch(String),
    #[error("feature csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for FeatureError {
    fn from(e: csv::Error) -> Self {
        FeatureError::Csv(e.to_string())
    }
}

/// How the three phases of each odd order become features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseMode {
    /// 15 features `I_HRo = (AI_HRo + BI_HRo + CI_HRo) / 3`.
    #[default]
    #[serde(alias = "mean")]
    MeanOfPhases,
    /// 45 features `AI_HR3 .. CI_HR31`.
    #[serde(alias = "concat")]
    ConcatPhases,
}

/// The 45 per-phase odd current-harmonic channels, phase-major.
pub fn odd_current_channels() -> Vec<String> {
    PHASES
        .iter()
        .flat_map(|&p| odd_orders().map(move |o| harmonic_channel(p, Quantity::Current, o)))
        .collect()
}

pub fn select_odd_current_harmonics(
    frame: &TimestampedFrame,
    mode: PhaseMode,
) -> Result<TimestampedFrame, FeatureError> {
    let index = |name: &str| {
        frame
            .channel_index(name)
            .ok_or_else(|| FeatureError::MissingColumn(name.to_string()))
    };
    let to_shape = |e: crate::ingest::IngestError| FeatureError::Shape(e.to_string());
    match mode {
        PhaseMode::ConcatPhases => {
            let names = odd_current_channels();
            for n in &names {
                index(n)?;
            }
            frame.select(&names).map_err(to_shape)
        }
        PhaseMode::MeanOfPhases => {
            let mut names = Vec::new();
            let mut sources = Vec::new();
            for order in odd_orders() {
                names.push(format!("I_HR{order}"));
                let mut idx = [0usize; 3];
                for (k, &p) in PHASES.iter().enumerate() {
                    idx[k] = index(&harmonic_channel(p, Quantity::Current, order))?;
                }
                sources.push(idx);
            }
            let mut values = Vec::with_capacity(frame.len() * names.len());
            for (_, row) in frame.rows() {
                values.extend(
                    sources
                        .iter()
                        .map(|[a, b, c]| (row[*a] + row[*b] + row[*c]) / 3.0),
                );
            }
            TimestampedFrame::from_parts(
                names,
                frame.timestamps().to_vec(),
                values,
                frame.nominal_period_ms(),
            )
            .map_err(to_shape)
        }
    }
}

/// Per-feature affine map `(x - center) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
    /// Features with zero variance; they pass through with center 0, scale 1.
    pub zero_variance: Vec<bool>,
}

impl Scaling {
    pub fn apply(&self, v: f64, feature: usize) -> f64 {
        (v - self.center[feature]) / self.scale[feature]
    }
}

/// Dense row-per-observation matrix without missing values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    timestamps: Vec<i64>,
    feature_names: Vec<String>,
    values: Vec<f64>,
    scaling: Option<Scaling>,
}

impl FeatureMatrix {
    pub fn new(
        timestamps: Vec<i64>,
        feature_names: Vec<String>,
        values: Vec<f64>,
    ) -> Result<Self, FeatureError> {
        let n = feature_names.len();
        if values.len() != timestamps.len() * n {
            return Err(FeatureError::Shape(format!(
                "{} values for {} rows x {} features",
                values.len(),
                timestamps.len(),
                n
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::MissingValue {
                row: i / n.max(1),
                feature: i % n.max(1),
            });
        }
        Ok(Self {
            timestamps,
            feature_names,
            values,
            scaling: None,
        })
    }

    /// Convenience constructor: rows at one-minute spacing from t = 0 and
    /// features named `f0, f1, ...`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, FeatureError> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(FeatureError::Shape("ragged rows".into()));
        }
        Self::new(
            (0..rows.len() as i64).map(|i| i * 60_000).collect(),
            (0..n).map(|i| format!("f{i}")).collect(),
            rows.concat(),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.timestamps.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n_features();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    /// Scaling already applied to these values, if any.
    pub fn scaling(&self) -> Option<&Scaling> {
        self.scaling.as_ref()
    }

    /// Rows with `start <= ts < end`.
    pub fn restrict(&self, start: i64, end: i64) -> Self {
        let lo = self.timestamps.partition_point(|&t| t < start);
        let hi = self.timestamps.partition_point(|&t| t < end).max(lo);
        self.subset(&(lo..hi).collect::<Vec<_>>())
    }

    /// Rows at the given indices, in that order.
    pub fn subset(&self, rows: &[usize]) -> Self {
        let mut values = Vec::with_capacity(rows.len() * self.n_features());
        for &i in rows {
            values.extend_from_slice(self.row(i));
        }
        Self {
            timestamps: rows.iter().map(|&i| self.timestamps[i]).collect(),
            feature_names: self.feature_names.clone(),
            values,
            scaling: self.scaling.clone(),
        }
    }

    pub fn into_frame(self, nominal_period_ms: i64) -> TimestampedFrame {
        TimestampedFrame::from_parts(
            self.feature_names,
            self.timestamps,
            self.values,
            nominal_period_ms,
        )
        .expect("feature matrix timestamps are increasing")
    }

    /// Writes `timestamp,<features...>` with ISO-8601 UTC timestamps.
    pub fn write_csv<W: Write>(&self, out: W, comments: &[String]) -> Result<(), FeatureError> {
        let mut out = std::io::BufWriter::new(out);
        for c in comments {
            writeln!(out, "# {c}").map_err(|e| FeatureError::Csv(e.to_string()))?;
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["timestamp".to_string()];
        header.extend(self.feature_names.iter().cloned());
        w.write_record(&header)?;
        for (i, &t) in self.timestamps.iter().enumerate() {
            let mut rec = vec![iso_millis(t)];
            rec.extend(self.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| FeatureError::Csv(e.to_string()))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, FeatureError> {
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(input);
        let headers = r.headers()?.clone();
        if headers.get(0) != Some("timestamp") {
            return Err(FeatureError::MissingColumn("timestamp".into()));
        }
        let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut timestamps = Vec::new();
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let ts = parse_iso(&rec[0])
                .ok_or_else(|| FeatureError::Csv(format!("bad timestamp '{}'", &rec[0])))?;
            timestamps.push(ts);
            for cell in rec.iter().skip(1) {
                values.push(cell.parse::<f64>().unwrap_or(MISSING));
            }
        }
        Self::new(timestamps, names, values)
    }
}

/// Outcome of [`resample_mean`].
#[derive(Debug, Clone)]
pub struct Resampled {
    pub matrix: FeatureMatrix,
    /// Window starts between the first and last row that held no rows.
    pub empty_windows: Vec<i64>,
    /// Window starts that held rows but had some channel with no value.
    pub incomplete_windows: Vec<i64>,
}

/// Means over left-closed windows `[t, t + period)` aligned to multiples of
/// `period` since the epoch (wall-clock minutes for the default period).
pub fn resample_mean(frame: &TimestampedFrame, period: i64) -> Result<Resampled, FeatureError> {
    if period <= 0 {
        return Err(FeatureError::Shape("resampling period must be positive".into()));
    }
    let n = frame.n_channels();
    let ts = frame.timestamps();
    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    let mut empty_windows = Vec::new();
    let mut incomplete_windows = Vec::new();
    let mut sums = vec![0.0; n];
    let mut counts = vec![0usize; n];

    let mut i = 0;
    let mut expected_window = ts.first().map(|t| t.div_euclid(period) * period);
    while i < ts.len() {
        let w = ts[i].div_euclid(period) * period;
        if let Some(mut e) = expected_window {
            while e < w {
                empty_windows.push(e);
                e += period;
            }
        }
        expected_window = Some(w + period);
        sums.iter_mut().for_each(|s| *s = 0.0);
        counts.iter_mut().for_each(|c| *c = 0);
        while i < ts.len() && ts[i] < w + period {
            for (c, &v) in frame.row(i).iter().enumerate() {
                if !is_missing(v) {
                    sums[c] += v;
                    counts[c] += 1;
                }
            }
            i += 1;
        }
        if counts.iter().all(|&k| k > 0) {
            timestamps.push(w);
            values.extend(sums.iter().zip(&counts).map(|(s, &k)| s / k as f64));
        } else {
            incomplete_windows.push(w);
        }
    }
    if timestamps.is_empty() {
        return Err(FeatureError::EmptyWindowSpan);
    }
    Ok(Resampled {
        matrix: FeatureMatrix::new(timestamps, frame.channels().to_vec(), values)?,
        empty_windows,
        incomplete_windows,
    })
}

/// Scales each feature to mean 0 and population standard deviation 1
/// (`sqrt(sum((x - mean)^2) / N)`). Zero-variance features pass through
/// unchanged and are flagged in the stored [`Scaling`].
pub fn standardize(m: &FeatureMatrix) -> Result<FeatureMatrix, FeatureError> {
    if m.scaling.is_some() {
        return Err(FeatureError::AlreadyScaled);
    }
    let n = m.n_features();
    let rows = m.n_rows() as f64;
    let mut center = vec![0.0; n];
    let mut scale = vec![1.0; n];
    let mut zero_variance = vec![false; n];
    for f in 0..n {
        let mean = m.rows().map(|r| r[f]).sum::<f64>() / rows;
        let var = m.rows().map(|r| (r[f] - mean).powi(2)).sum::<f64>() / rows;
        let sd = var.sqrt();
        if rows == 0.0 || !(sd > 0.0) || sd <= mean.abs() * 1e-12 {
            zero_variance[f] = true;
        } else {
            center[f] = mean;
            scale[f] = sd;
        }
    }
    apply_scaling(
        m,
        &Scaling {
            center,
            scale,
            zero_variance,
        },
    )
}

/// Applies stored scaling parameters to an unscaled matrix.
pub fn apply_scaling(m: &FeatureMatrix, scaling: &Scaling) -> Result<FeatureMatrix, FeatureError> {
    if m.scaling.is_some() {
        return Err(FeatureError::AlreadyScaled);
    }
    let n = m.n_features();
    if scaling.center.len() != n || scaling.scale.len() != n {
        return Err(FeatureError::FeatureMismatch(format!(
            "scaling has {} features, matrix has {n}",
            scaling.center.len()
        )));
    }
    let values = m
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| scaling.apply(v, i % n))
        .collect();
    Ok(FeatureMatrix {
        timestamps: m.timestamps.clone(),
        feature_names: m.feature_names.clone(),
        values,
        scaling: Some(scaling.clone()),
    })
}

/// Brings `m` into a model's feature space: names must match, and raw input
/// gets the model's scaling. Already-scaled input must carry the same scaling.
pub fn conform(
    m: &FeatureMatrix,
    names: &[String],
    scaling: Option<&Scaling>,
) -> Result<FeatureMatrix, FeatureError> {
    if m.feature_names() != names {
        return Err(FeatureError::FeatureMismatch(format!(
            "model features {:?}, input {:?}",
            names,
            m.feature_names()
        )));
    }
    match (scaling, m.scaling()) {
        (None, None) => Ok(m.clone()),
        (Some(s), None) => apply_scaling(m, s),
        (Some(s), Some(t)) if s == t => Ok(m.clone()),
        _ => Err(FeatureError::FeatureMismatch(
            "input scaling differs from the model's".into(),
        )),
    }
}
