//! Same-time-of-day imputation.
//!
//! A missing grid cell at time `t` takes the mean of the nearest available
//! values at `t - d days` and `t + d days`, searching outward one day at a time
//! up to the configured horizon. With only one side available that donor is
//! used alone. Cells with no donor at all go to the fallback policy.
//!
//! Donors are read only from the input frame, never from cells imputed in the
//! same pass, so every grid row can be filled independently.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{is_missing, TimestampedFrame, MISSING};
use crate::time::is_weekend;
use crate::DAY_MS;

#[derive(Debug, Error)]
pub enum ImputeError {
    #[error("{} grid cells have no donor (first at {})", .timestamps.len(), .timestamps.first().copied().unwrap_or_default())]
    UnfillableGap { timestamps: Vec<i64> },
    #[error("invalid grid: start {start}, end {end}, period {period}")]
    InvalidGrid { start: i64, end: i64, period: i64 },
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Fallback {
    #[default]
    LinearInterpolate,
    CarryNearest,
    LeaveMissing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImputationPolicy {
    pub max_lookback_days: u32,
    pub max_lookahead_days: u32,
    /// Donors collected on each side before averaging.
    pub donors_per_side: u32,
    /// Only accept donor days of the same kind (weekday vs weekend).
    pub match_day_type: bool,
    pub fallback: Fallback,
}

impl Default for ImputationPolicy {
    fn default() -> Self {
        Self {
            max_lookback_days: 7,
            max_lookahead_days: 7,
            donors_per_side: 1,
            match_day_type: false,
            fallback: Fallback::LinearInterpolate,
        }
    }
}

impl ImputationPolicy {
    fn validate(&self) -> Result<(), ImputeError> {
        if self.max_lookback_days == 0 || self.max_lookahead_days == 0 {
            return Err(ImputeError::InvalidPolicy(
                "lookback and lookahead must be at least one day".into(),
            ));
        }
        if self.donors_per_side == 0 {
            return Err(ImputeError::InvalidPolicy(
                "donors_per_side must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Regular grid `start, start + period, ...` up to and including `end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub start: i64,
    pub end: i64,
    pub period: i64,
}

impl Grid {
    pub fn new(start: i64, end: i64, period: i64) -> Self {
        Self { start, end, period }
    }

    pub fn len(&self) -> usize {
        ((self.end - self.start) / self.period) as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn at(&self, i: usize) -> i64 {
        self.start + i as i64 * self.period
    }
}

/// How an output cell got its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellSource {
    Observed,
    /// Donors on both sides of the day.
    TwoSided,
    OneSided,
    Fallback,
}

#[derive(Debug, Clone)]
pub struct ImputedFrame {
    pub frame: TimestampedFrame,
    /// Row-major, one entry per output cell.
    pub sources: Vec<CellSource>,
}

impl ImputedFrame {
    /// Row-major flags, true for every imputed cell.
    pub fn provenance_mask(&self) -> Vec<bool> {
        self.sources
            .iter()
            .map(|s| *s != CellSource::Observed)
            .collect()
    }

    pub fn imputed_cells(&self) -> usize {
        self.sources
            .iter()
            .filter(|s| **s != CellSource::Observed)
            .count()
    }

    /// Grid rows with at least one imputed cell.
    pub fn imputed_rows(&self) -> usize {
        let n = self.frame.n_channels().max(1);
        self.sources
            .chunks(n)
            .filter(|r| r.iter().any(|s| *s != CellSource::Observed))
            .count()
    }

    pub fn count(&self, source: CellSource) -> usize {
        self.sources.iter().filter(|s| **s == source).count()
    }
}

/// Fills every missing cell of `frame` on `grid`; see the module docs.
pub fn impute_same_timestamp(
    frame: &TimestampedFrame,
    grid: Grid,
    policy: &ImputationPolicy,
) -> Result<ImputedFrame, ImputeError> {
    if grid.period <= 0 || grid.start > grid.end {
        return Err(ImputeError::InvalidGrid {
            start: grid.start,
            end: grid.end,
            period: grid.period,
        });
    }
    policy.validate()?;
    let n = frame.n_channels();
    let rows = grid.len();
    let tol = grid.period / 2;
    let lookup = |t: i64| frame.find_within(t, tol);

    let mut values = vec![MISSING; rows * n];
    let mut sources = vec![CellSource::Observed; rows * n];

    values
        .par_chunks_mut(n.max(1))
        .zip(sources.par_chunks_mut(n.max(1)))
        .enumerate()
        .for_each(|(i, (vals, srcs))| {
            if n == 0 {
                return;
            }
            let g = grid.at(i);
            let own = lookup(g);
            for c in 0..n {
                if let Some(v) = own.and_then(|r| frame.value(r, c)) {
                    vals[c] = v;
                    continue;
                }
                let before = donors(frame, g, c, -1, policy, tol);
                let after = donors(frame, g, c, 1, policy, tol);
                let (sum, count) = before
                    .iter()
                    .chain(&after)
                    .fold((0.0, 0usize), |(s, k), v| (s + v, k + 1));
                if count > 0 {
                    vals[c] = sum / count as f64;
                    srcs[c] = if !before.is_empty() && !after.is_empty() {
                        CellSource::TwoSided
                    } else {
                        CellSource::OneSided
                    };
                } else {
                    srcs[c] = CellSource::Fallback;
                }
            }
        });

    let timestamps: Vec<i64> = (0..rows).map(|i| grid.at(i)).collect();
    apply_fallback(&mut values, &sources, n, &timestamps, policy.fallback)?;

    let frame = TimestampedFrame::from_parts(frame.channels().to_vec(), timestamps, values, grid.period)
        .expect("grid is strictly increasing and shaped");
    Ok(ImputedFrame { frame, sources })
}

/// Up to `donors_per_side` observed values at `g ± d days`, nearest first.
fn donors(
    frame: &TimestampedFrame,
    g: i64,
    channel: usize,
    direction: i64,
    policy: &ImputationPolicy,
    tol: i64,
) -> Vec<f64> {
    let horizon = if direction < 0 {
        policy.max_lookback_days
    } else {
        policy.max_lookahead_days
    };
    let weekend = is_weekend(g);
    let mut out = Vec::new();
    for d in 1..=i64::from(horizon) {
        let t = g + direction * d * DAY_MS;
        if policy.match_day_type && is_weekend(t) != weekend {
            continue;
        }
        if let Some(v) = frame.find_within(t, tol).and_then(|r| frame.value(r, channel)) {
            out.push(v);
            if out.len() as u32 >= policy.donors_per_side {
                break;
            }
        }
    }
    out
}

fn apply_fallback(
    values: &mut [f64],
    sources: &[CellSource],
    n: usize,
    timestamps: &[i64],
    fallback: Fallback,
) -> Result<(), ImputeError> {
    let rows = timestamps.len();
    let mut unfillable = Vec::new();
    for c in 0..n {
        let pending: Vec<usize> = (0..rows)
            .filter(|&i| sources[i * n + c] == CellSource::Fallback)
            .collect();
        if pending.is_empty() {
            continue;
        }
        if fallback == Fallback::LeaveMissing {
            unfillable.extend(pending.iter().map(|&i| timestamps[i]));
            continue;
        }
        // Nearest known cell before/after each row; known cells include
        // donor-filled ones.
        let known = |i: usize| !is_missing(values[i * n + c]);
        let mut prev = vec![None; rows];
        let mut last = None;
        for i in 0..rows {
            if known(i) {
                last = Some(i);
            }
            prev[i] = last;
        }
        let mut next = vec![None; rows];
        last = None;
        for i in (0..rows).rev() {
            if known(i) {
                last = Some(i);
            }
            next[i] = last;
        }
        for &i in &pending {
            let v = match (prev[i], next[i]) {
                (None, None) => {
                    unfillable.push(timestamps[i]);
                    continue;
                }
                (Some(p), None) => values[p * n + c],
                (None, Some(q)) => values[q * n + c],
                (Some(p), Some(q)) => {
                    let (vp, vq) = (values[p * n + c], values[q * n + c]);
                    match fallback {
                        Fallback::LinearInterpolate => {
                            let w = (i - p) as f64 / (q - p) as f64;
                            vp + (vq - vp) * w
                        }
                        // Equidistant resolves to the earlier neighbour.
                        _ => {
                            if i - p <= q - i {
                                vp
                            } else {
                                vq
                            }
                        }
                    }
                }
            };
            values[i * n + c] = v;
        }
    }
    if unfillable.is_empty() {
        Ok(())
    } else {
        unfillable.sort_unstable();
        unfillable.dedup();
        Err(ImputeError::UnfillableGap {
            timestamps: unfillable,
        })
    }
}
