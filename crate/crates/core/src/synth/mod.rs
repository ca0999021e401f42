//! Synthetic MiDAS-format data with known ground-truth states.
//!
//! Harmonic centroids are invented and carry no physical meaning; they only
//! give each state a distinct signature in the odd current harmonics that the
//! clustering stage reads.

mod gaps;
mod presets;

use chrono::NaiveDate;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::StateAssignment;
use crate::features::odd_current_channels;
use crate::frame::TimestampedFrame;
use crate::schema::{harmonic_channel, harmonics_channels, thd_channel, Quantity, Schema, MAX_ORDER, MIN_ORDER, PHASES};
use crate::seed;
use crate::time::day_start;
use crate::DAY_MS;

pub use gaps::{inject_gaps, inject_gaps_with_spans, remove_spans, GAP_MEAN_SPAN_MS};
pub use presets::{preset, PRESET_NAMES};

const MINUTES_PER_DAY: u32 = 1440;
const MINUTE_MS: i64 = 60_000;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic profile: {0}")]
    InvalidProfile(String),
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
}

/// From `start_minute` (minutes after midnight) until the next segment, the
/// load sits in `state`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleSegment {
    pub start_minute: u32,
    pub state: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticProfile {
    pub name: String,
    pub n_states: usize,
    /// One row per state over the 45 odd current harmonics, phase-major
    /// (`AI_HR3 .. AI_HR31, BI_HR3 .. CI_HR31`).
    pub state_centroids: Vec<Vec<f64>>,
    /// Per-feature standard deviation of the row noise.
    pub state_noise: Vec<f64>,
    /// Sorted by start minute; the first segment starts at minute 0.
    pub daily_schedule: Vec<ScheduleSegment>,
    /// Phase current range in amps, spread across states.
    pub current_range: (f64, f64),
    pub gap_fraction: f64,
    pub seed: u64,
    pub start_date: NaiveDate,
    pub mains_hz: f64,
    pub nominal_voltage: f64,
    pub harmonics_period_ms: i64,
    pub ecd_period_ms: i64,
}

/// Generated files and the per-minute state that produced them.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub ecd: TimestampedFrame,
    pub harmonics: TimestampedFrame,
    pub truth: StateAssignment,
}

impl SyntheticProfile {
    pub fn n_features() -> usize {
        odd_current_channels().len()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidProfile(m));
        let nf = Self::n_features();
        if self.n_states == 0 {
            return bad("n_states must be at least 1".into());
        }
        if self.state_centroids.len() != self.n_states
            || self.state_centroids.iter().any(|c| c.len() != nf || c.iter().any(|v| !v.is_finite()))
        {
            return bad(format!("state_centroids must be {} rows of {nf} finite values", self.n_states));
        }
        if self.state_noise.len() != nf || self.state_noise.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return bad(format!("state_noise must hold {nf} non-negative values"));
        }
        match self.daily_schedule.first() {
            Some(s) if s.start_minute == 0 => {}
            _ => return bad("daily_schedule must start at minute 0".into()),
        }
        for w in self.daily_schedule.windows(2) {
            if w[1].start_minute <= w[0].start_minute {
                return bad("daily_schedule segments must be strictly increasing".into());
            }
        }
        if self.daily_schedule.iter().any(|s| s.start_minute >= MINUTES_PER_DAY || s.state >= self.n_states) {
            return bad("daily_schedule has an out-of-range minute or state".into());
        }
        let (lo, hi) = self.current_range;
        if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
            return bad(format!("current_range ({lo}, {hi}) is invalid"));
        }
        if !(0.0..=1.0).contains(&self.gap_fraction) {
            return bad(format!("gap_fraction {} outside [0, 1]", self.gap_fraction));
        }
        for (name, p) in [("harmonics", self.harmonics_period_ms), ("ecd", self.ecd_period_ms)] {
            if p <= 0 || DAY_MS % p != 0 {
                return bad(format!("{name} period {p} ms must divide one day"));
            }
        }
        if !(self.mains_hz > 0.0 && self.nominal_voltage > 0.0) {
            return bad("mains_hz and nominal_voltage must be positive".into());
        }
        Ok(())
    }

    /// State active at `minute` after midnight.
    pub fn state_at(&self, minute: u32) -> usize {
        let i = self.daily_schedule.partition_point(|s| s.start_minute <= minute);
        self.daily_schedule[i - 1].state
    }

    pub fn start_ms(&self) -> i64 {
        day_start(self.start_date)
    }

    /// `g` well-separated states: the smallest pairwise centroid distance is
    /// `separation_ratio` times the per-feature noise. Each state holds one
    /// contiguous block of the day, with distinct block lengths.
    pub fn blobs(g: usize, separation_ratio: f64, seed: u64) -> Self {
        let nf = Self::n_features();
        let noise = 1.0;
        let mut rng = seed::rng(seed, &[0xb10b]);
        let mut centroids: Vec<Vec<f64>> = (0..g)
            .map(|_| (0..nf).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let min_dist = min_pairwise(&centroids);
        if min_dist > 0.0 {
            let scale = separation_ratio * noise / min_dist;
            for c in centroids.iter_mut() {
                c.iter_mut().for_each(|v| *v = 5.0 + *v * scale);
            }
        }
        Self {
            name: format!("blobs-{g}"),
            n_states: g,
            state_centroids: centroids,
            state_noise: vec![noise; nf],
            daily_schedule: block_schedule(g),
            current_range: (5.0, 50.0),
            gap_fraction: 0.0,
            seed,
            start_date: NaiveDate::from_ymd_opt(2022, 1, 3).expect("valid date"),
            mains_hz: 50.0,
            nominal_voltage: 230.0,
            harmonics_period_ms: 500,
            ecd_period_ms: 300,
        }
    }

    /// Same schedule and centroids with all noise removed.
    pub fn noiseless(mut self) -> Self {
        self.state_noise.iter_mut().for_each(|s| *s = 0.0);
        self
    }

    /// Ranks states by their load, in amps.
    fn state_current(&self, state: usize) -> f64 {
        let (lo, hi) = self.current_range;
        if self.n_states == 1 {
            return (lo + hi) / 2.0;
        }
        lo + (hi - lo) * state as f64 / (self.n_states - 1) as f64
    }
}

pub(crate) fn min_pairwise(c: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..c.len() {
        for j in i + 1..c.len() {
            let d: f64 = c[i].iter().zip(&c[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            best = best.min(d);
        }
    }
    best
}

/// One block per state with lengths proportional to `g + i`.
pub(crate) fn block_schedule(g: usize) -> Vec<ScheduleSegment> {
    let weights: Vec<u32> = (0..g as u32).map(|i| g as u32 + i).collect();
    let total: u32 = weights.iter().sum();
    let mut start = 0;
    let mut out = Vec::with_capacity(g);
    for (state, w) in weights.iter().enumerate() {
        out.push(ScheduleSegment {
            start_minute: start,
            state,
        });
        start += MINUTES_PER_DAY * w / total;
    }
    out
}

/// Generates `n_days` consecutive days from the profile's start date,
/// applying the profile's gap fraction to both files over the same spans.
pub fn generate_days(profile: &SyntheticProfile, n_days: usize) -> Result<SyntheticData, SynthError> {
    profile.validate()?;
    if n_days == 0 {
        return Err(SynthError::InvalidProfile("n_days must be at least 1".into()));
    }
    let days: Vec<(Vec<i64>, Vec<f64>, Vec<i64>, Vec<f64>)> = (0..n_days)
        .into_par_iter()
        .map(|d| generate_day(profile, d))
        .collect();
    let mut h_ts = Vec::new();
    let mut h_vals = Vec::new();
    let mut e_ts = Vec::new();
    let mut e_vals = Vec::new();
    for (ht, hv, et, ev) in days {
        h_ts.extend(ht);
        h_vals.extend(hv);
        e_ts.extend(et);
        e_vals.extend(ev);
    }
    let frame = |schema: Schema, ts, vals, period| {
        TimestampedFrame::from_parts(schema.channels(), ts, vals, period).expect("generator builds valid frames")
    };
    let mut harmonics = frame(Schema::Harmonics, h_ts, h_vals, profile.harmonics_period_ms);
    let mut ecd = frame(Schema::Ecd, e_ts, e_vals, profile.ecd_period_ms);
    if profile.gap_fraction > 0.0 {
        let (gapped, spans) = inject_gaps_with_spans(
            &harmonics,
            profile.gap_fraction,
            GAP_MEAN_SPAN_MS,
            seed::derive(profile.seed, &[0x9a95]),
        );
        harmonics = gapped;
        ecd = remove_spans(&ecd, &spans);
    }
    let start = profile.start_ms();
    let minutes = n_days as i64 * MINUTES_PER_DAY as i64;
    let truth = StateAssignment::new(
        (0..minutes).map(|m| start + m * MINUTE_MS).collect(),
        (0..minutes)
            .map(|m| profile.state_at((m % MINUTES_PER_DAY as i64) as u32))
            .collect(),
    );
    Ok(SyntheticData { ecd, harmonics, truth })
}

fn generate_day(p: &SyntheticProfile, day: usize) -> (Vec<i64>, Vec<f64>, Vec<i64>, Vec<f64>) {
    let day0 = p.start_ms() + day as i64 * DAY_MS;
    let odd_index = odd_feature_slots();
    let (ht, hv) = {
        let mut rng = seed::rng(p.seed, &[day as u64, 0]);
        let n = (DAY_MS / p.harmonics_period_ms) as usize;
        let std = Normal::new(0.0, 1.0).expect("unit normal");
        let nch = harmonics_channels().len();
        let mut ts = Vec::with_capacity(n);
        let mut vals = Vec::with_capacity(n * nch);
        let mut row = vec![0.0; nch];
        for i in 0..n {
            let t = day0 + i as i64 * p.harmonics_period_ms;
            let state = p.state_at(((t - day0) / MINUTE_MS) as u32);
            harmonics_row(p, state, &odd_index, &mut row, &mut rng, &std);
            ts.push(t);
            vals.extend_from_slice(&row);
        }
        (ts, vals)
    };
    let (et, ev) = {
        let mut rng = seed::rng(p.seed, &[day as u64, 1]);
        let n = (DAY_MS / p.ecd_period_ms) as usize;
        let std = Normal::new(0.0, 1.0).expect("unit normal");
        let mut ts = Vec::with_capacity(n);
        let mut vals = Vec::with_capacity(n * 27);
        for i in 0..n {
            let t = day0 + i as i64 * p.ecd_period_ms;
            let state = p.state_at(((t - day0) / MINUTE_MS) as u32);
            ts.push(t);
            ecd_row(p, state, &mut vals, &mut rng, &std);
        }
        (ts, vals)
    };
    (ht, hv, et, ev)
}

/// Position in the 192-channel harmonics row of each concat-mode feature.
fn odd_feature_slots() -> Vec<usize> {
    odd_current_channels().iter().map(|n| slot_of(n)).collect()
}

fn harmonics_row<R: Rng>(
    p: &SyntheticProfile,
    state: usize,
    odd_slots: &[usize],
    row: &mut [f64],
    rng: &mut R,
    std: &Normal<f64>,
) {
    // Even current orders and voltage harmonics: small state-dependent levels.
    let level = 0.2 + 0.05 * state as f64;
    for v in row.iter_mut() {
        *v = (level * (1.0 + 0.1 * std.sample(rng))).abs();
    }
    for (f, &slot) in odd_slots.iter().enumerate() {
        row[slot] = p.state_centroids[state][f] + p.state_noise[f] * std.sample(rng);
    }
    for q in [Quantity::Current, Quantity::Voltage] {
        for phase in PHASES {
            let mut sq = 0.0;
            for order in MIN_ORDER..=MAX_ORDER {
                let idx = slot_of(&harmonic_channel(phase, q, order));
                sq += row[idx] * row[idx];
            }
            let thd = slot_of(&thd_channel(phase, q));
            row[thd] = sq.sqrt();
        }
    }
}

/// Index of a harmonics channel in canonical order without a search.
fn slot_of(name: &str) -> usize {
    let bytes = name.as_bytes();
    let phase = (bytes[0] - b'A') as usize;
    let q = if bytes[1] == b'I' { 0 } else { 1 };
    let orders = (MAX_ORDER - MIN_ORDER + 1) as usize;
    let base = q * (3 * orders + 3);
    if let Some(order) = name[2..].strip_prefix("_HR") {
        let order: usize = order.parse().expect("numeric order");
        base + phase * orders + order - MIN_ORDER as usize
    } else {
        base + 3 * orders + phase
    }
}

fn ecd_row<R: Rng>(p: &SyntheticProfile, state: usize, out: &mut Vec<f64>, rng: &mut R, std: &Normal<f64>) {
    let (lo, hi) = p.current_range;
    let base = p.state_current(state);
    let pf_base = 0.75 + 0.2 * (state as f64 + 1.0) / (p.n_states as f64 + 1.0);
    let mut i = [0.0; 3];
    let mut v = [0.0; 3];
    let mut pf = [0.0; 3];
    for ph in 0..3 {
        i[ph] = (base * (1.0 + 0.02 * std.sample(rng))).clamp(lo, hi);
        v[ph] = p.nominal_voltage * (1.0 + 0.005 * std.sample(rng));
        pf[ph] = (pf_base + 0.01 * std.sample(rng)).clamp(0.0, 1.0);
    }
    // Neutral current: magnitude of the phasor sum at 0, 120 and 240 degrees.
    let (mut re, mut im) = (0.0, 0.0);
    for (ph, &a) in i.iter().enumerate() {
        let angle = ph as f64 * 2.0 * std::f64::consts::PI / 3.0;
        re += a * angle.cos();
        im += a * angle.sin();
    }
    let apparent: Vec<f64> = (0..3).map(|ph| v[ph] * i[ph]).collect();
    let active: Vec<f64> = (0..3).map(|ph| apparent[ph] * pf[ph]).collect();
    let reactive: Vec<f64> = (0..3)
        .map(|ph| (apparent[ph].powi(2) - active[ph].powi(2)).max(0.0).sqrt())
        .collect();
    let (act_t, rea_t, app_t): (f64, f64, f64) = (active.iter().sum(), reactive.iter().sum(), apparent.iter().sum());
    out.extend_from_slice(&i);
    out.push((re * re + im * im).sqrt());
    out.extend_from_slice(&v);
    out.extend_from_slice(&pf);
    out.push(if app_t > 0.0 { act_t / app_t } else { 1.0 });
    for f in pf {
        out.push(f.acos().to_degrees());
    }
    out.extend_from_slice(&active);
    out.push(act_t);
    out.extend_from_slice(&reactive);
    out.push(rea_t);
    out.extend_from_slice(&apparent);
    out.push(app_t);
    out.push(p.mains_hz + 0.02 * std.sample(rng));
}
