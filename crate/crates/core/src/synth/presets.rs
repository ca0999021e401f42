//! Profiles named after the monitored sites. Amp ranges and missing-data rates
//! follow the published site descriptions; the two USA sites publish no amp
//! range, so theirs are placeholders. Centroids and schedules are invented.

use chrono::NaiveDate;
use rand::Rng;

use super::{min_pairwise, ScheduleSegment, SynthError, SyntheticProfile};
use crate::seed;

pub const PRESET_NAMES: [&str; 8] = [
    "india-1", "india-2", "india-3", "india-4", "india-5", "india-6", "usa-1", "usa-2",
];

struct Site {
    name: &'static str,
    amps: (f64, f64),
    missing: f64,
    states: usize,
    usa: bool,
}

const SITES: [Site; 8] = [
    Site { name: "india-1", amps: (2.0, 25.0), missing: 0.0534, states: 4, usa: false },
    Site { name: "india-2", amps: (35.0, 110.0), missing: 0.0151, states: 5, usa: false },
    Site { name: "india-3", amps: (2.0, 40.0), missing: 0.0058, states: 4, usa: false },
    Site { name: "india-4", amps: (15.0, 60.0), missing: 0.1029, states: 6, usa: false },
    Site { name: "india-5", amps: (3.0, 25.0), missing: 0.0013, states: 3, usa: false },
    Site { name: "india-6", amps: (0.5, 10.0), missing: 0.0041, states: 3, usa: false },
    Site { name: "usa-1", amps: (5.0, 80.0), missing: 0.0167, states: 4, usa: true },
    Site { name: "usa-2", amps: (40.0, 120.0), missing: 0.0163, states: 3, usa: true },
];

/// Separation of the nearest two preset centroids, in noise units.
const PRESET_SEPARATION: f64 = 10.0;

pub fn preset(name: &str) -> Result<SyntheticProfile, SynthError> {
    let (index, site) = SITES
        .iter()
        .enumerate()
        .find(|(_, s)| s.name == name)
        .ok_or_else(|| SynthError::UnknownPreset(name.to_string()))?;
    let seed = 1000 + index as u64;
    let nf = SyntheticProfile::n_features();
    let mut rng = seed::rng(seed, &[0x9e5e7]);
    // Magnitudes in percent of the fundamental, decaying with order.
    let centroids: Vec<Vec<f64>> = (0..site.states)
        .map(|_| {
            (0..nf)
                .map(|f| {
                    let order = 3 + 2 * (f % 15);
                    rng.random_range(0.2..1.0) * 30.0 / order as f64
                })
                .collect()
        })
        .collect();
    let noise = min_pairwise(&centroids) / PRESET_SEPARATION;
    Ok(SyntheticProfile {
        name: site.name.to_string(),
        n_states: site.states,
        state_centroids: centroids,
        state_noise: vec![noise; nf],
        daily_schedule: working_day(site.states),
        current_range: site.amps,
        gap_fraction: site.missing,
        seed,
        start_date: NaiveDate::from_ymd_opt(2022, 1, 3).expect("valid date"),
        mains_hz: if site.usa { 60.0 } else { 50.0 },
        nominal_voltage: if site.usa { 120.0 } else { 230.0 },
        harmonics_period_ms: 500,
        ecd_period_ms: 300,
    })
}

/// State 0 overnight (20:00 to 06:00); states 1.. share the working hours in
/// blocks of growing length.
fn working_day(states: usize) -> Vec<ScheduleSegment> {
    if states == 1 {
        return vec![ScheduleSegment { start_minute: 0, state: 0 }];
    }
    let (open, close) = (6 * 60, 20 * 60);
    let busy = states - 1;
    let weights: Vec<u32> = (1..=busy as u32).collect();
    let total: u32 = weights.iter().sum();
    let mut out = vec![ScheduleSegment { start_minute: 0, state: 0 }];
    let mut start = open;
    for (i, w) in weights.iter().enumerate() {
        out.push(ScheduleSegment { start_minute: start, state: i + 1 });
        start += (close - open) * w / total;
    }
    out.push(ScheduleSegment { start_minute: close, state: 0 });
    out
}
