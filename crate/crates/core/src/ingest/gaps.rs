use serde::Serialize;

use crate::frame::TimestampedFrame;

use super::IngestError;

/// Coverage of a regular time grid by the rows of a frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub expected_count: u64,
    pub present_count: u64,
    /// `1 - present_count / expected_count`
    pub missing_fraction: f64,
    /// Inclusive `(first, last)` grid timestamps of each run of absent points.
    pub gap_spans: Vec<(i64, i64)>,
    /// Rows dropped at parse time for repeating an earlier timestamp.
    pub duplicate_timestamps: usize,
}

impl GapReport {
    pub fn missing_count(&self) -> u64 {
        self.expected_count - self.present_count
    }
}

/// Checks which points of the grid `start, start + p, ...` (up to `end`) have
/// a row within `p / 2`.
pub fn detect_gaps(
    frame: &TimestampedFrame,
    nominal_period_ms: i64,
    range: (i64, i64),
) -> Result<GapReport, IngestError> {
    let (start, end) = range;
    if start > end || nominal_period_ms <= 0 {
        return Err(IngestError::InvalidRange { start, end });
    }
    let p = nominal_period_ms;
    let expected = ((end - start) / p) as u64 + 1;
    let ts = frame.timestamps();
    let mut j = 0usize;
    let mut present = 0u64;
    let mut spans = Vec::new();
    let mut open: Option<(i64, i64)> = None;
    for i in 0..expected {
        let g = start + i as i64 * p;
        // |t - g| <= p/2 without integer rounding: 2|t - g| <= p.
        while j < ts.len() && 2 * (g - ts[j]) > p {
            j += 1;
        }
        let hit = j < ts.len() && 2 * (ts[j] - g).abs() <= p;
        if hit {
            present += 1;
            if let Some(span) = open.take() {
                spans.push(span);
            }
        } else {
            open = Some(match open {
                Some((s, _)) => (s, g),
                None => (g, g),
            });
        }
    }
    if let Some(span) = open {
        spans.push(span);
    }
    Ok(GapReport {
        expected_count: expected,
        present_count: present,
        missing_fraction: 1.0 - present as f64 / expected as f64,
        gap_spans: spans,
        duplicate_timestamps: frame.meta().duplicates_dropped,
    })
}
