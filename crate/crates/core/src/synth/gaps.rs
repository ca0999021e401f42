//! Contiguous-span row deletion, mimicking outages and sensor downtime.

use rand::Rng;

use crate::frame::TimestampedFrame;
use crate::seed;

/// Mean length of a deleted span.
pub const GAP_MEAN_SPAN_MS: i64 = 120_000;

/// Deletes whole runs of rows until exactly `round(fraction * rows)` are gone.
/// Span lengths are geometric with mean `mean_span_ms`.
pub fn inject_gaps(frame: &TimestampedFrame, fraction: f64, mean_span_ms: i64, seed: u64) -> TimestampedFrame {
    inject_gaps_with_spans(frame, fraction, mean_span_ms, seed).0
}

/// As [`inject_gaps`], also returning the deleted time spans as half-open
/// `[start, end)` ranges in time order.
pub fn inject_gaps_with_spans(
    frame: &TimestampedFrame,
    fraction: f64,
    mean_span_ms: i64,
    seed: u64,
) -> (TimestampedFrame, Vec<(i64, i64)>) {
    let n = frame.len();
    let target = ((fraction.clamp(0.0, 1.0) * n as f64).round() as usize).min(n);
    let mut deleted = vec![false; n];
    let mut removed = 0;
    let mut rng = seed::rng(seed, &[]);
    let mean_rows = (mean_span_ms as f64 / frame.nominal_period_ms().max(1) as f64).max(1.0);
    // Success probability of a geometric distribution on {1, 2, ...}.
    let p = 1.0 / mean_rows;
    while removed < target {
        let mut len = 1;
        while len < n && rng.random::<f64>() >= p {
            len += 1;
        }
        let mut i = rng.random_range(0..n);
        // Start at the next surviving row so every draw makes progress.
        while deleted[i] {
            i = (i + 1) % n;
        }
        while len > 0 && removed < target && i < n && !deleted[i] {
            deleted[i] = true;
            removed += 1;
            len -= 1;
            i += 1;
        }
    }
    let ts = frame.timestamps();
    let mut spans: Vec<(i64, i64)> = Vec::new();
    let period = frame.nominal_period_ms();
    let mut r = 0;
    while r < n {
        if deleted[r] {
            let start = r;
            while r < n && deleted[r] {
                r += 1;
            }
            let end = if r < n { ts[r] } else { ts[r - 1] + period };
            spans.push((ts[start], end));
        } else {
            r += 1;
        }
    }
    let mut idx = 0;
    let kept = frame.filter_rows(|_| {
        let keep = !deleted[idx];
        idx += 1;
        keep
    });
    (kept, spans)
}

/// Drops every row whose timestamp falls inside one of the sorted half-open
/// `spans`.
pub fn remove_spans(frame: &TimestampedFrame, spans: &[(i64, i64)]) -> TimestampedFrame {
    frame.filter_rows(|t| {
        let i = spans.partition_point(|s| s.1 <= t);
        !(i < spans.len() && spans[i].0 <= t)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(rows: usize) -> TimestampedFrame {
        TimestampedFrame::from_parts(
            vec!["x".into()],
            (0..rows as i64).map(|i| i * 1000).collect(),
            (0..rows).map(|i| i as f64).collect(),
            1000,
        )
        .unwrap()
    }

    #[test]
    fn zero_is_identity_and_one_empties() {
        let f = frame(100);
        assert_eq!(inject_gaps(&f, 0.0, 5000, 1), f);
        assert!(inject_gaps(&f, 1.0, 5000, 1).is_empty());
    }

    #[test]
    fn hits_fraction_on_large_frame() {
        let f = frame(100_000);
        let g = inject_gaps(&f, 0.05, 120_000, 7);
        let realized = 1.0 - g.len() as f64 / f.len() as f64;
        assert!((0.045..=0.055).contains(&realized), "{realized}");
    }

    #[test]
    fn spans_are_contiguous_runs() {
        let f = frame(10_000);
        let (g, spans) = inject_gaps_with_spans(&f, 0.2, 30_000, 3);
        let mean_len = spans.iter().map(|s| (s.1 - s.0) as f64 / 1000.0).sum::<f64>() / spans.len() as f64;
        assert!(mean_len > 5.0, "mean span {mean_len} rows");
        assert_eq!(remove_spans(&f, &spans), g);
    }
}
