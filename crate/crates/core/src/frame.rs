//! Time-indexed table of named numeric channels.

use crate::ingest::IngestError;

/// Marker stored in a cell whose value is unknown.
pub const MISSING: f64 = f64::NAN;

#[inline]
pub fn is_missing(v: f64) -> bool {
    v.is_nan()
}

/// Bookkeeping collected while a frame was built.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrameMeta {
    /// Rows dropped because a later row carried the same timestamp.
    pub duplicates_dropped: usize,
    /// Input rows were not in timestamp order.
    pub reordered: bool,
    /// Cells turned into MISSING because they failed to parse or validate.
    pub invalid_cells: usize,
    /// Some dates read under a day-first pattern would also be valid month-first.
    pub ambiguous_day_month: bool,
}

/// Rows of `(timestamp, values)` over a fixed ordered channel list.
///
/// Values are stored row-major; a MISSING cell holds NaN. Timestamps are
/// strictly increasing epoch milliseconds. A frame is immutable once built.
#[derive(Debug, Clone)]
pub struct TimestampedFrame {
    channels: Vec<String>,
    timestamps: Vec<i64>,
    values: Vec<f64>,
    nominal_period_ms: i64,
    meta: FrameMeta,
}

impl PartialEq for TimestampedFrame {
    /// Data equality; MISSING equals MISSING and bookkeeping is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.channels == other.channels
            && self.timestamps == other.timestamps
            && self.nominal_period_ms == other.nominal_period_ms
            && self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()))
    }
}

impl TimestampedFrame {
    pub fn empty(channels: Vec<String>, nominal_period_ms: i64) -> Self {
        Self {
            channels,
            timestamps: Vec::new(),
            values: Vec::new(),
            nominal_period_ms,
            meta: FrameMeta::default(),
        }
    }

    /// Builds a frame from row-major values, checking shape and ordering.
    pub fn from_parts(
        channels: Vec<String>,
        timestamps: Vec<i64>,
        values: Vec<f64>,
        nominal_period_ms: i64,
    ) -> Result<Self, IngestError> {
        if values.len() != timestamps.len() * channels.len() {
            return Err(IngestError::MalformedFrame(format!(
                "{} values for {} rows x {} channels",
                values.len(),
                timestamps.len(),
                channels.len()
            )));
        }
        if let Some(w) = timestamps.windows(2).find(|w| w[0] >= w[1]) {
            return Err(IngestError::MalformedFrame(format!(
                "timestamps not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        if nominal_period_ms <= 0 {
            return Err(IngestError::MalformedFrame(
                "nominal period must be positive".into(),
            ));
        }
        Ok(Self {
            channels,
            timestamps,
            values,
            nominal_period_ms,
            meta: FrameMeta::default(),
        })
    }

    pub fn with_meta(mut self, meta: FrameMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nominal_period_ms(&self) -> i64 {
        self.nominal_period_ms
    }

    pub fn meta(&self) -> &FrameMeta {
        &self.meta
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.channels.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = (i64, &[f64])> + '_ {
        (0..self.len()).map(move |i| (self.timestamps[i], self.row(i)))
    }

    /// Cell value, `None` when MISSING.
    pub fn value(&self, row: usize, channel: usize) -> Option<f64> {
        let v = self.values[row * self.channels.len() + channel];
        (!is_missing(v)).then_some(v)
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name)
    }

    pub fn missing_cells(&self) -> usize {
        self.values.iter().filter(|v| is_missing(**v)).count()
    }

    /// Index of the row nearest `ts` with `|row_ts - ts| <= tolerance`;
    /// an exact midpoint tie resolves to the earlier row.
    pub fn find_within(&self, ts: i64, tolerance: i64) -> Option<usize> {
        let idx = self.timestamps.partition_point(|&t| t < ts);
        let before = idx.checked_sub(1).map(|i| (i, ts - self.timestamps[i]));
        let after = (idx < self.timestamps.len()).then(|| (idx, self.timestamps[idx] - ts));
        let best = match (before, after) {
            (Some(b), Some(a)) => {
                if a.1 < b.1 {
                    a
                } else {
                    b
                }
            }
            (Some(b), None) => b,
            (None, Some(a)) => a,
            (None, None) => return None,
        };
        (best.1 <= tolerance).then_some(best.0)
    }

    /// Keeps only the named channels, in the given order.
    pub fn select(&self, names: &[String]) -> Result<Self, IngestError> {
        let idx = names
            .iter()
            .map(|n| {
                self.channel_index(n)
                    .ok_or_else(|| IngestError::MissingColumn(n.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut values = Vec::with_capacity(self.len() * idx.len());
        for i in 0..self.len() {
            let row = self.row(i);
            values.extend(idx.iter().map(|&c| row[c]));
        }
        Ok(Self {
            channels: names.to_vec(),
            timestamps: self.timestamps.clone(),
            values,
            nominal_period_ms: self.nominal_period_ms,
            meta: self.meta.clone(),
        })
    }

    /// Rows with `start <= ts < end`.
    pub fn restrict(&self, start: i64, end: i64) -> Self {
        let lo = self.timestamps.partition_point(|&t| t < start);
        let hi = self.timestamps.partition_point(|&t| t < end).max(lo);
        let n = self.channels.len();
        Self {
            channels: self.channels.clone(),
            timestamps: self.timestamps[lo..hi].to_vec(),
            values: self.values[lo * n..hi * n].to_vec(),
            nominal_period_ms: self.nominal_period_ms,
            meta: self.meta.clone(),
        }
    }

    /// Keeps rows for which `keep(timestamp)` holds.
    pub fn filter_rows(&self, mut keep: impl FnMut(i64) -> bool) -> Self {
        let n = self.channels.len();
        let mut timestamps = Vec::new();
        let mut values = Vec::new();
        for (i, &t) in self.timestamps.iter().enumerate() {
            if keep(t) {
                timestamps.push(t);
                values.extend_from_slice(&self.values[i * n..(i + 1) * n]);
            }
        }
        Self {
            channels: self.channels.clone(),
            timestamps,
            values,
            nominal_period_ms: self.nominal_period_ms,
            meta: self.meta.clone(),
        }
    }

    /// Concatenates frames over the same channels; overlapping timestamps keep
    /// the row from the later frame.
    pub fn merge(frames: Vec<TimestampedFrame>) -> Result<Self, IngestError> {
        let mut iter = frames.into_iter();
        let Some(first) = iter.next() else {
            return Err(IngestError::EmptyFile);
        };
        let mut builder = FrameBuilder::new(first.channels.clone(), first.nominal_period_ms);
        let mut meta = first.meta.clone();
        builder.extend_frame(&first);
        for f in iter {
            if f.channels != first.channels {
                return Err(IngestError::MalformedFrame(
                    "cannot merge frames with different channels".into(),
                ));
            }
            meta.invalid_cells += f.meta.invalid_cells;
            meta.duplicates_dropped += f.meta.duplicates_dropped;
            meta.ambiguous_day_month |= f.meta.ambiguous_day_month;
            builder.extend_frame(&f);
        }
        let mut out = builder.finish();
        out.meta.duplicates_dropped += meta.duplicates_dropped;
        out.meta.invalid_cells += meta.invalid_cells;
        out.meta.ambiguous_day_month |= meta.ambiguous_day_month;
        Ok(out)
    }
}

/// Accumulates rows in any order; [`FrameBuilder::finish`] sorts them and
/// resolves duplicate timestamps by keeping the last occurrence.
#[derive(Debug)]
pub struct FrameBuilder {
    channels: Vec<String>,
    nominal_period_ms: i64,
    timestamps: Vec<i64>,
    values: Vec<f64>,
    in_order: bool,
    meta: FrameMeta,
}

impl FrameBuilder {
    pub fn new(channels: Vec<String>, nominal_period_ms: i64) -> Self {
        Self {
            channels,
            nominal_period_ms,
            timestamps: Vec::new(),
            values: Vec::new(),
            in_order: true,
            meta: FrameMeta::default(),
        }
    }

    pub fn meta_mut(&mut self) -> &mut FrameMeta {
        &mut self.meta
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Appends one row. `row` must have one value per channel.
    pub fn push(&mut self, ts: i64, row: &[f64]) {
        debug_assert_eq!(row.len(), self.channels.len());
        if let Some(&last) = self.timestamps.last() {
            if ts <= last {
                self.in_order = false;
            }
        }
        self.timestamps.push(ts);
        self.values.extend_from_slice(row);
    }

    fn extend_frame(&mut self, f: &TimestampedFrame) {
        for (i, &t) in f.timestamps.iter().enumerate() {
            self.push(t, f.row(i));
        }
    }

    pub fn finish(mut self) -> TimestampedFrame {
        let n = self.channels.len();
        if !self.in_order {
            let reordered = self.timestamps.windows(2).any(|w| w[0] > w[1]);
            self.meta.reordered |= reordered;
            let mut order: Vec<usize> = (0..self.timestamps.len()).collect();
            order.sort_by_key(|&i| self.timestamps[i]);
            // Within a run of equal timestamps the stable sort preserves input
            // order, so the last index of the run is the latest occurrence.
            let mut keep = Vec::with_capacity(order.len());
            for (pos, &i) in order.iter().enumerate() {
                let next_same = order
                    .get(pos + 1)
                    .is_some_and(|&j| self.timestamps[j] == self.timestamps[i]);
                if next_same {
                    self.meta.duplicates_dropped += 1;
                } else {
                    keep.push(i);
                }
            }
            let mut timestamps = Vec::with_capacity(keep.len());
            let mut values = Vec::with_capacity(keep.len() * n);
            for i in keep {
                timestamps.push(self.timestamps[i]);
                values.extend_from_slice(&self.values[i * n..(i + 1) * n]);
            }
            self.timestamps = timestamps;
            self.values = values;
        }
        TimestampedFrame {
            channels: self.channels,
            timestamps: self.timestamps,
            values: self.values,
            nominal_period_ms: self.nominal_period_ms,
            meta: self.meta,
        }
    }
}
