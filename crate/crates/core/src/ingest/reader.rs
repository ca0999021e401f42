//! Row-at-a-time CSV reader. Holds one record and one decoded row at a time,
//! so memory use is independent of file length.

use std::io::Read;

use crate::frame::MISSING;
use crate::schema::{Schema, TIMESTAMP_COLUMNS};
use crate::time::{day_of_month, TimestampFormat};

use super::IngestError;

pub struct FrameReader<R: Read> {
    csv: csv::Reader<R>,
    record: csv::StringRecord,
    format: TimestampFormat,
    ts_col: usize,
    /// Source column for each output channel.
    sources: Vec<usize>,
    channels: Vec<String>,
    /// Output index whose values must be non-negative (ApparentPT).
    non_negative: Option<usize>,
    row: Vec<f64>,
    invalid_cells: usize,
    ambiguous_day_month: bool,
}

impl<R: Read> FrameReader<R> {
    /// Reads the header and maps columns by name. With `channels = None` the
    /// full schema is kept in canonical order; otherwise only the listed
    /// schema channels are decoded, in that order.
    pub fn new(
        reader: R,
        schema: Schema,
        format: TimestampFormat,
        channels: Option<&[String]>,
    ) -> Result<Self, IngestError> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = csv.headers().map_err(IngestError::from)?.clone();
        if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
            return Err(IngestError::EmptyFile);
        }
        let find = |name: &str| headers.iter().position(|h| h == name);

        let ts_col = TIMESTAMP_COLUMNS
            .iter()
            .find_map(|n| find(n))
            .ok_or_else(|| IngestError::MissingColumn(TIMESTAMP_COLUMNS[0].to_string()))?;

        let schema_channels = schema.channels();
        // Every schema column must be present even when only a subset is decoded.
        for name in &schema_channels {
            if find(name).is_none() {
                return Err(IngestError::MissingColumn(name.clone()));
            }
        }
        let channels: Vec<String> = match channels {
            Some(list) => {
                for name in list {
                    if !schema_channels.contains(name) {
                        return Err(IngestError::MissingColumn(name.clone()));
                    }
                }
                list.to_vec()
            }
            None => schema_channels,
        };
        let sources = channels
            .iter()
            .map(|n| find(n).expect("validated above"))
            .collect();
        let non_negative = match schema {
            Schema::Ecd => channels.iter().position(|c| c == "ApparentPT"),
            Schema::Harmonics => None,
        };
        Ok(Self {
            csv,
            record: csv::StringRecord::new(),
            format,
            ts_col,
            row: vec![MISSING; channels.len()],
            sources,
            channels,
            non_negative,
            invalid_cells: 0,
            ambiguous_day_month: false,
        })
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    /// Values of the row most recently returned by [`Self::next_row`].
    pub fn row(&self) -> &[f64] {
        &self.row
    }

    pub fn invalid_cells(&self) -> usize {
        self.invalid_cells
    }

    pub fn ambiguous_day_month(&self) -> bool {
        self.ambiguous_day_month
    }

    /// Advances to the next data row and returns its timestamp.
    pub fn next_row(&mut self) -> Result<Option<i64>, IngestError> {
        loop {
            if !self.csv.read_record(&mut self.record)? {
                return Ok(None);
            }
            // Skip blank lines.
            if self.record.iter().all(str::is_empty) {
                continue;
            }
            break;
        }
        let line = self.record.position().map_or(0, |p| p.line());
        let cell = self.record.get(self.ts_col).unwrap_or("");
        let ts = self
            .format
            .parse(cell)
            .ok_or_else(|| IngestError::TimestampParse {
                line,
                value: cell.to_string(),
            })?;
        if !self.ambiguous_day_month && self.format.is_day_first() && day_of_month(ts) <= 12 {
            self.ambiguous_day_month = true;
        }
        for (out, &src) in self.row.iter_mut().zip(&self.sources) {
            let text = self.record.get(src).unwrap_or("");
            *out = match parse_cell(text) {
                Cell::Value(v) => v,
                Cell::Empty => MISSING,
                Cell::Invalid => {
                    self.invalid_cells += 1;
                    MISSING
                }
            };
        }
        if let Some(i) = self.non_negative {
            if self.row[i] < 0.0 {
                self.row[i] = MISSING;
                self.invalid_cells += 1;
            }
        }
        Ok(Some(ts))
    }
}

enum Cell {
    Value(f64),
    Empty,
    Invalid,
}

fn parse_cell(text: &str) -> Cell {
    if text.is_empty() || text.eq_ignore_ascii_case("nan") || text.eq_ignore_ascii_case("na") {
        return Cell::Empty;
    }
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Cell::Value(v),
        _ => Cell::Invalid,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::ECD_CHANNELS;

    fn ecd_text(rows: &[(&str, f64)]) -> String {
        let mut s = String::from("Time Stamp,");
        s.push_str(&ECD_CHANNELS.join(","));
        s.push('\n');
        for (ts, v) in rows {
            s.push_str(ts);
            for _ in ECD_CHANNELS {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }

    #[test]
    fn reads_rows_one_at_a_time() {
        let text = ecd_text(&[("01-01-2022 00:00:00", 1.0), ("01-01-2022 00:00:00.300", 2.0)]);
        let mut r =
            FrameReader::new(text.as_bytes(), Schema::Ecd, TimestampFormat::default(), None).unwrap();
        assert_eq!(r.channels().len(), 27);
        let t0 = r.next_row().unwrap().unwrap();
        assert_eq!(r.row()[0], 1.0);
        let t1 = r.next_row().unwrap().unwrap();
        assert_eq!(t1 - t0, 300);
        assert!(r.next_row().unwrap().is_none());
        assert!(r.ambiguous_day_month());
    }

    #[test]
    fn negative_apparent_power_becomes_missing() {
        let text = ecd_text(&[("13-01-2022 00:00:00", -1.0)]);
        let mut r =
            FrameReader::new(text.as_bytes(), Schema::Ecd, TimestampFormat::default(), None).unwrap();
        r.next_row().unwrap();
        let apt = ECD_CHANNELS.iter().position(|c| *c == "ApparentPT").unwrap();
        assert!(r.row()[apt].is_nan());
        assert_eq!(r.row()[0], -1.0);
        assert_eq!(r.invalid_cells(), 1);
        assert!(!r.ambiguous_day_month());
    }

    #[test]
    fn bad_timestamp_reports_line() {
        let text = ecd_text(&[("01-01-2022 00:00:00", 1.0), ("yesterday", 1.0)]);
        let mut r =
            FrameReader::new(text.as_bytes(), Schema::Ecd, TimestampFormat::default(), None).unwrap();
        r.next_row().unwrap();
        match r.next_row() {
            Err(IngestError::TimestampParse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
