//! Parsing and validation of consumption (ECD) and harmonics CSV exports.
//!
//! Columns are matched by exact header name, so files may list them in any
//! order. Output frames always use the canonical channel order from
//! [`crate::schema`]. Unparseable numeric cells become MISSING, rows are sorted
//! by timestamp, and duplicate timestamps keep the last occurrence (the number
//! dropped is kept in [`crate::frame::FrameMeta`]).

mod gaps;
mod reader;
mod writer;

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use gaps::{detect_gaps, GapReport};
pub use reader::FrameReader;
pub use writer::{write_frame, write_frame_file};

use crate::frame::{FrameBuilder, TimestampedFrame};
use crate::schema::Schema;
use crate::time::TimestampFormat;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(String),
    #[error("missing required column '{0}'")]
    MissingColumn(String),
    #[error("unreadable timestamp '{value}' on line {line}")]
    TimestampParse { line: u64, value: String },
    #[error("file is empty")]
    EmptyFile,
    #[error("invalid range: start {start} after end {end}, or non-positive period")]
    InvalidRange { start: i64, end: i64 },
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
}

impl From<csv::Error> for IngestError {
    fn from(e: csv::Error) -> Self {
        IngestError::Csv(e.to_string())
    }
}

fn open(path: &Path) -> Result<BufReader<File>, IngestError> {
    File::open(path)
        .map(|f| BufReader::with_capacity(1 << 16, f))
        .map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Parses any schema from a reader, optionally decoding only `channels`.
pub fn parse_reader<R: std::io::Read>(
    reader: R,
    schema: Schema,
    format: &TimestampFormat,
    channels: Option<&[String]>,
) -> Result<TimestampedFrame, IngestError> {
    let mut rows = FrameReader::new(reader, schema, format.clone(), channels)?;
    let mut builder = FrameBuilder::new(rows.channels().to_vec(), schema.nominal_period_ms());
    while let Some(ts) = rows.next_row()? {
        builder.push(ts, rows.row());
    }
    let meta = builder.meta_mut();
    meta.invalid_cells = rows.invalid_cells();
    meta.ambiguous_day_month = rows.ambiguous_day_month();
    Ok(builder.finish())
}

pub fn parse_csv(
    path: &Path,
    schema: Schema,
    format: &TimestampFormat,
    channels: Option<&[String]>,
) -> Result<TimestampedFrame, IngestError> {
    parse_reader(open(path)?, schema, format, channels)
}

/// Parses a consumption file into a 27-channel frame with a 300 ms period.
pub fn parse_ecd_csv(path: &Path, format: &TimestampFormat) -> Result<TimestampedFrame, IngestError> {
    parse_csv(path, Schema::Ecd, format, None)
}

/// Parses a harmonics file into a 192-channel frame with a 500 ms period.
pub fn parse_harmonics_csv(
    path: &Path,
    format: &TimestampFormat,
) -> Result<TimestampedFrame, IngestError> {
    parse_csv(path, Schema::Harmonics, format, None)
}
