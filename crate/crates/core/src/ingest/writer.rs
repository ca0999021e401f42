use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::frame::TimestampedFrame;
use crate::time::TimestampFormat;

use super::IngestError;

/// Writes a frame in the same CSV layout the parsers accept. MISSING cells
/// are written empty; each `comments` entry becomes a leading `# ` line.
pub fn write_frame<W: Write>(
    out: W,
    frame: &TimestampedFrame,
    format: &TimestampFormat,
    comments: &[String],
) -> Result<(), IngestError> {
    let mut out = BufWriter::new(out);
    let io = |source| IngestError::Io {
        path: "<output>".into(),
        source,
    };
    for c in comments {
        writeln!(out, "# {c}").map_err(io)?;
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["Time Stamp".to_string()];
    header.extend(frame.channels().iter().cloned());
    w.write_record(&header)?;
    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for (ts, row) in frame.rows() {
        record.clear();
        record.push(format.format(ts));
        record.extend(row.iter().map(|v| {
            if v.is_nan() {
                String::new()
            } else {
                v.to_string()
            }
        }));
        w.write_record(&record)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

pub fn write_frame_file(
    path: &Path,
    frame: &TimestampedFrame,
    format: &TimestampFormat,
    comments: &[String],
) -> Result<(), IngestError> {
    let file = File::create(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_frame(file, frame, format, comments)
}
