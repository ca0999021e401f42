//! Timestamp text formats. Internally every timestamp is epoch milliseconds,
//! and naive wall-clock text is interpreted as UTC.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime, TimeZone, Utc};

use crate::DAY_MS;

/// Default day-first pattern; the fractional part is optional when parsing.
pub const DEFAULT_PATTERN: &str = "%d-%m-%Y %H:%M:%S%.f";

/// How timestamp cells are written in a CSV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TimestampFormat {
    /// A chrono `strftime` pattern for naive date-times.
    Pattern(String),
    EpochMillis,
    EpochSeconds,
    /// RFC 3339 / ISO 8601 with offset.
    Rfc3339,
}

impl Default for TimestampFormat {
    fn default() -> Self {
        TimestampFormat::Pattern(DEFAULT_PATTERN.to_string())
    }
}

impl FromStr for TimestampFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "epoch-ms" => Ok(TimestampFormat::EpochMillis),
            "epoch-s" => Ok(TimestampFormat::EpochSeconds),
            "rfc3339" | "iso8601" => Ok(TimestampFormat::Rfc3339),
            "" => Ok(TimestampFormat::default()),
            p if p.contains('%') => Ok(TimestampFormat::Pattern(p.to_string())),
            other => Err(format!(
                "unknown timestamp format '{other}' (expected a strftime pattern, epoch-ms, epoch-s or rfc3339)"
            )),
        }
    }
}

impl fmt::Display for TimestampFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimestampFormat::Pattern(p) => f.write_str(p),
            TimestampFormat::EpochMillis => f.write_str("epoch-ms"),
            TimestampFormat::EpochSeconds => f.write_str("epoch-s"),
            TimestampFormat::Rfc3339 => f.write_str("rfc3339"),
        }
    }
}

impl TimestampFormat {
    pub fn parse(&self, text: &str) -> Option<i64> {
        let text = text.trim();
        match self {
            TimestampFormat::Pattern(p) => NaiveDateTime::parse_from_str(text, p)
                .ok()
                .map(|dt| dt.and_utc().timestamp_millis()),
            TimestampFormat::EpochMillis => text.parse::<i64>().ok(),
            TimestampFormat::EpochSeconds => {
                let secs: f64 = text.parse().ok()?;
                secs.is_finite().then(|| (secs * 1000.0).round() as i64)
            }
            TimestampFormat::Rfc3339 => DateTime::parse_from_rfc3339(text)
                .ok()
                .map(|dt| dt.timestamp_millis()),
        }
    }

    pub fn format(&self, ts: i64) -> String {
        match self {
            TimestampFormat::Pattern(p) => to_datetime(ts).format(p).to_string(),
            TimestampFormat::EpochMillis => ts.to_string(),
            TimestampFormat::EpochSeconds => {
                if ts % 1000 == 0 {
                    (ts / 1000).to_string()
                } else {
                    format!("{}", ts as f64 / 1000.0)
                }
            }
            TimestampFormat::Rfc3339 => iso_millis(ts),
        }
    }

    /// True when the pattern puts the day before the month, so that dates with
    /// a day of 12 or less read differently under a month-first convention.
    pub fn is_day_first(&self) -> bool {
        match self {
            TimestampFormat::Pattern(p) => match (p.find("%d"), p.find("%m")) {
                (Some(d), Some(m)) => d < m,
                _ => false,
            },
            _ => false,
        }
    }
}

fn to_datetime(ts: i64) -> DateTime<Utc> {
    Utc.timestamp_millis_opt(ts)
        .single()
        .unwrap_or(DateTime::<Utc>::MIN_UTC)
}

/// `2022-01-20T09:00:00.000Z`
pub fn iso_millis(ts: i64) -> String {
    to_datetime(ts)
        .format("%Y-%m-%dT%H:%M:%S%.3fZ")
        .to_string()
}

pub fn parse_iso(text: &str) -> Option<i64> {
    TimestampFormat::Rfc3339.parse(text)
}

/// Epoch milliseconds of 00:00 UTC on `date`.
pub fn day_start(date: NaiveDate) -> i64 {
    date.and_hms_opt(0, 0, 0)
        .expect("midnight exists")
        .and_utc()
        .timestamp_millis()
}

/// Calendar day (UTC) containing `ts`.
pub fn date_of(ts: i64) -> NaiveDate {
    to_datetime(ts).date_naive()
}

/// Day of the month of `ts`, used for day/month ambiguity checks.
pub fn day_of_month(ts: i64) -> u32 {
    to_datetime(ts).day()
}

/// Index of the UTC day containing `ts`, counted from the epoch.
pub fn day_index(ts: i64) -> i64 {
    ts.div_euclid(DAY_MS)
}

/// True for Saturdays and Sundays.
pub fn is_weekend(ts: i64) -> bool {
    // 1970-01-01 was a Thursday.
    let dow = (day_index(ts) + 4).rem_euclid(7);
    dow == 0 || dow == 6
}
