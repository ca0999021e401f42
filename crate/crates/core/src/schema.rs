//! Column schemas of the two MiDAS export files.

/// Accepted header names for the timestamp column.
pub const TIMESTAMP_COLUMNS: [&str; 3] = ["Time Stamp", "timestamp", "datetime"];

/// Consumption channels in canonical order.
pub const ECD_CHANNELS: [&str; 27] = [
    "IA",
    "IB",
    "IC",
    "INCURRENT",
    "VA",
    "VB",
    "VC",
    "PFA",
    "PFB",
    "PFC",
    "PFT",
    "PhaseA",
    "PhaseB",
    "PhaseC",
    "ActivePA",
    "ActivePB",
    "ActivePC",
    "ActivePT",
    "ReactivePA",
    "ReactivePB",
    "ReactivePC",
    "ReactivePT",
    "ApparentPA",
    "ApparentPB",
    "ApparentPC",
    "ApparentPT",
    "FREQ",
];

pub const PHASES: [char; 3] = ['A', 'B', 'C'];

/// Lowest and highest harmonic order reported by the device.
pub const MIN_ORDER: u32 = 2;
pub const MAX_ORDER: u32 = 32;

/// Odd harmonic orders used as clustering features (3, 5, ..., 31).
pub fn odd_orders() -> impl Iterator<Item = u32> {
    (3..=MAX_ORDER).step_by(2)
}

/// Quantity measured by a harmonics channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Current,
    Voltage,
}

impl Quantity {
    fn letter(self) -> char {
        match self {
            Quantity::Current => 'I',
            Quantity::Voltage => 'V',
        }
    }
}

/// Channel name of one harmonic order, e.g. `AI_HR17`.
pub fn harmonic_channel(phase: char, quantity: Quantity, order: u32) -> String {
    format!("{phase}{}_HR{order}", quantity.letter())
}

pub fn thd_channel(phase: char, quantity: Quantity) -> String {
    format!("{phase}{}_THD", quantity.letter())
}

/// The 192 harmonics channels in canonical order: per-phase current orders,
/// current THD, per-phase voltage orders, voltage THD.
pub fn harmonics_channels() -> Vec<String> {
    let mut out = Vec::with_capacity(192);
    for quantity in [Quantity::Current, Quantity::Voltage] {
        for phase in PHASES {
            for order in MIN_ORDER..=MAX_ORDER {
                out.push(harmonic_channel(phase, quantity, order));
            }
        }
        for phase in PHASES {
            out.push(thd_channel(phase, quantity));
        }
    }
    out
}

/// Which of the two device files a CSV holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    Ecd,
    Harmonics,
}

impl Schema {
    pub fn channels(self) -> Vec<String> {
        match self {
            Schema::Ecd => ECD_CHANNELS.iter().map(|s| s.to_string()).collect(),
            Schema::Harmonics => harmonics_channels(),
        }
    }

    /// Device sampling period in milliseconds.
    pub fn nominal_period_ms(self) -> i64 {
        match self {
            Schema::Ecd => 300,
            Schema::Harmonics => 500,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Schema::Ecd => "ecd",
            Schema::Harmonics => "harmonics",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn harmonics_schema_has_192_unique_channels() {
        let ch = harmonics_channels();
        assert_eq!(ch.len(), 192);
        assert_eq!(ch.iter().collect::<HashSet<_>>().len(), 192);
        assert_eq!(ch[0], "AI_HR2");
        assert_eq!(ch[30], "AI_HR32");
        assert_eq!(ch[93], "AI_THD");
        assert_eq!(ch[191], "CV_THD");
    }

    #[test]
    fn ecd_schema_plus_timestamp_is_28_features() {
        assert_eq!(ECD_CHANNELS.len() + 1, 28);
    }

    #[test]
    fn fifteen_odd_orders() {
        let orders: Vec<u32> = odd_orders().collect();
        assert_eq!(orders.len(), 15);
        assert_eq!(orders.first(), Some(&3));
        assert_eq!(orders.last(), Some(&31));
    }
}
