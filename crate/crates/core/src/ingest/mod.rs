//! Event parsing and hourly aggregation.
//!
//! Each source is a delimiter-separated file with a header row. Rows become
//! [`RawEvent`]s, which are then counted per (mode, hour) into a
//! [`DemandSeries`]. Bad rows go to a [`RejectLog`]; more than 10% rejected
//! rows is a hard failure.

mod series;
mod slot;

use std::fmt;
use std::io::Read;
use std::str::FromStr;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

pub use series::DemandSeries;
pub use slot::{decompose_slot, recompose_slot, HourSlot, HourSpan, WeekPosition, SLOT_FORMAT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Bus,
    Tram,
    Metro,
    Bike,
    Car,
}

impl Mode {
    pub const COUNT: usize = 5;
    pub const ALL: [Mode; Mode::COUNT] = [Mode::Bus, Mode::Tram, Mode::Metro, Mode::Bike, Mode::Car];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Bus => "bus",
            Mode::Tram => "tram",
            Mode::Metro => "metro",
            Mode::Bike => "bike",
            Mode::Car => "car",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bus" => Ok(Mode::Bus),
            "tram" => Ok(Mode::Tram),
            "metro" => Ok(Mode::Metro),
            "bike" => Ok(Mode::Bike),
            "car" => Ok(Mode::Car),
            other => Err(Error::Input(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawEvent {
    pub mode: Mode,
    pub timestamp: NaiveDateTime,
    pub source_id: Option<String>,
    /// Number of records this row stands for; 1 unless the schema has a
    /// count column.
    pub weight: u64,
    /// Line in the source file, for reject reporting.
    pub line: u64,
}

/// Column mapping for one input source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schema {
    pub delimiter: char,
    pub timestamp_column: String,
    pub timestamp_format: String,
    /// Column holding the mode name. Ignored when `fixed_mode` is set.
    pub mode_column: Option<String>,
    /// Every row of the source belongs to this mode.
    pub fixed_mode: Option<Mode>,
    /// Optional column with a pre-aggregated record count per row.
    pub count_column: Option<String>,
    pub source_id_column: Option<String>,
    /// Suffix tagging the repeated wall-clock hour at a DST fold. It is
    /// stripped, so both passes through the hour land in one slot.
    pub fold_marker: Option<String>,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            delimiter: ',',
            timestamp_column: "timestamp".into(),
            timestamp_format: SLOT_FORMAT.into(),
            mode_column: Some("mode".into()),
            fixed_mode: None,
            count_column: None,
            source_id_column: None,
            fold_marker: Some("*".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reject {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RejectLog {
    pub entries: Vec<Reject>,
    pub total: usize,
}

impl RejectLog {
    fn push(&mut self, line: u64, reason: impl Into<String>) {
        self.entries.push(Reject {
            line,
            reason: reason.into(),
        });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn check_threshold(&self) -> Result<()> {
        if self.entries.len() * 10 > self.total {
            return Err(Error::TooManyRejects {
                rejected: self.entries.len(),
                total: self.total,
            });
        }
        Ok(())
    }

    /// One `<line_no>\t<reason>` line per reject.
    pub fn to_tsv(&self) -> String {
        self.entries
            .iter()
            .map(|r| format!("{}\t{}\n", r.line, r.reason))
            .collect()
    }

    pub fn merge(&mut self, other: RejectLog) {
        self.entries.extend(other.entries);
        self.total += other.total;
    }
}

#[derive(Debug, Clone)]
pub struct ParsedEvents {
    pub events: Vec<RawEvent>,
    pub rejects: RejectLog,
}

struct Columns {
    timestamp: usize,
    mode: Option<usize>,
    count: Option<usize>,
    source_id: Option<usize>,
}

fn resolve_columns(header: &csv::StringRecord, schema: &Schema) -> Result<Columns> {
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Input(format!("header lacks column {name:?}")))
    };
    let mode = match (&schema.fixed_mode, &schema.mode_column) {
        (Some(_), _) => None,
        (None, Some(col)) => Some(find(col)?),
        (None, None) => return Err(Error::Config("schema needs either mode_column or fixed_mode".into())),
    };
    Ok(Columns {
        timestamp: find(&schema.timestamp_column)?,
        mode,
        count: schema.count_column.as_deref().map(find).transpose()?,
        source_id: schema.source_id_column.as_deref().map(find).transpose()?,
    })
}

fn parse_row(rec: &csv::StringRecord, cols: &Columns, schema: &Schema) -> Result<RawEvent, String> {
    let field = |i: usize| rec.get(i).ok_or_else(|| format!("missing field {}", i + 1));
    let mut ts = field(cols.timestamp)?.trim();
    if let Some(marker) = schema.fold_marker.as_deref().filter(|m| !m.is_empty()) {
        ts = ts.strip_suffix(marker).unwrap_or(ts).trim_end();
    }
    let timestamp = NaiveDateTime::parse_from_str(ts, &schema.timestamp_format)
        .map_err(|e| format!("bad timestamp {ts:?}: {e}"))?;
    let mode = match (schema.fixed_mode, cols.mode) {
        (Some(m), _) => m,
        (None, Some(i)) => {
            let raw = field(i)?;
            raw.parse::<Mode>()
                .map_err(|_| format!("unknown mode {:?}", raw.trim()))?
        }
        (None, None) => unreachable!("resolve_columns guarantees a mode source"),
    };
    let weight = match cols.count {
        Some(i) => {
            let raw = field(i)?.trim();
            raw.parse::<u64>().map_err(|_| format!("bad count {raw:?}"))?
        }
        None => 1,
    };
    let source_id = cols.source_id.map(field).transpose()?.map(|s| s.trim().to_string());
    Ok(RawEvent {
        mode,
        timestamp,
        source_id,
        weight,
        line: rec.position().map(|p| p.line()).unwrap_or(0),
    })
}

/// Parses one delimited source. Output keeps input order.
pub fn parse_events<R: Read>(input: R, schema: &Schema) -> Result<ParsedEvents> {
    if !schema.delimiter.is_ascii() {
        return Err(Error::Config(format!("delimiter {:?} is not ASCII", schema.delimiter)));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .flexible(true)
        .from_reader(input);
    let header = reader.headers()?.clone();
    let cols = resolve_columns(&header, schema)?;

    let mut events = Vec::new();
    let mut rejects = RejectLog::default();
    let mut record = csv::StringRecord::new();
    loop {
        let line = reader.position().line();
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                rejects.total += 1;
                match parse_row(&record, &cols, schema) {
                    Ok(ev) => events.push(ev),
                    Err(reason) => rejects.push(record.position().map_or(line, |p| p.line()), reason),
                }
            }
            Err(e) => {
                rejects.total += 1;
                rejects.push(line, format!("malformed row: {e}"));
            }
        }
    }
    rejects.check_threshold()?;
    Ok(ParsedEvents { events, rejects })
}

/// Counts events per (mode, hour) over `span`. Events outside the span are
/// rejected under the same 10% limit as parsing.
pub fn aggregate_hourly(events: &[RawEvent], span: HourSpan) -> Result<(DemandSeries, RejectLog)> {
    let mut counts = vec![[0u64; Mode::COUNT]; span.len()];
    let mut rejects = RejectLog {
        total: events.len(),
        ..RejectLog::default()
    };
    for ev in events {
        let slot = HourSlot::truncate(ev.timestamp);
        match span.index_of(slot) {
            Some(i) => counts[i][ev.mode.index()] += ev.weight,
            None => rejects.push(ev.line, format!("timestamp {} outside span", ev.timestamp)),
        }
    }
    rejects.check_threshold()?;
    Ok((DemandSeries::from_counts(span.start, counts)?, rejects))
}

/// Smallest span covering every event, `None` for an empty list.
pub fn covering_span(events: &[RawEvent]) -> Option<HourSpan> {
    let first = events.iter().map(|e| e.timestamp).min()?;
    let last = events.iter().map(|e| e.timestamp).max()?;
    HourSpan::new(HourSlot::truncate(first), HourSlot::truncate(last)).ok()
}
