use std::fmt;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical text form of an hour slot in every export.
pub const SLOT_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// A local wall-clock timestamp truncated to the hour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct HourSlot(NaiveDateTime);

impl HourSlot {
    pub fn truncate(dt: NaiveDateTime) -> Self {
        let hour = dt.date().and_hms_opt(dt.hour(), 0, 0).expect("hour in range");
        HourSlot(hour)
    }

    pub fn from_ymdh(year: i32, month: u32, day: u32, hour: u32) -> Option<Self> {
        NaiveDate::from_ymd_opt(year, month, day)?
            .and_hms_opt(hour, 0, 0)
            .map(HourSlot)
    }

    /// Parses with `fmt` and truncates to the hour.
    pub fn parse(text: &str, fmt: &str) -> Result<Self> {
        NaiveDateTime::parse_from_str(text.trim(), fmt)
            .map(Self::truncate)
            .map_err(|e| Error::Input(format!("bad timestamp {text:?}: {e}")))
    }

    pub fn datetime(&self) -> NaiveDateTime {
        self.0
    }

    pub fn date(&self) -> NaiveDate {
        self.0.date()
    }

    pub fn hour(&self) -> u32 {
        self.0.hour()
    }

    /// Mon = 0 .. Sun = 6.
    pub fn weekday(&self) -> u32 {
        self.0.weekday().num_days_from_monday()
    }

    pub fn plus_hours(&self, hours: i64) -> Self {
        HourSlot(self.0 + Duration::hours(hours))
    }

    /// Signed number of hours from `origin` to `self`.
    pub fn hours_since(&self, origin: HourSlot) -> i64 {
        (self.0 - origin.0).num_hours()
    }

    fn week_monday(&self) -> NaiveDate {
        let date = self.date();
        date - Duration::days(self.weekday() as i64)
    }
}

impl fmt::Display for HourSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format(SLOT_FORMAT))
    }
}

impl TryFrom<String> for HourSlot {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        HourSlot::parse(&value, SLOT_FORMAT)
    }
}

impl From<HourSlot> for String {
    fn from(slot: HourSlot) -> String {
        slot.to_string()
    }
}

/// Position of a slot inside a dataset span: week index (counted in ISO weeks
/// from the span's first week), weekday and hour of day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WeekPosition {
    pub week: usize,
    pub weekday: usize,
    pub hour: usize,
}

pub fn decompose_slot(slot: HourSlot, span_start: HourSlot) -> Result<WeekPosition> {
    if slot < span_start {
        return Err(Error::SlotBeforeSpan(slot.to_string()));
    }
    let days = (slot.week_monday() - span_start.week_monday()).num_days();
    Ok(WeekPosition {
        week: (days / 7) as usize,
        weekday: slot.weekday() as usize,
        hour: slot.hour() as usize,
    })
}

/// Inverse of [`decompose_slot`].
pub fn recompose_slot(pos: WeekPosition, span_start: HourSlot) -> HourSlot {
    let date = span_start.week_monday() + Duration::days((pos.week * 7 + pos.weekday) as i64);
    HourSlot(date.and_hms_opt(pos.hour as u32, 0, 0).expect("hour in range"))
}

/// Inclusive range of hour slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HourSpan {
    pub start: HourSlot,
    pub end: HourSlot,
}

impl HourSpan {
    pub fn new(start: HourSlot, end: HourSlot) -> Result<Self> {
        if end < start {
            return Err(Error::InvalidArgument(format!("span end {end} precedes start {start}")));
        }
        Ok(HourSpan { start, end })
    }

    /// Span of `hours` consecutive slots starting at `start`.
    pub fn with_len(start: HourSlot, hours: usize) -> Result<Self> {
        if hours == 0 {
            return Err(Error::InvalidArgument("empty span".into()));
        }
        Ok(HourSpan {
            start,
            end: start.plus_hours(hours as i64 - 1),
        })
    }

    pub fn len(&self) -> usize {
        self.end.hours_since(self.start) as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, slot: HourSlot) -> bool {
        self.start <= slot && slot <= self.end
    }

    pub fn index_of(&self, slot: HourSlot) -> Option<usize> {
        self.contains(slot).then(|| slot.hours_since(self.start) as usize)
    }

    pub fn slot(&self, index: usize) -> HourSlot {
        self.start.plus_hours(index as i64)
    }

    pub fn iter(&self) -> impl Iterator<Item = HourSlot> + '_ {
        (0..self.len()).map(move |i| self.slot(i))
    }

    pub fn position(&self, index: usize) -> WeekPosition {
        decompose_slot(self.slot(index), self.start).expect("slot inside span")
    }

    /// Number of ISO weeks touched by the span (partial weeks included).
    pub fn week_count(&self) -> usize {
        self.position(self.len() - 1).week + 1
    }

    /// Index of the slot at `pos`, if it falls inside the span.
    pub fn index_at(&self, pos: WeekPosition) -> Option<usize> {
        self.index_of(recompose_slot(pos, self.start))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn slot(y: i32, m: u32, d: u32, h: u32) -> HourSlot {
        HourSlot::from_ymdh(y, m, d, h).unwrap()
    }

    #[test]
    fn decompose_examples() {
        let start = slot(2019, 1, 7, 0);
        let p = |s| {
            let w = decompose_slot(s, start).unwrap();
            (w.week, w.weekday, w.hour)
        };
        assert_eq!(p(slot(2019, 1, 7, 5)), (0, 0, 5));
        assert_eq!(p(slot(2019, 1, 13, 23)), (0, 6, 23));
        assert_eq!(p(slot(2019, 1, 15, 0)), (1, 1, 0));
    }

    #[test]
    fn slot_before_span_is_an_error() {
        let start = slot(2019, 1, 7, 0);
        assert!(matches!(
            decompose_slot(slot(2019, 1, 6, 23), start),
            Err(Error::SlotBeforeSpan(_))
        ));
    }

    #[test]
    fn midweek_start_counts_partial_first_week() {
        // Wednesday start: the following Monday is already week 1.
        let start = slot(2019, 1, 9, 12);
        let w = decompose_slot(slot(2019, 1, 14, 0), start).unwrap();
        assert_eq!((w.week, w.weekday), (1, 0));
        let span = HourSpan::new(start, slot(2019, 1, 21, 0)).unwrap();
        assert_eq!(span.week_count(), 3);
    }

    #[test]
    fn truncation_boundary() {
        let a = HourSlot::parse("2019-01-07T08:59:59", SLOT_FORMAT).unwrap();
        let b = HourSlot::parse("2019-01-07T09:00:00", SLOT_FORMAT).unwrap();
        assert_eq!(a, slot(2019, 1, 7, 8));
        assert_eq!(b, slot(2019, 1, 7, 9));
    }

    proptest! {
        #[test]
        fn decompose_recompose_roundtrip(
            day_offset in 0i64..2000,
            start_hour in 0i64..24,
            len in 1usize..(24 * 7 * 10),
            pick in 0.0f64..1.0,
        ) {
            let start = slot(2015, 1, 1, 0).plus_hours(day_offset * 24 + start_hour);
            let span = HourSpan::with_len(start, len).unwrap();
            let idx = ((len - 1) as f64 * pick) as usize;
            let s = span.slot(idx);
            let pos = decompose_slot(s, start).unwrap();
            prop_assert_eq!(recompose_slot(pos, start), s);
            prop_assert_eq!(span.index_at(pos), Some(idx));
        }
    }
}
