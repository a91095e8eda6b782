use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::ingest::slot::{HourSlot, HourSpan, WeekPosition, SLOT_FORMAT};
use crate::ingest::Mode;

/// Dense hourly demand grid: one count per (mode, hour) inside the span plus a
/// coverage mask. Hours with no events in any mode are marked missing.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandSeries {
    span: HourSpan,
    counts: Vec<[u64; Mode::COUNT]>,
    missing: Vec<bool>,
}

impl DemandSeries {
    /// Builds a series from per-hour counts, applying the missing-hour rule.
    pub fn from_counts(start: HourSlot, counts: Vec<[u64; Mode::COUNT]>) -> Result<Self> {
        let span = HourSpan::with_len(start, counts.len())?;
        let missing = counts.iter().map(|row| row.iter().all(|&c| c == 0)).collect();
        Ok(DemandSeries { span, counts, missing })
    }

    /// Builds a series with an explicit coverage mask. Counts of missing hours
    /// are forced to zero.
    pub fn with_mask(start: HourSlot, mut counts: Vec<[u64; Mode::COUNT]>, missing: Vec<bool>) -> Result<Self> {
        if counts.len() != missing.len() {
            return Err(Error::InvalidArgument(
                "counts and missing mask differ in length".into(),
            ));
        }
        for (row, &m) in counts.iter_mut().zip(&missing) {
            if m {
                *row = [0; Mode::COUNT];
            }
        }
        let span = HourSpan::with_len(start, counts.len())?;
        Ok(DemandSeries { span, counts, missing })
    }

    pub fn span(&self) -> HourSpan {
        self.span
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn is_missing(&self, index: usize) -> bool {
        self.missing[index]
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    /// Raw count at an hour index, missing hours included (as zero).
    pub fn raw(&self, index: usize) -> [u64; Mode::COUNT] {
        self.counts[index]
    }

    /// Observed count, `None` for missing hours.
    pub fn count_at(&self, mode: Mode, index: usize) -> Option<u64> {
        (!self.missing[index]).then(|| self.counts[index][mode.index()])
    }

    pub fn count(&self, mode: Mode, slot: HourSlot) -> Option<u64> {
        self.span.index_of(slot).and_then(|i| self.count_at(mode, i))
    }

    /// Observed count at a week position, `None` if outside the span or missing.
    pub fn count_at_position(&self, mode: Mode, pos: WeekPosition) -> Option<u64> {
        self.span.index_at(pos).and_then(|i| self.count_at(mode, i))
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn rows(&self) -> impl Iterator<Item = (HourSlot, Option<[u64; Mode::COUNT]>)> + '_ {
        self.span
            .iter()
            .zip(self.counts.iter().zip(&self.missing))
            .map(|(slot, (row, &m))| (slot, (!m).then_some(*row)))
    }

    pub(crate) fn set_count(&mut self, mode: Mode, index: usize, value: u64) {
        self.counts[index][mode.index()] = value;
        self.missing[index] = self.counts[index].iter().all(|&c| c == 0);
    }

    /// Writes `timestamp,bus,tram,metro,bike,car`; missing hours have empty
    /// count fields.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["timestamp"];
        header.extend(Mode::ALL.iter().map(|m| m.name()));
        w.write_record(&header)?;
        for (slot, row) in self.rows() {
            let mut rec = vec![slot.to_string()];
            match row {
                Some(c) => rec.extend(c.iter().map(|v| v.to_string())),
                None => rec.extend(std::iter::repeat_n(String::new(), Mode::COUNT)),
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<demand csv>", e))?;
        Ok(())
    }

    /// Reads the format produced by [`DemandSeries::write_csv`]. Rows must be
    /// consecutive hours.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut start = None;
        let mut counts = Vec::new();
        let mut missing = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            if rec.len() != Mode::COUNT + 1 {
                return Err(Error::Input(format!("line {line}: expected 6 fields")));
            }
            let slot = HourSlot::parse(&rec[0], SLOT_FORMAT)?;
            let start = *start.get_or_insert(slot);
            if slot != start.plus_hours(counts.len() as i64) {
                return Err(Error::Input(format!("line {line}: hours not consecutive")));
            }
            if rec.iter().skip(1).all(str::is_empty) {
                counts.push([0; Mode::COUNT]);
                missing.push(true);
                continue;
            }
            let mut row = [0u64; Mode::COUNT];
            for (i, field) in rec.iter().skip(1).enumerate() {
                row[i] = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Input(format!("line {line}: bad count {field:?}")))?;
            }
            missing.push(row.iter().all(|&c| c == 0));
            counts.push(row);
        }
        let start = start.ok_or_else(|| Error::Input("demand file has no rows".into()))?;
        Self::with_mask(start, counts, missing)
    }
}
