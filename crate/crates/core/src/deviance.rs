//! Standardised deviance of observed demand from its signature, and the
//! anomalous-hours filter.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::ingest::{DemandSeries, HourSlot, HourSpan, Mode, SLOT_FORMAT};
use crate::signature::SignatureTable;

/// Deviance assigned when the support is perfectly flat (sigma = 0) and the
/// observation departs from it.
pub const CLAMP: f64 = 100.0;

/// `(count - mu) / sigma`, with the flat-support clamp.
pub fn standardized_deviance(count: f64, mu: f64, sigma: f64) -> f64 {
    if sigma > 0.0 {
        (count - mu) / sigma
    } else if count == mu {
        0.0
    } else {
        CLAMP.copysign(count - mu)
    }
}

pub type DevianceRow = [Option<f64>; Mode::COUNT];

/// Hours x modes matrix of standardised deviances. A cell is `None` when the
/// hour is missing or its signature is unsupported.
#[derive(Debug, Clone, PartialEq)]
pub struct DevianceMatrix {
    span: HourSpan,
    alpha: f64,
    rows: Vec<DevianceRow>,
}

impl DevianceMatrix {
    pub fn new(span: HourSpan, alpha: f64, rows: Vec<DevianceRow>) -> Result<Self> {
        if rows.len() != span.len() {
            return Err(Error::SpanMismatch);
        }
        Ok(DevianceMatrix { span, alpha, rows })
    }

    pub fn span(&self) -> HourSpan {
        self.span
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, index: usize) -> &DevianceRow {
        &self.rows[index]
    }

    pub fn rows(&self) -> impl Iterator<Item = (HourSlot, &DevianceRow)> + '_ {
        self.span.iter().zip(&self.rows)
    }

    pub fn complete_rows(&self) -> usize {
        self.rows.iter().filter(|r| is_complete(r)).count()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(header(false))?;
        for (slot, row) in self.rows() {
            let mut rec = vec![slot.to_string()];
            rec.extend(row.iter().map(|c| c.map(|v| v.to_string()).unwrap_or_default()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<deviance csv>", e))?;
        Ok(())
    }
}

fn header(flags: bool) -> Vec<&'static str> {
    let mut h = vec!["timestamp"];
    h.extend(Mode::ALL.iter().map(|m| m.name()));
    if flags {
        h.push("flags");
    }
    h
}

fn is_complete(row: &DevianceRow) -> bool {
    row.iter().all(Option::is_some)
}

pub fn compute_deviance(series: &DemandSeries, table: &SignatureTable) -> Result<DevianceMatrix> {
    if series.span() != table.span() {
        return Err(Error::SpanMismatch);
    }
    let rows = (0..series.len())
        .map(|i| {
            std::array::from_fn(|q| {
                let mode = Mode::ALL[q];
                let count = series.count_at(mode, i)?;
                let e = table.get(mode, i)?;
                Some(standardized_deviance(count as f64, e.mu, e.sigma))
            })
        })
        .collect();
    DevianceMatrix::new(series.span(), table.alpha(), rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyRow {
    pub slot: HourSlot,
    pub deviance: [f64; Mode::COUNT],
    /// Modes whose |deviance| exceeds alpha.
    pub flags: [bool; Mode::COUNT],
}

impl AnomalyRow {
    pub fn flag_mask(&self) -> String {
        self.flags.iter().map(|&f| if f { '1' } else { '0' }).collect()
    }
}

/// Anomalous hours: complete rows where at least one mode breaches the band.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyMatrix {
    pub alpha: f64,
    pub rows: Vec<AnomalyRow>,
    /// Rows left out because a cell was missing or unsupported.
    pub incomplete_rows: usize,
}

impl AnomalyMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn vectors(&self) -> Vec<[f64; Mode::COUNT]> {
        self.rows.iter().map(|r| r.deviance).collect()
    }

    pub fn slots(&self) -> Vec<HourSlot> {
        self.rows.iter().map(|r| r.slot).collect()
    }

    /// Deviance columns followed by a `flags` bitmask in mode order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(header(true))?;
        for row in &self.rows {
            let mut rec = vec![row.slot.to_string()];
            rec.extend(row.deviance.iter().map(|v| v.to_string()));
            rec.push(row.flag_mask());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<anomaly csv>", e))?;
        Ok(())
    }

    /// Reads an anomaly export. Flags are recomputed against `alpha`.
    pub fn read_csv<R: Read>(input: R, alpha: f64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            if rec.len() < Mode::COUNT + 1 {
                return Err(Error::Input(format!("line {line}: expected 7 fields")));
            }
            let slot = HourSlot::parse(&rec[0], SLOT_FORMAT)?;
            let mut deviance = [0.0; Mode::COUNT];
            for (q, d) in deviance.iter_mut().enumerate() {
                *d = rec[q + 1]
                    .trim()
                    .parse()
                    .map_err(|_| Error::Input(format!("line {line}: bad deviance {:?}", &rec[q + 1])))?;
            }
            rows.push(AnomalyRow {
                slot,
                deviance,
                flags: deviance.map(|d| d.abs() > alpha),
            });
        }
        Ok(AnomalyMatrix {
            alpha,
            rows,
            incomplete_rows: 0,
        })
    }
}

pub fn filter_anomalies(matrix: &DevianceMatrix) -> AnomalyMatrix {
    filter_anomalies_at(matrix, matrix.alpha)
}

/// Keeps complete rows with `max |delta| > alpha` (strict).
pub fn filter_anomalies_at(matrix: &DevianceMatrix, alpha: f64) -> AnomalyMatrix {
    let mut rows = Vec::new();
    let mut incomplete_rows = 0;
    for (slot, row) in matrix.rows() {
        if !is_complete(row) {
            incomplete_rows += 1;
            continue;
        }
        let deviance = row.map(|c| c.expect("complete row"));
        let flags = deviance.map(|d| d.abs() > alpha);
        if flags.iter().any(|&f| f) {
            rows.push(AnomalyRow { slot, deviance, flags });
        }
    }
    AnomalyMatrix {
        alpha,
        rows,
        incomplete_rows,
    }
}

pub fn anomaly_fraction(matrix: &DevianceMatrix) -> f64 {
    anomaly_fraction_at(matrix, matrix.alpha)
}

/// Anomalous rows over complete rows; 0 when no row is complete.
pub fn anomaly_fraction_at(matrix: &DevianceMatrix, alpha: f64) -> f64 {
    let complete = matrix.complete_rows();
    if complete == 0 {
        return 0.0;
    }
    let flagged = matrix
        .rows
        .iter()
        .filter(|r| is_complete(r) && r.iter().any(|c| c.is_some_and(|d| d.abs() > alpha)))
        .count();
    flagged as f64 / complete as f64
}
