//! Human-facing outputs: radar plots of cluster profiles and the calendar of
//! anomalous hours per cluster.

mod radar;

use std::io::{Read, Write};

pub use radar::{render_radar, RadarMeta};

use crate::error::{Error, Result};
use crate::ingest::{HourSlot, SLOT_FORMAT};

/// `date,hour,cluster_id`, chronological.
pub fn export_calendar<W: Write>(labels: &[usize], hours: &[HourSlot], out: W) -> Result<()> {
    if labels.len() != hours.len() {
        return Err(Error::InvalidArgument("labels and hours differ in length".into()));
    }
    let mut rows: Vec<(HourSlot, usize)> = hours.iter().copied().zip(labels.iter().copied()).collect();
    rows.sort();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "hour", "cluster_id"])?;
    for (slot, label) in rows {
        w.write_record([
            slot.date().format("%Y-%m-%d").to_string(),
            slot.hour().to_string(),
            label.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<calendar csv>", e))?;
    Ok(())
}

/// Reads a `timestamp,cluster_id` export back into (hours, labels).
pub fn read_labels_csv<R: Read>(input: R) -> Result<(Vec<HourSlot>, Vec<usize>)> {
    let mut r = csv::Reader::from_reader(input);
    let (mut hours, mut labels) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() < 2 {
            return Err(Error::Input(format!("line {line}: expected timestamp,cluster_id")));
        }
        hours.push(HourSlot::parse(&rec[0], SLOT_FORMAT)?);
        labels.push(
            rec[1]
                .trim()
                .parse()
                .map_err(|_| Error::Input(format!("line {line}: bad cluster id {:?}", &rec[1])))?,
        );
    }
    Ok((hours, labels))
}
