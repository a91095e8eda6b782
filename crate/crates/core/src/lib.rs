//! Detection of anomalous hours in multi-modal urban travel demand and
//! clustering of those hours into disruption response profiles.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`ingest`]: events from each source are counted per mode and hour.
//! 2. [`signature`]: each (mode, week, weekday, hour) gets an expected band
//!    `mu ± alpha * sigma` from the same slot in neighbouring weeks.
//! 3. [`deviance`]: observations are standardised against the band and hours
//!    where any mode leaves it are kept as anomalies.
//! 4. [`clustering`]: anomalous hours are grouped by the direction of their
//!    five-mode deviance vector.
//!
//! [`calibration`] picks alpha from the knee of the anomaly-fraction curve,
//! [`validation`] tests covariates over cluster hours, and [`synth`] builds
//! synthetic data with known disruptions. [`pipeline`] and [`report`] tie the
//! stages together behind the `modeshift` command.

pub mod calibration;
pub mod clustering;
pub mod deviance;
mod error;
pub mod ingest;
pub mod pipeline;
pub mod report;
pub mod signature;
pub mod synth;
pub mod validation;

pub use error::{Error, Result};
