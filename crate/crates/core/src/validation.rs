//! One-sample Student's t-test of a covariate (e.g. precipitation) over the
//! hours of a cluster against its whole-period mean.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::ingest::{HourSlot, SLOT_FORMAT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sidedness {
    #[default]
    OneSidedGreater,
    TwoSided,
}

/// `P(T > t)` for Student's t with `df` degrees of freedom, through the
/// regularized incomplete beta function.
pub fn student_t_sf(t: f64, df: f64) -> f64 {
    let x = df / (df + t * t);
    let tail = 0.5 * beta_reg(0.5 * df, 0.5, x);
    if t > 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    student_t_sf(-t, df)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub t_value: f64,
    pub p_value: f64,
    pub df: usize,
    pub n: usize,
    pub mu0: f64,
    pub sample_mean: f64,
    pub sidedness: Sidedness,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// `t = (mean - mu0) / (s / sqrt(n))` with the n-1 sample standard deviation.
pub fn one_sample_t(sample: &[f64], mu0: f64, sidedness: Sidedness) -> Result<TestReport> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::InsufficientSample(format!("{n} values, need 2")));
    }
    let mean = sample.iter().sum::<f64>() / n as f64;
    let var = sample.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    if var <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let t = (mean - mu0) / (var.sqrt() / (n as f64).sqrt());
    let df = n - 1;
    let p = match sidedness {
        Sidedness::OneSidedGreater => student_t_sf(t, df as f64),
        Sidedness::TwoSided => (2.0 * student_t_sf(t.abs(), df as f64)).min(1.0),
    };
    Ok(TestReport {
        t_value: t,
        p_value: p,
        df,
        n,
        mu0,
        sample_mean: mean,
        sidedness,
        warnings: Vec::new(),
    })
}

/// Hourly covariate values, at most one per slot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CovariateSeries {
    pub units: String,
    values: BTreeMap<HourSlot, f64>,
}

impl CovariateSeries {
    pub fn new(units: impl Into<String>) -> Self {
        CovariateSeries {
            units: units.into(),
            values: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, slot: HourSlot, value: f64) -> Result<()> {
        if self.values.insert(slot, value).is_some() {
            return Err(Error::Input(format!("duplicate covariate value at {slot}")));
        }
        Ok(())
    }

    pub fn get(&self, slot: HourSlot) -> Option<f64> {
        self.values.get(&slot).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.values().sum::<f64>() / self.values.len() as f64
    }

    /// Reads `timestamp,value`.
    pub fn read_csv<R: Read>(input: R, units: impl Into<String>) -> Result<Self> {
        let mut out = CovariateSeries::new(units);
        let mut r = csv::Reader::from_reader(input);
        for rec in r.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            if rec.len() < 2 {
                return Err(Error::Input(format!("line {line}: expected timestamp,value")));
            }
            let slot = HourSlot::parse(&rec[0], SLOT_FORMAT)?;
            let value: f64 = rec[1]
                .trim()
                .parse()
                .map_err(|_| Error::Input(format!("line {line}: bad value {:?}", &rec[1])))?;
            out.insert(slot, value)?;
        }
        Ok(out)
    }
}

/// Tests whether the covariate is higher over `cluster_hours` than over the
/// whole series.
pub fn covariate_test(cluster_hours: &[HourSlot], covariate: &CovariateSeries) -> Result<TestReport> {
    covariate_test_with(cluster_hours, covariate, Sidedness::OneSidedGreater)
}

pub fn covariate_test_with(
    cluster_hours: &[HourSlot],
    covariate: &CovariateSeries,
    sidedness: Sidedness,
) -> Result<TestReport> {
    let sample: Vec<f64> = cluster_hours.iter().filter_map(|&h| covariate.get(h)).collect();
    if sample.len() < 2 {
        return Err(Error::InsufficientSample(format!(
            "{} of {} cluster hours have covariate values",
            sample.len(),
            cluster_hours.len()
        )));
    }
    let mut report = one_sample_t(&sample, covariate.mean(), sidedness)?;
    if sample.len() * 2 < cluster_hours.len() {
        report.warnings.push(format!(
            "covariate covers only {} of {} cluster hours",
            sample.len(),
            cluster_hours.len()
        ));
    }
    Ok(report)
}
