//! Choice of the band amplitude alpha from the knee of the
//! anomaly-fraction-versus-alpha curve.

use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deviance::{anomaly_fraction_at, compute_deviance, DevianceMatrix};
use crate::error::{Error, Result};
use crate::ingest::DemandSeries;
use crate::signature::build_signature;

/// 1.0, 1.5, ..., 8.0
pub fn default_alpha_grid() -> Vec<f64> {
    (0..=14).map(|i| 1.0 + 0.5 * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCurve {
    pub points: Vec<(f64, f64)>,
}

impl SensitivityCurve {
    /// Checks that alphas strictly increase and fractions lie in `[0, 1]`.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points
            .windows(2)
            .any(|w| w[1].0.partial_cmp(&w[0].0) != Some(Ordering::Greater))
        {
            return Err(Error::InvalidArgument("alphas must strictly increase".into()));
        }
        if points.iter().any(|p| !(0.0..=1.0).contains(&p.1)) {
            return Err(Error::InvalidArgument("fractions must lie in [0, 1]".into()));
        }
        Ok(SensitivityCurve { points })
    }

    /// `alpha,anomaly_fraction`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["alpha", "anomaly_fraction"])?;
        for (a, f) in &self.points {
            w.write_record([a.to_string(), f.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<curve csv>", e))?;
        Ok(())
    }
}

fn check_grid(alphas: &[f64]) -> Result<()> {
    if alphas.len() < 4 {
        return Err(Error::InvalidArgument("alpha grid needs at least 4 points".into()));
    }
    if alphas
        .windows(2)
        .any(|w| w[1].partial_cmp(&w[0]) != Some(Ordering::Greater))
    {
        return Err(Error::InvalidArgument("alpha grid must strictly increase".into()));
    }
    Ok(())
}

/// Anomaly fraction at each alpha of the grid. Deviances do not depend on
/// alpha, so the signature is built once.
pub fn sensitivity_curve(series: &DemandSeries, alphas: &[f64], k: usize) -> Result<SensitivityCurve> {
    check_grid(alphas)?;
    let table = build_signature(series, alphas[0], k)?;
    let deviance = compute_deviance(series, &table)?;
    curve_from_deviance(&deviance, alphas)
}

pub fn curve_from_deviance(deviance: &DevianceMatrix, alphas: &[f64]) -> Result<SensitivityCurve> {
    check_grid(alphas)?;
    let points = alphas
        .par_iter()
        .map(|&a| (a, anomaly_fraction_at(deviance, a)))
        .collect();
    SensitivityCurve::new(points)
}

/// Alpha of the point farthest from the chord joining the curve's endpoints,
/// both axes min-max normalised. Ties go to the smaller alpha.
pub fn knee_point(curve: &SensitivityCurve) -> Result<f64> {
    let pts = &curve.points;
    if pts.len() < 4 {
        return Err(Error::InvalidArgument("knee needs at least 4 points".into()));
    }
    if pts.windows(2).any(|w| w[1].1 > w[0].1) {
        return Err(Error::InvalidArgument("curve must be non-increasing".into()));
    }
    let (x0, x1) = (pts[0].0, pts[pts.len() - 1].0);
    let (ymin, ymax) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p.1), hi.max(p.1))
    });
    if ymax == ymin {
        return Err(Error::NoKnee);
    }
    let norm: Vec<(f64, f64)> = pts
        .iter()
        .map(|&(x, y)| ((x - x0) / (x1 - x0), (y - ymin) / (ymax - ymin)))
        .collect();
    let (a, b) = (norm[0], norm[norm.len() - 1]);
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len = dx.hypot(dy);
    let mut best = (0.0, pts[0].0);
    for (p, &(x, _)) in norm.iter().zip(pts) {
        let dist = (dx * (p.1 - a.1) - dy * (p.0 - a.0)).abs() / len;
        if dist > best.0 {
            best = (dist, x);
        }
    }
    if best.0 < 1e-12 {
        return Err(Error::NoKnee);
    }
    Ok(best.1)
}
