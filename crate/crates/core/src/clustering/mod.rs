//! Clustering of anomalous hours by their deviance vectors.
//!
//! Rows are grouped with average-linkage agglomeration under cosine distance.
//! The number of clusters is picked by sweeping cuts of a single dendrogram and
//! minimising the Davies-Bouldin index. Each cluster is summarised by its mean
//! deviance per mode.

mod distance;
mod linkage;
mod validity;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use distance::{cosine_distance, normalize_rows, CondensedMatrix};
pub use linkage::{agglomerative, average_linkage, build_dendrogram, Dendrogram, Merge};
pub use validity::{davies_bouldin, davies_bouldin_euclidean};

use crate::error::{Error, Result};
use crate::ingest::{HourSlot, Mode};

pub const DEFAULT_K_MIN: usize = 2;
pub const DEFAULT_K_MAX: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct KSelection {
    pub k: usize,
    /// `(k, db_index)` for every k in the sweep; failed cuts score `+inf`.
    pub curve: Vec<(usize, f64)>,
    pub dendrogram: Dendrogram,
}

impl KSelection {
    pub fn labels(&self) -> Vec<usize> {
        self.dendrogram.cut(self.k).expect("k inside the sweep")
    }

    /// `k,db_index`.
    pub fn write_curve_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "db_index"])?;
        for (k, db) in &self.curve {
            w.write_record([k.to_string(), db.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<db curve csv>", e))?;
        Ok(())
    }
}

/// Sweeps `k_min..=k_max` and keeps the k with the lowest Davies-Bouldin
/// index (ties to the smaller k).
pub fn select_k<R: AsRef<[f64]> + Sync>(rows: &[R], k_min: usize, k_max: usize) -> Result<KSelection> {
    let n = rows.len();
    if k_min < 2 || k_min > k_max || k_max + 1 > n {
        return Err(Error::InvalidArgument(format!(
            "k sweep {k_min}..={k_max} invalid for {n} rows"
        )));
    }
    let dendrogram = build_dendrogram(rows)?;
    let unit = normalize_rows(rows)?;
    let mut curve = Vec::with_capacity(k_max - k_min + 1);
    for k in k_min..=k_max {
        let labels = dendrogram.cut(k)?;
        let db = match davies_bouldin_euclidean(&unit, &labels) {
            Ok(v) => v,
            Err(Error::DegenerateClustering(..)) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        curve.push((k, db));
    }
    let mut best = curve[0];
    for &(k, db) in &curve[1..] {
        if db < best.1 {
            best = (k, db);
        }
    }
    Ok(KSelection {
        k: best.0,
        curve,
        dendrogram,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeProfile {
    pub bus: f64,
    pub tram: f64,
    pub metro: f64,
    pub bike: f64,
    pub car: f64,
}

impl From<[f64; Mode::COUNT]> for ModeProfile {
    fn from(v: [f64; Mode::COUNT]) -> Self {
        ModeProfile {
            bus: v[0],
            tram: v[1],
            metro: v[2],
            bike: v[3],
            car: v[4],
        }
    }
}

impl From<&ModeProfile> for [f64; Mode::COUNT] {
    fn from(p: &ModeProfile) -> Self {
        [p.bus, p.tram, p.metro, p.bike, p.car]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterProfile {
    pub cluster_id: usize,
    pub size: usize,
    pub share: f64,
    pub profile: ModeProfile,
    #[serde(skip)]
    pub members: Vec<HourSlot>,
}

impl ClusterProfile {
    pub fn values(&self) -> [f64; Mode::COUNT] {
        (&self.profile).into()
    }
}

/// Clusters ordered by descending size (ties: earliest member hour); `labels`
/// follow that numbering.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub labels: Vec<usize>,
    pub hours: Vec<HourSlot>,
    pub clusters: Vec<ClusterProfile>,
}

impl ClusterResult {
    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    /// `timestamp,cluster_id` in row order.
    pub fn write_labels_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["timestamp", "cluster_id"])?;
        for (slot, label) in self.hours.iter().zip(&self.labels) {
            w.write_record([slot.to_string(), label.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<cluster csv>", e))?;
        Ok(())
    }

    pub fn profiles_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.clusters)?)
    }
}

pub fn profile_clusters(rows: &[[f64; Mode::COUNT]], labels: &[usize], hours: &[HourSlot]) -> Result<ClusterResult> {
    if rows.len() != labels.len() || rows.len() != hours.len() {
        return Err(Error::InvalidArgument("rows, labels and hours differ in length".into()));
    }
    let n = rows.len();
    let k = labels.iter().max().map_or(0, |&m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    if members.iter().any(Vec::is_empty) {
        return Err(Error::InvalidArgument("labels skip a cluster id".into()));
    }
    let earliest = |m: &[usize]| m.iter().map(|&i| hours[i]).min();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        members[b]
            .len()
            .cmp(&members[a].len())
            .then_with(|| earliest(&members[a]).cmp(&earliest(&members[b])))
    });
    let mut relabel = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        relabel[old] = new;
    }

    let clusters = order
        .iter()
        .enumerate()
        .map(|(new, &old)| {
            let idx = &members[old];
            let mut mean = [0.0; Mode::COUNT];
            for &i in idx {
                for (m, v) in mean.iter_mut().zip(&rows[i]) {
                    *m += v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= idx.len() as f64);
            let mut slots: Vec<HourSlot> = idx.iter().map(|&i| hours[i]).collect();
            slots.sort();
            ClusterProfile {
                cluster_id: new,
                size: idx.len(),
                share: idx.len() as f64 / n as f64,
                profile: mean.into(),
                members: slots,
            }
        })
        .collect();

    Ok(ClusterResult {
        labels: labels.iter().map(|&l| relabel[l]).collect(),
        hours: hours.to_vec(),
        clusters,
    })
}
