use rayon::prelude::*;

use crate::error::{Error, Result};

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

/// `1 - cos(u, v)`, in `[0, 2]`.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::InvalidArgument(format!(
            "vector lengths differ: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 || !nu.is_finite() || !nv.is_finite() {
        return Err(Error::ZeroNorm);
    }
    Ok((1.0 - dot(u, v) / (nu * nv)).clamp(0.0, 2.0))
}

/// Rows scaled to unit length.
pub fn normalize_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Vec<Vec<f64>>> {
    rows.iter()
        .map(|r| {
            let r = r.as_ref();
            let n = norm(r);
            if n == 0.0 || !n.is_finite() {
                return Err(Error::ZeroNorm);
            }
            Ok(r.iter().map(|x| x / n).collect())
        })
        .collect()
}

/// Upper-triangle pairwise cosine distances, row-major (`i < j`).
#[derive(Debug, Clone)]
pub struct CondensedMatrix {
    n: usize,
    values: Vec<f64>,
}

impl CondensedMatrix {
    pub fn cosine<R: AsRef<[f64]> + Sync>(rows: &[R]) -> Result<Self> {
        let unit = normalize_rows(rows)?;
        let n = unit.len();
        let values: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let unit = &unit;
                (i + 1..n).map(move |j| (1.0 - dot(&unit[i], &unit[j])).clamp(0.0, 2.0))
            })
            .collect();
        Ok(CondensedMatrix { n, values })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.offset(i, j)]
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, value: f64) {
        let o = self.offset(i, j);
        self.values[o] = value;
    }
}
