use crate::clustering::distance::normalize_rows;
use crate::error::{Error, Result};

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Davies-Bouldin index on L2-normalised rows with Euclidean geometry.
pub fn davies_bouldin<R: AsRef<[f64]>>(rows: &[R], labels: &[usize]) -> Result<f64> {
    davies_bouldin_euclidean(&normalize_rows(rows)?, labels)
}

/// Davies-Bouldin index on the raw rows: mean over clusters of the worst
/// `(s_i + s_j) / d_ij`, with `s` the mean distance to the centroid and `d` the
/// centroid gap.
pub fn davies_bouldin_euclidean<R: AsRef<[f64]>>(rows: &[R], labels: &[usize]) -> Result<f64> {
    if rows.len() != labels.len() {
        return Err(Error::InvalidArgument("rows and labels differ in length".into()));
    }
    let k = labels.iter().max().map_or(0, |&m| m + 1);
    if k < 2 {
        return Err(Error::InvalidArgument("need at least two clusters".into()));
    }
    let dim = rows[0].as_ref().len();
    let mut sizes = vec![0usize; k];
    let mut centroids = vec![vec![0.0; dim]; k];
    for (r, &l) in rows.iter().zip(labels) {
        sizes[l] += 1;
        for (c, x) in centroids[l].iter_mut().zip(r.as_ref()) {
            *c += x;
        }
    }
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::InvalidArgument(format!("cluster {empty} is empty")));
    }
    for (c, &s) in centroids.iter_mut().zip(&sizes) {
        c.iter_mut().for_each(|x| *x /= s as f64);
    }
    let mut scatter = vec![0.0; k];
    for (r, &l) in rows.iter().zip(labels) {
        scatter[l] += euclid(r.as_ref(), &centroids[l]);
    }
    for (s, &n) in scatter.iter_mut().zip(&sizes) {
        *s /= n as f64;
    }

    let mut total = 0.0;
    for i in 0..k {
        let mut worst: f64 = 0.0;
        for j in (0..k).filter(|&j| j != i) {
            let gap = euclid(&centroids[i], &centroids[j]);
            let spread = scatter[i] + scatter[j];
            let ratio = if gap > 0.0 {
                spread / gap
            } else if spread > 0.0 {
                return Err(Error::DegenerateClustering(i.min(j), i.max(j)));
            } else {
                0.0
            };
            worst = worst.max(ratio);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_point_example() {
        let rows = [[0.0, 0.0], [0.0, 1.0], [4.0, 0.0], [4.0, 1.0]];
        let db = davies_bouldin_euclidean(&rows, &[0, 0, 1, 1]).unwrap();
        assert!((db - 0.25).abs() < 1e-12);
    }

    #[test]
    fn singletons_score_zero() {
        let rows = [[1.0, 2.0, 0.0], [-3.0, 0.5, 1.0]];
        assert_eq!(davies_bouldin(&rows, &[0, 1]).unwrap(), 0.0);
        let many = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.2], [0.3, -1.0]];
        assert_eq!(davies_bouldin(&many, &[0, 1, 2, 3]).unwrap(), 0.0);
    }

    #[test]
    fn coincident_centroids_are_degenerate() {
        let rows = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
        assert!(matches!(
            davies_bouldin_euclidean(&rows, &[0, 0, 1, 1]),
            Err(Error::DegenerateClustering(0, 1))
        ));
    }

    #[test]
    fn bad_labels() {
        let rows = [[1.0, 0.0], [0.0, 1.0]];
        assert!(davies_bouldin(&rows, &[0, 0]).is_err());
        assert!(davies_bouldin(&rows, &[0, 2]).is_err());
        assert!(davies_bouldin(&rows, &[0]).is_err());
    }
}
