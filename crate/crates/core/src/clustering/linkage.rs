use std::cmp::Ordering;

use crate::clustering::distance::CondensedMatrix;
use crate::error::{Error, Result};

/// One agglomeration step. Leaves are ids `0..n`; the cluster created by merge
/// `t` gets id `n + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    n_leaves: usize,
    merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Flat labels for `k` clusters, numbered by first appearance in row order.
    pub fn cut(&self, k: usize) -> Result<Vec<usize>> {
        let n = self.n_leaves;
        if k == 0 || k > n {
            return Err(Error::InvalidArgument(format!("cannot cut {n} rows into {k} clusters")));
        }
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut rep: Vec<usize> = (0..n).collect();
        for m in &self.merges[..n - k] {
            let (a, b) = (find(&mut parent, rep[m.left]), find(&mut parent, rep[m.right]));
            parent[b] = a;
            rep.push(a);
        }
        let mut label_of_root = vec![usize::MAX; n];
        let mut next = 0;
        Ok((0..n)
            .map(|leaf| {
                let root = find(&mut parent, leaf);
                if label_of_root[root] == usize::MAX {
                    label_of_root[root] = next;
                    next += 1;
                }
                label_of_root[root]
            })
            .collect())
    }
}

/// Candidate merge, ordered by distance then by (older id, younger id).
#[derive(Debug, Clone, Copy)]
struct Candidate {
    distance: f64,
    key: (usize, usize),
    slot: usize,
}

impl Candidate {
    fn cmp(&self, other: &Candidate) -> Ordering {
        self.distance.total_cmp(&other.distance).then(self.key.cmp(&other.key))
    }
}

fn pair_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

struct State {
    dist: CondensedMatrix,
    active: Vec<bool>,
    size: Vec<usize>,
    id: Vec<usize>,
    nearest: Vec<Option<Candidate>>,
}

impl State {
    fn nearest_of(&self, i: usize) -> Option<Candidate> {
        let mut best: Option<Candidate> = None;
        for j in 0..self.active.len() {
            if j == i || !self.active[j] {
                continue;
            }
            let c = Candidate {
                distance: self.dist.get(i, j),
                key: pair_key(self.id[i], self.id[j]),
                slot: j,
            };
            if best.is_none_or(|b| c.cmp(&b) == Ordering::Less) {
                best = Some(c);
            }
        }
        best
    }
}

/// Average-linkage agglomeration over a precomputed distance matrix.
///
/// Among equal-distance pairs the one with the lexicographically smallest
/// (older id, younger id) merges first, so the result is fully determined by
/// the input order.
pub fn average_linkage(dist: CondensedMatrix) -> Dendrogram {
    let n = dist.len();
    let mut st = State {
        dist,
        active: vec![true; n],
        size: vec![1; n],
        id: (0..n).collect(),
        nearest: vec![None; n],
    };
    for i in 0..n {
        st.nearest[i] = st.nearest_of(i);
    }

    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for step in 0..n.saturating_sub(1) {
        let (a, best) = (0..n)
            .filter(|&i| st.active[i])
            .filter_map(|i| st.nearest[i].map(|c| (i, c)))
            .min_by(|x, y| x.1.cmp(&y.1))
            .expect("at least two active clusters");
        let b = best.slot;
        let (sa, sb) = (st.size[a], st.size[b]);
        merges.push(Merge {
            left: st.id[a].min(st.id[b]),
            right: st.id[a].max(st.id[b]),
            distance: best.distance,
            size: sa + sb,
        });

        st.active[b] = false;
        st.nearest[b] = None;
        for k in 0..n {
            if k == a || !st.active[k] {
                continue;
            }
            let d = (sa as f64 * st.dist.get(a, k) + sb as f64 * st.dist.get(b, k)) / (sa + sb) as f64;
            st.dist.set(a, k, d);
        }
        st.size[a] = sa + sb;
        st.id[a] = n + step;
        st.nearest[a] = st.nearest_of(a);

        for k in 0..n {
            if k == a || !st.active[k] {
                continue;
            }
            match st.nearest[k] {
                Some(c) if c.slot == a || c.slot == b => st.nearest[k] = st.nearest_of(k),
                Some(c) => {
                    let cand = Candidate {
                        distance: st.dist.get(k, a),
                        key: pair_key(st.id[k], st.id[a]),
                        slot: a,
                    };
                    if cand.cmp(&c) == Ordering::Less {
                        st.nearest[k] = Some(cand);
                    }
                }
                None => st.nearest[k] = st.nearest_of(k),
            }
        }
    }
    Dendrogram { n_leaves: n, merges }
}

/// Cosine average-linkage dendrogram of `rows`.
pub fn build_dendrogram<R: AsRef<[f64]> + Sync>(rows: &[R]) -> Result<Dendrogram> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no rows to cluster".into()));
    }
    Ok(average_linkage(CondensedMatrix::cosine(rows)?))
}

/// Labels from cutting the cosine average-linkage tree at `k` clusters.
pub fn agglomerative<R: AsRef<[f64]> + Sync>(rows: &[R], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > rows.len() {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={}", rows.len())));
    }
    build_dendrogram(rows)?.cut(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_cuts() {
        let rows = [[1.0, 0.2], [0.9, 0.1], [-0.3, 1.0], [0.0, -1.0]];
        assert_eq!(agglomerative(&rows, 4).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(agglomerative(&rows, 1).unwrap(), vec![0, 0, 0, 0]);
        assert!(agglomerative(&rows, 5).is_err());
        assert!(agglomerative(&rows, 0).is_err());
    }

    #[test]
    fn every_node_is_a_child_once() {
        let rows: Vec<[f64; 3]> = (0..12)
            .map(|i| {
                let t = i as f64 * 0.7;
                [t.cos(), t.sin(), 0.3 + (i % 3) as f64]
            })
            .collect();
        let d = build_dendrogram(&rows).unwrap();
        assert_eq!(d.merges().len(), 11);
        let mut seen = [0; 23];
        for m in d.merges() {
            seen[m.left] += 1;
            seen[m.right] += 1;
        }
        assert!(seen[..22].iter().all(|&c| c == 1));
        assert_eq!(seen[22], 0);
        assert_eq!(d.merges().last().unwrap().size, 12);
    }

    #[test]
    fn ties_merge_oldest_pair_first() {
        // four unit vectors at right angles: every pair at distance 1 except
        // antipodes at 2
        let rows = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        let d = build_dendrogram(&rows).unwrap();
        let m = d.merges()[0];
        assert_eq!((m.left, m.right, m.distance), (0, 1, 1.0));
    }

    #[test]
    fn average_linkage_matches_naive_recomputation() {
        // naive O(n^3): cluster distance = mean pairwise leaf distance
        let rows: Vec<[f64; 4]> = (0..15)
            .map(|i| {
                let x = i as f64;
                [(x * 1.3).sin(), (x * 0.7).cos(), 0.5 + (x * 0.3).sin(), (x * 2.1).cos()]
            })
            .collect();
        let dist = CondensedMatrix::cosine(&rows).unwrap();
        let d = average_linkage(dist.clone());
        let mut clusters: Vec<(usize, Vec<usize>)> = (0..15).map(|i| (i, vec![i])).collect();
        for (t, m) in d.merges().iter().enumerate() {
            let avg = |a: &[usize], b: &[usize]| {
                let s: f64 = a
                    .iter()
                    .flat_map(|&i| b.iter().map(move |&j| (i, j)))
                    .map(|(i, j)| dist.get(i, j))
                    .sum();
                s / (a.len() * b.len()) as f64
            };
            let mut best = (f64::INFINITY, 0, 0);
            for x in 0..clusters.len() {
                for y in x + 1..clusters.len() {
                    let dd = avg(&clusters[x].1, &clusters[y].1);
                    if dd < best.0 - 1e-12 {
                        best = (dd, x, y);
                    }
                }
            }
            let (dd, x, y) = best;
            assert!((dd - m.distance).abs() < 1e-9);
            let ids = (clusters[x].0.min(clusters[y].0), clusters[x].0.max(clusters[y].0));
            assert_eq!(ids, (m.left, m.right));
            let mut members = clusters[x].1.clone();
            members.extend(&clusters[y].1);
            clusters.remove(y);
            clusters.remove(x);
            clusters.push((15 + t, members));
        }
    }
}
