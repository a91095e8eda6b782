//! Independent oracles and fixtures shared by the integration and acceptance
//! tests. Nothing here calls into the code under test except to build inputs.
#![allow(dead_code)]

use chrono::{Datelike, Duration, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use modeshift::ingest::{DemandSeries, HourSlot, Mode};
use modeshift::synth::{generate_baseline, BaselineSpec, Scenario, ScenarioKind, SlotRange};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random counts over `weeks * 168` hours from a random (not necessarily
/// Monday) start, with about 2% of hours missing.
pub fn random_series(seed: u64, weeks: usize) -> DemandSeries {
    let mut r = rng(seed);
    let start = HourSlot::from_ymdh(2019, 1, 1, 0)
        .unwrap()
        .plus_hours(r.random_range(0..24 * 200));
    let counts = (0..weeks * 168)
        .map(|_| {
            if r.random_bool(0.02) {
                [0; Mode::COUNT]
            } else {
                std::array::from_fn(|_| r.random_range(0..400u64))
            }
        })
        .collect();
    DemandSeries::from_counts(start, counts).unwrap()
}

/// Brute-force signature element for (mode, hour index): walks whole-week
/// offsets from the slot itself, using calendar arithmetic only.
pub fn oracle_element(series: &DemandSeries, mode: Mode, index: usize, k: usize) -> Option<(f64, f64, usize)> {
    let span = series.span();
    let monday = |dt: NaiveDateTime| dt.date() - Duration::days(dt.weekday().num_days_from_monday() as i64);
    let first = monday(span.start.datetime());
    let last = monday(span.end.datetime());
    let weeks = (last - first).num_days() / 7 + 1;
    let slot = span.start.datetime() + Duration::hours(index as i64);
    let m = (monday(slot) - first).num_days() / 7;

    let mut offsets: Vec<i64> = (-m..weeks - m).filter(|&j| j != 0).collect();
    offsets.sort_by_key(|&j| (j.abs(), j));
    offsets.truncate(k);

    let mut values = Vec::new();
    for j in offsets {
        let other = slot + Duration::weeks(j);
        if other < span.start.datetime() || other > span.end.datetime() {
            continue;
        }
        let idx = (other - span.start.datetime()).num_hours() as usize;
        let row = series.raw(idx);
        if row.iter().all(|&c| c == 0) {
            continue;
        }
        values.push(row[mode.index()] as f64);
    }
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt(), values.len()))
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// `P(T > t)` by Simpson's rule after substituting `x = sqrt(df) tan(theta)`,
/// which turns the density into `cos(theta)^(df - 1)` on a finite interval.
pub fn t_sf_quadrature(t: f64, df: f64) -> f64 {
    let g = |th: f64| th.cos().powf(df - 1.0);
    let simpson = |a: f64, b: f64, n: usize| {
        let h = (b - a) / n as f64;
        let mut s = g(a) + g(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(x);
        }
        s * h / 3.0
    };
    let half = std::f64::consts::FRAC_PI_2;
    let theta = (t / df.sqrt()).atan();
    simpson(theta, half, 200_000) / simpson(-half, half, 400_000)
}

/// Chord-distance knee by the implicit line form `a x + b y + c = 0` through
/// the normalised endpoints. Returns the argmax alpha (first on ties).
pub fn knee_oracle(points: &[(f64, f64)]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (xmin, xmax) = (xs[0], xs[xs.len() - 1]);
    let ymin = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let ymax = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let nx: Vec<f64> = xs.iter().map(|x| (x - xmin) / (xmax - xmin)).collect();
    let ny: Vec<f64> = ys.iter().map(|y| (y - ymin) / (ymax - ymin)).collect();
    let (x1, y1, x2, y2) = (nx[0], ny[0], nx[nx.len() - 1], ny[ny.len() - 1]);
    let (a, b, c) = (y2 - y1, x1 - x2, x2 * y1 - x1 * y2);
    let norm = (a * a + b * b).sqrt();
    let mut best = (f64::NEG_INFINITY, xs[0]);
    for i in 0..xs.len() {
        let d = (a * nx[i] + b * ny[i] + c).abs() / norm;
        if d > best.0 {
            best = (d, xs[i]);
        }
    }
    best.1
}

fn cosine_dist(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    1.0 - dot / (nu * nv)
}

/// Best 2-partition by exhaustive search, minimising the pooled mean
/// within-cluster pairwise cosine distance. Returned as a membership mask
/// with row 0 in group `false`.
pub fn best_bipartition(rows: &[Vec<f64>]) -> Vec<bool> {
    let n = rows.len();
    let mut best = (f64::INFINITY, 0u32);
    for mask in 1u32..(1 << (n - 1)) {
        let mask = mask << 1;
        let (mut sum, mut pairs) = (0.0, 0usize);
        for i in 0..n {
            for j in i + 1..n {
                if (mask >> i & 1) == (mask >> j & 1) {
                    sum += cosine_dist(&rows[i], &rows[j]);
                    pairs += 1;
                }
            }
        }
        let score = if pairs == 0 { 0.0 } else { sum / pairs as f64 };
        if score < best.0 - 1e-12 {
            best = (score, mask);
        }
    }
    (0..n).map(|i| best.1 >> i & 1 == 1).collect()
}

pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len() && (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}

/// Unit vector in R^5 with small Gaussian-like jitter around `dir`.
pub fn jitter(r: &mut ChaCha8Rng, dir: &[f64], noise: f64) -> Vec<f64> {
    dir.iter()
        .map(|d| d + noise * (r.random::<f64>() + r.random::<f64>() + r.random::<f64>() - 1.5))
        .collect()
}

pub fn random_direction(r: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..Mode::COUNT).map(|_| r.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.2 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

/// Zero-noise 30-week baseline with a week-to-week swing, plus holiday, rain
/// and metro-closure scenarios placed three weeks apart so no injected hour
/// lies in another's support.
pub struct ScenarioFixture {
    pub baseline: BaselineSpec,
    pub scenarios: Vec<Scenario>,
}

pub fn scenario_fixture() -> ScenarioFixture {
    let baseline = BaselineSpec {
        start: HourSlot::from_ymdh(2019, 1, 7, 0).unwrap(),
        weeks: 30,
        seed: 11,
        week_swing: 0.1,
        ..BaselineSpec::default()
    };
    let at = |week: i64, day: i64, hour: i64, len: i64| {
        let start = baseline.start.plus_hours(week * 168 + day * 24 + hour);
        SlotRange {
            start,
            end: start.plus_hours(len),
        }
    };
    let scenarios = vec![
        Scenario::new(
            ScenarioKind::Holiday,
            vec![at(3, 0, 6, 16), at(12, 2, 6, 16), at(21, 4, 6, 16)],
        ),
        Scenario::new(
            ScenarioKind::Rain,
            vec![at(6, 1, 8, 10), at(15, 3, 8, 10), at(24, 5, 9, 10)],
        ),
        Scenario::new(
            ScenarioKind::MetroClosure,
            vec![at(9, 2, 7, 14), at(18, 1, 7, 14), at(27, 3, 7, 14)],
        ),
    ];
    ScenarioFixture { baseline, scenarios }
}

pub fn generated(f: &ScenarioFixture) -> DemandSeries {
    generate_baseline(&f.baseline).unwrap()
}
