//! Rolling expected-demand signature.
//!
//! For every (mode, week m, weekday d, hour h) the expected demand is summarised
//! from the same (d, h) slot in the K weeks nearest to m, m itself excluded:
//! mean `mu`, population standard deviation `sigma` and band half-width
//! `lambda = alpha * sigma`.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::{DemandSeries, HourSpan, Mode, WeekPosition};

pub const DEFAULT_K: usize = 4;
pub const DEFAULT_ALPHA: f64 = 4.0;

/// Picks the `k` weeks nearest to `week` (excluding it) from `available`.
/// Distance ties go to the earlier week. The result is sorted ascending and
/// may be shorter than `k` near the span edges.
pub fn support_weeks(week: usize, k: usize, available: &[usize]) -> Result<Vec<usize>> {
    if k < 2 || !k.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "support size K must be even and >= 2, got {k}"
        )));
    }
    if available.is_empty() {
        return Err(Error::InvalidArgument("no available weeks".into()));
    }
    let mut candidates: Vec<usize> = available.iter().copied().filter(|&w| w != week).collect();
    candidates.sort_by_key(|&w| (w.abs_diff(week), w));
    candidates.dedup();
    candidates.truncate(k);
    if candidates.len() < 2 {
        return Err(Error::Unsupported(format!(
            "week {week} has {} candidate support weeks",
            candidates.len()
        )));
    }
    candidates.sort_unstable();
    Ok(candidates)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignatureElement {
    pub mu: f64,
    pub sigma: f64,
    pub lambda: f64,
    /// Non-missing slots that entered the statistics.
    pub n_samples: usize,
    /// Support weeks selected for the slot; its length is the effective K.
    pub support: Vec<usize>,
}

impl SignatureElement {
    pub fn k_effective(&self) -> usize {
        self.support.len()
    }

    pub fn band(&self) -> (f64, f64) {
        (self.mu - self.lambda, self.mu + self.lambda)
    }
}

/// Mean, population standard deviation and band amplitude of `counts`,
/// summed in the given order. Needs at least two values.
pub fn compute_element(counts: &[f64], alpha: f64) -> Result<SignatureElement> {
    let n = counts.len();
    if n < 2 {
        return Err(Error::Unsupported(format!("{n} samples, need 2")));
    }
    let mu = counts.iter().sum::<f64>() / n as f64;
    let var = counts.iter().map(|&x| (x - mu) * (x - mu)).sum::<f64>() / n as f64;
    let sigma = var.sqrt();
    Ok(SignatureElement {
        mu,
        sigma,
        lambda: alpha * sigma,
        n_samples: n,
        support: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum SignatureCell {
    Supported(SignatureElement),
    Unsupported,
}

impl SignatureCell {
    pub fn element(&self) -> Option<&SignatureElement> {
        match self {
            SignatureCell::Supported(e) => Some(e),
            SignatureCell::Unsupported => None,
        }
    }
}

/// One signature cell per (mode, in-span hour).
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureTable {
    span: HourSpan,
    alpha: f64,
    k: usize,
    cells: Vec<[SignatureCell; Mode::COUNT]>,
}

impl SignatureTable {
    pub fn span(&self) -> HourSpan {
        self.span
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Element at an hour index of the span.
    pub fn get(&self, mode: Mode, index: usize) -> Option<&SignatureElement> {
        self.cells.get(index)?[mode.index()].element()
    }

    pub fn cell(&self, mode: Mode, index: usize) -> &SignatureCell {
        &self.cells[index][mode.index()]
    }

    pub fn at(&self, mode: Mode, pos: WeekPosition) -> Option<&SignatureElement> {
        self.span.index_at(pos).and_then(|i| self.get(mode, i))
    }

    /// Same statistics with a different band amplitude.
    pub fn with_alpha(&self, alpha: f64) -> SignatureTable {
        let mut out = self.clone();
        out.alpha = alpha;
        for row in &mut out.cells {
            for cell in row.iter_mut() {
                if let SignatureCell::Supported(e) = cell {
                    e.lambda = alpha * e.sigma;
                }
            }
        }
        out
    }

    /// `mode,week,weekday,hour,mu,sigma,lambda,n_samples`, mode-major then
    /// chronological. Unsupported cells leave the statistics empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["mode", "week", "weekday", "hour", "mu", "sigma", "lambda", "n_samples"])?;
        for mode in Mode::ALL {
            for (i, row) in self.cells.iter().enumerate() {
                let pos = self.span.position(i);
                let mut rec = vec![
                    mode.name().to_string(),
                    pos.week.to_string(),
                    pos.weekday.to_string(),
                    pos.hour.to_string(),
                ];
                match &row[mode.index()] {
                    SignatureCell::Supported(e) => rec.extend([
                        e.mu.to_string(),
                        e.sigma.to_string(),
                        e.lambda.to_string(),
                        e.n_samples.to_string(),
                    ]),
                    SignatureCell::Unsupported => rec.extend([String::new(), String::new(), String::new(), "0".into()]),
                }
                w.write_record(&rec)?;
            }
        }
        w.flush().map_err(|e| Error::io("<signature csv>", e))?;
        Ok(())
    }
}

pub fn build_signature(series: &DemandSeries, alpha: f64, k: usize) -> Result<SignatureTable> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be finite and >= 0, got {alpha}"
        )));
    }
    let span = series.span();
    let weeks = span.week_count();
    if weeks < 3 {
        return Err(Error::SpanTooShort { weeks });
    }
    let available: Vec<usize> = (0..weeks).collect();
    let supports: Vec<Option<Vec<usize>>> = available
        .iter()
        .map(|&m| match support_weeks(m, k, &available) {
            Ok(w) => Ok(Some(w)),
            Err(Error::Unsupported(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;

    let cells = (0..span.len())
        .into_par_iter()
        .map(|i| {
            let pos = span.position(i);
            std::array::from_fn(|q| {
                let Some(weeks) = &supports[pos.week] else {
                    return SignatureCell::Unsupported;
                };
                let mode = Mode::ALL[q];
                let counts: Vec<f64> = weeks
                    .iter()
                    .filter_map(|&w| series.count_at_position(mode, WeekPosition { week: w, ..pos }))
                    .map(|c| c as f64)
                    .collect();
                match compute_element(&counts, alpha) {
                    Ok(mut e) => {
                        e.support = weeks.clone();
                        SignatureCell::Supported(e)
                    }
                    Err(_) => SignatureCell::Unsupported,
                }
            })
        })
        .collect();

    Ok(SignatureTable { span, alpha, k, cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::HourSlot;
    use proptest::prelude::*;

    fn monday() -> HourSlot {
        HourSlot::from_ymdh(2019, 1, 7, 0).unwrap()
    }

    #[test]
    fn support_week_examples() {
        let all: Vec<usize> = (1..=52).collect();
        assert_eq!(support_weeks(10, 4, &all).unwrap(), vec![8, 9, 11, 12]);
        let from0: Vec<usize> = (0..=51).collect();
        assert_eq!(support_weeks(0, 4, &from0).unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(support_weeks(2, 4, &from0).unwrap(), vec![0, 1, 3, 4]);
        // odd-distance tie goes to the earlier week
        assert_eq!(support_weeks(1, 2, &from0).unwrap(), vec![0, 2]);
        assert_eq!(support_weeks(1, 4, &[0, 1, 2]).unwrap(), vec![0, 2]);
    }

    #[test]
    fn support_week_errors() {
        assert!(matches!(support_weeks(0, 4, &[0, 1]), Err(Error::Unsupported(_))));
        assert!(matches!(
            support_weeks(0, 3, &[0, 1, 2]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(support_weeks(0, 4, &[]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn element_examples() {
        let e = compute_element(&[100.0, 110.0, 90.0, 100.0], 4.0).unwrap();
        assert_eq!(e.mu, 100.0);
        assert!((e.sigma - 7.0710678).abs() < 1e-6);
        assert!((e.lambda - 28.2842712).abs() < 1e-6);
        let c = compute_element(&[5.0; 4], 4.0).unwrap();
        assert_eq!((c.mu, c.sigma, c.lambda), (5.0, 0.0, 0.0));
        let z = compute_element(&[0.0; 4], 4.0).unwrap();
        assert_eq!((z.mu, z.sigma, z.lambda), (0.0, 0.0, 0.0));
        assert!(matches!(compute_element(&[1.0], 4.0), Err(Error::Unsupported(_))));
    }

    fn constant(weeks: usize, value: u64) -> DemandSeries {
        DemandSeries::from_counts(monday(), vec![[value; Mode::COUNT]; weeks * 168]).unwrap()
    }

    #[test]
    fn constant_series_has_flat_signature() {
        let table = build_signature(&constant(9, 50), 4.0, 4).unwrap();
        for i in 0..table.len() {
            for mode in Mode::ALL {
                let e = table.get(mode, i).unwrap();
                assert_eq!((e.mu, e.sigma), (50.0, 0.0));
                assert_eq!(e.n_samples, 4);
            }
        }
    }

    #[test]
    fn reference_week_is_excluded() {
        let base = constant(9, 50);
        let mut perturbed = base.clone();
        let pos = WeekPosition {
            week: 5,
            weekday: 0,
            hour: 8,
        };
        let idx = base.span().index_at(pos).unwrap();
        perturbed.set_count(Mode::Bus, idx, 500);
        let a = build_signature(&base, 4.0, 4).unwrap();
        let b = build_signature(&perturbed, 4.0, 4).unwrap();
        assert_eq!(a.at(Mode::Bus, pos), b.at(Mode::Bus, pos));
        let neighbour = WeekPosition { week: 4, ..pos };
        assert_ne!(a.at(Mode::Bus, neighbour), b.at(Mode::Bus, neighbour));
    }

    #[test]
    fn missing_hours_are_left_out_of_supports() {
        let mut counts = vec![[10u64; Mode::COUNT]; 9 * 168];
        counts[3 * 168 + 8] = [0; Mode::COUNT];
        let series = DemandSeries::from_counts(monday(), counts).unwrap();
        let table = build_signature(&series, 4.0, 4).unwrap();
        let e = table
            .at(
                Mode::Car,
                WeekPosition {
                    week: 4,
                    weekday: 0,
                    hour: 8,
                },
            )
            .unwrap();
        assert_eq!(e.n_samples, 3);
        assert_eq!(e.k_effective(), 4);
    }

    #[test]
    fn short_span_is_rejected() {
        assert!(matches!(
            build_signature(&constant(2, 5), 4.0, 4),
            Err(Error::SpanTooShort { weeks: 2 })
        ));
    }

    #[test]
    fn csv_has_one_row_per_cell() {
        let table = build_signature(&constant(3, 7), 4.0, 4).unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 5 * 3 * 168);
        assert!(text.starts_with("mode,week,weekday,hour,mu,sigma,lambda,n_samples\nbus,0,0,0,7,0,0,2\n"));
    }

    fn arb_series() -> impl Strategy<Value = DemandSeries> {
        prop::collection::vec(prop::array::uniform5(1u64..200), 4 * 168)
            .prop_map(|rows| DemandSeries::from_counts(monday(), rows).unwrap())
    }

    fn map_mode(s: &DemandSeries, mode: Mode, f: impl Fn(u64) -> u64) -> DemandSeries {
        let rows = (0..s.len())
            .map(|i| {
                let mut r = s.raw(i);
                r[mode.index()] = f(r[mode.index()]);
                r
            })
            .collect();
        DemandSeries::from_counts(s.span().start, rows).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn shift_equivariance(series in arb_series(), c in 1u64..1000) {
            let a = build_signature(&series, 4.0, 4).unwrap();
            let b = build_signature(&map_mode(&series, Mode::Metro, |x| x + c), 4.0, 4).unwrap();
            for i in 0..a.len() {
                let (ea, eb) = (a.get(Mode::Metro, i).unwrap(), b.get(Mode::Metro, i).unwrap());
                prop_assert!((eb.mu - ea.mu - c as f64).abs() <= 1e-9 * eb.mu.abs().max(1.0));
                prop_assert!((eb.sigma - ea.sigma).abs() <= 1e-9 * eb.mu.abs().max(1.0));
            }
        }

        #[test]
        fn scale_equivariance_and_band_ratio(series in arb_series(), c in 2u64..50) {
            let a = build_signature(&series, 4.0, 4).unwrap();
            let b = build_signature(&map_mode(&series, Mode::Bike, |x| x * c), 4.0, 4).unwrap();
            for i in 0..a.len() {
                let (ea, eb) = (a.get(Mode::Bike, i).unwrap(), b.get(Mode::Bike, i).unwrap());
                let cf = c as f64;
                prop_assert!((eb.mu - cf * ea.mu).abs() <= 1e-9 * eb.mu.max(1.0));
                prop_assert!((eb.sigma - cf * ea.sigma).abs() <= 1e-9 * eb.mu.max(1.0));
                prop_assert!((eb.lambda - cf * ea.lambda).abs() <= 1e-9 * eb.mu.max(1.0));
                if ea.sigma > 0.0 {
                    prop_assert_eq!(ea.lambda / ea.sigma, 4.0);
                }
            }
        }

        #[test]
        fn self_exclusion(series in arb_series(), idx in 0usize..(4 * 168), bump in 1u64..500) {
            let a = build_signature(&series, 4.0, 4).unwrap();
            let mut bumped = series.clone();
            bumped.set_count(Mode::Car, idx, series.raw(idx)[Mode::Car.index()] + bump);
            let b = build_signature(&bumped, 4.0, 4).unwrap();
            prop_assert_eq!(a.get(Mode::Car, idx), b.get(Mode::Car, idx));
        }
    }
}
