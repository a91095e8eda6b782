//! Synthetic multi-modal demand with injected disruptions and ground truth.
//!
//! A baseline repeats a weekly 7x24 template per mode, optionally modulated by
//! an alternating week-to-week swing and Gaussian noise. Scenarios then
//! overwrite chosen hours with `mu + target * sigma`, where `mu` and `sigma`
//! come from the signature of the un-injected baseline, so recovered deviances
//! land near the requested targets.

use std::collections::BTreeMap;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{DemandSeries, HourSlot, HourSpan, Mode, Schema};
use crate::signature::{build_signature, DEFAULT_ALPHA, DEFAULT_K};

const WEEK_HOURS: usize = 7 * 24;

/// Mean weekly demand for each mode, indexed `weekday * 24 + hour`.
pub type Templates = BTreeMap<Mode, Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSpec {
    pub start: HourSlot,
    pub weeks: usize,
    pub seed: u64,
    /// Defaults to [`default_templates`].
    pub templates: Option<Templates>,
    /// Noise standard deviation as a fraction of the template mean.
    pub noise_fraction: f64,
    /// Explicit noise standard deviation per (mode, weekday, hour); overrides
    /// `noise_fraction`.
    pub noise_std: Option<Templates>,
    /// Relative amplitude of a deterministic week-to-week alternation: even
    /// weeks scale the template by `1 + swing`, odd weeks by `1 - swing`.
    pub week_swing: f64,
}

impl Default for BaselineSpec {
    fn default() -> Self {
        BaselineSpec {
            start: HourSlot::from_ymdh(2019, 1, 7, 0).expect("valid date"),
            weeks: 9,
            seed: 0,
            templates: None,
            noise_fraction: 0.0,
            noise_std: None,
            week_swing: 0.0,
        }
    }
}

fn daily_shape(hour: usize, weekend: bool) -> f64 {
    let h = hour as f64;
    let bump = |centre: f64, width: f64| (-((h - centre) / width).powi(2)).exp();
    if weekend {
        0.15 + 0.55 * bump(15.0, 4.5)
    } else {
        0.12 + 0.35 * bump(13.0, 5.0) + 0.55 * bump(8.0, 1.3) + 0.5 * bump(18.0, 1.6)
    }
}

/// A commuter-city week: weekday peaks at 08:00 and 18:00, flatter weekends.
pub fn default_templates() -> Templates {
    let levels = [
        (Mode::Bus, 400.0),
        (Mode::Tram, 300.0),
        (Mode::Metro, 650.0),
        (Mode::Bike, 150.0),
        (Mode::Car, 900.0),
    ];
    levels
        .into_iter()
        .map(|(mode, level)| {
            let week = (0..WEEK_HOURS)
                .map(|i| (level * daily_shape(i % 24, i / 24 >= 5) * 10.0).round() / 10.0)
                .collect();
            (mode, week)
        })
        .collect()
}

fn check_template(name: &str, t: &Templates) -> Result<()> {
    for mode in Mode::ALL {
        let week = t
            .get(&mode)
            .ok_or_else(|| Error::Config(format!("{name} lacks mode {mode}")))?;
        if week.len() != WEEK_HOURS {
            return Err(Error::Config(format!(
                "{name}.{mode} has {} values, expected 168",
                week.len()
            )));
        }
        if week.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config(format!(
                "{name}.{mode} has a negative or non-finite value"
            )));
        }
    }
    Ok(())
}

pub fn generate_baseline(spec: &BaselineSpec) -> Result<DemandSeries> {
    if spec.weeks < 5 {
        return Err(Error::Config(format!("baseline needs >= 5 weeks, got {}", spec.weeks)));
    }
    if !(spec.noise_fraction.is_finite() && spec.noise_fraction >= 0.0) {
        return Err(Error::Config("noise_fraction must be finite and >= 0".into()));
    }
    if !(spec.week_swing.is_finite() && (0.0..1.0).contains(&spec.week_swing)) {
        return Err(Error::Config("week_swing must lie in [0, 1)".into()));
    }
    let templates = spec.templates.clone().unwrap_or_else(default_templates);
    check_template("templates", &templates)?;
    if let Some(noise) = &spec.noise_std {
        check_template("noise_std", noise)?;
    }

    let span = HourSpan::with_len(spec.start, spec.weeks * WEEK_HOURS)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let counts = (0..span.len())
        .map(|i| {
            let pos = span.position(i);
            let cell = pos.weekday * 24 + pos.hour;
            let swing = if pos.week % 2 == 0 {
                1.0 + spec.week_swing
            } else {
                1.0 - spec.week_swing
            };
            std::array::from_fn(|q| {
                let mode = Mode::ALL[q];
                let mean = templates[&mode][cell];
                let sd = match &spec.noise_std {
                    Some(n) => n[&mode][cell],
                    None => spec.noise_fraction * mean,
                };
                let z: f64 = StandardNormal.sample(&mut rng);
                (mean * swing + sd * z).round().max(0.0) as u64
            })
        })
        .collect();
    DemandSeries::from_counts(span.start, counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Holiday,
    Rain,
    MetroClosure,
    Custom,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Holiday => "holiday",
            ScenarioKind::Rain => "rain",
            ScenarioKind::MetroClosure => "metro_closure",
            ScenarioKind::Custom => "custom",
        }
    }

    /// Deviance targets in units of the local sigma, mode order bus, tram,
    /// metro, bike, car. `None` for custom scenarios.
    pub fn default_targets(self) -> Option<[f64; Mode::COUNT]> {
        match self {
            // everything down, public transport the most
            ScenarioKind::Holiday => Some([-6.0, -6.0, -7.0, -3.0, -2.0]),
            // sharp drop in shared bikes, slight drop elsewhere
            ScenarioKind::Rain => Some([-0.5, -0.5, -0.5, -5.0, -0.5]),
            // metro collapses, demand spills onto bikes and surface modes
            ScenarioKind::MetroClosure => Some([1.0, 1.0, -6.0, 3.0, 0.5]),
            ScenarioKind::Custom => None,
        }
    }
}

/// Half-open range of hours `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRange {
    pub start: HourSlot,
    pub end: HourSlot,
}

impl SlotRange {
    pub fn hours(&self) -> impl Iterator<Item = HourSlot> + '_ {
        let n = self.end.hours_since(self.start).max(0);
        (0..n).map(move |h| self.start.plus_hours(h))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub ranges: Vec<SlotRange>,
    /// Per-mode targets in local sigmas; modes left out are not touched.
    /// Falls back to the kind's defaults.
    #[serde(default)]
    pub targets: Option<BTreeMap<Mode, f64>>,
}

impl Scenario {
    pub fn new(kind: ScenarioKind, ranges: Vec<SlotRange>) -> Self {
        Scenario {
            kind,
            ranges,
            targets: None,
        }
    }

    pub fn resolved_targets(&self) -> Result<[Option<f64>; Mode::COUNT]> {
        let targets = match (&self.targets, self.kind.default_targets()) {
            (Some(t), _) => std::array::from_fn(|q| t.get(&Mode::ALL[q]).copied()),
            (None, Some(d)) => d.map(Some),
            (None, None) => return Err(Error::Config("custom scenario needs explicit targets".into())),
        };
        if targets.iter().flatten().any(|t| !t.is_finite()) {
            return Err(Error::Config("scenario targets must be finite".into()));
        }
        Ok(targets)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InjectedSlot {
    pub slot: HourSlot,
    pub kind: ScenarioKind,
    pub scenario: usize,
    pub targets: [Option<f64>; Mode::COUNT],
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    /// Chronological; one entry per injected hour (last scenario wins).
    pub slots: Vec<InjectedSlot>,
}

impl GroundTruth {
    pub fn kind_at(&self, slot: HourSlot) -> Option<ScenarioKind> {
        self.slots
            .binary_search_by_key(&slot, |s| s.slot)
            .ok()
            .map(|i| self.slots[i].kind)
    }

    /// `timestamp,kind,scenario`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["timestamp", "kind", "scenario"])?;
        for s in &self.slots {
            w.write_record([s.slot.to_string(), s.kind.name().to_string(), s.scenario.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<ground truth csv>", e))?;
        Ok(())
    }
}

pub fn inject(series: &DemandSeries, scenarios: &[Scenario]) -> Result<(DemandSeries, GroundTruth)> {
    inject_with_k(series, scenarios, DEFAULT_K)
}

/// As [`inject`], with the support size of the pre-pass signature.
pub fn inject_with_k(series: &DemandSeries, scenarios: &[Scenario], k: usize) -> Result<(DemandSeries, GroundTruth)> {
    let mut out = series.clone();
    if scenarios.is_empty() {
        return Ok((out, GroundTruth::default()));
    }
    let span = series.span();
    let table = build_signature(series, DEFAULT_ALPHA, k)?;
    let mut truth: BTreeMap<HourSlot, InjectedSlot> = BTreeMap::new();
    for (si, sc) in scenarios.iter().enumerate() {
        let targets = sc.resolved_targets()?;
        for range in &sc.ranges {
            if !(span.contains(range.start) && range.end > range.start && span.contains(range.end.plus_hours(-1))) {
                return Err(Error::InvalidArgument(format!(
                    "scenario {si} range {}..{} outside span {}..={}",
                    range.start, range.end, span.start, span.end
                )));
            }
            for slot in range.hours() {
                let idx = span.index_of(slot).expect("checked above");
                for (q, target) in targets.iter().enumerate() {
                    let (Some(t), Some(e)) = (target, table.get(Mode::ALL[q], idx)) else {
                        continue;
                    };
                    let value = (e.mu + t * e.sigma).round().max(0.0) as u64;
                    out.set_count(Mode::ALL[q], idx, value);
                }
                truth.insert(
                    slot,
                    InjectedSlot {
                        slot,
                        kind: sc.kind,
                        scenario: si,
                        targets,
                    },
                );
            }
        }
    }
    Ok((
        out,
        GroundTruth {
            slots: truth.into_values().collect(),
        },
    ))
}

/// Input file for the `synth` command.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub baseline: BaselineSpec,
    pub scenarios: Vec<Scenario>,
}

/// Schema matching [`write_events_csv`].
pub fn events_schema() -> Schema {
    Schema {
        count_column: Some("count".into()),
        ..Schema::default()
    }
}

/// Writes the series as ingestible rows `timestamp,mode,count`, one per
/// (hour, mode) with a non-zero count.
pub fn write_events_csv<W: Write>(series: &DemandSeries, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["timestamp", "mode", "count"])?;
    for (slot, row) in series.rows() {
        let Some(row) = row else { continue };
        for (mode, &c) in Mode::ALL.iter().zip(&row) {
            if c > 0 {
                w.write_record([slot.to_string(), mode.name().to_string(), c.to_string()])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<events csv>", e))?;
    Ok(())
}
