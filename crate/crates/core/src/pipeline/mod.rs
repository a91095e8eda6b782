//! End-to-end run: configuration, stage sequencing, exports and the run
//! manifest.
//!
//! Stages run one after another; parallelism stays inside each stage, and
//! every parallel step reduces in a fixed order, so the thread count never
//! changes a byte of output.

mod config;
mod manifest;

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

pub use config::{apply_override, AlphaSetting, AutoKeyword, CovariateConfig, RunConfig, SourceConfig, SpanConfig};
pub use manifest::{ClusterSummary, ClusterTest, DbPoint, RunManifest, RunStatus, StageRecord, TOOL_VERSION};

use crate::calibration::{curve_from_deviance, knee_point};
use crate::clustering::{profile_clusters, select_k, ClusterResult, KSelection};
use crate::deviance::{anomaly_fraction_at, compute_deviance, filter_anomalies_at, AnomalyMatrix};
use crate::error::{Error, Result};
use crate::ingest::{aggregate_hourly, covering_span, parse_events, DemandSeries, HourSpan, Mode, RejectLog};
use crate::report::{export_calendar, render_radar, RadarMeta};
use crate::signature::build_signature;
use crate::validation::{covariate_test_with, CovariateSeries};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    Signature,
    Detect,
    Calibrate,
    Filter,
    Cluster,
    Report,
    Validate,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Signature => "signature",
            Stage::Detect => "detect",
            Stage::Calibrate => "calibrate",
            Stage::Filter => "filter",
            Stage::Cluster => "cluster",
            Stage::Report => "report",
            Stage::Validate => "validate",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: Error,
    /// The partial manifest, as written to the output directory.
    pub manifest: Box<RunManifest>,
}

/// Process exit code for an error: 2 configuration, 3 input, 4 any other
/// stage failure.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 2,
        Error::Input(_)
        | Error::Io { .. }
        | Error::Csv(_)
        | Error::Json(_)
        | Error::TooManyRejects { .. }
        | Error::SlotBeforeSpan(_) => 3,
        _ => 4,
    }
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self.stage {
            Stage::Config => 2,
            _ => exit_code(&self.source).max(3),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IngestOutput {
    pub series: DemandSeries,
    pub rejects: RejectLog,
    pub rows_read: usize,
    pub events_accepted: usize,
}

/// Parses every source (in parallel, merged in config order) and counts
/// events per hour over `span`, or over the hours the events cover.
pub fn ingest_sources(sources: &[SourceConfig], span: Option<HourSpan>) -> Result<IngestOutput> {
    if sources.is_empty() {
        return Err(Error::Config("no input sources".into()));
    }
    let parsed = sources
        .par_iter()
        .map(|src| {
            let file = File::open(&src.path).map_err(|e| Error::io(&src.path, e))?;
            parse_events(std::io::BufReader::new(file), &src.schema)
        })
        .collect::<Result<Vec<_>>>()?;

    let label = |i: usize, mut log: RejectLog| {
        if sources.len() > 1 {
            let path = sources[i].path.display().to_string();
            for r in &mut log.entries {
                r.reason = format!("{path}: {}", r.reason);
            }
        }
        log
    };
    let covered = parsed
        .iter()
        .filter_map(|p| covering_span(&p.events))
        .reduce(|a, b| HourSpan {
            start: a.start.min(b.start),
            end: a.end.max(b.end),
        });
    let span = span
        .or(covered)
        .ok_or_else(|| Error::Input("no events were accepted".into()))?;

    let mut rejects = RejectLog::default();
    let mut counts = vec![[0u64; Mode::COUNT]; span.len()];
    let mut events_accepted = 0;
    for (i, p) in parsed.into_iter().enumerate() {
        let (series, outside) = aggregate_hourly(&p.events, span)?;
        events_accepted += p.events.len() - outside.len();
        for (idx, row) in counts.iter_mut().enumerate() {
            for (c, add) in row.iter_mut().zip(series.raw(idx)) {
                *c += add;
            }
        }
        let mut log = p.rejects;
        log.entries.extend(outside.entries);
        rejects.merge(label(i, log));
    }
    let rows_read = rejects.total;
    Ok(IngestOutput {
        series: DemandSeries::from_counts(span.start, counts)?,
        rejects,
        rows_read,
        events_accepted,
    })
}

#[derive(Debug, Clone)]
pub struct ClusterOutcome {
    pub result: ClusterResult,
    /// `None` when there were too few anomalous hours to sweep k.
    pub selection: Option<KSelection>,
}

/// Clusters anomalous hours, sweeping `k_min..=min(k_max, n - 1)`. With
/// fewer than `k_min + 1` hours every hour lands in a single cluster.
pub fn cluster_anomalies(anomalies: &AnomalyMatrix, k_min: usize, k_max: usize) -> Result<ClusterOutcome> {
    let rows = anomalies.vectors();
    let hours = anomalies.slots();
    let n = rows.len();
    let k_max = k_max.min(n.saturating_sub(1));
    if n == 0 || k_min > k_max {
        let result = profile_clusters(&rows, &vec![0; n], &hours)?;
        return Ok(ClusterOutcome {
            result,
            selection: None,
        });
    }
    let selection = select_k(&rows, k_min, k_max)?;
    let result = profile_clusters(&rows, &selection.labels(), &hours)?;
    Ok(ClusterOutcome {
        result,
        selection: Some(selection),
    })
}

pub fn radar_file_name(cluster_id: usize) -> String {
    format!("radar/cluster_{cluster_id:02}.svg")
}

/// Writes `calendar.csv` and one radar SVG per cluster; returns the files
/// written relative to `out_dir`.
pub fn write_report(out_dir: &Path, result: &ClusterResult) -> Result<Vec<String>> {
    let radar_dir = out_dir.join("radar");
    if radar_dir.exists() {
        for entry in std::fs::read_dir(&radar_dir).map_err(|e| Error::io(&radar_dir, e))? {
            let path = entry.map_err(|e| Error::io(&radar_dir, e))?.path();
            if path.extension().is_some_and(|x| x == "svg") {
                std::fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
            }
        }
    }
    std::fs::create_dir_all(&radar_dir).map_err(|e| Error::io(&radar_dir, e))?;
    let mut written = vec!["calendar.csv".to_string()];
    write_file(out_dir, "calendar.csv", |w| {
        export_calendar(&result.labels, &result.hours, w)
    })?;
    for c in &result.clusters {
        let meta = RadarMeta {
            cluster_id: c.cluster_id,
            size: c.size,
            share: c.share,
        };
        let svg = render_radar(&c.values(), &meta)?;
        let name = radar_file_name(c.cluster_id);
        write_file(out_dir, &name, |w| {
            w.write_all(svg.as_bytes()).map_err(|e| Error::io(&name, e))
        })?;
        written.push(name);
    }
    Ok(written)
}

/// Creates `dir/name` and hands a buffered writer to `fill`.
pub fn write_file(dir: &Path, name: &str, fill: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<PathBuf> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    fill(&mut w)?;
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

struct Run<'a> {
    out_dir: &'a Path,
    manifest: RunManifest,
    artifacts: BTreeSet<String>,
    timings: bool,
}

type StageResult<T> = std::result::Result<T, (Stage, Error)>;

impl Run<'_> {
    fn stage<T>(&mut self, stage: Stage, f: impl FnOnce(&mut Self) -> Result<T>) -> StageResult<T> {
        let t0 = Instant::now();
        let out = f(self).map_err(|e| (stage, e))?;
        self.manifest.stages.push(StageRecord {
            name: stage.name().to_string(),
            elapsed_ms: self.timings.then(|| t0.elapsed().as_secs_f64() * 1e3),
        });
        Ok(out)
    }

    fn write(&mut self, name: &str, fill: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        write_file(self.out_dir, name, fill)?;
        self.artifacts.insert(name.to_string());
        Ok(())
    }

    fn execute(&mut self, config: &RunConfig) -> StageResult<()> {
        self.stage(Stage::Config, |run| {
            config.validate()?;
            std::fs::create_dir_all(run.out_dir).map_err(|e| Error::io(run.out_dir, e))
        })?;

        let ingest = self.stage(Stage::Ingest, |run| {
            let out = ingest_sources(&config.sources, config.span())?;
            let m = &mut run.manifest;
            let span = out.series.span();
            m.span = Some(SpanConfig {
                start: span.start,
                end: span.end,
            });
            m.hours = span.len();
            m.rows_read = out.rows_read;
            m.events_accepted = out.events_accepted;
            m.rejects = out.rejects.len();
            m.missing_hours = out.series.missing_count();
            run.write("demand.csv", |w| out.series.write_csv(w))?;
            let tsv = out.rejects.to_tsv();
            run.write("rejects.tsv", |w| {
                w.write_all(tsv.as_bytes()).map_err(|e| Error::io("rejects.tsv", e))
            })?;
            Ok(out)
        })?;
        let series = &ingest.series;

        let provisional = match config.alpha {
            AlphaSetting::Fixed(a) => a,
            AlphaSetting::Auto(_) => config.alpha_grid[0],
        };
        let table = self.stage(Stage::Signature, |_| {
            build_signature(series, provisional, config.k_weeks)
        })?;
        let deviance = self.stage(Stage::Detect, |_| compute_deviance(series, &table))?;

        let alpha = match config.alpha {
            AlphaSetting::Fixed(a) => a,
            AlphaSetting::Auto(_) => self.stage(Stage::Calibrate, |run| {
                let curve = curve_from_deviance(&deviance, &config.alpha_grid)?;
                run.write("sensitivity.csv", |w| curve.write_csv(w))?;
                let alpha = knee_point(&curve)?;
                run.manifest.alpha_calibrated = true;
                Ok(alpha)
            })?,
        };
        let table = table.with_alpha(alpha);
        self.manifest.alpha = Some(alpha);

        let anomalies = self.stage(Stage::Filter, |run| {
            run.write("signature.csv", |w| table.write_csv(w))?;
            run.write("deviance.csv", |w| deviance.write_csv(w))?;
            let anomalies = filter_anomalies_at(&deviance, alpha);
            run.write("anomalies.csv", |w| anomalies.write_csv(w))?;
            run.manifest.incomplete_rows = anomalies.incomplete_rows;
            run.manifest.anomalous_hours = anomalies.len();
            run.manifest.anomaly_fraction = Some(anomaly_fraction_at(&deviance, alpha));
            Ok(anomalies)
        })?;

        let clusters = self.stage(Stage::Cluster, |run| {
            let outcome = cluster_anomalies(&anomalies, config.k_min, config.k_max)?;
            let result = &outcome.result;
            run.write("clusters.csv", |w| result.write_labels_csv(w))?;
            let json = result.profiles_json()?;
            run.write("profiles.json", |w| {
                writeln!(w, "{json}").map_err(|e| Error::io("profiles.json", e))
            })?;
            let m = &mut run.manifest;
            m.k = Some(result.k());
            m.clusters = result
                .clusters
                .iter()
                .map(|c| ClusterSummary {
                    cluster_id: c.cluster_id,
                    size: c.size,
                    share: c.share,
                    profile: c.profile.clone(),
                })
                .collect();
            if let Some(sel) = &outcome.selection {
                m.db_curve = sel
                    .curve
                    .iter()
                    .map(|&(k, db)| DbPoint {
                        k,
                        db_index: db.is_finite().then_some(db),
                    })
                    .collect();
                run.write("db_curve.csv", |w| sel.write_curve_csv(w))?;
            }
            Ok(outcome.result)
        })?;

        self.stage(Stage::Report, |run| {
            let files = write_report(run.out_dir, &clusters)?;
            run.artifacts.extend(files);
            Ok(())
        })?;

        if let Some(cov) = &config.covariate {
            self.stage(Stage::Validate, |run| {
                let file = File::open(&cov.path).map_err(|e| Error::io(&cov.path, e))?;
                let series = CovariateSeries::read_csv(std::io::BufReader::new(file), cov.units.clone())?;
                run.manifest.tests = clusters
                    .clusters
                    .iter()
                    .map(|c| match covariate_test_with(&c.members, &series, cov.sidedness) {
                        Ok(report) => ClusterTest {
                            cluster_id: c.cluster_id,
                            report: Some(report),
                            error: None,
                        },
                        Err(e) => ClusterTest {
                            cluster_id: c.cluster_id,
                            report: None,
                            error: Some(e.to_string()),
                        },
                    })
                    .collect();
                Ok(())
            })?;
        }
        Ok(())
    }
}

/// Runs every stage and writes all exports plus `manifest.json` into
/// `out_dir`. On failure the manifest is still written, marking the failed
/// stage.
pub fn run_pipeline(config: &RunConfig, out_dir: &Path) -> std::result::Result<RunManifest, PipelineError> {
    let mut run = Run {
        out_dir,
        manifest: RunManifest::new(config.clone()),
        artifacts: BTreeSet::new(),
        timings: config.record_timings,
    };
    let outcome = run.execute(config);
    run.artifacts.insert(MANIFEST_FILE.to_string());
    let mut manifest = run.manifest;
    manifest.artifacts = run.artifacts.into_iter().collect();
    let path = out_dir.join(MANIFEST_FILE);
    match outcome {
        Ok(()) => match manifest.write_atomic(&path) {
            Ok(()) => Ok(manifest),
            Err(e) => Err(PipelineError {
                stage: Stage::Report,
                source: e,
                manifest: Box::new(manifest),
            }),
        },
        Err((stage, source)) => {
            manifest.status = RunStatus::Failed;
            manifest.failed_stage = Some(stage.name().to_string());
            manifest.error = Some(source.to_string());
            // the output directory may be the thing that failed
            let _ = manifest.write_atomic(&path);
            Err(PipelineError {
                stage,
                source,
                manifest: Box::new(manifest),
            })
        }
    }
}
