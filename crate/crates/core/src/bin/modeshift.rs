use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use modeshift::calibration::{knee_point, sensitivity_curve};
use modeshift::clustering::ClusterProfile;
use modeshift::deviance::{compute_deviance, filter_anomalies, AnomalyMatrix};
use modeshift::ingest::DemandSeries;
use modeshift::pipeline::{
    cluster_anomalies, exit_code, ingest_sources, run_pipeline, write_file, write_report, AlphaSetting, ClusterTest,
    RunConfig, SourceConfig,
};
use modeshift::report::read_labels_csv;
use modeshift::signature::build_signature;
use modeshift::synth::{events_schema, generate_baseline, inject_with_k, write_events_csv, ScenarioFile};
use modeshift::validation::{covariate_test_with, CovariateSeries, Sidedness};
use modeshift::{clustering::ClusterResult, Error, Result};

const OUT_DIR_ENV: &str = "MODESHIFT_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "modeshift-out";

/// Anomalous-hour detection and clustering for multi-modal travel demand.
#[derive(Parser)]
#[command(name = "modeshift", version)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override a config key, e.g. `--set alpha=auto` or `--set sources.0.path=x.csv`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Output directory; falls back to config output_dir, then ./modeshift-out.
    #[arg(long, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<(RunConfig, PathBuf)> {
        let config = RunConfig::load(self.config.as_deref(), &self.overrides)?;
        config.validate()?;
        let out = self
            .out
            .clone()
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
        std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        Ok((config, out))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Count events per mode and hour: demand.csv, rejects.tsv.
    Ingest {
        #[command(flatten)]
        common: Common,
        /// Input files (mode column schema); replaces the config's sources.
        inputs: Vec<PathBuf>,
    },
    /// Build the weekly signature from demand.csv: signature.csv.
    Signature {
        #[command(flatten)]
        common: Common,
        /// demand.csv from `ingest`
        #[arg(long)]
        demand: PathBuf,
    },
    /// Standardise demand against its signature: deviance.csv, anomalies.csv.
    Detect {
        #[command(flatten)]
        common: Common,
        /// demand.csv from `ingest`
        #[arg(long)]
        demand: PathBuf,
    },
    /// Sweep alpha and report the knee: sensitivity.csv.
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// demand.csv from `ingest`
        #[arg(long)]
        demand: PathBuf,
    },
    /// Cluster anomalous hours: clusters.csv, profiles.json, db_curve.csv.
    Cluster {
        #[command(flatten)]
        common: Common,
        /// anomalies.csv from `detect`
        #[arg(long)]
        anomalies: PathBuf,
    },
    /// Test a covariate over each cluster's hours: validation.json.
    Validate {
        #[command(flatten)]
        common: Common,
        /// clusters.csv from `cluster`
        #[arg(long)]
        clusters: PathBuf,
        /// `timestamp,value` CSV.
        #[arg(long)]
        covariate: PathBuf,
        /// Covariate units, copied into the report
        #[arg(long, default_value = "")]
        units: String,
        /// Two-sided test instead of one-sided "greater"
        #[arg(long)]
        two_sided: bool,
    },
    /// Generate synthetic events with injected scenarios: events.csv,
    /// ground_truth.csv, run.json.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Scenario file: {"baseline": {...}, "scenarios": [...]}
        #[arg(long)]
        scenarios: PathBuf,
    },
    /// Run every stage end to end and write manifest.json.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Render radar plots and the calendar from cluster exports.
    Report {
        #[command(flatten)]
        common: Common,
        /// clusters.csv from `cluster`
        #[arg(long)]
        clusters: PathBuf,
        /// profiles.json from `cluster`
        #[arg(long)]
        profiles: PathBuf,
    },
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn fixed_alpha(config: &RunConfig) -> Result<f64> {
    match config.alpha {
        AlphaSetting::Fixed(a) => Ok(a),
        AlphaSetting::Auto(_) => Err(Error::Config(
            "this stage needs a numeric alpha; run `calibrate` and pass --set alpha=<value>".into(),
        )),
    }
}

fn read_demand(path: &Path) -> Result<DemandSeries> {
    DemandSeries::read_csv(open(path)?)
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    write_file(dir, name, |w| {
        w.write_all(text.as_bytes()).map_err(|e| Error::io(name, e))
    })
}

fn execute(command: Command) -> std::result::Result<(), i32> {
    let fail = |e: Error| {
        eprintln!("error: {e}");
        exit_code(&e)
    };
    match command {
        Command::Run { common } => {
            let (config, out) = common.load().map_err(fail)?;
            match run_pipeline(&config, &out) {
                Ok(m) => {
                    println!(
                        "{} hours, {} anomalous (alpha {}), {} clusters -> {}",
                        m.hours,
                        m.anomalous_hours,
                        m.alpha.unwrap_or(f64::NAN),
                        m.k.unwrap_or(0),
                        out.display()
                    );
                    Ok(())
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    Err(e.exit_code())
                }
            }
        }
        other => run_stage(other).map_err(fail),
    }
}

fn run_stage(command: Command) -> Result<()> {
    match command {
        Command::Run { .. } => unreachable!("handled by execute"),
        Command::Ingest { common, inputs } => {
            let (mut config, out) = common.load()?;
            if !inputs.is_empty() {
                config.sources = inputs
                    .into_iter()
                    .map(|path| SourceConfig {
                        path,
                        schema: Default::default(),
                    })
                    .collect();
            }
            let res = ingest_sources(&config.sources, config.span())?;
            write_file(&out, "demand.csv", |w| res.series.write_csv(w))?;
            write_text(&out, "rejects.tsv", &res.rejects.to_tsv())?;
            println!(
                "{} rows, {} rejected, {} hours ({} missing)",
                res.rows_read,
                res.rejects.len(),
                res.series.len(),
                res.series.missing_count()
            );
        }
        Command::Signature { common, demand } => {
            let (config, out) = common.load()?;
            let table = build_signature(&read_demand(&demand)?, fixed_alpha(&config)?, config.k_weeks)?;
            write_file(&out, "signature.csv", |w| table.write_csv(w))?;
        }
        Command::Detect { common, demand } => {
            let (config, out) = common.load()?;
            let series = read_demand(&demand)?;
            let table = build_signature(&series, fixed_alpha(&config)?, config.k_weeks)?;
            let deviance = compute_deviance(&series, &table)?;
            let anomalies = filter_anomalies(&deviance);
            write_file(&out, "deviance.csv", |w| deviance.write_csv(w))?;
            write_file(&out, "anomalies.csv", |w| anomalies.write_csv(w))?;
            println!(
                "{} anomalous hours, {} incomplete rows skipped",
                anomalies.len(),
                anomalies.incomplete_rows
            );
        }
        Command::Calibrate { common, demand } => {
            let (config, out) = common.load()?;
            let curve = sensitivity_curve(&read_demand(&demand)?, &config.alpha_grid, config.k_weeks)?;
            write_file(&out, "sensitivity.csv", |w| curve.write_csv(w))?;
            println!("alpha* = {}", knee_point(&curve)?);
        }
        Command::Cluster { common, anomalies } => {
            let (config, out) = common.load()?;
            let alpha = fixed_alpha(&config).unwrap_or(modeshift::signature::DEFAULT_ALPHA);
            let matrix = AnomalyMatrix::read_csv(open(&anomalies)?, alpha)?;
            let outcome = cluster_anomalies(&matrix, config.k_min, config.k_max)?;
            write_file(&out, "clusters.csv", |w| outcome.result.write_labels_csv(w))?;
            write_text(&out, "profiles.json", &(outcome.result.profiles_json()? + "\n"))?;
            if let Some(sel) = &outcome.selection {
                write_file(&out, "db_curve.csv", |w| sel.write_curve_csv(w))?;
            }
            println!("k* = {}", outcome.result.k());
        }
        Command::Validate {
            common,
            clusters,
            covariate,
            units,
            two_sided,
        } => {
            let (_, out) = common.load()?;
            let (hours, labels) = read_labels_csv(open(&clusters)?)?;
            let series = CovariateSeries::read_csv(open(&covariate)?, units)?;
            let sidedness = if two_sided {
                Sidedness::TwoSided
            } else {
                Sidedness::OneSidedGreater
            };
            let k = labels.iter().max().map_or(0, |m| m + 1);
            let tests: Vec<ClusterTest> = (0..k)
                .map(|c| {
                    let members: Vec<_> = hours
                        .iter()
                        .zip(&labels)
                        .filter(|(_, &l)| l == c)
                        .map(|(h, _)| *h)
                        .collect();
                    match covariate_test_with(&members, &series, sidedness) {
                        Ok(r) => {
                            println!("cluster {c}: t = {:.4}, p = {:.3e}, n = {}", r.t_value, r.p_value, r.n);
                            ClusterTest {
                                cluster_id: c,
                                report: Some(r),
                                error: None,
                            }
                        }
                        Err(e) => {
                            println!("cluster {c}: {e}");
                            ClusterTest {
                                cluster_id: c,
                                report: None,
                                error: Some(e.to_string()),
                            }
                        }
                    }
                })
                .collect();
            write_text(&out, "validation.json", &(serde_json::to_string_pretty(&tests)? + "\n"))?;
        }
        Command::Synth { common, scenarios } => {
            let (config, out) = common.load()?;
            let text = std::fs::read_to_string(&scenarios).map_err(|e| Error::io(&scenarios, e))?;
            let file: ScenarioFile = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
            let base = generate_baseline(&file.baseline)?;
            let (series, truth) = inject_with_k(&base, &file.scenarios, config.k_weeks)?;
            let events = write_file(&out, "events.csv", |w| write_events_csv(&series, w))?;
            write_file(&out, "ground_truth.csv", |w| truth.write_csv(w))?;
            let run = RunConfig {
                sources: vec![SourceConfig {
                    path: events,
                    schema: events_schema(),
                }],
                ..config
            };
            write_text(&out, "run.json", &(serde_json::to_string_pretty(&run)? + "\n"))?;
            println!("{} hours, {} injected", series.len(), truth.slots.len());
        }
        Command::Report {
            common,
            clusters,
            profiles,
        } => {
            let (_, out) = common.load()?;
            let (hours, labels) = read_labels_csv(open(&clusters)?)?;
            let profiles: Vec<ClusterProfile> = serde_json::from_reader(open(&profiles)?)?;
            let result = ClusterResult {
                labels,
                hours,
                clusters: profiles,
            };
            let files = write_report(&out, &result)?;
            println!("wrote {} files", files.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code as u8),
    }
}
