//! Python bindings: thin wrappers over the `modeshift` crate. Hour slots cross
//! the boundary as `YYYY-MM-DDTHH:00:00` strings and mode vectors as lists in
//! bus, tram, metro, bike, car order.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyIOError};
use pyo3::prelude::*;

use modeshift::calibration::{default_alpha_grid, knee_point as core_knee, sensitivity_curve, SensitivityCurve};
use modeshift::clustering;
use modeshift::deviance::{self, compute_deviance, filter_anomalies};
use modeshift::ingest::{self, HourSlot, Mode};
use modeshift::pipeline::{self, RunConfig};
use modeshift::report::{self, RadarMeta};
use modeshift::signature::{self, build_signature};
use modeshift::synth::{self, ScenarioFile};
use modeshift::validation::{self, Sidedness};
use modeshift::Error;

create_exception!(modeshift_py, ModeshiftError, PyException);

type DbCurve = Vec<(usize, f64)>;
type Labelled = Vec<(String, usize)>;
type Profiles = Vec<(usize, f64, Vec<f64>)>;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io { .. } => PyIOError::new_err(err.to_string()),
        other => ModeshiftError::new_err(other.to_string()),
    }
}

fn parse_slot(text: &str) -> PyResult<HourSlot> {
    HourSlot::try_from(text.to_string()).map_err(to_py)
}

fn mode_array(values: &[f64]) -> PyResult<[f64; Mode::COUNT]> {
    values.try_into().map_err(|_| {
        to_py(Error::InvalidArgument(format!(
            "expected {} values, got {}",
            Mode::COUNT,
            values.len()
        )))
    })
}

/// Mode names in column order.
#[pyfunction]
fn modes() -> Vec<&'static str> {
    Mode::ALL.iter().map(|m| m.name()).collect()
}

/// Support weeks for week `week` among `available`, nearest first on each side.
#[pyfunction]
fn support_weeks(week: usize, k: usize, available: Vec<usize>) -> PyResult<Vec<usize>> {
    signature::support_weeks(week, k, &available).map_err(to_py)
}

/// `(mu, sigma, lambda)` of a sample of counts.
#[pyfunction]
#[pyo3(signature = (counts, alpha=4.0))]
fn signature_element(counts: Vec<f64>, alpha: f64) -> PyResult<(f64, f64, f64)> {
    let e = signature::compute_element(&counts, alpha).map_err(to_py)?;
    Ok((e.mu, e.sigma, e.lambda))
}

#[pyfunction]
fn standardized_deviance(count: f64, mu: f64, sigma: f64) -> f64 {
    deviance::standardized_deviance(count, mu, sigma)
}

#[pyfunction]
fn cosine_distance(u: Vec<f64>, v: Vec<f64>) -> PyResult<f64> {
    clustering::cosine_distance(&u, &v).map_err(to_py)
}

/// Average-linkage cosine clustering cut at `k` clusters.
#[pyfunction]
fn cluster(py: Python<'_>, rows: Vec<Vec<f64>>, k: usize) -> PyResult<Vec<usize>> {
    py.detach(|| clustering::agglomerative(&rows, k)).map_err(to_py)
}

/// `(k, labels, curve)` minimising the Davies-Bouldin index over `k_min..=k_max`.
#[pyfunction]
#[pyo3(signature = (rows, k_min=2, k_max=20))]
fn select_k(py: Python<'_>, rows: Vec<Vec<f64>>, k_min: usize, k_max: usize) -> PyResult<(usize, Vec<usize>, DbCurve)> {
    let sel = py.detach(|| clustering::select_k(&rows, k_min, k_max)).map_err(to_py)?;
    Ok((sel.k, sel.labels(), sel.curve))
}

/// Davies-Bouldin index on unit-normalised rows, or on raw rows when
/// `euclidean` is set.
#[pyfunction]
#[pyo3(signature = (rows, labels, euclidean=false))]
fn davies_bouldin(rows: Vec<Vec<f64>>, labels: Vec<usize>, euclidean: bool) -> PyResult<f64> {
    if euclidean {
        clustering::davies_bouldin_euclidean(&rows, &labels)
    } else {
        clustering::davies_bouldin(&rows, &labels)
    }
    .map_err(to_py)
}

/// Alpha at the knee of a `(alpha, fraction)` curve.
#[pyfunction]
fn knee_point(points: Vec<(f64, f64)>) -> PyResult<f64> {
    core_knee(&SensitivityCurve::new(points).map_err(to_py)?).map_err(to_py)
}

/// `(t, p, df)` of a one-sample t-test against `mu0`.
#[pyfunction]
#[pyo3(signature = (sample, mu0, two_sided=false))]
fn one_sample_t(sample: Vec<f64>, mu0: f64, two_sided: bool) -> PyResult<(f64, f64, usize)> {
    let side = if two_sided {
        Sidedness::TwoSided
    } else {
        Sidedness::OneSidedGreater
    };
    let r = validation::one_sample_t(&sample, mu0, side).map_err(to_py)?;
    Ok((r.t_value, r.p_value, r.df))
}

#[pyfunction]
fn student_t_sf(t: f64, df: f64) -> f64 {
    validation::student_t_sf(t, df)
}

/// SVG radar chart of a five-mode profile.
#[pyfunction]
#[pyo3(signature = (profile, cluster_id=0, size=0, share=0.0))]
fn render_radar(profile: Vec<f64>, cluster_id: usize, size: usize, share: f64) -> PyResult<String> {
    let meta = RadarMeta {
        cluster_id,
        size,
        share,
    };
    report::render_radar(&mode_array(&profile)?, &meta).map_err(to_py)
}

/// Runs the full pipeline from a JSON config and returns the manifest as JSON.
#[pyfunction]
fn run_pipeline(py: Python<'_>, config_json: &str, out_dir: PathBuf) -> PyResult<String> {
    let config = RunConfig::from_json(config_json).map_err(to_py)?;
    let manifest = py
        .detach(|| pipeline::run_pipeline(&config, &out_dir))
        .map_err(|e| ModeshiftError::new_err(format!("{} stage: {}", e.stage.name(), e.source)))?;
    serde_json::to_string(&manifest).map_err(|e| to_py(e.into()))
}

/// Synthetic baseline with injected scenarios from a scenario-file JSON.
/// Returns the series and `(timestamp, kind)` for every injected hour.
#[pyfunction]
fn synthesize(scenario_json: &str) -> PyResult<(DemandSeries, Vec<(String, String)>)> {
    let file: ScenarioFile = serde_json::from_str(scenario_json).map_err(|e| to_py(e.into()))?;
    let base = synth::generate_baseline(&file.baseline).map_err(to_py)?;
    let (series, truth) = synth::inject(&base, &file.scenarios).map_err(to_py)?;
    let truth = truth
        .slots
        .iter()
        .map(|s| (s.slot.to_string(), s.kind.name().to_string()))
        .collect();
    Ok((DemandSeries { inner: series }, truth))
}

/// Hourly per-mode counts over a contiguous span.
#[pyclass(module = "modeshift_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct DemandSeries {
    inner: ingest::DemandSeries,
}

impl DemandSeries {
    fn deviance(&self, alpha: f64, k: usize) -> PyResult<deviance::DevianceMatrix> {
        let table = build_signature(&self.inner, alpha, k).map_err(to_py)?;
        compute_deviance(&self.inner, &table).map_err(to_py)
    }
}

#[pymethods]
impl DemandSeries {
    /// Rows of five counts starting at `start`; an all-zero row is a missing hour.
    #[staticmethod]
    fn from_counts(start: &str, counts: Vec<Vec<u64>>) -> PyResult<Self> {
        let rows = counts
            .iter()
            .map(|r| {
                <[u64; Mode::COUNT]>::try_from(r.as_slice())
                    .map_err(|_| to_py(Error::InvalidArgument(format!("row of {} counts", r.len()))))
            })
            .collect::<PyResult<Vec<_>>>()?;
        let inner = ingest::DemandSeries::from_counts(parse_slot(start)?, rows).map_err(to_py)?;
        Ok(DemandSeries { inner })
    }

    /// Reads a `demand.csv` export.
    #[staticmethod]
    fn read_csv(path: PathBuf) -> PyResult<Self> {
        let file = std::fs::File::open(&path).map_err(|e| to_py(Error::io(path, e)))?;
        let inner = ingest::DemandSeries::read_csv(std::io::BufReader::new(file)).map_err(to_py)?;
        Ok(DemandSeries { inner })
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        let file = std::fs::File::create(&path).map_err(|e| to_py(Error::io(path, e)))?;
        self.inner.write_csv(std::io::BufWriter::new(file)).map_err(to_py)
    }

    #[getter]
    fn start(&self) -> String {
        self.inner.span().start.to_string()
    }

    #[getter]
    fn end(&self) -> String {
        self.inner.span().end.to_string()
    }

    #[getter]
    fn missing_count(&self) -> usize {
        self.inner.missing_count()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("DemandSeries({} hours from {})", self.inner.len(), self.start())
    }

    /// Counts at hour `index`, or `None` for a missing hour.
    fn counts(&self, index: usize) -> PyResult<Option<Vec<u64>>> {
        if index >= self.inner.len() {
            return Err(to_py(Error::InvalidArgument(format!("hour {index} out of range"))));
        }
        Ok((!self.inner.is_missing(index)).then(|| self.inner.raw(index).to_vec()))
    }

    /// Anomalous hours as `(timestamp, deviance)` pairs.
    #[pyo3(signature = (alpha=4.0, k=4))]
    fn detect(&self, py: Python<'_>, alpha: f64, k: usize) -> PyResult<Vec<(String, Vec<f64>)>> {
        let anomalies = py.detach(|| self.deviance(alpha, k).map(|d| filter_anomalies(&d)))?;
        Ok(anomalies
            .rows
            .iter()
            .map(|r| (r.slot.to_string(), r.deviance.to_vec()))
            .collect())
    }

    #[pyo3(signature = (alpha=4.0, k=4))]
    fn anomaly_fraction(&self, py: Python<'_>, alpha: f64, k: usize) -> PyResult<f64> {
        py.detach(|| self.deviance(alpha, k).map(|d| deviance::anomaly_fraction(&d)))
    }

    /// `(alpha, fraction)` over `alphas` (default grid 1.0..=8.0 by 0.5).
    #[pyo3(signature = (alphas=None, k=4))]
    fn sensitivity_curve(&self, py: Python<'_>, alphas: Option<Vec<f64>>, k: usize) -> PyResult<Vec<(f64, f64)>> {
        let alphas = alphas.unwrap_or_else(default_alpha_grid);
        py.detach(|| sensitivity_curve(&self.inner, &alphas, k))
            .map(|c| c.points)
            .map_err(to_py)
    }

    /// Knee alpha of the sensitivity curve.
    #[pyo3(signature = (alphas=None, k=4))]
    fn calibrate(&self, py: Python<'_>, alphas: Option<Vec<f64>>, k: usize) -> PyResult<f64> {
        let alphas = alphas.unwrap_or_else(default_alpha_grid);
        py.detach(|| sensitivity_curve(&self.inner, &alphas, k).and_then(|c| core_knee(&c)))
            .map_err(to_py)
    }

    /// Clusters the anomalous hours; returns `(labels, profiles)` with one
    /// `(size, share, profile)` per cluster.
    #[pyo3(signature = (alpha=4.0, k=4, k_min=2, k_max=20))]
    fn profile(
        &self,
        py: Python<'_>,
        alpha: f64,
        k: usize,
        k_min: usize,
        k_max: usize,
    ) -> PyResult<(Labelled, Profiles)> {
        let outcome = py.detach(|| {
            let anomalies = filter_anomalies(&self.deviance(alpha, k)?);
            pipeline::cluster_anomalies(&anomalies, k_min, k_max).map_err(to_py)
        })?;
        let res = outcome.result;
        let labels = res
            .hours
            .iter()
            .map(|h| h.to_string())
            .zip(res.labels.iter().copied())
            .collect();
        let profiles = res
            .clusters
            .iter()
            .map(|c| {
                let v: [f64; Mode::COUNT] = (&c.profile).into();
                (c.size, c.share, v.to_vec())
            })
            .collect();
        Ok((labels, profiles))
    }
}

#[pymodule]
pub fn modeshift_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ModeshiftError", m.py().get_type::<ModeshiftError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<DemandSeries>()?;
    m.add_function(wrap_pyfunction!(modes, m)?)?;
    m.add_function(wrap_pyfunction!(support_weeks, m)?)?;
    m.add_function(wrap_pyfunction!(signature_element, m)?)?;
    m.add_function(wrap_pyfunction!(standardized_deviance, m)?)?;
    m.add_function(wrap_pyfunction!(cosine_distance, m)?)?;
    m.add_function(wrap_pyfunction!(cluster, m)?)?;
    m.add_function(wrap_pyfunction!(select_k, m)?)?;
    m.add_function(wrap_pyfunction!(davies_bouldin, m)?)?;
    m.add_function(wrap_pyfunction!(knee_point, m)?)?;
    m.add_function(wrap_pyfunction!(one_sample_t, m)?)?;
    m.add_function(wrap_pyfunction!(student_t_sf, m)?)?;
    m.add_function(wrap_pyfunction!(render_radar, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    Ok(())
}
