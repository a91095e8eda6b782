use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{RunConfig, SpanConfig};
use crate::clustering::ModeProfile;
use crate::error::{Error, Result};
use crate::validation::TestReport;

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
}

/// One point of the Davies-Bouldin sweep; `null` where the cut was
/// degenerate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbPoint {
    pub k: usize,
    pub db_index: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub cluster_id: usize,
    pub size: usize,
    pub share: f64,
    pub profile: ModeProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterTest {
    pub cluster_id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<TestReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub config: RunConfig,
    pub stages: Vec<StageRecord>,
    pub span: Option<SpanConfig>,
    pub hours: usize,
    pub rows_read: usize,
    pub events_accepted: usize,
    pub rejects: usize,
    pub missing_hours: usize,
    pub incomplete_rows: usize,
    pub alpha: Option<f64>,
    pub alpha_calibrated: bool,
    pub anomalous_hours: usize,
    pub anomaly_fraction: Option<f64>,
    pub k: Option<usize>,
    pub db_curve: Vec<DbPoint>,
    pub clusters: Vec<ClusterSummary>,
    pub tests: Vec<ClusterTest>,
    /// Files written, relative to the output directory, sorted.
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub fn new(config: RunConfig) -> Self {
        RunManifest {
            tool_version: TOOL_VERSION.to_string(),
            status: RunStatus::Ok,
            failed_stage: None,
            error: None,
            config,
            stages: Vec::new(),
            span: None,
            hours: 0,
            rows_read: 0,
            events_accepted: 0,
            rejects: 0,
            missing_hours: 0,
            incomplete_rows: 0,
            alpha: None,
            alpha_calibrated: false,
            anomalous_hours: 0,
            anomaly_fraction: None,
            k: None,
            db_curve: Vec::new(),
            clusters: Vec::new(),
            tests: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    /// Writes through a temporary sibling and a rename, so readers never see
    /// a half-written manifest.
    pub fn write_atomic(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
