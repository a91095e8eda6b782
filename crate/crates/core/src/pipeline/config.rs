use std::cmp::Ordering;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::calibration::default_alpha_grid;
use crate::clustering::{DEFAULT_K_MAX, DEFAULT_K_MIN};
use crate::error::{Error, Result};
use crate::ingest::{HourSlot, HourSpan, Schema};
use crate::signature::{DEFAULT_ALPHA, DEFAULT_K};
use crate::validation::Sidedness;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub path: PathBuf,
    #[serde(default)]
    pub schema: Schema,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoKeyword {
    Auto,
}

/// A fixed band amplitude or `"auto"` for knee-point calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSetting {
    Fixed(f64),
    Auto(AutoKeyword),
}

impl AlphaSetting {
    pub const AUTO: AlphaSetting = AlphaSetting::Auto(AutoKeyword::Auto);

    pub fn is_auto(&self) -> bool {
        matches!(self, AlphaSetting::Auto(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpanConfig {
    pub start: HourSlot,
    /// Inclusive.
    pub end: HourSlot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateConfig {
    pub path: PathBuf,
    #[serde(default)]
    pub units: String,
    #[serde(default)]
    pub sidedness: Sidedness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub sources: Vec<SourceConfig>,
    /// Defaults to the hours covered by the accepted events.
    pub span: Option<SpanConfig>,
    /// Support weeks per signature element.
    pub k_weeks: usize,
    pub alpha: AlphaSetting,
    /// Grid swept when `alpha` is `"auto"`; also exported as the sensitivity
    /// curve.
    pub alpha_grid: Vec<f64>,
    pub k_min: usize,
    pub k_max: usize,
    /// Not part of the manifest: moving the output tree leaves it unchanged.
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    pub covariate: Option<CovariateConfig>,
    /// Adds wall-clock stage timings to the manifest, which then differs
    /// between otherwise identical runs.
    pub record_timings: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            sources: Vec::new(),
            span: None,
            k_weeks: DEFAULT_K,
            alpha: AlphaSetting::Fixed(DEFAULT_ALPHA),
            alpha_grid: default_alpha_grid(),
            k_min: DEFAULT_K_MIN,
            k_max: DEFAULT_K_MAX,
            output_dir: None,
            seed: 0,
            covariate: None,
            record_timings: false,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads a JSON config and applies `key=value` overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => serde_json::to_value(RunConfig::default())?,
        };
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let config: RunConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.k_weeks < 2 || !self.k_weeks.is_multiple_of(2) {
            return bad(format!("k_weeks must be even and >= 2, got {}", self.k_weeks));
        }
        if let AlphaSetting::Fixed(a) = self.alpha {
            if !(a.is_finite() && a > 0.0) {
                return bad(format!("alpha must be positive, got {a}"));
            }
        }
        if self.alpha_grid.len() < 4
            || self
                .alpha_grid
                .windows(2)
                .any(|w| w[1].partial_cmp(&w[0]) != Some(Ordering::Greater))
            || self.alpha_grid.iter().any(|a| !(a.is_finite() && *a > 0.0))
        {
            return bad("alpha_grid needs >= 4 positive, strictly increasing values".into());
        }
        if self.k_min < 2 || self.k_min > self.k_max {
            return bad(format!("k range {}..={} invalid", self.k_min, self.k_max));
        }
        if let Some(span) = &self.span {
            HourSpan::new(span.start, span.end).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn span(&self) -> Option<HourSpan> {
        self.span.as_ref().and_then(|s| HourSpan::new(s.start, s.end).ok())
    }
}

fn parse_scalar(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()))
}

/// Sets a dotted path (`a.b.0.c`) in a JSON value. The right-hand side is read
/// as JSON when it parses, otherwise as a bare string.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} lacks '='")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key {key:?}")));
    }
    let mut cur = root;
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        if cur.is_null() {
            *cur = Value::Object(Default::default());
        }
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), parse_scalar(raw));
                    return Ok(());
                }
                map.entry(part.to_string()).or_insert(Value::Null)
            }
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| Error::Config(format!("{key}: {part:?} is not an index")))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| Error::Config(format!("{key}: index {idx} out of {len}")))?;
                if last {
                    *slot = parse_scalar(raw);
                    return Ok(());
                }
                slot
            }
            _ => return Err(Error::Config(format!("{key}: {part:?} is not an object or array"))),
        };
    }
    unreachable!("loop returns on the last key part")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_is_number_or_auto() {
        let c = RunConfig::from_json(r#"{"alpha": "auto"}"#).unwrap();
        assert!(c.alpha.is_auto());
        let c = RunConfig::from_json(r#"{"alpha": 3.5}"#).unwrap();
        assert_eq!(c.alpha, AlphaSetting::Fixed(3.5));
        assert!(RunConfig::from_json(r#"{"alpha": "soon"}"#).is_err());
        assert!(RunConfig::from_json(r#"{"alpah": 3}"#).is_err());
    }

    #[test]
    fn overrides_follow_dotted_paths() {
        let mut v = serde_json::json!({"sources": [{"path": "a.csv"}], "alpha": 4.0});
        apply_override(&mut v, "alpha=auto").unwrap();
        apply_override(&mut v, "sources.0.schema.fixed_mode=car").unwrap();
        apply_override(&mut v, "k_max=8").unwrap();
        assert_eq!(v["alpha"], "auto");
        assert_eq!(v["sources"][0]["schema"]["fixed_mode"], "car");
        assert_eq!(v["k_max"], 8);
        assert!(apply_override(&mut v, "sources.3.path=x").is_err());
        assert!(apply_override(&mut v, "alpha").is_err());
    }

    #[test]
    fn validation_rejects_bad_hyperparameters() {
        assert!(RunConfig::default().validate().is_ok());
        let odd = RunConfig {
            k_weeks: 3,
            ..RunConfig::default()
        };
        assert!(odd.validate().is_err());
        let neg = RunConfig {
            alpha: AlphaSetting::Fixed(-1.0),
            ..RunConfig::default()
        };
        assert!(neg.validate().is_err());
        let k = RunConfig {
            k_min: 5,
            k_max: 4,
            ..RunConfig::default()
        };
        assert!(k.validate().is_err());
    }

    #[test]
    fn output_dir_stays_out_of_serialized_form() {
        let c = RunConfig {
            output_dir: Some("out".into()),
            ..RunConfig::default()
        };
        let text = serde_json::to_string(&c).unwrap();
        assert!(!text.contains("output_dir"));
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(back, RunConfig::default());
    }
}
