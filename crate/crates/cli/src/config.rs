//! Run configuration (one JSON document) and the manifest written next to
//! every output file.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use pairspec::optimize::{linspace, logspace, OptimizerConfig};
use pairspec::{Engine, FilterShape, FilterSpec, GridConfig, SourceSpec};

/// A list of values, given either explicitly or as an evenly spaced range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Values(Vec<f64>),
    Range {
        start: f64,
        stop: f64,
        points: usize,
        #[serde(default)]
        log: bool,
    },
}

impl Axis {
    pub fn values(&self) -> Result<Vec<f64>> {
        match *self {
            Axis::Values(ref v) => Ok(v.clone()),
            Axis::Range {
                start,
                stop,
                points,
                log,
            } => {
                if points == 0 {
                    bail!("range needs at least one point");
                }
                if log {
                    if !(start > 0.0 && stop > 0.0) {
                        bail!("log range needs positive bounds, got {start}..{stop}");
                    }
                    Ok(logspace(start, stop, points))
                } else {
                    Ok(linspace(start, stop, points))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub shape: FilterShape,
    pub fwhm_nm: Axis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatmapConfig {
    pub shape: FilterShape,
    pub signal_fwhm_nm: Axis,
    pub idler_fwhm_nm: Axis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConfig {
    #[serde(default = "default_thetas")]
    pub theta_deg: Axis,
    /// Defaults to the source's phasematching bandwidth.
    #[serde(default)]
    pub pm_fwhm_nm: Option<f64>,
    #[serde(default = "default_bound_shape")]
    pub filter_shape: FilterShape,
}

fn default_thetas() -> Axis {
    Axis::Range {
        start: 0.0,
        stop: 179.0,
        points: 180,
        log: false,
    }
}

fn default_bound_shape() -> FilterShape {
    FilterShape::Gaussian
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub jsi_path: Option<PathBuf>,
    pub counts_path: Option<PathBuf>,
    /// Label of the counts row taken with the widest (or no) filters.
    pub reference_label: Option<String>,
    pub jitter_fwhm_ps: Option<f64>,
    /// Spectrometer dispersion; required whenever jitter is set.
    pub dispersion_ps_per_nm: Option<f64>,
    pub time_window_nm_s: Option<f64>,
    pub time_window_nm_i: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub source: Option<SourceSpec>,
    pub signal_filter: FilterSpec,
    pub idler_filter: FilterSpec,
    pub engine: Engine,
    pub grid: GridConfig,
    pub sweep: Option<SweepConfig>,
    pub heatmap: Option<HeatmapConfig>,
    pub bound: Option<BoundConfig>,
    pub optimizer: OptimizerConfig,
    pub analyze: AnalyzeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            source: None,
            signal_filter: FilterSpec::none(),
            idler_filter: FilterSpec::none(),
            engine: Engine::Analytic,
            grid: GridConfig::default(),
            sweep: None,
            heatmap: None,
            bound: None,
            optimizer: OptimizerConfig::default(),
            analyze: AnalyzeConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads a config file, or the config embedded in a run manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .with_context(|| format!("{} is not valid JSON", path.display()))?;
        let inner = match value.get("config") {
            Some(c) if value.get("format").and_then(|f| f.as_str()) == Some(MANIFEST_FORMAT) => {
                c.clone()
            }
            _ => value,
        };
        let mut cfg: RunConfig = serde_json::from_value(inner)
            .with_context(|| format!("invalid config in {}", path.display()))?;
        // relative data paths are resolved against the config file
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.analyze.jsi_path, &mut cfg.analyze.counts_path]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn source(&self) -> Result<&SourceSpec> {
        self.source
            .as_ref()
            .context("config has no \"source\" section")
    }
}

pub const MANIFEST_FORMAT: &str = "pairspec-run-manifest";

/// Everything needed to reproduce one output file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub format_version: u32,
    pub command: String,
    pub tool_version: String,
    pub created_unix_s: u64,
    pub outputs: Vec<PathBuf>,
    pub config: RunConfig,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig, outputs: Vec<PathBuf>) -> Self {
        let created_unix_s = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        RunManifest {
            format: MANIFEST_FORMAT.into(),
            format_version: 1,
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            created_unix_s,
            outputs,
            config: config.clone(),
        }
    }

    /// `<output>.manifest.json`.
    pub fn path_for(output: &Path) -> PathBuf {
        let mut s = output.as_os_str().to_owned();
        s.push(".manifest.json");
        s.into()
    }

    pub fn write_for(&self, output: &Path) -> Result<PathBuf> {
        let path = Self::path_for(output);
        let text = serde_json::to_string_pretty(self)? + "\n";
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}
