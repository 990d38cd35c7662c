use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridConfig;
use crate::source::{FilterSpec, SourceSpec};
use crate::{analytic, numeric};

/// Which engine produced a set of metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Analytic,
    Numeric,
}

impl std::str::FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(Engine::Analytic),
            "numeric" => Ok(Engine::Numeric),
            other => Err(Error::Domain(format!(
                "unknown engine {other:?} (expected analytic or numeric)"
            ))),
        }
    }
}

impl std::fmt::Display for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Engine::Analytic => "analytic",
            Engine::Numeric => "numeric",
        })
    }
}

/// Filter heralding efficiencies, purity and fidelities of one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterMetrics {
    pub eta_s: f64,
    pub eta_i: f64,
    /// Pair-symmetric heralding efficiency `eta_s * eta_i`.
    pub pshe: f64,
    pub purity: f64,
    pub f_s: f64,
    pub f_i: f64,
    /// Symmetrized fidelity `sqrt(f_s * f_i)`.
    pub f_sym: f64,
    /// Purity-efficiency factor `sqrt(P eta_s * P eta_i)`.
    pub pef: f64,
}

impl FilterMetrics {
    pub const CSV_COLUMNS: [&'static str; 8] = [
        "eta_s", "eta_i", "pshe", "purity", "f_s", "f_i", "f_sym", "pef",
    ];

    pub fn csv_values(&self) -> [f64; 8] {
        [
            self.eta_s,
            self.eta_i,
            self.pshe,
            self.purity,
            self.f_s,
            self.f_i,
            self.f_sym,
            self.pef,
        ]
    }

    /// Largest absolute difference over all fields.
    pub fn max_abs_diff(&self, other: &FilterMetrics) -> f64 {
        self.csv_values()
            .iter()
            .zip(other.csv_values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Metrics from the requested engine. The grid settings only matter for
/// the numeric engine.
pub fn compute(
    engine: Engine,
    spec: &SourceSpec,
    signal_filter: &FilterSpec,
    idler_filter: &FilterSpec,
    grid: &GridConfig,
) -> Result<FilterMetrics> {
    match engine {
        Engine::Analytic => analytic::metrics(spec, signal_filter, idler_filter),
        Engine::Numeric => numeric::metrics_numeric(spec, signal_filter, idler_filter, grid),
    }
}
