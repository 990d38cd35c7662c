//! Brute-force engine: quadrature and Schmidt decomposition of a discretized
//! joint spectrum.
//!
//! Each probability is integrated on its own grid, fitted to the envelope of
//! the integrand. A grid wide enough for the unfiltered marginal would put
//! only a handful of cells across a narrow filter.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FrequencyGrid, GridConfig};
use crate::jsa::{apply_filters, raw_jsa, JointSpectrum};
use crate::metrics::FilterMetrics;
use crate::source::{FilterShape, FilterSpec, SourceSpec};

/// `∬ |f|²` of a filtered spectrum. Equals a probability when the spectrum
/// was normalized before filtering.
pub fn gamma_both(jsa_filtered: &JointSpectrum) -> f64 {
    jsa_filtered.mass()
}

/// `(Γ_s, Γ_i)`: mass with only the signal filter, and with only the idler
/// filter.
pub fn gamma_marginals(
    jsa: &JointSpectrum,
    signal_filter: &FilterSpec,
    idler_filter: &FilterSpec,
) -> Result<(f64, f64)> {
    let none = FilterSpec::none();
    let gs = apply_filters(jsa, signal_filter, &none)?.mass();
    let gi = apply_filters(jsa, &none, idler_filter)?.mass();
    Ok((gs, gi))
}

fn efficiencies(g_both: f64, g_s: f64, g_i: f64) -> Result<(f64, f64, f64)> {
    if !(g_s > 0.0) || !(g_i > 0.0) {
        return Err(Error::UndefinedEfficiency(format!(
            "marginal probabilities Γ_s = {g_s:.3e}, Γ_i = {g_i:.3e}"
        )));
    }
    let eta_s = g_both / g_i;
    let eta_i = g_both / g_s;
    Ok((eta_s, eta_i, eta_s * eta_i))
}

/// `(η_s, η_i, pshe)` with `η_s = Γ_both / Γ_i` and `η_i = Γ_both / Γ_s`,
/// all on the grid of `jsa`.
pub fn filter_heralding(
    jsa: &JointSpectrum,
    signal_filter: &FilterSpec,
    idler_filter: &FilterSpec,
) -> Result<(f64, f64, f64)> {
    let g_both = gamma_both(&apply_filters(jsa, signal_filter, idler_filter)?);
    let (g_s, g_i) = gamma_marginals(jsa, signal_filter, idler_filter)?;
    efficiencies(g_both, g_s, g_i)
}

/// Singular values of the amplitude matrix scaled by the square root of the
/// cell area, in descending order. `Σ λ² ` is the mass of the spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchmidtSpectrum {
    singular_values: Vec<f64>,
}

impl SchmidtSpectrum {
    pub fn from_values(mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Domain(
                "singular values must be finite and non-negative".into(),
            ));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        let s = SchmidtSpectrum {
            singular_values: values,
        };
        if !(s.mass() > 0.0) {
            return Err(Error::ZeroMass);
        }
        Ok(s)
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn mass(&self) -> f64 {
        self.singular_values.iter().map(|l| l * l).sum()
    }

    /// Normalized Schmidt weights `λ_k² / Σ λ²`.
    pub fn weights(&self) -> Vec<f64> {
        let m = self.mass();
        self.singular_values.iter().map(|l| l * l / m).collect()
    }

    /// Effective number of modes, `1 / P`.
    pub fn schmidt_number(&self) -> f64 {
        1.0 / purity_from_schmidt(self)
    }

    /// CSV with columns `k,singular_value,weight`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("k,singular_value,weight\n");
        for (k, (l, w)) in self.singular_values.iter().zip(self.weights()).enumerate() {
            out.push_str(&format!("{k},{l:e},{w:e}\n"));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

pub fn schmidt(jsa_filtered: &JointSpectrum) -> Result<SchmidtSpectrum> {
    let scale = jsa_filtered.grid().cell_area().sqrt();
    let m = jsa_filtered.amplitude() * scale;
    if !(m.norm_squared() > 0.0) {
        return Err(Error::ZeroMass);
    }
    SchmidtSpectrum::from_values(m.singular_values().iter().copied().collect())
}

/// `Σ λ⁴ / (Σ λ²)²`.
pub fn purity_from_schmidt(s: &SchmidtSpectrum) -> f64 {
    s.weights().iter().map(|w| w * w).sum()
}

/// Leading eigenvalue of the normalized reduced density matrix,
/// `λ_max² / Σ λ²`: the best overlap with any pure single photon.
pub fn max_overlap(s: &SchmidtSpectrum) -> f64 {
    s.weights()[0]
}

/// True when `filter` is a rectangle whose passband edge bounds the given
/// axis, so the border cells are expected to carry intensity.
fn clamped_by(filter: &FilterSpec, half_span: f64) -> Result<bool> {
    if filter.shape != FilterShape::Rectangular {
        return Ok(false);
    }
    let edge = 0.5 * filter.fwhm_angular()?.expect("filter present");
    Ok(half_span >= edge * (1.0 - 1e-9))
}

fn half_spans(grid: &FrequencyGrid) -> (f64, f64) {
    (
        0.5 * grid.signal_step() * grid.n_signal() as f64,
        0.5 * grid.idler_step() * grid.n_idler() as f64,
    )
}

/// Unnormalized (`N = 1`) filtered spectrum on `grid`, with the truncation
/// check applied to axes not bounded by a rectangular passband.
fn filtered_on(
    spec: &SourceSpec,
    signal_filter: &FilterSpec,
    idler_filter: &FilterSpec,
    grid: &FrequencyGrid,
) -> Result<JointSpectrum> {
    let jsa = apply_filters(&raw_jsa(spec, grid)?, signal_filter, idler_filter)?;
    let (hs, hi) = half_spans(grid);
    let exempt = (
        signal_filter.is_centered_on(spec.signal_center_wavelength_nm)
            && clamped_by(signal_filter, hs)?,
        idler_filter.is_centered_on(spec.idler_center_wavelength_nm)
            && clamped_by(idler_filter, hi)?,
    );
    jsa.check_truncation(exempt)?;
    Ok(jsa)
}

fn assemble(eta_s: f64, eta_i: f64, schmidt: &SchmidtSpectrum) -> FilterMetrics {
    let purity = purity_from_schmidt(schmidt);
    let overlap = max_overlap(schmidt);
    let f_s = eta_s * overlap;
    let f_i = eta_i * overlap;
    let f_sym = (f_s * f_i).sqrt();
    FilterMetrics {
        eta_s,
        eta_i,
        pshe: eta_s * eta_i,
        purity,
        f_s,
        f_i,
        f_sym,
        pef: purity * (eta_s * eta_i).sqrt(),
    }
}

/// Metrics with every quantity on the one supplied grid.
pub fn metrics_on_grid(
    spec: &SourceSpec,
    signal_filter: &FilterSpec,
    idler_filter: &FilterSpec,
    grid: &FrequencyGrid,
) -> Result<FilterMetrics> {
    spec.validate()?;
    let jsa = raw_jsa(spec, grid)?;
    jsa.check_truncation((false, false))?;
    let filtered = apply_filters(&jsa, signal_filter, idler_filter)?;
    let (eta_s, eta_i, _) = filter_heralding(&jsa, signal_filter, idler_filter)?;
    Ok(assemble(eta_s, eta_i, &schmidt(&filtered)?))
}

/// Metrics on grids fitted to each integrand.
///
/// `Γ_both` and the Schmidt decomposition share a grid fitted to the doubly
/// filtered spectrum; `Γ_s` and `Γ_i` each get a grid fitted to the singly
/// filtered one. An absent filter leaves its partner's efficiency at one.
pub fn metrics_numeric(
    spec: &SourceSpec,
    signal_filter: &FilterSpec,
    idler_filter: &FilterSpec,
    config: &GridConfig,
) -> Result<FilterMetrics> {
    spec.validate()?;
    signal_filter.validate()?;
    idler_filter.validate()?;
    let none = FilterSpec::none();

    let grid = FrequencyGrid::fitted(spec, signal_filter, idler_filter, config)?;
    let both = filtered_on(spec, signal_filter, idler_filter, &grid)?;
    let g_both = gamma_both(&both);
    if !(g_both > 0.0) {
        return Err(Error::ZeroMass);
    }
    let sch = schmidt(&both)?;

    let marginal = |fs: &FilterSpec, fi: &FilterSpec| -> Result<f64> {
        let g = FrequencyGrid::fitted(spec, fs, fi, config)?;
        Ok(gamma_both(&filtered_on(spec, fs, fi, &g)?))
    };
    let eta_s = if signal_filter.is_none() {
        1.0
    } else {
        let g_i = marginal(&none, idler_filter)?;
        efficiencies(g_both, g_both, g_i)?.0
    };
    let eta_i = if idler_filter.is_none() {
        1.0
    } else {
        let g_s = marginal(signal_filter, &none)?;
        efficiencies(g_both, g_s, g_both)?.1
    };
    Ok(assemble(eta_s, eta_i, &sch))
}
