//! Joint spectral amplitudes on a detuning grid, and filtering.
//!
//! Amplitudes are stored as real numbers: the spectral phase is taken to be
//! flat, and the sign of the sinc side lobes is kept because it matters for
//! the Schmidt decomposition. Rows index the signal axis, columns the idler.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::source::{FilterShape, FilterSpec, PhasematchingShape, SourceSpec};
use crate::units::{sinc, SINC_GAUSSIAN_ALPHA};

/// Largest tolerated fraction of `|f|²` on the outermost cells of an axis.
pub const TRUNCATION_LIMIT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct JointSpectrum {
    grid: FrequencyGrid,
    amplitude: DMatrix<f64>,
}

impl JointSpectrum {
    pub fn from_parts(grid: FrequencyGrid, amplitude: DMatrix<f64>) -> Result<Self> {
        if amplitude.nrows() != grid.n_signal() || amplitude.ncols() != grid.n_idler() {
            return Err(Error::GridMismatch(format!(
                "amplitude is {}x{} but grid is {}x{}",
                amplitude.nrows(),
                amplitude.ncols(),
                grid.n_signal(),
                grid.n_idler()
            )));
        }
        Ok(JointSpectrum { grid, amplitude })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn amplitude(&self) -> &DMatrix<f64> {
        &self.amplitude
    }

    /// `Σ |f|² ΔωsΔωi` (midpoint rule).
    pub fn mass(&self) -> f64 {
        self.amplitude.norm_squared() * self.grid.cell_area()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        JointSpectrum {
            grid: self.grid.clone(),
            amplitude: &self.amplitude * factor,
        }
    }

    /// Rescaled to unit mass.
    pub fn normalized(&self) -> Result<Self> {
        let m = self.mass();
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::ZeroMass);
        }
        Ok(self.scaled(1.0 / m.sqrt()))
    }

    /// Fraction of `|f|²` in the first and last row (signal) and column (idler).
    pub fn border_fractions(&self) -> (f64, f64) {
        let total = self.amplitude.norm_squared();
        if total == 0.0 {
            return (0.0, 0.0);
        }
        let (ns, ni) = self.amplitude.shape();
        let signal = (self.amplitude.row(0).norm_squared()
            + self.amplitude.row(ns - 1).norm_squared())
            / total;
        let idler = (self.amplitude.column(0).norm_squared()
            + self.amplitude.column(ni - 1).norm_squared())
            / total;
        (signal, idler)
    }

    /// Errors if either axis carries at least [`TRUNCATION_LIMIT`] of the mass
    /// on its border cells. Axes flagged in `exempt` are skipped.
    pub fn check_truncation(&self, exempt: (bool, bool)) -> Result<()> {
        let (s, i) = self.border_fractions();
        if !exempt.0 && s >= TRUNCATION_LIMIT {
            return Err(Error::Truncation {
                axis: "signal",
                fraction: s,
            });
        }
        if !exempt.1 && i >= TRUNCATION_LIMIT {
            return Err(Error::Truncation {
                axis: "idler",
                fraction: i,
            });
        }
        Ok(())
    }

    /// Signal and idler exchanged.
    pub fn transposed(&self) -> Self {
        let g = &self.grid;
        let grid = FrequencyGrid::new(
            g.idler_axis().to_vec(),
            g.signal_axis().to_vec(),
            g.idler_center_omega(),
            g.signal_center_omega(),
        )
        .expect("axes of a valid grid");
        JointSpectrum {
            grid,
            amplitude: self.amplitude.transpose(),
        }
    }

    /// Orientation of the major axis of the intensity distribution, in
    /// degrees within [0, 180). A ridge along `(cos φ, -sin φ)` has angle φ,
    /// so the pump envelope alone sits at 45° and a phasematching function
    /// with angle θ alone at θ.
    pub fn tilt_angle_deg(&self) -> Result<f64> {
        let total = self.amplitude.norm_squared();
        if total == 0.0 {
            return Err(Error::ZeroMass);
        }
        let (s_axis, i_axis) = (self.grid.signal_axis(), self.grid.idler_axis());
        let (mut ms, mut mi) = (0.0, 0.0);
        for (r, &ws) in s_axis.iter().enumerate() {
            for (c, &wi) in i_axis.iter().enumerate() {
                let p = self.amplitude[(r, c)].powi(2) / total;
                ms += p * ws;
                mi += p * wi;
            }
        }
        let (mut vss, mut vii, mut vsi) = (0.0, 0.0, 0.0);
        for (r, &ws) in s_axis.iter().enumerate() {
            for (c, &wi) in i_axis.iter().enumerate() {
                let p = self.amplitude[(r, c)].powi(2) / total;
                vss += p * (ws - ms).powi(2);
                vii += p * (wi - mi).powi(2);
                vsi += p * (ws - ms) * (wi - mi);
            }
        }
        // major-axis direction (x, y) of the covariance; angle of (x, -y)
        let phi = 0.5 * (2.0 * vsi).atan2(vss - vii);
        let deg = (-phi).to_degrees();
        Ok(deg.rem_euclid(180.0))
    }

    /// Writes `|f|²` as CSV: a row of signal detunings, a row of idler
    /// detunings (both rad/s), then one row per signal point.
    pub fn write_intensity_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let join = |label: &str, xs: &[f64]| {
            let mut line = String::from(label);
            for x in xs {
                line.push(',');
                line.push_str(&format!("{x:e}"));
            }
            line.push('\n');
            line
        };
        out.push_str(&join("signal_detuning_rad_s", self.grid.signal_axis()));
        out.push_str(&join("idler_detuning_rad_s", self.grid.idler_axis()));
        for r in 0..self.amplitude.nrows() {
            let row: Vec<String> = (0..self.amplitude.ncols())
                .map(|c| format!("{:e}", self.amplitude[(r, c)].powi(2)))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// CSV plus a `<path>.json` sidecar with the provenance.
    pub fn write_with_sidecar(&self, path: &Path, provenance: &SpectrumProvenance) -> Result<()> {
        self.write_intensity_csv(path)?;
        let sidecar = sidecar_path(path);
        let mut f = fs::File::create(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        serde_json::to_writer_pretty(&mut f, provenance)?;
        f.write_all(b"\n").map_err(|e| Error::io(&sidecar, e))
    }
}

/// JSON sidecar describing where an exported spectrum came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumProvenance {
    pub format: String,
    pub format_version: u32,
    pub source: SourceSpec,
    pub signal_filter: FilterSpec,
    pub idler_filter: FilterSpec,
    pub n_signal: usize,
    pub n_idler: usize,
    pub signal_center_omega_rad_s: f64,
    pub idler_center_omega_rad_s: f64,
}

impl SpectrumProvenance {
    pub fn new(
        spectrum: &JointSpectrum,
        source: &SourceSpec,
        fs: &FilterSpec,
        fi: &FilterSpec,
    ) -> Self {
        SpectrumProvenance {
            format: "pairspec-jsi-csv".into(),
            format_version: 1,
            source: source.clone(),
            signal_filter: fs.clone(),
            idler_filter: fi.clone(),
            n_signal: spectrum.grid.n_signal(),
            n_idler: spectrum.grid.n_idler(),
            signal_center_omega_rad_s: spectrum.grid.signal_center_omega(),
            idler_center_omega_rad_s: spectrum.grid.idler_center_omega(),
        }
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

/// Pump envelope times phasematching as a function of the signal and idler
/// detunings (rad/s), without normalization (`N = 1`).
pub fn amplitude_fn(spec: &SourceSpec) -> Result<impl Fn(f64, f64) -> f64> {
    spec.validate_with_tolerance(f64::INFINITY)?;
    let sigma_p = spec.pump_sigma()?;
    let sigma_pm = spec.pm_sigma()?;
    let (sin_t, cos_t) = spec.theta_rad().sin_cos();
    let pump_k = 1.0 / (4.0 * sigma_p * sigma_p);
    let shape = spec.phasematching_shape;
    Ok(move |ws: f64, wi: f64| {
        let pump = (-(ws + wi).powi(2) * pump_k).exp();
        let x = ws * sin_t + wi * cos_t;
        let pm = match shape {
            PhasematchingShape::Sinc => sinc(x / (2.0 * sigma_pm)),
            PhasematchingShape::GaussianApprox => {
                (-SINC_GAUSSIAN_ALPHA * x * x / (4.0 * sigma_pm * sigma_pm)).exp()
            }
        };
        pump * pm
    })
}

/// [`amplitude_fn`] sampled on `grid`.
pub fn raw_jsa(spec: &SourceSpec, grid: &FrequencyGrid) -> Result<JointSpectrum> {
    let f = amplitude_fn(spec)?;
    let s_axis = grid.signal_axis();
    let i_axis = grid.idler_axis();
    let amplitude = DMatrix::from_fn(s_axis.len(), i_axis.len(), |r, c| f(s_axis[r], i_axis[c]));
    JointSpectrum::from_parts(grid.clone(), amplitude)
}

/// Normalized joint spectral amplitude on `grid`.
///
/// Fails with [`Error::Truncation`] when the grid cuts off the spectrum.
pub fn build_jsa(spec: &SourceSpec, grid: &FrequencyGrid) -> Result<JointSpectrum> {
    spec.validate()?;
    let jsa = raw_jsa(spec, grid)?;
    jsa.check_truncation((false, false))?;
    jsa.normalized()
}

/// Per-cell amplitude transmission of `filter` along one axis.
///
/// Rectangular passbands weight each cell by the fraction it overlaps, so
/// that `|F|²` integrates to the exact passband width.
pub fn filter_transmission(
    filter: &FilterSpec,
    axis: &[f64],
    photon_center_omega: f64,
) -> Result<Vec<f64>> {
    let Some(filter_center) = filter.center_omega()? else {
        return Ok(vec![1.0; axis.len()]);
    };
    let offset = photon_center_omega - filter_center;
    match filter.shape {
        FilterShape::Rectangular => {
            let fwhm = filter.fwhm_angular()?.expect("filter present");
            let (lo, hi) = (-offset - 0.5 * fwhm, -offset + 0.5 * fwhm);
            let step = if axis.len() > 1 {
                axis[1] - axis[0]
            } else {
                0.0
            };
            Ok(axis
                .iter()
                .map(|&w| {
                    let (a, b) = (w - 0.5 * step, w + 0.5 * step);
                    let overlap = (b.min(hi) - a.max(lo)).max(0.0);
                    (overlap / step).min(1.0).sqrt()
                })
                .collect())
        }
        _ => axis
            .iter()
            .map(|&w| filter.amplitude_at_offset(offset + w))
            .collect(),
    }
}

/// Multiplies the spectrum by `F_s(ω_s) F_i(ω_i)`; no renormalization.
pub fn apply_filters(
    jsa: &JointSpectrum,
    signal_filter: &FilterSpec,
    idler_filter: &FilterSpec,
) -> Result<JointSpectrum> {
    signal_filter.validate()?;
    idler_filter.validate()?;
    let g = jsa.grid();
    let ts = filter_transmission(signal_filter, g.signal_axis(), g.signal_center_omega())?;
    let ti = filter_transmission(idler_filter, g.idler_axis(), g.idler_center_omega())?;
    let mut amplitude = jsa.amplitude.clone();
    for c in 0..amplitude.ncols() {
        for r in 0..amplitude.nrows() {
            amplitude[(r, c)] *= ts[r] * ti[c];
        }
    }
    JointSpectrum::from_parts(g.clone(), amplitude)
}

/// Product of two spectra on the same grid.
pub fn pointwise_product(a: &JointSpectrum, b: &JointSpectrum) -> Result<JointSpectrum> {
    if !a.grid.matches(&b.grid) {
        return Err(Error::GridMismatch(
            "spectra live on different grids".into(),
        ));
    }
    JointSpectrum::from_parts(a.grid.clone(), a.amplitude.component_mul(&b.amplitude))
}
