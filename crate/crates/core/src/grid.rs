//! Uniform detuning grids over the (signal, idler) frequency plane.
//!
//! Axes hold detunings `Ω = ω - ω0` from the photon center frequencies, so
//! that the ~10¹⁵ rad/s carrier never enters a subtraction. Points are cell
//! midpoints: an axis of `n` points covering `[-H, H]` has spacing `2H / n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::source::{FilterShape, FilterSpec, PhasematchingShape, SourceSpec};
use crate::units::{sigma_from_fwhm, SINC_GAUSSIAN_ALPHA};

/// Discretization settings shared by the numerical engine and the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    /// Points per axis.
    pub n_points: usize,
    /// Half-span of [`FrequencyGrid::default_for`] in units of the larger of
    /// the pump and phasematching FWHM.
    pub span_factor: f64,
    /// Half-span of [`FrequencyGrid::fitted`] in intensity standard deviations
    /// of the Gaussian envelope.
    pub fit_sigmas: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n_points: 512,
            span_factor: 4.0,
            fit_sigmas: 7.0,
        }
    }
}

impl GridConfig {
    pub fn with_n_points(n_points: usize) -> Self {
        GridConfig {
            n_points,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    signal_axis: Vec<f64>,
    idler_axis: Vec<f64>,
    signal_center_omega: f64,
    idler_center_omega: f64,
}

fn check_axis(name: &str, axis: &[f64]) -> Result<f64> {
    if axis.len() < 2 {
        return Err(Error::Domain(format!(
            "{name} axis needs at least 2 points"
        )));
    }
    let step = axis[1] - axis[0];
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Domain(format!(
            "{name} axis must be strictly increasing"
        )));
    }
    for w in axis.windows(2) {
        let d = w[1] - w[0];
        if (d - step).abs() > 1e-9 * step {
            return Err(Error::Domain(format!(
                "{name} axis is not uniformly spaced"
            )));
        }
    }
    Ok(step)
}

fn midpoint_axis(half_span: f64, n: usize) -> Vec<f64> {
    let h = 2.0 * half_span / n as f64;
    (0..n).map(|k| -half_span + (k as f64 + 0.5) * h).collect()
}

impl FrequencyGrid {
    /// Grid from explicit detuning axes (rad/s).
    pub fn new(
        signal_axis: Vec<f64>,
        idler_axis: Vec<f64>,
        signal_center_omega: f64,
        idler_center_omega: f64,
    ) -> Result<Self> {
        check_axis("signal", &signal_axis)?;
        check_axis("idler", &idler_axis)?;
        Ok(FrequencyGrid {
            signal_axis,
            idler_axis,
            signal_center_omega,
            idler_center_omega,
        })
    }

    /// Midpoint grid covering `[-half_span, half_span]` on each axis.
    pub fn symmetric(
        signal_center_omega: f64,
        idler_center_omega: f64,
        signal_half_span: f64,
        idler_half_span: f64,
        n_points: usize,
    ) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::Domain(format!(
                "n_points must be >= 2, got {n_points}"
            )));
        }
        for span in [signal_half_span, idler_half_span] {
            if !(span > 0.0) || !span.is_finite() {
                return Err(Error::Domain(format!(
                    "half span must be positive, got {span}"
                )));
            }
        }
        Self::new(
            midpoint_axis(signal_half_span, n_points),
            midpoint_axis(idler_half_span, n_points),
            signal_center_omega,
            idler_center_omega,
        )
    }

    /// Square grid of ±`span_factor` times the larger of the pump and
    /// phasematching FWHM around each photon center.
    pub fn default_for(spec: &SourceSpec, config: &GridConfig) -> Result<Self> {
        let half = config.span_factor * spec.pump_fwhm_angular()?.max(spec.pm_fwhm_angular()?);
        Self::symmetric(
            spec.signal_center_omega()?,
            spec.idler_center_omega()?,
            half,
            half,
            config.n_points,
        )
    }

    /// Grid sized to the intensity envelope of the filtered spectrum.
    ///
    /// The envelope is the Gaussian quadratic form of pump, phasematching and
    /// filter terms. For sinc phasematching the phasematching term is weakened
    /// ninefold so the grid reaches into the sinc side lobes. A centered
    /// rectangular filter clamps its axis to the passband. When the envelope
    /// is unbounded (perfectly correlated) the default spans are used.
    pub fn fitted(
        spec: &SourceSpec,
        signal_filter: &FilterSpec,
        idler_filter: &FilterSpec,
        config: &GridConfig,
    ) -> Result<Self> {
        let (theta_s, theta_c) = spec.theta_rad().sin_cos();
        let pm_weight = match spec.phasematching_shape {
            PhasematchingShape::GaussianApprox => SINC_GAUSSIAN_ALPHA / spec.pm_sigma()?.powi(2),
            PhasematchingShape::Sinc => SINC_GAUSSIAN_ALPHA / spec.pm_sigma()?.powi(2) / 9.0,
        };
        let pump_weight = 1.0 / spec.pump_sigma()?.powi(2);

        let filter_weight = |f: &FilterSpec, photon_nm: f64| -> Result<(f64, Option<f64>)> {
            if f.is_none() || !f.is_centered_on(photon_nm) {
                return Ok((0.0, None));
            }
            let fwhm = f.fwhm_angular()?.expect("filter present");
            let w = 1.0 / sigma_from_fwhm(fwhm).powi(2);
            let clamp = (f.shape == FilterShape::Rectangular).then_some(0.5 * fwhm);
            Ok((w, clamp))
        };
        let (ws, clamp_s) = filter_weight(signal_filter, spec.signal_center_wavelength_nm)?;
        let (wi, clamp_i) = filter_weight(idler_filter, spec.idler_center_wavelength_nm)?;

        let a = pm_weight * theta_s * theta_s + pump_weight + ws;
        let b = pm_weight * theta_c * theta_c + pump_weight + wi;
        let c = pm_weight * theta_s * theta_c + pump_weight;
        let det = a * b - c * c;

        let (mut half_s, mut half_i) = if det > 1e-10 * a * b {
            (
                config.fit_sigmas * (b / det).sqrt(),
                config.fit_sigmas * (a / det).sqrt(),
            )
        } else {
            let half = config.span_factor * spec.pump_fwhm_angular()?.max(spec.pm_fwhm_angular()?);
            (half, half)
        };
        if let Some(edge) = clamp_s {
            half_s = half_s.min(edge);
        }
        if let Some(edge) = clamp_i {
            half_i = half_i.min(edge);
        }
        Self::symmetric(
            spec.signal_center_omega()?,
            spec.idler_center_omega()?,
            half_s,
            half_i,
            config.n_points,
        )
    }

    pub fn signal_axis(&self) -> &[f64] {
        &self.signal_axis
    }

    pub fn idler_axis(&self) -> &[f64] {
        &self.idler_axis
    }

    pub fn signal_center_omega(&self) -> f64 {
        self.signal_center_omega
    }

    pub fn idler_center_omega(&self) -> f64 {
        self.idler_center_omega
    }

    pub fn n_signal(&self) -> usize {
        self.signal_axis.len()
    }

    pub fn n_idler(&self) -> usize {
        self.idler_axis.len()
    }

    pub fn signal_step(&self) -> f64 {
        self.signal_axis[1] - self.signal_axis[0]
    }

    pub fn idler_step(&self) -> f64 {
        self.idler_axis[1] - self.idler_axis[0]
    }

    pub fn cell_area(&self) -> f64 {
        self.signal_step() * self.idler_step()
    }

    /// Same axes up to floating-point noise.
    pub fn matches(&self, other: &FrequencyGrid) -> bool {
        fn same(a: &[f64], b: &[f64]) -> bool {
            a.len() == b.len()
                && a.iter()
                    .zip(b)
                    .all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()))
        }
        same(&self.signal_axis, &other.signal_axis)
            && same(&self.idler_axis, &other.idler_axis)
            && (self.signal_center_omega - other.signal_center_omega).abs()
                <= 1e-12 * self.signal_center_omega.abs()
            && (self.idler_center_omega - other.idler_center_omega).abs()
                <= 1e-12 * self.idler_center_omega.abs()
    }

    /// Grid with twice the points over the same spans.
    pub fn refined(&self) -> Result<Self> {
        let half_s = 0.5 * self.signal_step() * self.n_signal() as f64;
        let half_i = 0.5 * self.idler_step() * self.n_idler() as f64;
        Self::new(
            midpoint_axis(half_s, 2 * self.n_signal()),
            midpoint_axis(half_i, 2 * self.n_idler()),
            self.signal_center_omega,
            self.idler_center_omega,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec() -> SourceSpec {
        SourceSpec::degenerate(778.0, 0.42, 0.46, 60.5, PhasematchingShape::GaussianApprox)
    }

    #[test]
    fn midpoints_are_symmetric_and_uniform() {
        let g = FrequencyGrid::symmetric(1.0, 1.0, 2.0, 3.0, 8).unwrap();
        assert_eq!(g.n_signal(), 8);
        assert_relative_eq!(g.signal_axis()[0], -1.75);
        assert_relative_eq!(g.signal_axis()[7], 1.75);
        assert_relative_eq!(g.signal_step(), 0.5);
        assert_relative_eq!(g.idler_step(), 0.75);
        assert_relative_eq!(g.cell_area(), 0.375);
    }

    #[test]
    fn rejects_bad_axes() {
        assert!(FrequencyGrid::symmetric(1.0, 1.0, 1.0, 1.0, 1).is_err());
        assert!(FrequencyGrid::new(vec![0.0, 1.0, 3.0], vec![0.0, 1.0], 1.0, 1.0).is_err());
        assert!(FrequencyGrid::new(vec![1.0, 0.0], vec![0.0, 1.0], 1.0, 1.0).is_err());
    }

    #[test]
    fn default_span_rule() {
        let s = spec();
        let g = FrequencyGrid::default_for(&s, &GridConfig::default()).unwrap();
        let half = 4.0 * s.pump_fwhm_angular().unwrap();
        assert_eq!(g.n_signal(), 512);
        assert_relative_eq!(g.signal_step() * 512.0, 2.0 * half, max_relative = 1e-12);
    }

    #[test]
    fn fitted_clamps_to_rectangular_passband() {
        let s = spec();
        let f = FilterSpec::rectangular(1556.0, 0.3);
        let g = FrequencyGrid::fitted(&s, &f, &f, &GridConfig::default()).unwrap();
        let edge = 0.5 * f.fwhm_angular().unwrap().unwrap();
        assert_relative_eq!(g.signal_step() * 256.0, edge, max_relative = 1e-12);
        assert_relative_eq!(g.idler_step() * 256.0, edge, max_relative = 1e-12);
    }

    #[test]
    fn fitted_falls_back_when_unbounded() {
        let s = spec().with_theta(45.0);
        let none = FilterSpec::none();
        let fitted = FrequencyGrid::fitted(&s, &none, &none, &GridConfig::default()).unwrap();
        let default = FrequencyGrid::default_for(&s, &GridConfig::default()).unwrap();
        assert!(fitted.matches(&default));
    }

    #[test]
    fn refined_doubles_points_same_span() {
        let g = FrequencyGrid::symmetric(1.0, 1.0, 2.0, 3.0, 8).unwrap();
        let r = g.refined().unwrap();
        assert_eq!(r.n_signal(), 16);
        assert_relative_eq!(r.signal_step() * 16.0, 4.0);
        assert_relative_eq!(r.idler_axis()[15], 3.0 - 0.1875);
    }
}
