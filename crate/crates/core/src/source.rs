//! Source and filter descriptions in lab units (nm, degrees).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{
    angular_frequency, sigma_from_fwhm, wavelength_bandwidth_to_angular, SINC_GAUSSIAN_ALPHA,
};

/// Relative tolerance on `1/λp = 1/λs + 1/λi` used by [`SourceSpec::validate`].
pub const DEFAULT_ENERGY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhasematchingShape {
    Sinc,
    GaussianApprox,
}

/// Pump envelope and phasematching of a photon-pair source.
///
/// The pump bandwidth is referenced to the pump wavelength, the
/// phasematching bandwidth to the mean photon wavelength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub pump_center_wavelength_nm: f64,
    pub pump_fwhm_nm: f64,
    pub pm_fwhm_nm: f64,
    pub theta_deg: f64,
    pub signal_center_wavelength_nm: f64,
    pub idler_center_wavelength_nm: f64,
    pub phasematching_shape: PhasematchingShape,
}

impl SourceSpec {
    /// Degenerate source: both photons at twice the pump wavelength.
    pub fn degenerate(
        pump_center_wavelength_nm: f64,
        pump_fwhm_nm: f64,
        pm_fwhm_nm: f64,
        theta_deg: f64,
        phasematching_shape: PhasematchingShape,
    ) -> Self {
        SourceSpec {
            pump_center_wavelength_nm,
            pump_fwhm_nm,
            pm_fwhm_nm,
            theta_deg,
            signal_center_wavelength_nm: 2.0 * pump_center_wavelength_nm,
            idler_center_wavelength_nm: 2.0 * pump_center_wavelength_nm,
            phasematching_shape,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with_tolerance(DEFAULT_ENERGY_TOLERANCE)
    }

    pub fn validate_with_tolerance(&self, energy_tolerance: f64) -> Result<()> {
        let positive = [
            ("pump_center_wavelength_nm", self.pump_center_wavelength_nm),
            ("pump_fwhm_nm", self.pump_fwhm_nm),
            ("pm_fwhm_nm", self.pm_fwhm_nm),
            (
                "signal_center_wavelength_nm",
                self.signal_center_wavelength_nm,
            ),
            (
                "idler_center_wavelength_nm",
                self.idler_center_wavelength_nm,
            ),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidSpec(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(0.0..180.0).contains(&self.theta_deg) {
            return Err(Error::InvalidSpec(format!(
                "theta_deg must lie in [0, 180), got {}",
                self.theta_deg
            )));
        }
        let pump = 1.0 / self.pump_center_wavelength_nm;
        let pair = 1.0 / self.signal_center_wavelength_nm + 1.0 / self.idler_center_wavelength_nm;
        let mismatch = (pump - pair).abs() / pump;
        if mismatch > energy_tolerance {
            return Err(Error::InvalidSpec(format!(
                "energy conservation violated: 1/λp and 1/λs + 1/λi differ by {mismatch:.3e} (relative), tolerance {energy_tolerance:.1e}"
            )));
        }
        Ok(())
    }

    pub fn theta_rad(&self) -> f64 {
        self.theta_deg.to_radians()
    }

    /// Wavelength that anchors the phasematching bandwidth: mean of the photon centers.
    pub fn photon_center_wavelength_nm(&self) -> f64 {
        0.5 * (self.signal_center_wavelength_nm + self.idler_center_wavelength_nm)
    }

    pub fn signal_center_omega(&self) -> Result<f64> {
        angular_frequency(self.signal_center_wavelength_nm)
    }

    pub fn idler_center_omega(&self) -> Result<f64> {
        angular_frequency(self.idler_center_wavelength_nm)
    }

    /// Pump intensity FWHM in rad/s.
    pub fn pump_fwhm_angular(&self) -> Result<f64> {
        wavelength_bandwidth_to_angular(self.pump_center_wavelength_nm, self.pump_fwhm_nm)
    }

    /// Phasematching intensity FWHM in rad/s.
    pub fn pm_fwhm_angular(&self) -> Result<f64> {
        wavelength_bandwidth_to_angular(self.photon_center_wavelength_nm(), self.pm_fwhm_nm)
    }

    /// Pump amplitude bandwidth `σ_p` (rad/s).
    pub fn pump_sigma(&self) -> Result<f64> {
        Ok(sigma_from_fwhm(self.pump_fwhm_angular()?))
    }

    /// Phasematching amplitude bandwidth `σ_pm = sqrt(α) Δω_pm / (2 sqrt(2 ln 2))` (rad/s).
    ///
    /// This is the width that enters the sinc argument `x / (2 σ_pm)`; the
    /// Gaussian stand-in `exp(-α x² / (4 σ_pm²))` then has the same intensity
    /// FWHM as the measured phasematching bandwidth.
    pub fn pm_sigma(&self) -> Result<f64> {
        Ok(SINC_GAUSSIAN_ALPHA.sqrt() * sigma_from_fwhm(self.pm_fwhm_angular()?))
    }

    pub fn with_pump_fwhm(&self, pump_fwhm_nm: f64) -> Self {
        SourceSpec {
            pump_fwhm_nm,
            ..self.clone()
        }
    }

    pub fn with_theta(&self, theta_deg: f64) -> Self {
        SourceSpec {
            theta_deg,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterShape {
    Rectangular,
    Gaussian,
    None,
}

/// Ideal spectral filter with unit peak transmission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub shape: FilterShape,
    #[serde(default)]
    pub center_wavelength_nm: f64,
    #[serde(default)]
    pub fwhm_nm: f64,
}

impl FilterSpec {
    pub fn none() -> Self {
        FilterSpec {
            shape: FilterShape::None,
            center_wavelength_nm: 0.0,
            fwhm_nm: 0.0,
        }
    }

    pub fn gaussian(center_wavelength_nm: f64, fwhm_nm: f64) -> Self {
        FilterSpec {
            shape: FilterShape::Gaussian,
            center_wavelength_nm,
            fwhm_nm,
        }
    }

    pub fn rectangular(center_wavelength_nm: f64, fwhm_nm: f64) -> Self {
        FilterSpec {
            shape: FilterShape::Rectangular,
            center_wavelength_nm,
            fwhm_nm,
        }
    }

    /// Same shape and center with a different bandwidth.
    pub fn with_fwhm(&self, fwhm_nm: f64) -> Self {
        FilterSpec {
            fwhm_nm,
            ..self.clone()
        }
    }

    pub fn is_none(&self) -> bool {
        self.shape == FilterShape::None
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_none() {
            return Ok(());
        }
        if !(self.fwhm_nm > 0.0) || !self.fwhm_nm.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "{:?} filter needs a positive fwhm_nm, got {}",
                self.shape, self.fwhm_nm
            )));
        }
        if !(self.center_wavelength_nm > 0.0) || !self.center_wavelength_nm.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "{:?} filter needs a positive center_wavelength_nm, got {}",
                self.shape, self.center_wavelength_nm
            )));
        }
        Ok(())
    }

    /// Intensity FWHM in rad/s; `None` for an absent filter.
    pub fn fwhm_angular(&self) -> Result<Option<f64>> {
        if self.is_none() {
            return Ok(None);
        }
        self.validate()?;
        wavelength_bandwidth_to_angular(self.center_wavelength_nm, self.fwhm_nm).map(Some)
    }

    pub fn center_omega(&self) -> Result<Option<f64>> {
        if self.is_none() {
            return Ok(None);
        }
        angular_frequency(self.center_wavelength_nm).map(Some)
    }

    /// True when the filter is absent or sits on `wavelength_nm` within 1e-9 relative.
    pub fn is_centered_on(&self, wavelength_nm: f64) -> bool {
        self.is_none()
            || ((self.center_wavelength_nm - wavelength_nm).abs() <= 1e-9 * wavelength_nm)
    }

    /// Amplitude transmission at absolute angular frequency `omega` (rad/s).
    pub fn amplitude(&self, omega: f64) -> Result<f64> {
        match self.center_omega()? {
            None => Ok(1.0),
            Some(center) => self.amplitude_at_offset(omega - center),
        }
    }

    /// Amplitude transmission at `offset = ω - ω_filter` (rad/s).
    pub fn amplitude_at_offset(&self, offset: f64) -> Result<f64> {
        let Some(fwhm) = self.fwhm_angular()? else {
            return Ok(1.0);
        };
        Ok(match self.shape {
            FilterShape::Gaussian => {
                let sigma = sigma_from_fwhm(fwhm);
                (-offset * offset / (4.0 * sigma * sigma)).exp()
            }
            FilterShape::Rectangular => {
                if offset.abs() <= 0.5 * fwhm {
                    1.0
                } else {
                    0.0
                }
            }
            FilterShape::None => 1.0,
        })
    }
}
