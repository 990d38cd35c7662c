//! Physical constants and wavelength / angular-frequency conversions.
//!
//! Bandwidths are quoted in the lab as intensity FWHM in nanometres. The
//! models work with angular-frequency detunings (rad/s) and Gaussian
//! amplitude widths `sigma`, related through `fwhm = 2 sqrt(2 ln 2) sigma`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Ratio between an intensity FWHM and the amplitude width `sigma` of a
/// Gaussian `exp(-x^2 / (4 sigma^2))`: `2 sqrt(2 ln 2) ≈ 2.3548`.
pub fn fwhm_per_sigma() -> f64 {
    2.0 * (2.0 * std::f64::consts::LN_2).sqrt()
}

/// Exponent of the Gaussian that stands in for the phasematching sinc,
/// `sinc(x) ≈ exp(-alpha x^2)`.
pub const SINC_GAUSSIAN_ALPHA: f64 = 0.193;

/// Angular frequency (rad/s) of light with the given vacuum wavelength (nm).
pub fn angular_frequency(wavelength_nm: f64) -> Result<f64> {
    if !(wavelength_nm > 0.0) || !wavelength_nm.is_finite() {
        return Err(Error::Domain(format!(
            "wavelength must be positive, got {wavelength_nm} nm"
        )));
    }
    Ok(2.0 * PI * SPEED_OF_LIGHT / (wavelength_nm * 1e-9))
}

/// First-order conversion of a wavelength FWHM to an angular-frequency FWHM,
/// `Δω = 2πc Δλ / λ²`.
pub fn wavelength_bandwidth_to_angular(center_nm: f64, fwhm_nm: f64) -> Result<f64> {
    if !(center_nm > 0.0) || !center_nm.is_finite() {
        return Err(Error::Domain(format!(
            "center wavelength must be positive, got {center_nm} nm"
        )));
    }
    if !(fwhm_nm > 0.0) || !fwhm_nm.is_finite() {
        return Err(Error::Domain(format!(
            "bandwidth must be positive, got {fwhm_nm} nm"
        )));
    }
    Ok(2.0 * PI * SPEED_OF_LIGHT * fwhm_nm * 1e-9 / (center_nm * 1e-9).powi(2))
}

/// Inverse of [`wavelength_bandwidth_to_angular`]: rad/s back to nm.
pub fn angular_bandwidth_to_wavelength(center_nm: f64, fwhm_rad_s: f64) -> Result<f64> {
    let per_nm = wavelength_bandwidth_to_angular(center_nm, 1.0)?;
    if !(fwhm_rad_s >= 0.0) {
        return Err(Error::Domain(format!(
            "bandwidth must be non-negative, got {fwhm_rad_s} rad/s"
        )));
    }
    Ok(fwhm_rad_s / per_nm)
}

/// Amplitude width `sigma` from an intensity FWHM (any unit).
pub fn sigma_from_fwhm(fwhm: f64) -> f64 {
    fwhm / fwhm_per_sigma()
}

/// Sinc with the removable singularity filled, `sin(x)/x`, `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}
