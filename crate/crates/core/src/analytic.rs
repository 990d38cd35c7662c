//! Closed-form Gaussian model.
//!
//! With the phasematching sinc replaced by `exp(-α x²)` and Gaussian filters
//! centred on the photons, the filtered amplitude is
//! `N exp(-a Ωs²/4 - b Ωi²/4 - c ΩsΩi/2)`. Every metric then follows from
//! the coefficients `a, b, c` and their unfiltered values `a0, b0`.
//!
//! Coefficients are kept in units of `1/unit²`, where `unit` is the
//! phasematching FWHM in rad/s, so their magnitudes stay near one. All the
//! formulas are ratios and do not depend on that choice.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::FilterMetrics;
use crate::source::{FilterShape, FilterSpec, SourceSpec};
use crate::units::{
    angular_bandwidth_to_wavelength, fwhm_per_sigma, sigma_from_fwhm, SINC_GAUSSIAN_ALPHA,
};

/// Quadratic-form coefficients of the filtered joint spectral amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub a0: f64,
    pub b0: f64,
    /// `a0 b0 - c²`, evaluated without cancellation when built from a source.
    det0: f64,
    /// Frequency unit (rad/s) of the coefficients: `a_SI = a / unit²`.
    pub unit: f64,
}

impl GaussianCoeffs {
    /// Coefficients given directly (dimensionless, `unit = 1`).
    pub fn new(a: f64, b: f64, c: f64, a0: f64, b0: f64) -> Result<Self> {
        let co = GaussianCoeffs {
            a,
            b,
            c,
            a0,
            b0,
            det0: a0 * b0 - c * c,
            unit: 1.0,
        };
        co.validate()?;
        Ok(co)
    }

    fn validate(&self) -> Result<()> {
        if !(self.a0 > 0.0 && self.b0 > 0.0) {
            return Err(Error::Domain(format!(
                "a0 and b0 must be positive, got {} and {}",
                self.a0, self.b0
            )));
        }
        if self.a < self.a0 || self.b < self.b0 {
            return Err(Error::Domain("filters cannot decrease a or b".into()));
        }
        if self.det0 < -1e-12 * self.a0 * self.b0 {
            return Err(Error::Singular(format!(
                "a0 b0 - c² = {:.3e} is negative",
                self.det0
            )));
        }
        Ok(())
    }

    /// Signal filter term `a - a0`.
    pub fn signal_filter_term(&self) -> f64 {
        self.a - self.a0
    }

    /// Idler filter term `b - b0`.
    pub fn idler_filter_term(&self) -> f64 {
        self.b - self.b0
    }

    pub fn det0(&self) -> f64 {
        self.det0.max(0.0)
    }

    /// `ab - c²`.
    pub fn det(&self) -> f64 {
        let (u, v) = (self.signal_filter_term(), self.idler_filter_term());
        self.det0() + self.a0 * v + u * self.b0 + u * v
    }

    /// `a0 b - c²`.
    pub fn det_signal_unfiltered(&self) -> f64 {
        self.det0() + self.a0 * self.idler_filter_term()
    }

    /// `a b0 - c²`.
    pub fn det_idler_unfiltered(&self) -> f64 {
        self.det0() + self.signal_filter_term() * self.b0
    }

    /// Same source with different filter terms.
    pub fn with_filter_terms(&self, signal: f64, idler: f64) -> Self {
        GaussianCoeffs {
            a: self.a0 + signal,
            b: self.b0 + idler,
            ..*self
        }
    }
}

fn filter_term(filter: &FilterSpec, photon_nm: f64, unit: f64, arm: &str) -> Result<f64> {
    match filter.shape {
        FilterShape::None => Ok(0.0),
        FilterShape::Rectangular => Err(Error::UnsupportedShape(format!(
            "{arm} filter is rectangular; the analytic engine needs Gaussian filters"
        ))),
        FilterShape::Gaussian => {
            if !filter.is_centered_on(photon_nm) {
                return Err(Error::UnsupportedShape(format!(
                    "{arm} filter centred at {} nm, photon at {photon_nm} nm; the analytic engine needs centred filters",
                    filter.center_wavelength_nm
                )));
            }
            let fwhm = filter.fwhm_angular()?.expect("filter present");
            Ok((unit / sigma_from_fwhm(fwhm)).powi(2))
        }
    }
}

/// Coefficients of the source with its filters (single power of α in the
/// phasematching term).
pub fn gaussian_coeffs(
    spec: &SourceSpec,
    signal_filter: &FilterSpec,
    idler_filter: &FilterSpec,
) -> Result<GaussianCoeffs> {
    spec.validate()?;
    signal_filter.validate()?;
    idler_filter.validate()?;
    let unit = spec.pm_fwhm_angular()?;
    let pm = SINC_GAUSSIAN_ALPHA * (unit / spec.pm_sigma()?).powi(2);
    let pump = (unit / spec.pump_sigma()?).powi(2);
    let (s, c) = spec.theta_rad().sin_cos();
    let u = filter_term(
        signal_filter,
        spec.signal_center_wavelength_nm,
        unit,
        "signal",
    )?;
    let v = filter_term(idler_filter, spec.idler_center_wavelength_nm, unit, "idler")?;
    let a0 = pm * s * s + pump;
    let b0 = pm * c * c + pump;
    Ok(GaussianCoeffs {
        a: a0 + u,
        b: b0 + v,
        c: pm * s * c + pump,
        a0,
        b0,
        // (pm s² + p)(pm c² + p) - (pm s c + p)² = pm p (s - c)²
        det0: pm * pump * (s - c).powi(2),
        unit,
    })
}

/// Filter heralding efficiencies `(eta_s, eta_i, pshe)`.
///
/// An absent filter on one arm leaves the partner's efficiency at exactly one.
pub fn heralding_efficiencies(co: &GaussianCoeffs) -> Result<(f64, f64, f64)> {
    let (u, v) = (co.signal_filter_term(), co.idler_filter_term());
    let det = co.det();
    let eta_s = if u == 0.0 {
        1.0
    } else if det > 0.0 {
        (co.det_signal_unfiltered() / det).sqrt()
    } else {
        return Err(Error::Singular(format!("ab - c² = {det:.3e}")));
    };
    let eta_i = if v == 0.0 {
        1.0
    } else if det > 0.0 {
        (co.det_idler_unfiltered() / det).sqrt()
    } else {
        return Err(Error::Singular(format!("ab - c² = {det:.3e}")));
    };
    Ok((eta_s, eta_i, eta_s * eta_i))
}

/// Reduced-state purity `sqrt((ab - c²)/(ab))`.
pub fn purity(co: &GaussianCoeffs) -> Result<f64> {
    let ab = co.a * co.b;
    if !(ab > 0.0) {
        return Err(Error::Domain(format!("ab = {ab:.3e} must be positive")));
    }
    Ok((co.det() / ab).sqrt().min(1.0))
}

/// Fidelities to the best Gaussian single photon on each arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fidelities {
    pub f_s: f64,
    pub f_i: f64,
    pub f_sym: f64,
    /// Width parameter `d` of the optimal signal mode `exp(-d Ω²/4)`, in
    /// the coefficient unit.
    pub optimal_d_signal: f64,
    pub optimal_d_idler: f64,
}

pub fn symmetrized_fidelity(co: &GaussianCoeffs) -> Result<Fidelities> {
    let ab = co.a * co.b;
    if !(ab > 0.0) {
        return Err(Error::Domain(format!("ab = {ab:.3e} must be positive")));
    }
    let det = co.det();
    let denom = det.sqrt() + ab.sqrt();
    let f_s = 2.0 * co.det_signal_unfiltered().sqrt() / denom;
    let f_i = 2.0 * co.det_idler_unfiltered().sqrt() / denom;
    Ok(Fidelities {
        f_s,
        f_i,
        f_sym: (f_s * f_i).sqrt(),
        optimal_d_signal: (co.a * det / co.b).sqrt(),
        optimal_d_idler: (co.b * det / co.a).sqrt(),
    })
}

/// Fidelity of the heralded signal photon to the Gaussian mode
/// `(d/2π)^¼ exp(-d Ω²/4)`, including filter loss.
pub fn signal_overlap(co: &GaussianCoeffs, d: f64) -> Result<f64> {
    let (eta_s, _, _) = heralding_efficiencies(co)?;
    let (a, b, c) = (co.a, co.b, co.c);
    let denom = b * (a + d).powi(2) - c * c * (a + d);
    Ok(eta_s * (4.0 * co.det() * d / denom).sqrt())
}

/// Purity-efficiency factor `((a0 b - c²)(a b0 - c²)/(a² b²))^¼`.
pub fn pef(co: &GaussianCoeffs) -> f64 {
    let num = co.det_signal_unfiltered() * co.det_idler_unfiltered();
    (num / (co.a * co.a * co.b * co.b)).powf(0.25)
}

/// Closed-form maximum of the PEF over Gaussian filter bandwidths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PefMax {
    pub pef_max: f64,
    /// Optimal `a = 2c²/b0` (coefficient unit).
    pub a_opt: f64,
    /// Optimal `b = 2c²/a0`.
    pub b_opt: f64,
    pub signal_fwhm_nm: f64,
    pub idler_fwhm_nm: f64,
}

/// `sqrt(a0 b0 / 4c²)` with its argmax, or `None` when `c² <= a0 b0 / 2`
/// (no interior optimum; fall back to numerical optimization).
pub fn pef_max(spec: &SourceSpec) -> Result<Option<PefMax>> {
    let co = gaussian_coeffs(spec, &FilterSpec::none(), &FilterSpec::none())?;
    let c2 = co.c * co.c;
    if !(c2 > 0.5 * co.a0 * co.b0) {
        return Ok(None);
    }
    let a_opt = 2.0 * c2 / co.b0;
    let b_opt = 2.0 * c2 / co.a0;
    let fwhm_nm = |term: f64, center_nm: f64| -> Result<f64> {
        let sigma = co.unit / term.sqrt();
        angular_bandwidth_to_wavelength(center_nm, sigma * fwhm_per_sigma())
    };
    Ok(Some(PefMax {
        pef_max: (co.a0 * co.b0 / (4.0 * c2)).sqrt(),
        a_opt,
        b_opt,
        signal_fwhm_nm: fwhm_nm(a_opt - co.a0, spec.signal_center_wavelength_nm)?,
        idler_fwhm_nm: fwhm_nm(b_opt - co.b0, spec.idler_center_wavelength_nm)?,
    }))
}

/// All metrics from a coefficient set.
pub fn metrics_from_coeffs(co: &GaussianCoeffs) -> Result<FilterMetrics> {
    let (eta_s, eta_i, pshe) = heralding_efficiencies(co)?;
    let p = purity(co)?;
    let fid = symmetrized_fidelity(co)?;
    Ok(FilterMetrics {
        eta_s,
        eta_i,
        pshe,
        purity: p,
        f_s: fid.f_s,
        f_i: fid.f_i,
        f_sym: fid.f_sym,
        pef: pef(co),
    })
}

pub fn metrics(
    spec: &SourceSpec,
    signal_filter: &FilterSpec,
    idler_filter: &FilterSpec,
) -> Result<FilterMetrics> {
    metrics_from_coeffs(&gaussian_coeffs(spec, signal_filter, idler_filter)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::PhasematchingShape;
    use approx::assert_relative_eq;

    fn spec(theta: f64) -> SourceSpec {
        SourceSpec::degenerate(778.0, 0.42, 0.46, theta, PhasematchingShape::GaussianApprox)
    }

    fn none() -> FilterSpec {
        FilterSpec::none()
    }

    #[test]
    fn coefficients_at_45_degrees_are_equal() {
        let co = gaussian_coeffs(&spec(45.0), &none(), &none()).unwrap();
        assert_relative_eq!(co.a0, co.c, max_relative = 1e-14);
        assert_relative_eq!(co.b0, co.c, max_relative = 1e-14);
        assert!(co.det0() < 1e-14 * co.a0 * co.b0);
    }

    #[test]
    fn coefficients_at_90_degrees() {
        let s = spec(90.0);
        let co = gaussian_coeffs(&s, &none(), &none()).unwrap();
        let unit = s.pm_fwhm_angular().unwrap();
        let pump = (unit / s.pump_sigma().unwrap()).powi(2);
        let pm = SINC_GAUSSIAN_ALPHA * (unit / s.pm_sigma().unwrap()).powi(2);
        assert_relative_eq!(co.a0, pm + pump, max_relative = 1e-12);
        assert_relative_eq!(co.b0, pump, max_relative = 1e-12);
        assert_relative_eq!(co.c, pump, max_relative = 1e-12);
        // single-α: the phasematching term is 8 ln2 in units of the FWHM
        assert_relative_eq!(pm, 8.0 * std::f64::consts::LN_2, max_relative = 1e-12);
    }

    #[test]
    fn correlation_of_reference_source() {
        // c²/(a0 b0) ≈ 0.958 for 0.42 nm pump, 0.46 nm phasematching, 60.5°
        let co = gaussian_coeffs(&spec(60.5), &none(), &none()).unwrap();
        let r = co.c * co.c / (co.a0 * co.b0);
        assert!((r - 0.958).abs() < 2e-3, "{r}");
        assert!((purity(&co).unwrap() - 0.20).abs() < 5e-3);
    }

    #[test]
    fn rectangular_rejected() {
        let r = FilterSpec::rectangular(1556.0, 1.0);
        assert!(matches!(
            gaussian_coeffs(&spec(60.5), &r, &none()),
            Err(Error::UnsupportedShape(_))
        ));
        let off = FilterSpec::gaussian(1550.0, 1.0);
        assert!(matches!(
            gaussian_coeffs(&spec(60.5), &none(), &off),
            Err(Error::UnsupportedShape(_))
        ));
    }

    #[test]
    fn unfiltered_efficiencies_are_one() {
        let co = gaussian_coeffs(&spec(60.5), &none(), &none()).unwrap();
        assert_eq!(heralding_efficiencies(&co).unwrap(), (1.0, 1.0, 1.0));
    }

    #[test]
    fn narrow_signal_filter_asymptotics() {
        let co = gaussian_coeffs(&spec(60.5), &none(), &none()).unwrap();
        let narrow = co.with_filter_terms(1e9, 0.0);
        let (es, ei, _) = heralding_efficiencies(&narrow).unwrap();
        assert!(es < 1e-3);
        assert_eq!(ei, 1.0);
        // idler filter present too: eta_i tends to sqrt(b0 / b)
        let v = 3.0;
        let both = co.with_filter_terms(1e12, v);
        let (_, ei, _) = heralding_efficiencies(&both).unwrap();
        assert_relative_eq!(ei, (co.b0 / (co.b0 + v)).sqrt(), max_relative = 1e-6);
    }

    #[test]
    fn singular_coefficients() {
        let co = GaussianCoeffs::new(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let filtered = co.with_filter_terms(0.5, 0.0);
        assert!(heralding_efficiencies(&filtered).is_ok());
        assert!(GaussianCoeffs::new(1.0, 1.0, 2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn uncorrelated_source_is_pure() {
        let co = GaussianCoeffs::new(2.0, 3.0, 0.0, 2.0, 3.0).unwrap();
        assert_relative_eq!(purity(&co).unwrap(), 1.0);
        let fid = symmetrized_fidelity(&co).unwrap();
        assert_relative_eq!(fid.f_s, 1.0);
        assert_relative_eq!(fid.f_i, 1.0);
        assert_relative_eq!(fid.f_sym, 1.0);
        assert_relative_eq!(pef(&co), 1.0);
    }

    #[test]
    fn perfectly_correlated_source() {
        let m = metrics(&spec(45.0), &none(), &none()).unwrap();
        assert_eq!((m.eta_s, m.eta_i), (1.0, 1.0));
        assert!(m.purity < 1e-6);
        assert!(m.f_sym < 1e-6);
    }

    #[test]
    fn pef_max_at_45_degrees_is_half() {
        for pump in [0.1, 0.42, 3.0] {
            let s = spec(45.0).with_pump_fwhm(pump);
            let pm = pef_max(&s).unwrap().unwrap();
            assert_relative_eq!(pm.pef_max, 0.5, max_relative = 1e-9);
        }
    }

    #[test]
    fn pef_max_attained_at_argmax() {
        let s = spec(60.5);
        let pm = pef_max(&s).unwrap().unwrap();
        let co = gaussian_coeffs(&s, &none(), &none()).unwrap();
        let at = co.with_filter_terms(pm.a_opt - co.a0, pm.b_opt - co.b0);
        assert_relative_eq!(pef(&at), pm.pef_max, max_relative = 1e-12);
        // same point reached through the reported bandwidths
        let fs = FilterSpec::gaussian(1556.0, pm.signal_fwhm_nm);
        let fi = FilterSpec::gaussian(1556.0, pm.idler_fwhm_nm);
        let m = metrics(&s, &fs, &fi).unwrap();
        assert_relative_eq!(m.pef, pm.pef_max, max_relative = 1e-9);
    }

    #[test]
    fn pef_max_absent_for_engineered_angles() {
        // pump term equal to |sinθ cosθ| times the phasematching term: c = 0
        let s = spec(135.0);
        let pump_w = 2f64.sqrt() * s.pm_fwhm_angular().unwrap();
        let pump_nm = crate::units::angular_bandwidth_to_wavelength(778.0, pump_w).unwrap();
        let engineered = s.with_pump_fwhm(pump_nm);
        let co = gaussian_coeffs(&engineered, &none(), &none()).unwrap();
        assert!(co.c.abs() < 1e-12 * co.a0);
        assert!(pef_max(&engineered).unwrap().is_none());
        assert_relative_eq!(pef(&co), 1.0, max_relative = 1e-12);
        // a narrow pump correlates the photons again and the closed form applies
        assert!(pef_max(&s.with_pump_fwhm(0.05)).unwrap().is_some());
    }

    #[test]
    fn optimal_mode_width_is_stationary() {
        let s = spec(60.5);
        let co = gaussian_coeffs(
            &s,
            &FilterSpec::gaussian(1556.0, 1.3),
            &FilterSpec::gaussian(1556.0, 0.9),
        )
        .unwrap();
        let fid = symmetrized_fidelity(&co).unwrap();
        let d = fid.optimal_d_signal;
        let at = signal_overlap(&co, d).unwrap();
        assert_relative_eq!(at, fid.f_s, max_relative = 1e-12);
        for k in [0.99, 1.01] {
            assert!(signal_overlap(&co, d * k).unwrap() < at);
        }
        // central difference of the derivative vanishes
        let h = 1e-4 * d;
        let slope =
            (signal_overlap(&co, d + h).unwrap() - signal_overlap(&co, d - h).unwrap()) / (2.0 * h);
        assert!(slope.abs() * d < 1e-7, "{slope}");
    }

    #[test]
    fn overlap_formula_matches_quadrature() {
        // ⟨g|ρ|g⟩ with ρ the unnormalized reduced state of the filtered
        // amplitude, divided by Γ_i, against the closed form.
        let co = GaussianCoeffs::new(2.3, 1.9, 1.2, 1.6, 1.1).unwrap();
        let (a, b, c) = (co.a, co.b, co.c);
        let d = 1.7;
        let n = 300;
        let half = 9.0;
        let h = 2.0 * half / n as f64;
        let xs: Vec<f64> = (0..n).map(|k| -half + (k as f64 + 0.5) * h).collect();
        let g = |x: f64| (d / (2.0 * std::f64::consts::PI)).powf(0.25) * (-d * x * x / 4.0).exp();
        let f = |x: f64, y: f64| (-a * x * x / 4.0 - b * y * y / 4.0 - c * x * y / 2.0).exp();
        let f0 = |x: f64, y: f64| (-co.a0 * x * x / 4.0 - b * y * y / 4.0 - c * x * y / 2.0).exp();
        // Γ_i ∝ ∫∫ |f0|² (signal unfiltered, idler filtered)
        let gamma_i: f64 = xs
            .iter()
            .flat_map(|&x| xs.iter().map(move |&y| (x, y)))
            .map(|(x, y)| f0(x, y).powi(2))
            .sum::<f64>()
            * h
            * h;
        // ∫ dy |∫ dx f(x, y) g(x)|²
        let overlap: f64 = xs
            .iter()
            .map(|&y| {
                let inner: f64 = xs.iter().map(|&x| f(x, y) * g(x)).sum::<f64>() * h;
                inner * inner
            })
            .sum::<f64>()
            * h;
        assert_relative_eq!(
            overlap / gamma_i,
            signal_overlap(&co, d).unwrap(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn identities_on_reference_source() {
        let s = spec(60.5);
        let m = metrics(
            &s,
            &FilterSpec::gaussian(1556.0, 1.0),
            &FilterSpec::gaussian(1556.0, 1.0),
        )
        .unwrap();
        let via_purity = (m.eta_s * m.eta_i).sqrt() * 2.0 * m.purity / (1.0 + m.purity);
        assert_relative_eq!(m.f_sym, via_purity, max_relative = 1e-12);
        assert_relative_eq!(
            m.pef,
            m.f_sym * (1.0 + m.purity) / 2.0,
            max_relative = 1e-12
        );
        assert_eq!(m.pshe, m.eta_s * m.eta_i);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn source() -> impl Strategy<Value = SourceSpec> {
            (15.1f64..74.9, 0.05f64..5.0, 0.05f64..5.0).prop_map(|(t, p, pm)| {
                SourceSpec::degenerate(778.0, p, pm, t, PhasematchingShape::GaussianApprox)
            })
        }

        proptest! {
            #[test]
            fn fidelity_and_pef_identities(s in source(), fs in 0.02f64..30.0, fi in 0.02f64..30.0) {
                let m = metrics(&s, &FilterSpec::gaussian(1556.0, fs), &FilterSpec::gaussian(1556.0, fi)).unwrap();
                let via = (m.eta_s * m.eta_i).sqrt() * 2.0 * m.purity / (1.0 + m.purity);
                prop_assert!((m.f_sym - via).abs() <= 1e-12 * via.max(1e-300));
                prop_assert!((m.pef - m.f_sym * (1.0 + m.purity) / 2.0).abs() <= 1e-12 * m.pef);
                prop_assert!((m.f_sym * m.f_sym - m.f_s * m.f_i).abs() <= 1e-12 * m.f_s * m.f_i);
                for v in m.csv_values() {
                    prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
                }
            }

            #[test]
            fn monotone_in_filter_bandwidth(s in source(), fs in 0.05f64..10.0, fi in 0.05f64..10.0) {
                let at = |ws: f64, wi: f64| metrics(&s, &FilterSpec::gaussian(1556.0, ws), &FilterSpec::gaussian(1556.0, wi)).unwrap();
                let base = at(fs, fi);
                let wider_s = at(fs * 1.01, fi);
                let wider_i = at(fs, fi * 1.01);
                let tol = 1e-12;
                // purity never rises when a filter opens up
                prop_assert!(wider_s.purity <= base.purity + tol);
                prop_assert!(wider_i.purity <= base.purity + tol);
                // own-arm opening helps, partner-arm opening hurts
                prop_assert!(wider_s.eta_s >= base.eta_s - tol);
                prop_assert!(wider_s.eta_i <= base.eta_i + tol);
                prop_assert!(wider_i.eta_i >= base.eta_i - tol);
                prop_assert!(wider_i.eta_s <= base.eta_s + tol);
            }

            #[test]
            fn pef_never_exceeds_closed_form_bound(s in source(), fs in 0.01f64..100.0, fi in 0.01f64..100.0) {
                if let Some(bound) = pef_max(&s).unwrap() {
                    let m = metrics(&s, &FilterSpec::gaussian(1556.0, fs), &FilterSpec::gaussian(1556.0, fi)).unwrap();
                    prop_assert!(m.pef <= bound.pef_max + 1e-12);
                }
            }
        }
    }
}
