use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::simplex::{minimize, SimplexOptions};
use crate::error::{Error, Result};
use crate::grid::GridConfig;
use crate::metrics::{self, Engine, FilterMetrics};
use crate::source::{FilterShape, FilterSpec, PhasematchingShape, SourceSpec};

/// Settings of the multi-start bandwidth search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Points per axis of the coarse log-spaced grid.
    pub coarse_points: usize,
    /// Simplex runs: the best coarse point plus `starts - 1` random points.
    pub starts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Stop a simplex run once its vertices agree on the fidelity to this.
    pub ftol: f64,
    /// Search box for every bandwidth, as multiples of the phasematching FWHM.
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Grid for the numeric objective (sinc phasematching or flat-top filters).
    pub numeric_grid: GridConfig,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            coarse_points: 7,
            starts: 8,
            seed: 20_190_401,
            max_iterations: 2000,
            ftol: 1e-10,
            min_ratio: 1e-2,
            max_ratio: 1e3,
            numeric_grid: GridConfig {
                n_points: 96,
                ..GridConfig::default()
            },
        }
    }
}

/// Best symmetrized fidelity at one phasematching angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub theta_deg: f64,
    pub f_max: f64,
    pub pump_fwhm_nm: f64,
    /// At the search cap when `signal_unfiltered` is set.
    pub signal_fwhm_nm: f64,
    pub idler_fwhm_nm: f64,
    pub signal_unfiltered: bool,
    pub idler_unfiltered: bool,
    /// False when some simplex run stopped at the iteration cap.
    pub converged: bool,
    /// Best value on the coarse grid, before refinement.
    pub coarse_best: f64,
    pub engine: Engine,
    pub metrics: FilterMetrics,
}

impl BoundPoint {
    pub const CSV_HEADER: &'static str = "theta_deg,f_max,pump_fwhm_nm,signal_filter_fwhm_nm,idler_filter_fwhm_nm,signal_unfiltered,idler_unfiltered,converged";

    pub fn csv_header() -> String {
        let mut h = String::from(Self::CSV_HEADER);
        for c in FilterMetrics::CSV_COLUMNS {
            h.push(',');
            h.push_str(c);
        }
        h
    }

    pub fn csv_row(&self) -> String {
        let mut row = format!(
            "{},{},{},{},{},{},{},{}",
            self.theta_deg,
            self.f_max,
            self.pump_fwhm_nm,
            self.signal_fwhm_nm,
            self.idler_fwhm_nm,
            self.signal_unfiltered,
            self.idler_unfiltered,
            self.converged
        );
        for v in self.metrics.csv_values() {
            row.push(',');
            row.push_str(&v.to_string());
        }
        row
    }
}

/// Evaluates the symmetrized fidelity at log-ratio coordinates
/// `[pump, signal, idler]` (filters omitted when the shape is `None`). A
/// filter coordinate at the top of the search box means no filter.
struct Objective<'a> {
    base: &'a SourceSpec,
    pm_fwhm_nm: f64,
    open_at: f64,
    shape: FilterShape,
    engine: Engine,
    grid: &'a GridConfig,
}

impl Objective<'_> {
    fn setup(&self, x: &[f64]) -> (SourceSpec, FilterSpec, FilterSpec) {
        let scale = |v: f64| self.pm_fwhm_nm * v.exp();
        let spec = self.base.with_pump_fwhm(scale(x[0]));
        let make = |center: f64, v: Option<&f64>| match (self.shape, v) {
            (FilterShape::None, _) | (_, None) => FilterSpec::none(),
            (_, Some(&v)) if v >= self.open_at => FilterSpec::none(),
            (shape, Some(&v)) => FilterSpec {
                shape,
                center_wavelength_nm: center,
                fwhm_nm: scale(v),
            },
        };
        let fs = make(spec.signal_center_wavelength_nm, x.get(1));
        let fi = make(spec.idler_center_wavelength_nm, x.get(2));
        (spec, fs, fi)
    }

    fn metrics(&self, x: &[f64]) -> Result<FilterMetrics> {
        let (spec, fs, fi) = self.setup(x);
        metrics::compute(self.engine, &spec, &fs, &fi, self.grid)
    }

    fn fidelity(&self, x: &[f64]) -> f64 {
        self.metrics(x).map_or(f64::NEG_INFINITY, |m| m.f_sym)
    }
}

fn coarse_grid(dims: usize, points: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    let axis = super::linspace(lo, hi, points.max(2));
    let mut out = vec![vec![]];
    for _ in 0..dims {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

/// Maximizes the symmetrized fidelity over pump and filter bandwidths.
///
/// `base` supplies the wavelengths and phasematching shape; its pump
/// bandwidth is ignored. The analytic objective is used for Gaussian (or
/// absent) filters with the Gaussian phasematching stand-in, the numeric one
/// otherwise.
pub fn optimize_fidelity_at_angle(
    base: &SourceSpec,
    theta_deg: f64,
    pm_fwhm_nm: f64,
    filter_shape: FilterShape,
    config: &OptimizerConfig,
) -> Result<BoundPoint> {
    if !(0.0..180.0).contains(&theta_deg) {
        return Err(Error::Domain(format!(
            "theta must lie in [0, 180), got {theta_deg}"
        )));
    }
    if !(config.min_ratio > 0.0 && config.max_ratio > config.min_ratio) {
        return Err(Error::Domain(
            "search box needs 0 < min_ratio < max_ratio".into(),
        ));
    }
    if config.starts == 0 {
        return Err(Error::Domain("at least one start is required".into()));
    }
    let mut base = base.with_theta(theta_deg);
    base.pm_fwhm_nm = pm_fwhm_nm;
    base.validate()?;

    let engine = match (filter_shape, base.phasematching_shape) {
        (FilterShape::Rectangular, _) | (_, PhasematchingShape::Sinc) => Engine::Numeric,
        _ => Engine::Analytic,
    };
    let (lo, hi) = (config.min_ratio.ln(), config.max_ratio.ln());
    let objective = Objective {
        base: &base,
        pm_fwhm_nm,
        open_at: hi - 1e-9,
        shape: filter_shape,
        engine,
        grid: &config.numeric_grid,
    };
    let dims = if filter_shape == FilterShape::None {
        1
    } else {
        3
    };
    let lower = vec![lo; dims];
    let upper = vec![hi; dims];

    let (mut best_x, coarse_best) = coarse_grid(dims, config.coarse_points, lo, hi)
        .into_iter()
        .map(|x| {
            let f = objective.fidelity(&x);
            (x, f)
        })
        .fold((vec![], f64::NEG_INFINITY), |acc, (x, f)| {
            if f > acc.1 {
                (x, f)
            } else {
                acc
            }
        });
    if !coarse_best.is_finite() {
        return Err(Error::Domain(format!(
            "objective undefined on the whole coarse grid at theta = {theta_deg}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ theta_deg.to_bits());
    let mut starts = vec![best_x.clone()];
    for _ in 1..config.starts {
        starts.push((0..dims).map(|_| rng.random_range(lo..hi)).collect());
    }

    let opts = SimplexOptions {
        max_iterations: config.max_iterations,
        ftol: config.ftol,
        ..SimplexOptions::default()
    };
    let mut best_f = coarse_best;
    let mut converged = true;
    for x0 in &starts {
        let run = minimize(|x| -objective.fidelity(x), x0, &lower, &upper, &opts);
        converged &= run.converged;
        if -run.f > best_f {
            best_f = -run.f;
            best_x = run.x;
        }
    }

    // an open filter that costs nothing is reported as no filter
    for k in 1..dims {
        let mut x = best_x.clone();
        x[k] = hi;
        let f = objective.fidelity(&x);
        if f >= best_f - 1e-12 {
            best_f = best_f.max(f);
            best_x = x;
        }
    }

    let m = objective.metrics(&best_x)?;
    let width = |k: usize| {
        best_x
            .get(k)
            .map_or(f64::INFINITY, |v| pm_fwhm_nm * v.exp())
    };
    let open = |k: usize| best_x.get(k).is_none_or(|v| *v >= objective.open_at);
    Ok(BoundPoint {
        theta_deg,
        f_max: m.f_sym,
        pump_fwhm_nm: width(0),
        signal_fwhm_nm: width(1),
        idler_fwhm_nm: width(2),
        signal_unfiltered: open(1),
        idler_unfiltered: open(2),
        converged,
        coarse_best,
        engine,
        metrics: m,
    })
}

/// [`optimize_fidelity_at_angle`] at every angle, evaluated in parallel and
/// returned in input order.
pub fn bound_curve(
    base: &SourceSpec,
    thetas_deg: &[f64],
    pm_fwhm_nm: f64,
    filter_shape: FilterShape,
    config: &OptimizerConfig,
) -> Result<Vec<BoundPoint>> {
    thetas_deg
        .par_iter()
        .map(|&t| optimize_fidelity_at_angle(base, t, pm_fwhm_nm, filter_shape, config))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic;

    fn base() -> SourceSpec {
        SourceSpec::degenerate(778.0, 1.0, 1.5, 60.5, PhasematchingShape::GaussianApprox)
    }

    #[test]
    fn coarse_grid_covers_box() {
        let g = coarse_grid(3, 4, 0.0, 3.0);
        assert_eq!(g.len(), 64);
        assert_eq!(g[0], vec![0.0, 0.0, 0.0]);
        assert_eq!(g[63], vec![3.0, 3.0, 3.0]);
    }

    #[test]
    fn headline_angle() {
        let p = optimize_fidelity_at_angle(
            &base(),
            60.5,
            1.5,
            FilterShape::Gaussian,
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert!((p.f_max - 0.5728).abs() < 1e-3, "{p:?}");
        assert!(p.f_max >= p.coarse_best);
        assert!(p.converged);
        assert!(!p.signal_unfiltered && !p.idler_unfiltered);
    }

    #[test]
    fn engineered_angle_needs_no_filters() {
        let p = optimize_fidelity_at_angle(
            &base(),
            135.0,
            1.5,
            FilterShape::Gaussian,
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert!(p.f_max >= 0.999, "{p:?}");
        assert!(p.signal_unfiltered && p.idler_unfiltered);
    }

    #[test]
    fn pef_consistency_at_45_degrees() {
        let p = optimize_fidelity_at_angle(
            &base(),
            45.0,
            1.5,
            FilterShape::Gaussian,
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert!(p.f_max * (1.0 + p.metrics.purity) / 2.0 <= 0.5 + 1e-3);
        assert!(p.f_max > 0.5);
    }

    #[test]
    fn respects_closed_form_pef_bound() {
        let cfg = OptimizerConfig::default();
        for theta in [20.0, 35.0, 60.5, 70.0] {
            let p = optimize_fidelity_at_angle(&base(), theta, 1.5, FilterShape::Gaussian, &cfg)
                .unwrap();
            let spec = base().with_theta(theta).with_pump_fwhm(p.pump_fwhm_nm);
            if let Some(b) = analytic::pef_max(&spec).unwrap() {
                assert!(p.metrics.pef <= b.pef_max + 1e-6);
            }
        }
    }

    #[test]
    fn pump_only_search() {
        let p = optimize_fidelity_at_angle(
            &base(),
            135.0,
            1.5,
            FilterShape::None,
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert!(p.f_max >= 0.999);
        assert!(p.signal_unfiltered && p.idler_unfiltered);
        assert!(p.signal_fwhm_nm.is_infinite());
    }

    #[test]
    fn rejects_out_of_range_angle() {
        let cfg = OptimizerConfig::default();
        assert!(
            optimize_fidelity_at_angle(&base(), 180.0, 1.5, FilterShape::Gaussian, &cfg).is_err()
        );
    }

    #[test]
    fn curve_keeps_input_order() {
        let thetas = [80.0, 10.0, 50.0];
        let pts = bound_curve(
            &base(),
            &thetas,
            1.5,
            FilterShape::Gaussian,
            &OptimizerConfig::default(),
        )
        .unwrap();
        let got: Vec<f64> = pts.iter().map(|p| p.theta_deg).collect();
        assert_eq!(got, thetas);
        // symmetric about 45 degrees
        let a = optimize_fidelity_at_angle(
            &base(),
            30.0,
            1.5,
            FilterShape::Gaussian,
            &OptimizerConfig::default(),
        )
        .unwrap();
        let b = optimize_fidelity_at_angle(
            &base(),
            60.0,
            1.5,
            FilterShape::Gaussian,
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert!((a.f_max - b.f_max).abs() < 1e-4);
    }

    #[test]
    fn csv_row_matches_header() {
        let p = optimize_fidelity_at_angle(
            &base(),
            60.5,
            1.5,
            FilterShape::Gaussian,
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert_eq!(
            BoundPoint::csv_header().split(',').count(),
            p.csv_row().split(',').count()
        );
    }
}
