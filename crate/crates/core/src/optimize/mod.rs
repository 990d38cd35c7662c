//! Filter-bandwidth sweeps and the fidelity bound versus phasematching angle.

mod bound;
pub mod simplex;

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridConfig;
use crate::metrics::{self, Engine, FilterMetrics};
use crate::source::{FilterShape, FilterSpec, SourceSpec};

pub use bound::{bound_curve, optimize_fidelity_at_angle, BoundPoint, OptimizerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Signal and idler filters share one bandwidth.
    EqualFilters,
    /// Every combination of signal and idler bandwidths.
    FilterGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub signal_fwhm_nm: f64,
    pub idler_fwhm_nm: f64,
    pub metrics: FilterMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub engine: Engine,
    pub source: SourceSpec,
    pub filter_shape: FilterShape,
    pub grid: GridConfig,
    /// Equal-filter sweeps: one point per bandwidth. Grid sweeps: row-major
    /// with the signal bandwidth as the slow index.
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn metrics(&self) -> impl Iterator<Item = &FilterMetrics> {
        self.points.iter().map(|p| &p.metrics)
    }

    /// Point with the largest symmetrized fidelity.
    pub fn best_fidelity(&self) -> Option<&SweepPoint> {
        self.points
            .iter()
            .max_by(|a, b| a.metrics.f_sym.total_cmp(&b.metrics.f_sym))
    }

    pub fn mean_fidelity(&self) -> f64 {
        self.metrics().map(|m| m.f_sym).sum::<f64>() / self.points.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = match self.kind {
            SweepKind::EqualFilters => String::from("filter_fwhm_nm"),
            SweepKind::FilterGrid => String::from("signal_filter_fwhm_nm,idler_filter_fwhm_nm"),
        };
        for c in FilterMetrics::CSV_COLUMNS {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for p in &self.points {
            match self.kind {
                SweepKind::EqualFilters => out.push_str(&p.signal_fwhm_nm.to_string()),
                SweepKind::FilterGrid => {
                    out.push_str(&format!("{},{}", p.signal_fwhm_nm, p.idler_fwhm_nm))
                }
            }
            for v in p.metrics.csv_values() {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

fn check_axis(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Domain(format!("{name} list is empty")));
    }
    if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!(
            "{name} values must be positive and finite"
        )));
    }
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain(format!(
            "{name} values must be strictly increasing"
        )));
    }
    Ok(())
}

fn check_engine(engine: Engine, shape: FilterShape) -> Result<()> {
    match (engine, shape) {
        (_, FilterShape::None) => Err(Error::Domain(
            "a bandwidth sweep needs a filter shape other than none".into(),
        )),
        (Engine::Analytic, FilterShape::Rectangular) => Err(Error::UnsupportedShape(
            "rectangular filters need the numeric engine".into(),
        )),
        _ => Ok(()),
    }
}

fn filter(shape: FilterShape, center_nm: f64, fwhm_nm: f64) -> FilterSpec {
    FilterSpec {
        shape,
        center_wavelength_nm: center_nm,
        fwhm_nm,
    }
}

fn evaluate(
    spec: &SourceSpec,
    shape: FilterShape,
    pairs: Vec<(f64, f64)>,
    engine: Engine,
    grid: &GridConfig,
) -> Result<Vec<SweepPoint>> {
    pairs
        .into_par_iter()
        .map(|(ws, wi)| {
            let fs = filter(shape, spec.signal_center_wavelength_nm, ws);
            let fi = filter(shape, spec.idler_center_wavelength_nm, wi);
            Ok(SweepPoint {
                signal_fwhm_nm: ws,
                idler_fwhm_nm: wi,
                metrics: metrics::compute(engine, spec, &fs, &fi, grid)?,
            })
        })
        .collect()
}

/// Metrics with equal signal and idler bandwidths, centred on the photons.
pub fn sweep_equal_filters(
    spec: &SourceSpec,
    shape: FilterShape,
    fwhm_nm: &[f64],
    engine: Engine,
    grid: &GridConfig,
) -> Result<SweepResult> {
    spec.validate()?;
    check_engine(engine, shape)?;
    check_axis("filter FWHM", fwhm_nm)?;
    let pairs = fwhm_nm.iter().map(|&w| (w, w)).collect();
    Ok(SweepResult {
        kind: SweepKind::EqualFilters,
        engine,
        source: spec.clone(),
        filter_shape: shape,
        grid: grid.clone(),
        points: evaluate(spec, shape, pairs, engine, grid)?,
    })
}

/// Metrics over the product of signal and idler bandwidth lists.
pub fn sweep_filter_grid(
    spec: &SourceSpec,
    shape: FilterShape,
    signal_fwhm_nm: &[f64],
    idler_fwhm_nm: &[f64],
    engine: Engine,
    grid: &GridConfig,
) -> Result<SweepResult> {
    spec.validate()?;
    check_engine(engine, shape)?;
    check_axis("signal FWHM", signal_fwhm_nm)?;
    check_axis("idler FWHM", idler_fwhm_nm)?;
    let pairs = signal_fwhm_nm
        .iter()
        .flat_map(|&ws| idler_fwhm_nm.iter().map(move |&wi| (ws, wi)))
        .collect();
    Ok(SweepResult {
        kind: SweepKind::FilterGrid,
        engine,
        source: spec.clone(),
        filter_shape: shape,
        grid: grid.clone(),
        points: evaluate(spec, shape, pairs, engine, grid)?,
    })
}

/// `n` points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![start],
        _ => (0..n)
            .map(|k| start + (stop - start) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// `n` logarithmically spaced points from `start` to `stop` inclusive.
pub fn logspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    linspace(start.ln(), stop.ln(), n)
        .into_iter()
        .map(f64::exp)
        .collect()
}

/// A convex corner in an otherwise concave curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kink {
    /// Abscissa of the largest second difference inside the corner.
    pub position: f64,
    /// Smallest slope just before the corner.
    pub slope_before: f64,
    /// Largest slope just after it.
    pub slope_after: f64,
}

/// Finds the place where a rising curve's slope stops falling and rises
/// again by at least `min_rise` (relative), as happens where one filter
/// starts cutting into a sharp spectral feature.
///
/// `x` must be uniformly spaced. Returns the most pronounced such corner.
pub fn detect_kink(x: &[f64], y: &[f64], min_rise: f64) -> Option<Kink> {
    if x.len() != y.len() || x.len() < 5 {
        return None;
    }
    let slopes: Vec<f64> = x
        .windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| (ys[1] - ys[0]) / (xs[1] - xs[0]))
        .collect();
    let mut best: Option<(f64, Kink)> = None;
    let mut k = 1;
    while k + 1 < slopes.len() {
        let is_min = slopes[k] <= slopes[k - 1] && slopes[k] < slopes[k + 1];
        if !is_min {
            k += 1;
            continue;
        }
        let mut top = k + 1;
        while top + 1 < slopes.len() && slopes[top + 1] >= slopes[top] {
            top += 1;
        }
        let rise = (slopes[top] - slopes[k]) / slopes[k].abs().max(f64::MIN_POSITIVE);
        if rise >= min_rise {
            // second differences live between consecutive slopes
            let (j, _) = (k..top)
                .map(|j| (j, slopes[j + 1] - slopes[j]))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty corner");
            let kink = Kink {
                position: x[j + 1],
                slope_before: slopes[k],
                slope_after: slopes[top],
            };
            if best.is_none_or(|(r, _)| rise > r) {
                best = Some((rise, kink));
            }
        }
        k = top;
    }
    best.map(|(_, k)| k)
}
