//! Analysis of measured joint spectral intensities and coincidence counts.
//!
//! # JSI file format
//!
//! Plain CSV. Lines starting with `#` are comments. The first row holds a
//! free-form corner label followed by the signal axis (nm detuning from the
//! signal center); every further row holds one idler detuning (nm) followed
//! by the intensities at each signal point. Intensities are counts per
//! cell and must be non-negative.
//!
//! # Counts file format
//!
//! CSV with header `label,C,S_s,S_i`: coincidences, signal singles and idler
//! singles for one filter setting per row.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsa::amplitude_fn;
use crate::numeric::{purity_from_schmidt, SchmidtSpectrum};
use crate::source::{FilterSpec, SourceSpec};
use crate::units::{angular_frequency, fwhm_per_sigma};

pub const JSI_FORMAT_VERSION: u32 = 1;

/// Joint spectral intensity on wavelength-detuning axes (nm).
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredJSI {
    signal_axis_nm: Vec<f64>,
    idler_axis_nm: Vec<f64>,
    /// Rows index the signal axis, columns the idler axis.
    intensity: DMatrix<f64>,
}

fn increasing(name: &str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::Domain(format!("{name} axis is empty")));
    }
    if axis.iter().any(|v| !v.is_finite()) || axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain(format!(
            "{name} axis must be strictly increasing"
        )));
    }
    Ok(())
}

/// Width of the cell around each axis point (half-way to its neighbours).
fn cell_widths(axis: &[f64]) -> Vec<f64> {
    let n = axis.len();
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|k| {
            let lo = if k == 0 {
                axis[0] - 0.5 * (axis[1] - axis[0])
            } else {
                0.5 * (axis[k - 1] + axis[k])
            };
            let hi = if k + 1 == n {
                axis[n - 1] + 0.5 * (axis[n - 1] - axis[n - 2])
            } else {
                0.5 * (axis[k] + axis[k + 1])
            };
            hi - lo
        })
        .collect()
}

fn uniform_step(name: &str, axis: &[f64]) -> Result<f64> {
    if axis.len() < 2 {
        return Err(Error::Domain(format!(
            "{name} axis needs at least 2 points"
        )));
    }
    let step = axis[1] - axis[0];
    if axis
        .windows(2)
        .any(|w| ((w[1] - w[0]) - step).abs() > 1e-9 * step.abs())
    {
        return Err(Error::Domain(format!(
            "{name} axis must be uniformly spaced"
        )));
    }
    Ok(step)
}

impl MeasuredJSI {
    pub fn new(
        signal_axis_nm: Vec<f64>,
        idler_axis_nm: Vec<f64>,
        intensity: DMatrix<f64>,
    ) -> Result<Self> {
        increasing("signal", &signal_axis_nm)?;
        increasing("idler", &idler_axis_nm)?;
        if intensity.shape() != (signal_axis_nm.len(), idler_axis_nm.len()) {
            return Err(Error::GridMismatch(format!(
                "intensity is {}x{} but axes are {}x{}",
                intensity.nrows(),
                intensity.ncols(),
                signal_axis_nm.len(),
                idler_axis_nm.len()
            )));
        }
        if let Some((k, v)) = intensity
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0) || !v.is_finite())
        {
            let (r, c) = (k % intensity.nrows(), k / intensity.nrows());
            return Err(Error::Domain(format!(
                "intensity at signal {} nm, idler {} nm is {v}; must be non-negative",
                signal_axis_nm[r], idler_axis_nm[c]
            )));
        }
        Ok(MeasuredJSI {
            signal_axis_nm,
            idler_axis_nm,
            intensity,
        })
    }

    pub fn signal_axis_nm(&self) -> &[f64] {
        &self.signal_axis_nm
    }

    pub fn idler_axis_nm(&self) -> &[f64] {
        &self.idler_axis_nm
    }

    pub fn intensity(&self) -> &DMatrix<f64> {
        &self.intensity
    }

    pub fn total(&self) -> f64 {
        self.intensity.sum()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.signal_axis_nm.clone(),
            self.idler_axis_nm.clone(),
            &self.intensity * factor,
        )
    }

    /// Signal and idler exchanged.
    pub fn transposed(&self) -> Self {
        MeasuredJSI {
            signal_axis_nm: self.idler_axis_nm.clone(),
            idler_axis_nm: self.signal_axis_nm.clone(),
            intensity: self.intensity.transpose(),
        }
    }

    /// Pearson correlation between signal and idler detuning, weighted by
    /// intensity. Negative for an anti-diagonal ridge.
    pub fn correlation_coefficient(&self) -> Result<f64> {
        let total = self.total();
        if !(total > 0.0) {
            return Err(Error::ZeroMass);
        }
        let (mut ms, mut mi) = (0.0, 0.0);
        for ((r, c), v) in self.cells() {
            ms += v * self.signal_axis_nm[r] / total;
            mi += v * self.idler_axis_nm[c] / total;
        }
        let (mut vs, mut vi, mut cov) = (0.0, 0.0, 0.0);
        for ((r, c), v) in self.cells() {
            let (ds, di) = (self.signal_axis_nm[r] - ms, self.idler_axis_nm[c] - mi);
            vs += v * ds * ds;
            vi += v * di * di;
            cov += v * ds * di;
        }
        Ok(cov / (vs * vi).sqrt())
    }

    fn cells(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        let n = self.intensity.nrows();
        self.intensity
            .iter()
            .enumerate()
            .map(move |(k, v)| ((k % n, k / n), *v))
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# pairspec-jsi-csv v{JSI_FORMAT_VERSION}\nidler_nm\\signal_nm");
        for s in &self.signal_axis_nm {
            out.push_str(&format!(",{s}"));
        }
        out.push('\n');
        for (c, i) in self.idler_axis_nm.iter().enumerate() {
            out.push_str(&i.to_string());
            for r in 0..self.signal_axis_nm.len() {
                out.push_str(&format!(",{}", self.intensity[(r, c)]));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Parses the JSI CSV format. `origin` names the source in error messages.
pub fn parse_jsi(text: &str, origin: &str) -> Result<MeasuredJSI> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };
    let mut rows = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (header_line, header) = rows.next().ok_or_else(|| err(1, "no header row".into()))?;
    let number = |line: usize, field: &str, what: &str| -> Result<f64> {
        field
            .trim()
            .parse::<f64>()
            .map_err(|_| err(line, format!("{what} {field:?} is not a number")))
    };
    let signal_axis: Vec<f64> = header
        .split(',')
        .skip(1)
        .map(|f| number(header_line, f, "signal axis value"))
        .collect::<Result<_>>()?;
    if signal_axis.is_empty() {
        return Err(err(header_line, "header has no signal axis values".into()));
    }
    if signal_axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(err(
            header_line,
            "signal axis must be strictly increasing".into(),
        ));
    }

    let mut idler_axis = Vec::new();
    let mut columns: Vec<f64> = Vec::new();
    for (line, row) in rows {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != signal_axis.len() + 1 {
            return Err(err(
                line,
                format!(
                    "expected {} fields, found {}",
                    signal_axis.len() + 1,
                    fields.len()
                ),
            ));
        }
        let idler = number(line, fields[0], "idler axis value")?;
        if idler_axis.last().is_some_and(|last| idler <= *last) {
            return Err(err(line, "idler axis must be strictly increasing".into()));
        }
        for (k, f) in fields[1..].iter().enumerate() {
            let v = number(line, f, "intensity")?;
            if !(v >= 0.0) {
                return Err(err(
                    line,
                    format!(
                        "negative intensity {v} at signal {} nm, idler {idler} nm (column {})",
                        signal_axis[k],
                        k + 2
                    ),
                ));
            }
            columns.push(v);
        }
        idler_axis.push(idler);
    }
    if idler_axis.is_empty() {
        return Err(err(header_line, "no intensity rows".into()));
    }
    // file rows are idler points: column-major for a [signal, idler] matrix
    let intensity = DMatrix::from_vec(signal_axis.len(), idler_axis.len(), columns);
    MeasuredJSI::new(signal_axis, idler_axis, intensity)
}

pub fn load_jsi(path: &Path) -> Result<MeasuredJSI> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_jsi(&text, &path.display().to_string())
}

/// Normalized Gaussian kernel sampled at multiples of `step`, cut at 4σ.
fn gaussian_kernel(sigma: f64, step: f64) -> Vec<f64> {
    let reach = (4.0 * sigma / step).ceil() as usize;
    let w: Vec<f64> = (0..=2 * reach)
        .map(|k| {
            let d = (k as f64 - reach as f64) * step;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Spreads every cell of `data` along one axis with `kernel`. Weights that
/// would leave the grid are dropped and the rest rescaled, so each cell's
/// intensity is conserved.
fn blur_along(data: &DMatrix<f64>, kernel: &[f64], along_rows: bool) -> DMatrix<f64> {
    let reach = kernel.len() / 2;
    let (nr, nc) = data.shape();
    let n = if along_rows { nr } else { nc };
    let mut out = DMatrix::zeros(nr, nc);
    for src in 0..n {
        let lo = src.saturating_sub(reach);
        let hi = (src + reach).min(n - 1);
        let kept: f64 = (lo..=hi).map(|t| kernel[t + reach - src]).sum();
        for t in lo..=hi {
            let w = kernel[t + reach - src] / kept;
            if along_rows {
                for c in 0..nc {
                    out[(t, c)] += w * data[(src, c)];
                }
            } else {
                for r in 0..nr {
                    out[(r, t)] += w * data[(r, src)];
                }
            }
        }
    }
    out
}

/// Blurs both axes with a Gaussian of FWHM `jitter_fwhm_ps / dispersion`
/// (nm), the spectral smear of timing jitter in a dispersive spectrometer.
pub fn apply_jitter(
    jsi: &MeasuredJSI,
    jitter_fwhm_ps: f64,
    dispersion_ps_per_nm: f64,
) -> Result<MeasuredJSI> {
    if !(jitter_fwhm_ps > 0.0) || !(dispersion_ps_per_nm > 0.0) {
        return Err(Error::Domain(format!(
            "jitter ({jitter_fwhm_ps} ps) and dispersion ({dispersion_ps_per_nm} ps/nm) must be positive"
        )));
    }
    let fwhm_nm = jitter_fwhm_ps / dispersion_ps_per_nm;
    let sigma = fwhm_nm / fwhm_per_sigma();
    let mut data = jsi.intensity.clone();
    for (name, axis, along_rows) in [
        ("signal", &jsi.signal_axis_nm, true),
        ("idler", &jsi.idler_axis_nm, false),
    ] {
        let step = uniform_step(name, axis)?;
        let span = step * axis.len() as f64;
        if fwhm_nm > span {
            return Err(Error::Domain(format!(
                "jitter kernel FWHM {fwhm_nm} nm exceeds the {name} span of {span} nm"
            )));
        }
        data = blur_along(&data, &gaussian_kernel(sigma, step), along_rows);
    }
    MeasuredJSI::new(jsi.signal_axis_nm.clone(), jsi.idler_axis_nm.clone(), data)
}

/// Fraction of each cell inside `[-half, half]`.
fn window_weights(axis: &[f64], half: f64) -> Vec<f64> {
    let widths = cell_widths(axis);
    axis.iter()
        .zip(&widths)
        .map(|(x, w)| {
            let (a, b) = (x - 0.5 * w, x + 0.5 * w);
            ((b.min(half) - a.max(-half)).max(0.0) / w).min(1.0)
        })
        .collect()
}

/// Zeroes intensity outside a rectangle centred on zero detuning, with
/// fractional weight for partly covered edge cells. No renormalization.
pub fn time_filter(jsi: &MeasuredJSI, window_nm_s: f64, window_nm_i: f64) -> Result<MeasuredJSI> {
    let min_cell = |axis: &[f64]| cell_widths(axis).into_iter().fold(f64::INFINITY, f64::min);
    for (name, window, axis) in [
        ("signal", window_nm_s, &jsi.signal_axis_nm),
        ("idler", window_nm_i, &jsi.idler_axis_nm),
    ] {
        if !(window > 0.0) {
            return Err(Error::Domain(format!(
                "{name} window must be positive, got {window}"
            )));
        }
        if window < min_cell(axis) {
            return Err(Error::Domain(format!(
                "{name} window {window} nm is narrower than one cell"
            )));
        }
    }
    let ws = window_weights(&jsi.signal_axis_nm, 0.5 * window_nm_s);
    let wi = window_weights(&jsi.idler_axis_nm, 0.5 * window_nm_i);
    let data = DMatrix::from_fn(ws.len(), wi.len(), |r, c| {
        jsi.intensity[(r, c)] * ws[r] * wi[c]
    });
    MeasuredJSI::new(jsi.signal_axis_nm.clone(), jsi.idler_axis_nm.clone(), data)
}

/// Purity of the flat-phase state with amplitude `sqrt(intensity)`.
pub fn purity_from_jsi(jsi: &MeasuredJSI) -> Result<f64> {
    if !(jsi.total() > 0.0) {
        return Err(Error::ZeroMass);
    }
    // counts per cell already carry the cell area, so sqrt(counts) is the
    // quadrature-weighted amplitude
    let amp = jsi.intensity.map(f64::sqrt);
    let values = amp.singular_values().iter().copied().collect();
    Ok(purity_from_schmidt(&SchmidtSpectrum::from_values(values)?))
}

/// Expected counts per cell for a source and filters, on wavelength
/// detuning axes around the photon centers.
///
/// Each value is `|f|²` times the cell's frequency area, so the result is
/// what a spectrometer binned in wavelength would record (up to a scale).
pub fn synthetic_jsi(
    spec: &SourceSpec,
    signal_filter: &FilterSpec,
    idler_filter: &FilterSpec,
    signal_axis_nm: Vec<f64>,
    idler_axis_nm: Vec<f64>,
) -> Result<MeasuredJSI> {
    increasing("signal", &signal_axis_nm)?;
    increasing("idler", &idler_axis_nm)?;
    let f = amplitude_fn(spec)?;
    let detunings = |center_nm: f64, axis: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        let w0 = angular_frequency(center_nm)?;
        let widths = cell_widths(axis);
        let mut det = Vec::with_capacity(axis.len());
        let mut area = Vec::with_capacity(axis.len());
        for (x, w) in axis.iter().zip(widths) {
            let lam = center_nm + x;
            let hi = angular_frequency(lam - 0.5 * w)?;
            let lo = angular_frequency(lam + 0.5 * w)?;
            det.push(angular_frequency(lam)? - w0);
            area.push(hi - lo);
        }
        Ok((det, area))
    };
    let (ds, as_) = detunings(spec.signal_center_wavelength_nm, &signal_axis_nm)?;
    let (di, ai) = detunings(spec.idler_center_wavelength_nm, &idler_axis_nm)?;
    let ts = transmission_at(signal_filter, &ds, spec.signal_center_omega()?)?;
    let ti = transmission_at(idler_filter, &di, spec.idler_center_omega()?)?;
    let data = DMatrix::from_fn(ds.len(), di.len(), |r, c| {
        (f(ds[r], di[c]) * ts[r] * ti[c]).powi(2) * as_[r] * ai[c]
    });
    let peak = data.max();
    let data = if peak > 0.0 { data / peak } else { data };
    MeasuredJSI::new(signal_axis_nm, idler_axis_nm, data)
}

/// Pointwise filter amplitude (no cell averaging; the axes need not be uniform).
fn transmission_at(filter: &FilterSpec, detunings: &[f64], photon_omega: f64) -> Result<Vec<f64>> {
    let Some(center) = filter.center_omega()? else {
        return Ok(vec![1.0; detunings.len()]);
    };
    detunings
        .iter()
        .map(|d| filter.amplitude_at_offset(photon_omega + d - center))
        .collect()
}

/// Coincidences and singles recorded at one filter setting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRecord {
    pub label: String,
    #[serde(rename = "C")]
    pub coincidences: u64,
    #[serde(rename = "S_s")]
    pub singles_s: u64,
    #[serde(rename = "S_i")]
    pub singles_i: u64,
}

impl CountRecord {
    pub fn new(
        label: impl Into<String>,
        coincidences: u64,
        singles_s: u64,
        singles_i: u64,
    ) -> Result<Self> {
        let rec = CountRecord {
            label: label.into(),
            coincidences,
            singles_s,
            singles_i,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.coincidences > self.singles_s.min(self.singles_i) {
            return Err(Error::Domain(format!(
                "record {:?}: {} coincidences exceed singles ({}, {})",
                self.label, self.coincidences, self.singles_s, self.singles_i
            )));
        }
        Ok(())
    }
}

pub fn load_counts(path: &Path) -> Result<Vec<CountRecord>> {
    let origin = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Parse {
                path: origin.clone(),
                line: 0,
                message: format!("{other:?}"),
            },
        })?;
    let mut out = Vec::new();
    for row in reader.deserialize::<CountRecord>() {
        let rec = row.map_err(|e| Error::Parse {
            path: origin.clone(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        rec.validate().map_err(|e| Error::Parse {
            path: origin.clone(),
            line: out.len() + 2,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// A ratio with its 1σ Poisson error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

/// Klyshko heralding efficiencies of one record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Klyshko {
    /// `C / S_i`: signal detected given an idler.
    pub eta_s: Estimate,
    /// `C / S_s`.
    pub eta_i: Estimate,
}

fn ratio(c: u64, s: u64) -> Estimate {
    let (c, s) = (c as f64, s as f64);
    Estimate {
        value: c / s,
        sigma: (c / (s * s) + c * c / (s * s * s)).sqrt(),
    }
}

pub fn klyshko(rec: &CountRecord) -> Result<Klyshko> {
    rec.validate()?;
    if rec.singles_s == 0 || rec.singles_i == 0 {
        return Err(Error::UndefinedEfficiency(format!(
            "record {:?} has zero singles",
            rec.label
        )));
    }
    Ok(Klyshko {
        eta_s: ratio(rec.coincidences, rec.singles_i),
        eta_i: ratio(rec.coincidences, rec.singles_s),
    })
}

fn divide(a: Estimate, b: Estimate) -> Estimate {
    let value = a.value / b.value;
    let rel_a = if a.value > 0.0 {
        a.sigma / a.value
    } else {
        0.0
    };
    let rel_b = b.sigma / b.value;
    // a zero numerator keeps its own absolute error
    let sigma = if a.value > 0.0 {
        value * (rel_a * rel_a + rel_b * rel_b).sqrt()
    } else {
        a.sigma / b.value
    };
    Estimate { value, sigma }
}

/// Filter heralding efficiencies: Klyshko efficiencies of `rec` divided by
/// those of a reference taken with the widest (or no) filters. Not clamped.
pub fn filter_heralding_from_counts(rec: &CountRecord, reference: &CountRecord) -> Result<Klyshko> {
    let k = klyshko(rec)?;
    let r = klyshko(reference)?;
    if !(r.eta_s.value > 0.0 && r.eta_i.value > 0.0) {
        return Err(Error::UndefinedEfficiency(format!(
            "reference {:?} has zero coincidences",
            reference.label
        )));
    }
    Ok(Klyshko {
        eta_s: divide(k.eta_s, r.eta_s),
        eta_i: divide(k.eta_i, r.eta_i),
    })
}

/// Poisson count generator for a source with given filter probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSource {
    /// Mean number of generated pairs per record.
    pub mean_pairs: f64,
    /// Detection efficiency of each arm without its filter.
    pub detection_s: f64,
    pub detection_i: f64,
}

impl SyntheticSource {
    /// Draws one record given `Γ_both`, `Γ_s` and `Γ_i`.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        label: impl Into<String>,
        gamma_both: f64,
        gamma_s: f64,
        gamma_i: f64,
        rng: &mut R,
    ) -> Result<CountRecord> {
        let mean_c = self.mean_pairs * gamma_both * self.detection_s * self.detection_i;
        let mean_s = self.mean_pairs * gamma_s * self.detection_s;
        let mean_i = self.mean_pairs * gamma_i * self.detection_i;
        if !(mean_c <= mean_s.min(mean_i) * (1.0 + 1e-12)) {
            return Err(Error::Domain(
                "coincidence rate exceeds a singles rate".into(),
            ));
        }
        let mut draw = |mean: f64| -> Result<u64> {
            if mean <= 0.0 {
                return Ok(0);
            }
            let d = Poisson::new(mean).map_err(|e| Error::Domain(e.to_string()))?;
            Ok(d.sample(rng) as u64)
        };
        let c = draw(mean_c)?;
        let only_s = draw((mean_s - mean_c).max(0.0))?;
        let only_i = draw((mean_i - mean_c).max(0.0))?;
        CountRecord::new(label, c, c + only_s, c + only_i)
    }
}

/// Per-setting result in an analysis report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingReport {
    pub label: String,
    pub klyshko: Klyshko,
    pub filter_heralding: Klyshko,
}

/// Filter heralding efficiencies of every record relative to `reference`.
pub fn analyze_counts(
    records: &[CountRecord],
    reference: &CountRecord,
) -> Result<Vec<SettingReport>> {
    records
        .iter()
        .map(|rec| {
            Ok(SettingReport {
                label: rec.label.clone(),
                klyshko: klyshko(rec)?,
                filter_heralding: filter_heralding_from_counts(rec, reference)?,
            })
        })
        .collect()
}
