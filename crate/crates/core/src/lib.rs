//! Heralding efficiency, reduced-state spectral purity and symmetrized
//! single-photon fidelity of spectrally filtered photon-pair sources.
//!
//! Two engines compute the same [`FilterMetrics`]:
//!
//! * [`analytic`] evaluates the closed-form Gaussian model (Gaussian
//!   phasematching stand-in, Gaussian filters);
//! * [`numeric`] integrates and Schmidt-decomposes a discretized joint
//!   spectrum, and is the only engine for sinc phasematching and flat-top
//!   filters.
//!
//! [`optimize`] sweeps filter bandwidths and searches for the best
//! achievable fidelity per phasematching angle; [`experiment`] analyses
//! measured joint spectra and coincidence counts.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod jsa;
pub mod metrics;
pub mod numeric;
pub mod optimize;
pub mod source;
pub mod units;

pub use error::{Error, Result};
pub use grid::{FrequencyGrid, GridConfig};
pub use jsa::{apply_filters, build_jsa, JointSpectrum};
pub use metrics::{Engine, FilterMetrics};
pub use source::{FilterShape, FilterSpec, PhasematchingShape, SourceSpec};
