//! Frequency-domain causal structure discovery and causal-effect estimation
//! for networks of linearly, dynamically coupled time series.
//!
//! The pipeline: simulate or load multichannel panels, transform segments to
//! the frequency domain, estimate cross-power spectral densities, compute
//! multivariate Wiener coefficients per frequency, reconstruct kin graphs,
//! skeletons, and CPDAGs from their support and phase, and estimate direct
//! and total causal effects through the single-, back-, and front-door
//! criteria evaluated per frequency bin.

pub mod bounds;
pub mod discovery;
pub mod effects;
pub mod error;
pub mod graph;
pub mod model;
pub mod simulate;
pub mod spectral;
pub mod wiener;

pub use error::{Error, Result};
pub use graph::{CausalGraph, Cpdag};
pub use model::{C64, FrequencyGrid, LdimSpec, NoisePsd, SpectralMatrixField, TransferMatrixField};
pub use simulate::{ArSpec, InterventionSpec, TimeSeriesPanel};
pub use spectral::{LagWindow, SpectralEnsemble};
pub use wiener::WienerField;
