//! Low-rank separated-representation surrogates for vector-valued maps of
//! Gaussian random inputs.
//!
//! * [`hermite`]: orthonormal probabilists' Hermite basis for the factors.
//! * [`model`]: the representation, training data, and the data norm.
//! * [`als`]: alternating-least-squares fitting with rank adaptation.
//! * [`stats`]: closed-form moments, surrogate sampling, histograms, validation.
//! * [`sobol`]: first-order Sobol indices by Monte Carlo on the surrogate.

pub mod als;
pub mod error;
pub mod hermite;
pub mod model;
pub mod sampling;
pub mod sobol;
pub mod stats;

pub use als::{fit, AlsConfig, AlsState, FitReport, TerminationReason};
pub use error::{Result, SrError};
pub use hermite::BasisSpec;
pub use model::{data_norm, load_model, relative_residual, save_model, SeparatedRepresentation, TrainingSet};
pub use sobol::{factor_variability_table, sobol_indices, SobolEstimator, SobolResult};
pub use stats::{analytic_covariance, analytic_mean, histogram, sample_surrogate, validation_rms, MomentSummary};
