//! Margin-adapted dimension `k_γ`, shattering certificates, and margin-error
//! minimization for large-margin learning over sub-Gaussian distributions.

// `!(x > 0.0)` is used on purpose throughout to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod experiments;
pub mod gram;
pub mod io;
pub mod linalg;
pub mod mem;
pub mod rng;
pub mod shattering;
pub mod spectra;
pub mod stats;
pub mod subgauss;

pub use error::{Error, Result};
pub use linalg::{LabeledSample, LinearClassifier, SampleMatrix};
pub use mem::{Algorithm, ErrorCount, LearnerReport, MemConfig};
pub use shattering::ShatterCertificate;
pub use spectra::{CovarianceSpectrum, MarginParams};
pub use subgauss::{Distribution, Marginal, ProductDistributionSpec, Twin, TwinDistributionSpec};
