//! Mixtures of principal subspace analyzers.
//!
//! Gaussian mixture models whose component covariances have piecewise-constant
//! eigenvalue profiles. The eigenvalue multiplicities of each component (its
//! [`Composition`]) are either fixed ([`em_fit`]) or learned jointly with the
//! parameters by a componentwise penalized EM ([`cpem_fit`]) whose penalized
//! log-likelihood never decreases.

pub mod datagen;
pub mod denoise;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod mixture;
pub mod psa;

pub use error::{Error, Result};
pub use linalg::{Matrix, SpectralDecomposition};
pub use mixture::{
    cpem_fit, em_fit, Alpha, FitConfig, FitTrace, MpsaModel, PsaComponent, Responsibilities, Strategy,
};
pub use psa::{Composition, PsaEstimate};
