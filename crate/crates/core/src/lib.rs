//! Direct sampling of nonclassicality quasiprobabilities `P_Omega(alpha)`
//! from balanced-homodyne quadrature data.
//!
//! The pipeline is: quadrature samples ([`gaussian_sim`], [`dataset_io`]) →
//! filter `Omega_w` ([`filter`]) → pattern kernel `chi(xi; w)` ([`pattern`]) →
//! sample means with standard errors and the significance `Sigma(w)`
//! ([`estimator`]). [`oracle`] evaluates the same quantities for Gaussian
//! states by direct quadrature of the defining Fourier integral.

pub mod dataset_io;
pub mod error;
pub mod estimator;
pub mod filter;
pub mod gaussian_sim;
pub mod manifest;
pub mod oracle;
pub mod pattern;
pub mod quadrature;
pub mod reduce;

pub use error::{Error, Result};
pub use estimator::{GridSpec, PointEstimate, QuasiprobGrid, WidthScanResult};
pub use filter::FilterProfile;
pub use gaussian_sim::{GaussianStateSpec, PhaseGrid, QuadratureDataset, Sample, Source};
pub use num_complex::Complex64;
pub use oracle::{Oracle, OracleConfig};
pub use pattern::{ChiLookup, ChiTable, Kernel, PatternKernel};
