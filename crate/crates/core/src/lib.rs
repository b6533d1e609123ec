//! Synthetic tabular data generation and evaluation.
//!
//! The crate is organised bottom-up:
//!
//! - [`tabular`]: schema-aware datasets, CSV I/O and preprocessing.
//! - [`numeric`]: dense networks with exact gradients, Adam, diagonal
//!   Gaussian mixtures, seeded RNG streams and exact neighbour search.
//! - [`generators`]: a conditional tabular GAN, resampling baselines and an
//!   adapter for externally produced synthetic data.
//! - [`classifiers`]: trees, forests, boosting, kNN, logistic regression,
//!   MLP and GMM-density classifiers with grid search.
//! - [`metrics`]: resemblance, fidelity, detection, out-of-distribution
//!   utility, the composite integrity score and classification scores.
//! - [`harness`]: the end-to-end benchmark, utility experiments, t-SNE
//!   projection and report emission.

pub mod classifiers;
pub mod error;
pub mod generators;
pub mod harness;
pub mod metrics;
pub mod numeric;
pub mod tabular;

pub use error::{Error, Result};
