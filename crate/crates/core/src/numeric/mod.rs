//! Numerical kernels shared by the generators, classifiers and metrics.

pub mod adam;
pub mod gmm;
pub mod mlp;
pub mod neighbors;
pub mod rng;

pub use adam::{AdamConfig, AdamState};
pub use gmm::{gmm_fit, gmm_fit_1d, GmmFit, GmmModel, GmmOptions, VARIANCE_FLOOR};
pub use mlp::{softmax_rows, Activation, Dense, Forward, Loss, Mlp, MlpGrads};
pub use neighbors::{nn_search, Neighbors};
pub use rng::{seeded, RngStream, StreamRng};
