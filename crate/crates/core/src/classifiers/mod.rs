//! Supervised classifiers with class-probability outputs: CART, random
//! forest, gradient-boosted trees, k-nearest neighbours, multinomial
//! logistic regression, a softmax MLP and a per-class Gaussian mixture
//! density model, plus cross-validated grid search.

mod grid;
mod model;
mod spec;
mod tree;

pub use grid::{grid_search, stratified_folds, GridSearchResult};
pub use model::{train, TrainedClassifier};
pub use spec::{
    ClassifierSpec, Family, ForestParams, GbtParams, GmmDensityParams, KnnParams, LinearParams, MlpParams, ParamGrid,
    TreeParams,
};
