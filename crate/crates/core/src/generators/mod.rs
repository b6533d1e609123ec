//! Synthetic data generators: a conditional tabular GAN, bootstrap and
//! independent-marginals baselines, and an adapter for synthetic CSVs
//! produced elsewhere.

mod baseline;
mod condvec;
mod ctgan;
mod external;
mod mode;
mod transform;

pub use baseline::{baseline_fit_sample, BaselineKind};
pub use condvec::{CondBlock, CondSampler, Condition};
pub use ctgan::{ctgan_fit, ctgan_sample, CtganConfig, CtganModel, IterationLog, MODEL_FORMAT, MODEL_VERSION};
pub use external::{load_external_synthetic, ExternalSynthetic};
pub use mode::{fit_mode_normalizer, ModeNormalizer};
pub use transform::{ColumnTransform, DataTransformer, Head, OutputSpan};
