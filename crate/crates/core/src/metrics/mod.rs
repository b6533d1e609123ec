//! Evaluation metrics: marginal resemblance, fidelity, classifier-based
//! detection and utility, the composite integrity score and classification
//! scores.

mod classification;
mod fidelity;
mod resemblance;
mod special;
mod utility;

pub use classification::{accuracy, aucroc, aucroc_binary, aucroc_detail, f1_weighted, AucDetail};
pub use fidelity::{
    alpha_precision, authenticity, beta_recall, default_grid, quality, shared_encoding, FidelityReport,
    CATEGORY_WEIGHT,
};
pub use resemblance::{
    chi2_pvalue, chi2_test, jsd_categorical, resemblance_report, wasserstein_1d, CategoricalResemblance,
    Chi2Result, ContinuousResemblance, ResemblanceReport,
};
pub use special::{chi2_survival, gamma_p, gamma_q, ln_gamma};
pub use utility::{
    detection, ood_aucroc, prepare_task, sdis, ClassifierScore, DetectionReport, OodReport, Task, UtilityScores,
    DETECTION_FAMILIES, MIN_DETECTION_ROWS, OOD_FAMILIES,
};
