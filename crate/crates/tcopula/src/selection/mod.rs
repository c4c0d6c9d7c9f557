//! Model family enumeration and Bayesian model choice: evidence by
//! reciprocal importance sampling, DIC, posterior model probabilities and
//! likelihood-ratio tests.

mod enumerate;
mod evidence;
mod report;

pub use enumerate::{enumerate_models, EnumerationPolicy, ModelFamily};
pub use evidence::{
    dic, lr_test, posterior_model_probs, rise_log_evidence, EvidenceMode, ImportanceDensity,
};
pub use report::{
    run_selection, run_selection_with, ModelFailure, ModelScore, SelectionOptions,
    SelectionReport,
};
