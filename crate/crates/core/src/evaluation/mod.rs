//! Odd-scene-out prediction, agreement statistics, significance tests and
//! preference-study reports.

mod agreement;
mod odd;
mod preference;
pub mod report;
mod stats;

pub use agreement::{full_agreement_ratio, gwet_ac1, human_accuracy, RatingsMatrix};
pub use odd::{mean_similarities, predict_odd, run_odd_eval, OddEvalResult, SceneStore, TrialRecord};
pub use preference::{
    human_agreement_report, preference_report, DimensionReport, GroupAgreement,
    HumanAgreementReport, HumanGroupResult, JudgmentError, OddChoice, OverallPreference,
    PreferenceJudgment, PreferenceReport, RatingSummary, Reason, Schema,
};
pub use stats::{binomial_test_one_sided, mann_whitney_u, midranks, MannWhitney, MwuMode};

use crate::embedding::EmbeddingError;
use crate::transport::ProviderError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no item has two or more ratings")]
    NoMultiRatedItems,
    #[error("missing scenes for instances: {}", .0.join(", "))]
    MissingScenes(Vec<String>),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

impl From<ProviderError> for EvalError {
    fn from(e: ProviderError) -> Self {
        EvalError::Embedding(EmbeddingError::Provider(e))
    }
}
