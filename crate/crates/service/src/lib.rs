//! Annotation service: serves blinded A/B profile comparisons preceded by a
//! free-text elicitation, and odd-scene-out trials, recording answers in
//! append-only logs.

use std::path::{Path, PathBuf};

pub mod api;
pub mod manifest;
pub mod store;

pub use api::{
    router, serve_blocking, spawn, Ack, AnnotationItem, AppState, ChoiceSubmission,
    JudgmentSubmission, Label, NextItem, NextTrial, OddTrialView,
};
pub use manifest::{
    atomic_fragment, blinding_for, build_manifest, elicitation_prompt, presentation_order,
    scene_fragment, Annotator, Manifest, ManifestItem, SessionSpec,
};
pub use store::Store;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("{0:?} is not assigned to this session")]
    UnknownItem(String),
    #[error("{message}")]
    Validation { rule: String, message: String },
    #[error("duplicate submission: {0}")]
    Duplicate(String),
    #[error("bad request: {message}")]
    BadRequest { status: u16, message: String },
}

impl ServiceError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ServiceError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
