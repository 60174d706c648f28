use std::collections::{BTreeMap, BTreeSet};
use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use scene_forge::datasets::OddOneOutTrial;
use scene_forge::evaluation::{JudgmentError, OddChoice, PreferenceJudgment, Reason};
use scene_forge::generation::{HIGHLIGHT_CLOSE, HIGHLIGHT_OPEN};
use scene_forge::scene::UsageInstance;
use scene_forge::Dimension;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

use crate::manifest::{blinding_for, elicitation_prompt, presentation_order, Manifest, ManifestItem, SessionSpec};
use crate::store::Store;
use crate::ServiceError;

/// Neutral profile labels shown to annotators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    A,
    B,
}

/// What the client sees for one comparison. Carries no schema identity
/// and no gold label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationItem {
    pub item_id: String,
    pub instance: UsageInstance,
    pub keyword: String,
    /// Sentence with the target wrapped in `**`.
    pub highlighted_sentence: String,
    pub dimension: Dimension,
    pub elicitation_prompt: String,
    pub profile_a_text: String,
    pub profile_b_text: String,
    /// 1-based.
    pub position: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NextItem {
    Item(Box<AnnotationItem>),
    Done { total: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentSubmission {
    pub item_id: String,
    pub elicitation_text: String,
    pub preferred: Label,
    pub rating: u8,
    #[serde(default)]
    pub reasons: BTreeSet<Reason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub other_text: Option<String>,
}

/// Odd-scene-out trial without gold information.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OddTrialView {
    pub trial_id: String,
    pub keyword: String,
    pub sentences: Vec<String>,
    pub position: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NextTrial {
    Trial(OddTrialView),
    Done { total: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceSubmission {
    pub trial_id: String,
    pub choice: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub accepted: bool,
    pub remaining: usize,
}

pub struct AppState {
    manifest: Manifest,
    items: BTreeMap<String, ManifestItem>,
    trials: BTreeMap<String, OddOneOutTrial>,
    store: RwLock<Store>,
}

impl AppState {
    pub fn new(manifest: Manifest, store: Store) -> Result<Self, ServiceError> {
        manifest.check()?;
        let items = manifest.items.iter().map(|i| (i.item_id.clone(), i.clone())).collect();
        let trials = manifest.trials.iter().map(|t| (t.trial_id.clone(), t.clone())).collect();
        Ok(Self {
            manifest,
            items,
            trials,
            store: RwLock::new(store),
        })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn judgments(&self) -> Vec<PreferenceJudgment> {
        self.read().judgments().to_vec()
    }

    pub fn choices(&self) -> Vec<OddChoice> {
        self.read().choices().to_vec()
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, Store> {
        self.store.read().unwrap_or_else(|e| e.into_inner())
    }

    fn session(&self, id: &str) -> Result<&SessionSpec, ServiceError> {
        self.manifest
            .session(id)
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    pub fn next_item(&self, session_id: &str) -> Result<NextItem, ServiceError> {
        let s = self.session(session_id)?;
        let seed = self.manifest.session_seed(s);
        let order = presentation_order(seed, &s.items);
        let store = self.read();
        let Some((idx, id)) = order
            .iter()
            .enumerate()
            .find(|(_, id)| !store.has_judgment(&s.annotator_id, id))
        else {
            return Ok(NextItem::Done { total: order.len() });
        };
        let item = &self.items[id];
        let (a, b) = match blinding_for(seed, id) {
            scene_forge::evaluation::Schema::Scene => (&item.scene_text, &item.atomic_text),
            scene_forge::evaluation::Schema::Atomic => (&item.atomic_text, &item.scene_text),
        };
        Ok(NextItem::Item(Box::new(AnnotationItem {
            item_id: id.clone(),
            keyword: item.instance.keyword_lemma.clone(),
            highlighted_sentence: item.instance.highlighted(HIGHLIGHT_OPEN, HIGHLIGHT_CLOSE),
            instance: UsageInstance {
                gold_scene_type: None,
                ..item.instance.clone()
            },
            dimension: item.dimension,
            elicitation_prompt: elicitation_prompt(item.dimension, &item.instance.keyword_lemma),
            profile_a_text: a.clone(),
            profile_b_text: b.clone(),
            position: idx + 1,
            total: order.len(),
        })))
    }

    pub fn submit_judgment(&self, session_id: &str, sub: JudgmentSubmission) -> Result<Ack, ServiceError> {
        let s = self.session(session_id)?;
        if !s.items.contains(&sub.item_id) {
            return Err(ServiceError::UnknownItem(sub.item_id));
        }
        let item = &self.items[&sub.item_id];
        let blinding = blinding_for(self.manifest.session_seed(s), &sub.item_id);
        let judgment = PreferenceJudgment {
            item_id: sub.item_id,
            dimension: item.dimension,
            annotator_id: s.annotator_id.clone(),
            preferred: match sub.preferred {
                Label::A => blinding,
                Label::B => blinding.other(),
            },
            rating: sub.rating,
            reasons: sub.reasons,
            other_text: sub.other_text.filter(|t| !t.trim().is_empty()),
            elicitation_text: sub.elicitation_text,
            blinding,
        };
        judgment.validate()?;
        let mut store = self.store.write().unwrap_or_else(|e| e.into_inner());
        store.append_judgment(judgment)?;
        let remaining = s
            .items
            .iter()
            .filter(|id| !store.has_judgment(&s.annotator_id, id))
            .count();
        Ok(Ack {
            accepted: true,
            remaining,
        })
    }

    fn trial_seed(&self, s: &SessionSpec) -> u64 {
        self.manifest.session_seed(s) ^ 0x9e37_79b9_7f4a_7c15
    }

    pub fn next_trial(&self, session_id: &str) -> Result<NextTrial, ServiceError> {
        let s = self.session(session_id)?;
        let order = presentation_order(self.trial_seed(s), &s.trials);
        let store = self.read();
        let Some((idx, id)) = order
            .iter()
            .enumerate()
            .find(|(_, id)| !store.has_choice(&s.annotator_id, id))
        else {
            return Ok(NextTrial::Done { total: order.len() });
        };
        let trial = &self.trials[id];
        Ok(NextTrial::Trial(OddTrialView {
            trial_id: id.clone(),
            keyword: trial.keyword.clone(),
            sentences: trial
                .candidates
                .iter()
                .map(|c| c.highlighted(HIGHLIGHT_OPEN, HIGHLIGHT_CLOSE))
                .collect(),
            position: idx + 1,
            total: order.len(),
        }))
    }

    pub fn submit_choice(&self, session_id: &str, sub: ChoiceSubmission) -> Result<Ack, ServiceError> {
        let s = self.session(session_id)?;
        if !s.trials.contains(&sub.trial_id) {
            return Err(ServiceError::UnknownItem(sub.trial_id));
        }
        let n = self.trials[&sub.trial_id].candidates.len();
        if sub.choice >= n {
            return Err(ServiceError::Validation {
                rule: "choice_range".into(),
                message: format!("choice {} is outside 0..{}", sub.choice, n - 1),
            });
        }
        let mut store = self.store.write().unwrap_or_else(|e| e.into_inner());
        store.append_choice(OddChoice {
            trial_id: sub.trial_id,
            annotator_id: s.annotator_id.clone(),
            choice: sub.choice,
        })?;
        let remaining = s
            .trials
            .iter()
            .filter(|id| !store.has_choice(&s.annotator_id, id))
            .count();
        Ok(Ack {
            accepted: true,
            remaining,
        })
    }

    /// Forces a snapshot, e.g. on shutdown.
    pub fn snapshot(&self) -> Result<(), ServiceError> {
        self.store.write().unwrap_or_else(|e| e.into_inner()).snapshot()
    }
}

impl From<JudgmentError> for ServiceError {
    fn from(e: JudgmentError) -> Self {
        let rule = match e {
            JudgmentError::MissingElicitation => "elicitation_required",
            JudgmentError::RatingOutOfRange(_) => "rating_range",
            JudgmentError::ReasonsRequired => "reasons_required",
            JudgmentError::ReasonsNotAllowed => "reasons_only_below_5",
            JudgmentError::NotApplicableOutsideEmotions => "not_applicable_emotions_only",
        };
        ServiceError::Validation {
            rule: rule.into(),
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::UnknownSession(_) | ServiceError::UnknownItem(_) => StatusCode::NOT_FOUND,
            ServiceError::Validation { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Duplicate(_) => StatusCode::CONFLICT,
            ServiceError::BadRequest { status, .. } => {
                StatusCode::from_u16(*status).unwrap_or(StatusCode::BAD_REQUEST)
            }
            ServiceError::Io { .. } | ServiceError::Manifest(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = match &self {
            ServiceError::Validation { rule, message } => json!({ "error": message, "rule": rule }),
            other => json!({ "error": other.to_string() }),
        };
        (status, Json(body)).into_response()
    }
}

type Shared = Arc<AppState>;

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ServiceError> {
    payload.map(|Json(v)| v).map_err(|r| ServiceError::BadRequest {
        status: r.status().as_u16(),
        message: r.body_text(),
    })
}

async fn health(State(state): State<Shared>) -> Json<serde_json::Value> {
    let store = state.read();
    Json(json!({
        "status": "ok",
        "sessions": state.manifest.sessions.len(),
        "judgments": store.judgments().len(),
        "choices": store.choices().len(),
    }))
}

async fn next_item(State(state): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Json<NextItem>, ServiceError> {
    state.next_item(&id).map(Json)
}

async fn judgment(
    State(state): State<Shared>,
    UrlPath(id): UrlPath<String>,
    payload: Result<Json<JudgmentSubmission>, JsonRejection>,
) -> Result<Json<Ack>, ServiceError> {
    state.submit_judgment(&id, body(payload)?).map(Json)
}

async fn next_trial(State(state): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Json<NextTrial>, ServiceError> {
    state.next_trial(&id).map(Json)
}

async fn choice(
    State(state): State<Shared>,
    UrlPath(id): UrlPath<String>,
    payload: Result<Json<ChoiceSubmission>, JsonRejection>,
) -> Result<Json<Ack>, ServiceError> {
    state.submit_choice(&id, body(payload)?).map(Json)
}

/// API routes, plus static files from `static_dir` for everything else.
pub fn router(state: Shared, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/session/{id}/next", get(next_item))
        .route("/api/session/{id}/judgment", post(judgment))
        .route("/api/session/{id}/odd/next", get(next_trial))
        .route("/api/session/{id}/odd/choice", post(choice))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves until the process exits.
pub fn serve_blocking(addr: SocketAddr, app: Router) -> std::io::Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        axum::serve(listener, app).await
    })
}

/// Binds `addr` (port 0 picks a free port) and serves on a background
/// thread. Returns the bound address once the listener is ready.
pub fn spawn(addr: SocketAddr, app: Router) -> std::io::Result<SocketAddr> {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()?;
    let listener = rt.block_on(tokio::net::TcpListener::bind(addr))?;
    let bound = listener.local_addr()?;
    std::thread::spawn(move || {
        rt.block_on(async move {
            let _ = axum::serve(listener, app).await;
        })
    });
    Ok(bound)
}
