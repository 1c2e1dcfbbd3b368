//! HTTP surface for live sessions.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use serde::{Deserialize, Serialize};
use tokio::sync::{Mutex, OwnedMutexGuard};
use tower_http::cors::CorsLayer;
use tutorkit_core::engine::{ChatProvider, Engine, ExampleIndex, Mode, TutorStep};
use tutorkit_core::{ActId, ActUtterance, Category, ContentTag, Role, Session, Taxonomy, Turn};

use crate::live::{clean_text, student_act, LiveSession, ReplayError};
use crate::store::{EventBody, EventStore, StoreError};

/// Seconds a client should wait before retrying a busy session.
pub const RETRY_AFTER_SECS: u64 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("unknown session {0}")]
    NotFound(String),
    #[error("{0}")]
    Invalid(String),
    #[error("session {0} is processing another message")]
    Busy(String),
    #[error("tutor engine failed: {0}")]
    Engine(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    retry_after_secs: Option<u64>,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Busy(_) => StatusCode::CONFLICT,
            ApiError::Engine(_) => StatusCode::BAD_GATEWAY,
            ApiError::Store(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let retry = matches!(self, ApiError::Busy(_)).then_some(RETRY_AFTER_SECS);
        let body = Json(ErrorBody {
            error: self.to_string(),
            retry_after_secs: retry,
        });
        let mut resp = (status, body).into_response();
        if let Some(secs) = retry {
            resp.headers_mut().insert(header::RETRY_AFTER, HeaderValue::from(secs));
        }
        resp
    }
}

type Handle = Arc<Mutex<LiveSession>>;

pub struct AppState {
    store: EventStore,
    provider: Arc<dyn ChatProvider>,
    taxonomy: Arc<Taxonomy>,
    index: Arc<ExampleIndex>,
    sessions: RwLock<HashMap<String, Handle>>,
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("session {id}: {source}")]
    Replay {
        id: String,
        #[source]
        source: ReplayError,
    },
}

impl AppState {
    /// Opens the store and replays every session already logged there.
    pub fn open(
        store: EventStore,
        provider: Arc<dyn ChatProvider>,
        taxonomy: Arc<Taxonomy>,
        index: Arc<ExampleIndex>,
    ) -> Result<Self, LoadError> {
        let mut sessions = HashMap::new();
        for id in store.session_ids()? {
            let live = LiveSession::replay(&store.load(&id)?)
                .map_err(|source| LoadError::Replay { id: id.clone(), source })?;
            sessions.insert(id, Arc::new(Mutex::new(live)));
        }
        Ok(AppState {
            store,
            provider,
            taxonomy,
            index,
            sessions: RwLock::new(sessions),
        })
    }

    pub fn store(&self) -> &EventStore {
        &self.store
    }

    /// Current state of a session, waiting for any in-flight turn.
    pub async fn snapshot(&self, id: &str) -> Option<LiveSession> {
        let h = self.handle(id).ok()?;
        let s = h.lock().await;
        Some(s.clone())
    }

    fn handle(&self, id: &str) -> Result<Handle, ApiError> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(id.to_string()))
    }

    fn engine(&self, mode: Mode) -> Engine {
        Engine::new(self.provider.clone(), self.taxonomy.clone(), mode).with_index(self.index.clone())
    }

    fn record(&self, live: &mut LiveSession, body: EventBody) -> Result<(), ApiError> {
        let ev = live.event(body);
        self.store.append(&ev)?;
        live.apply(&ev).expect("fresh event applies");
        Ok(())
    }

    /// Runs one tutor step and logs either the step or the failure.
    async fn tutor_turn(&self, live: &mut LiveSession) -> Result<TutorStep, ApiError> {
        let engine = self.engine(live.mode);
        let input = live.task_input();
        let result = tokio::task::spawn_blocking(move || engine.run_two_step(&input, None))
            .await
            .map_err(|e| ApiError::Engine(e.to_string()))?;
        let step = result.map_err(|e| e.to_string()).and_then(|mut step| {
            step.utterance = clean_text(&step.utterance);
            if step.utterance.is_empty() {
                Err("provider returned an empty utterance".to_string())
            } else {
                Ok(step)
            }
        });
        match step {
            Ok(step) => {
                self.record(
                    live,
                    EventBody::TutorStep {
                        act: step.act.clone(),
                        utterance: step.utterance.clone(),
                        raw_act_reply: step.raw_act_reply.clone(),
                        attempts: step.attempts,
                    },
                )?;
                Ok(step)
            }
            Err(message) => {
                tracing::warn!(session = %live.id, %message, "tutor step failed");
                self.record(
                    live,
                    EventBody::Error {
                        message: message.clone(),
                    },
                )?;
                Err(ApiError::Engine(message))
            }
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct CreateSession {
    pub content: Vec<ContentTag>,
    #[serde(default = "default_mode")]
    pub mode: String,
    /// Let the tutor speak first.
    #[serde(default = "default_opening")]
    pub opening: bool,
}

fn default_mode() -> String {
    Mode::OneShot.as_str().to_string()
}

fn default_opening() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReply {
    pub act: ActId,
    pub utterance: String,
}

impl From<TutorStep> for StepReply {
    fn from(s: TutorStep) -> Self {
        StepReply {
            act: s.act,
            utterance: s.utterance,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
    pub mode: Mode,
    pub opening: Option<StepReply>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct PostMessage {
    pub text: String,
    #[serde(default)]
    pub act: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ActListing {
    pub id: ActId,
    pub role: Role,
    pub category: Category,
    pub description: String,
    pub teaching: bool,
}

fn check_pack(taxonomy: &Taxonomy, pack: &[ContentTag]) -> Result<(), ApiError> {
    if pack.is_empty() {
        return Err(ApiError::Invalid("content pack is empty".into()));
    }
    // borrow the session validator for the tag grammar
    let probe = Session {
        id: "probe".into(),
        tutor_id: "t".into(),
        student_id: "s".into(),
        turns: vec![Turn::new(
            Role::Tutor,
            vec![ActUtterance::new(ActId::parse("t.general").expect("static id"), "x")],
        )
        .with_content(pack.to_vec())],
    };
    probe
        .validate(taxonomy)
        .map_err(|e| ApiError::Invalid(format!("content pack: {e}")))
}

async fn create_session(
    State(app): State<Arc<AppState>>,
    Json(req): Json<CreateSession>,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    let mode: Mode = req.mode.parse().map_err(ApiError::Invalid)?;
    if !mode.is_two_step() {
        return Err(ApiError::Invalid(format!(
            "mode {mode} is not available for live sessions"
        )));
    }
    check_pack(&app.taxonomy, &req.content)?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let live = LiveSession::new(id.clone(), req.content.clone(), mode, Utc::now());
    let created = crate::store::SessionEvent {
        session_id: id.clone(),
        seq: 0,
        at: live.created_at,
        body: EventBody::Created {
            content_pack: req.content,
            mode,
        },
    };
    app.store.append(&created)?;
    let handle = Arc::new(Mutex::new(live));
    // hold the lock so the opening step finishes before any message lands
    let mut guard = handle.clone().lock_owned().await;
    app.sessions
        .write()
        .expect("session map lock")
        .insert(id.clone(), handle);
    tracing::info!(session = %id, %mode, "session created");

    let (opening, error) = if req.opening {
        match app.tutor_turn(&mut guard).await {
            Ok(step) => (Some(step.into()), None),
            Err(ApiError::Engine(msg)) => (None, Some(msg)),
            Err(e) => return Err(e),
        }
    } else {
        (None, None)
    };
    Ok((
        StatusCode::CREATED,
        Json(Created {
            session_id: id,
            mode,
            opening,
            error,
        }),
    ))
}

fn try_lock(handle: Handle, id: &str) -> Result<OwnedMutexGuard<LiveSession>, ApiError> {
    handle.try_lock_owned().map_err(|_| ApiError::Busy(id.to_string()))
}

async fn post_message(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<PostMessage>,
) -> Result<Json<StepReply>, ApiError> {
    let mut live = try_lock(app.handle(&id)?, &id)?;
    let text = clean_text(&req.text);
    if text.is_empty() {
        return Err(ApiError::Invalid("message text is empty".into()));
    }
    let act = student_act(&app.taxonomy, req.act.as_deref()).map_err(ApiError::Invalid)?;
    app.record(&mut live, EventBody::StudentMessage { act, text })?;
    let step = app.tutor_turn(&mut live).await?;
    Ok(Json(step.into()))
}

async fn transcript(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let handle = app.handle(&id)?;
    let text = handle.lock().await.export();
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], text).into_response())
}

async fn acts(State(app): State<Arc<AppState>>) -> Json<Vec<ActListing>> {
    Json(
        app.taxonomy
            .iter()
            .map(|d| ActListing {
                id: d.id.clone(),
                role: d.role(),
                category: d.category,
                description: d.description.clone(),
                teaching: app.taxonomy.is_teaching(&d.id),
            })
            .collect(),
    )
}

async fn healthz() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/sessions/{id}/transcript", get(transcript))
        .route("/acts", get(acts))
        .route("/healthz", get(healthz))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Serves until the process receives ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
