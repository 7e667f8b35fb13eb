//! Route table and envelope handling.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use cbrne_core::protocol::{self, Envelope, MessageBody, MessageType};
use serde::Deserialize;

use crate::hub::Hub;
use crate::HubError;

pub const HUB_SENDER: &str = "hub";
pub const DEFAULT_RECIPIENT: &str = "console";
pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";
pub const DEFAULT_DOCUMENT_LIMIT: usize = 10;

pub fn router(hub: Arc<Hub>) -> Router {
    Router::new()
        .route("/api/missions", post(create_mission))
        .route("/api/missions/{id}", get(summary))
        .route("/api/missions/{id}/plan", get(plan))
        .route("/api/missions/{id}/advance", post(advance))
        .route("/api/missions/{id}/evidence", post(evidence))
        .route("/api/missions/{id}/beliefs", get(beliefs))
        .route("/api/missions/{id}/documents", get(documents))
        .route("/api/missions/{id}/events", get(events))
        .route("/api/missions/{id}/agents", get(agents))
        .with_state(hub)
}

fn envelope_response(status: StatusCode, recipient: &str, body: impl Into<MessageBody>) -> Response {
    let env = Envelope::new(HUB_SENDER, recipient, body);
    match protocol::encode(&env) {
        Ok(bytes) => (status, [(header::CONTENT_TYPE, "application/json")], bytes).into_response(),
        Err(e) => {
            tracing::error!(error = %e, "response failed protocol validation");
            (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response()
        }
    }
}

impl IntoResponse for HubError {
    fn into_response(self) -> Response {
        if self.status().is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        envelope_response(self.status(), DEFAULT_RECIPIENT, self.body())
    }
}

type Reply = Result<Response, HubError>;

/// A decoded request envelope of the expected type.
struct Incoming {
    sender: String,
    payload: MessageBody,
}

fn decode_request(bytes: &[u8], expected: MessageType) -> Result<Incoming, HubError> {
    let env = protocol::decode(bytes)?;
    if env.message_type != expected {
        return Err(HubError::WrongMessageType { expected, got: env.message_type });
    }
    Ok(Incoming { sender: env.sender, payload: env.payload })
}

async fn create_mission(State(hub): State<Arc<Hub>>, body: Bytes) -> Reply {
    let incoming = decode_request(&body, MessageType::MissionRequest)?;
    let MessageBody::MissionRequest(request) = incoming.payload else { unreachable!("type checked") };
    let snapshot = hub.create(request).await?;
    Ok(envelope_response(StatusCode::CREATED, &incoming.sender, snapshot))
}

async fn summary(State(hub): State<Arc<Hub>>, Path(id): Path<String>) -> Reply {
    Ok(envelope_response(StatusCode::OK, DEFAULT_RECIPIENT, hub.summary(&id).await?))
}

async fn plan(State(hub): State<Arc<Hub>>, Path(id): Path<String>) -> Reply {
    Ok(envelope_response(StatusCode::OK, DEFAULT_RECIPIENT, hub.plan(&id).await?))
}

async fn advance(State(hub): State<Arc<Hub>>, Path(id): Path<String>, body: Bytes) -> Reply {
    let incoming = decode_request(&body, MessageType::AdvanceRequest)?;
    let MessageBody::AdvanceRequest(request) = incoming.payload else { unreachable!("type checked") };
    let batch = hub.advance(&id, request.ticks).await?;
    Ok(envelope_response(StatusCode::OK, &incoming.sender, batch))
}

async fn evidence(State(hub): State<Arc<Hub>>, Path(id): Path<String>, headers: HeaderMap, body: Bytes) -> Reply {
    let key = match headers.get(IDEMPOTENCY_HEADER) {
        Some(v) => Some(
            v.to_str()
                .ok()
                .filter(|k| !k.is_empty())
                .ok_or(HubError::BadHeader(IDEMPOTENCY_HEADER))?
                .to_owned(),
        ),
        None => None,
    };
    let incoming = decode_request(&body, MessageType::EvidenceSubmission)?;
    let MessageBody::EvidenceSubmission(submission) = incoming.payload else { unreachable!("type checked") };
    let result = hub.submit_evidence(&id, submission, key).await?;
    Ok(envelope_response(StatusCode::OK, &incoming.sender, result))
}

async fn beliefs(State(hub): State<Arc<Hub>>, Path(id): Path<String>) -> Reply {
    Ok(envelope_response(StatusCode::OK, DEFAULT_RECIPIENT, hub.beliefs(&id).await?))
}

#[derive(Debug, Deserialize)]
struct LimitQuery {
    limit: Option<usize>,
}

async fn documents(State(hub): State<Arc<Hub>>, Path(id): Path<String>, Query(q): Query<LimitQuery>) -> Reply {
    let limit = q.limit.unwrap_or(DEFAULT_DOCUMENT_LIMIT);
    Ok(envelope_response(StatusCode::OK, DEFAULT_RECIPIENT, hub.documents(&id, limit).await?))
}

#[derive(Debug, Deserialize)]
struct SinceQuery {
    since: Option<u64>,
}

async fn events(State(hub): State<Arc<Hub>>, Path(id): Path<String>, Query(q): Query<SinceQuery>) -> Reply {
    let batch = hub.events(&id, q.since.unwrap_or(0)).await?;
    Ok(envelope_response(StatusCode::OK, DEFAULT_RECIPIENT, batch))
}

async fn agents(State(hub): State<Arc<Hub>>, Path(id): Path<String>) -> Reply {
    Ok(envelope_response(StatusCode::OK, DEFAULT_RECIPIENT, hub.agents(&id).await?))
}
