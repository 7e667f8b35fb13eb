//! HTTP hub: creates missions, advances them, accepts commander evidence and
//! serves beliefs, rankings and the event feed. Every request and response
//! body is a protocol envelope. Missions persist as JSON-lines logs and are
//! rebuilt by replay when the hub starts.

pub mod api;
pub mod config;
pub mod hub;
pub mod store;

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::http::StatusCode;
use cbrne_core::mission::MissionError;
use cbrne_core::protocol::messages::ErrorBody;
use cbrne_core::protocol::{MessageType, ProtocolError};
use thiserror::Error;
use tokio::net::TcpListener;

pub use api::router;
pub use config::HubConfig;
pub use hub::Hub;

#[derive(Debug, Error)]
pub enum HubError {
    #[error("config: {0}")]
    Config(String),
    #[error("storage: {0}")]
    Storage(String),
    #[error("server: {0}")]
    Server(String),
    #[error("cannot bind {addr}: {reason}")]
    Bind { addr: SocketAddr, reason: String },
    #[error("no mission {0}")]
    NotFound(String),
    #[error("mission {0} already exists")]
    MissionExists(String),
    #[error("no scenario named {0}")]
    UnknownScenario(String),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("{0}")]
    Protocol(#[from] ProtocolError),
    #[error("expected a {expected} message, got {got}")]
    WrongMessageType { expected: MessageType, got: MessageType },
    #[error("malformed {0} header")]
    BadHeader(&'static str),
    #[error(transparent)]
    Mission(#[from] MissionError),
}

impl HubError {
    pub fn status(&self) -> StatusCode {
        match self {
            HubError::NotFound(_) => StatusCode::NOT_FOUND,
            HubError::MissionExists(_) => StatusCode::CONFLICT,
            HubError::Mission(e) if e.is_conflict() => StatusCode::CONFLICT,
            HubError::Mission(MissionError::ReplayDivergence(_)) => StatusCode::INTERNAL_SERVER_ERROR,
            HubError::Mission(_) | HubError::UnknownScenario(_) | HubError::WrongMessageType { .. } => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            HubError::Protocol(ProtocolError::Parse(_)) | HubError::BadHeader(_) => StatusCode::BAD_REQUEST,
            HubError::Protocol(_) => StatusCode::UNPROCESSABLE_ENTITY,
            HubError::Config(_)
            | HubError::Storage(_)
            | HubError::Server(_)
            | HubError::Bind { .. }
            | HubError::Scenario(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            HubError::Config(_) => "config",
            HubError::Storage(_) => "storage",
            HubError::Server(_) => "server",
            HubError::Bind { .. } => "bind",
            HubError::NotFound(_) => "mission_not_found",
            HubError::MissionExists(_) => "mission_exists",
            HubError::UnknownScenario(_) => "unknown_scenario",
            HubError::Scenario(_) => "scenario",
            HubError::Protocol(ProtocolError::Parse(_)) => "malformed_json",
            HubError::Protocol(_) => "schema_violation",
            HubError::WrongMessageType { .. } => "wrong_message_type",
            HubError::BadHeader(_) => "bad_header",
            HubError::Mission(e) => e.code(),
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody { code: self.code().to_owned(), detail: self.to_string() }
    }
}

/// Binds `0.0.0.0:port` and serves `hub` until `shutdown` resolves. Every
/// mutation is flushed to disk before its response is sent, so stopping
/// leaves nothing unwritten.
pub async fn serve(hub: Arc<Hub>, port: u16, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), HubError> {
    let addr = SocketAddr::from(([0, 0, 0, 0], port));
    let listener = TcpListener::bind(addr).await.map_err(|e| HubError::Bind { addr, reason: e.to_string() })?;
    serve_on(listener, hub, shutdown).await
}

pub async fn serve_on(
    listener: TcpListener,
    hub: Arc<Hub>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), HubError> {
    let addr = listener.local_addr().map_err(|e| HubError::Server(e.to_string()))?;
    tracing::info!(%addr, "hub listening");
    axum::serve(listener, router(hub))
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|e| HubError::Server(e.to_string()))?;
    tracing::info!("hub stopped");
    Ok(())
}
