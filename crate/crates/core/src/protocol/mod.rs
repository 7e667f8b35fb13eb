//! The JSON message protocol shared by agents, the hub, and the CLI.
//!
//! Every message is an [`Envelope`] whose `message_type` names the payload
//! variant. Schemas are closed: unknown fields, unknown message types and
//! other protocol versions are rejected. [`encode`] always produces canonical
//! bytes, so `encode(decode(b)) == b` for any canonical `b`.

pub mod canonical;
pub mod messages;
pub mod schema;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

pub use messages::*;
pub use schema::Violation;

pub const PROTOCOL_VERSION: &str = "1.0";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("not valid JSON: {0}")]
    Parse(String),
    #[error("schema violation: {}", join(.0))]
    Schema(Vec<Violation>),
    #[error("envelope failed validation: {}", join(.0))]
    ValidationFailed(Vec<Violation>),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl ProtocolError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            ProtocolError::Parse(_) => &[],
            ProtocolError::Schema(v) | ProtocolError::ValidationFailed(v) => v,
        }
    }
}

macro_rules! message_types {
    ($($variant:ident($ty:ty) => $name:literal),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
        pub enum MessageType {
            $(#[serde(rename = $name)] $variant,)*
        }

        impl MessageType {
            pub const ALL: &'static [MessageType] = &[$(MessageType::$variant,)*];

            pub fn as_str(&self) -> &'static str {
                match self {
                    $(MessageType::$variant => $name,)*
                }
            }

            pub fn parse(s: &str) -> Option<MessageType> {
                match s {
                    $($name => Some(MessageType::$variant),)*
                    _ => None,
                }
            }
        }

        #[derive(Debug, Clone, PartialEq, Serialize)]
        #[serde(untagged)]
        pub enum MessageBody {
            $($variant($ty),)*
        }

        impl MessageBody {
            pub fn message_type(&self) -> MessageType {
                match self {
                    $(MessageBody::$variant(_) => MessageType::$variant,)*
                }
            }

            fn from_value(t: MessageType, v: Value) -> Result<MessageBody, serde_json::Error> {
                match t {
                    $(MessageType::$variant => serde_json::from_value(v).map(MessageBody::$variant),)*
                }
            }
        }

        $(
            impl From<$ty> for MessageBody {
                fn from(body: $ty) -> Self {
                    MessageBody::$variant(body)
                }
            }
        )*
    };
}

message_types! {
    Register(Register) => "register",
    TaskAssignment(TaskAssignment) => "task_assignment",
    StatusUpdate(StatusUpdate) => "status_update",
    ObservationReport(ObservationReport) => "observation_report",
    PeerFailure(PeerFailure) => "peer_failure",
    ReplanNotice(ReplanNotice) => "replan_notice",
    EvidenceSubmission(EvidenceSubmission) => "evidence_submission",
    ThreatUpdate(ThreatUpdate) => "threat_update",
    Ack(Ack) => "ack",
    Error(ErrorBody) => "error",
    MissionRequest(MissionRequest) => "mission_request",
    PlanSnapshot(PlanSnapshot) => "plan_snapshot",
    MissionSummary(MissionSummary) => "mission_summary",
    AdvanceRequest(AdvanceRequest) => "advance_request",
    EventBatch(EventBatch) => "event_batch",
    EvidenceResult(EvidenceResult) => "evidence_result",
    DocumentRanking(DocumentRanking) => "document_ranking",
    AgentRoster(AgentRoster) => "agent_roster",
}

impl std::fmt::Display for MessageType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Envelope {
    pub protocol_version: String,
    pub message_id: String,
    pub timestamp: String,
    pub sender: String,
    pub recipient: String,
    pub message_type: MessageType,
    pub payload: MessageBody,
}

pub fn now_timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl Envelope {
    /// A fresh envelope with a random message id and the current time.
    pub fn new(sender: impl Into<String>, recipient: impl Into<String>, payload: impl Into<MessageBody>) -> Self {
        Self::with_id(uuid::Uuid::new_v4().to_string(), now_timestamp(), sender, recipient, payload)
    }

    pub fn with_id(
        message_id: impl Into<String>,
        timestamp: impl Into<String>,
        sender: impl Into<String>,
        recipient: impl Into<String>,
        payload: impl Into<MessageBody>,
    ) -> Self {
        let payload = payload.into();
        Envelope {
            protocol_version: PROTOCOL_VERSION.to_owned(),
            message_id: message_id.into(),
            timestamp: timestamp.into(),
            sender: sender.into(),
            recipient: recipient.into(),
            message_type: payload.message_type(),
            payload,
        }
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("envelopes serialize to JSON")
    }

    /// Strict conversion from parsed JSON.
    pub fn from_value(value: Value) -> Result<Envelope, ProtocolError> {
        let violations = schema::ENVELOPE_SCHEMA.check(&value);
        if !violations.is_empty() {
            return Err(ProtocolError::Schema(violations));
        }
        let Value::Object(mut map) = value else {
            unreachable!("schema guarantees an object")
        };
        let mut take_str = |key: &str| match map.remove(key) {
            Some(Value::String(s)) => s,
            _ => unreachable!("schema guarantees string field {key}"),
        };
        let protocol_version = take_str("protocol_version");
        let message_id = take_str("message_id");
        let timestamp = take_str("timestamp");
        let sender = take_str("sender");
        let recipient = take_str("recipient");
        let message_type = MessageType::parse(&take_str("message_type")).expect("schema guarantees a known type");
        let payload = MessageBody::from_value(message_type, map.remove("payload").unwrap_or(Value::Null)).map_err(|e| {
            ProtocolError::Schema(vec![Violation {
                path: "$.payload".into(),
                message: e.to_string(),
            }])
        })?;
        Ok(Envelope {
            protocol_version,
            message_id,
            timestamp,
            sender,
            recipient,
            message_type,
            payload,
        })
    }
}

/// Every structural violation of `env`, not just the first.
pub fn validate(env: &Envelope) -> Result<(), Vec<Violation>> {
    let mut violations = schema::ENVELOPE_SCHEMA.check(&env.to_value());
    if env.message_type != env.payload.message_type() {
        violations.push(Violation {
            path: "$.message_type".into(),
            message: format!(
                "message_type {} does not match payload variant {}",
                env.message_type,
                env.payload.message_type()
            ),
        });
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

pub fn encode(env: &Envelope) -> Result<Vec<u8>, ProtocolError> {
    validate(env).map_err(ProtocolError::ValidationFailed)?;
    Ok(canonical::to_canonical_string(&env.to_value()).into_bytes())
}

pub fn decode(bytes: &[u8]) -> Result<Envelope, ProtocolError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| ProtocolError::Parse(e.to_string()))?;
    Envelope::from_value(value)
}
