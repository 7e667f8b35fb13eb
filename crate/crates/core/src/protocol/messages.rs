//! Payload types carried inside an [`Envelope`](super::Envelope).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::event::EventRecord;
use crate::fusion::{BeliefState, EvidenceValue};
use crate::geo::{GeoPoint, GridSpec};
use crate::planner::{AgentId, RouteMetrics, RoutePlan};
use crate::retrieval::RankedDocument;
use crate::swarm::{AgentState, AgentStatus, Pose};
use crate::world::{Detection, VegetationObservation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Register {
    pub agent_id: AgentId,
    pub capabilities: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskAssignment {
    pub grid: GridSpec,
    pub route: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusUpdate {
    pub pose: Pose,
    pub battery: f64,
    pub status: AgentStatus,
    pub step: u64,
}

/// Stand-in for the images an agent records at a waypoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMeta {
    pub image_id: String,
    pub agent_id: AgentId,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationReport {
    pub point_index: usize,
    pub sensor_reading: f64,
    pub detections: Vec<Detection>,
    pub vegetation: VegetationObservation,
    pub image_meta: ImageMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeerFailure {
    pub failed_agent_id: AgentId,
    pub last_seen_step: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplanNotice {
    pub orphan_indices: Vec<usize>,
    pub new_assignments: BTreeMap<AgentId, Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSubmission {
    pub kind: String,
    pub value: EvidenceValue,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_tag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreatUpdate {
    pub beliefs: BeliefState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub of_message_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentStart {
    pub agent_id: AgentId,
    pub start: GeoPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mission_id: Option<String>,
    pub corners: [GeoPoint; 4],
    pub spacing_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub altitude_m: Option<f64>,
    pub agents: Vec<AgentStart>,
    pub scenario_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_ticks: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSnapshot {
    pub mission_id: String,
    pub grid: GridSpec,
    pub plan: RoutePlan,
    pub metrics: RouteMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissionStatus {
    Created,
    Running,
    Complete,
    Aborted,
}

impl MissionStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            MissionStatus::Created => "created",
            MissionStatus::Running => "running",
            MissionStatus::Complete => "complete",
            MissionStatus::Aborted => "aborted",
        }
    }

    pub fn is_finished(&self) -> bool {
        matches!(self, MissionStatus::Complete | MissionStatus::Aborted)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionSummary {
    pub mission_id: String,
    pub status: MissionStatus,
    pub step: u64,
    pub grid_size: usize,
    pub visited: usize,
    /// Step of the terminal event, once there is one.
    pub makespan_ticks: Option<u64>,
    pub beliefs: BeliefState,
    pub argmax_category: String,
    pub top_documents: Vec<RankedDocument>,
    pub last_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvanceRequest {
    pub ticks: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventBatch {
    pub events: Vec<EventRecord>,
    pub last_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceResult {
    pub beliefs: BeliefState,
    pub documents: Vec<RankedDocument>,
    pub replayed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentRanking {
    pub documents: Vec<RankedDocument>,
    pub keywords: BTreeMap<String, u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRoster {
    pub agents: Vec<AgentState>,
}
