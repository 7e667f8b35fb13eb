//! Mission event records: the append-only log written one JSON object per line.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::fusion::{BeliefState, Evidence};
use crate::planner::AgentId;
use crate::protocol::messages::ObservationReport;
use crate::retrieval::KeywordSource;
use crate::swarm::{AgentStatus, Pose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub step: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompletionReason {
    AllPointsObserved,
    NoLiveAgents,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventKind {
    TaskAssignment {
        agent_id: AgentId,
        route: Vec<usize>,
    },
    Takeoff {
        agent_id: AgentId,
        pose: Pose,
    },
    WaypointReached {
        agent_id: AgentId,
        point_index: usize,
    },
    Observation {
        agent_id: AgentId,
        report: ObservationReport,
    },
    Heartbeat {
        agent_id: AgentId,
        pose: Pose,
        battery: f64,
        status: AgentStatus,
    },
    AgentFailed {
        agent_id: AgentId,
        pose: Pose,
        remaining: Vec<usize>,
    },
    AgentDepleted {
        agent_id: AgentId,
        pose: Pose,
        remaining: Vec<usize>,
    },
    Replan {
        failed_agent_id: AgentId,
        last_seen_step: u64,
        orphan_indices: Vec<usize>,
        new_assignments: BTreeMap<AgentId, Vec<usize>>,
        deciders: Vec<AgentId>,
        plans_agree: bool,
    },
    MissionComplete {
        reason: CompletionReason,
        visited: Vec<usize>,
        unvisited: Vec<usize>,
    },
    MaxTicksExceeded {
        max_ticks: u64,
        unvisited: Vec<usize>,
    },
    EvidenceIngested {
        evidence: Evidence,
        keywords: Vec<String>,
        idempotency_key: Option<String>,
    },
    KeywordsAdded {
        source: KeywordSource,
        keywords: Vec<String>,
    },
    ThreatUpdate {
        beliefs: BeliefState,
        keywords: Vec<String>,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::TaskAssignment { .. } => "task_assignment",
            EventKind::Takeoff { .. } => "takeoff",
            EventKind::WaypointReached { .. } => "waypoint_reached",
            EventKind::Observation { .. } => "observation",
            EventKind::Heartbeat { .. } => "heartbeat",
            EventKind::AgentFailed { .. } => "agent_failed",
            EventKind::AgentDepleted { .. } => "agent_depleted",
            EventKind::Replan { .. } => "replan",
            EventKind::MissionComplete { .. } => "mission_complete",
            EventKind::MaxTicksExceeded { .. } => "max_ticks_exceeded",
            EventKind::EvidenceIngested { .. } => "evidence_ingested",
            EventKind::KeywordsAdded { .. } => "keywords_added",
            EventKind::ThreatUpdate { .. } => "threat_update",
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, EventKind::MissionComplete { .. } | EventKind::MaxTicksExceeded { .. })
    }
}

/// An append-only, gap-free sequence of events. Sequence numbers start at 1.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    records: Vec<EventRecord>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, step: u64, kind: EventKind) -> &EventRecord {
        let seq = self.last_seq() + 1;
        self.records.push(EventRecord { seq, step, kind });
        self.records.last().expect("just pushed")
    }

    pub fn last_seq(&self) -> u64 {
        self.records.last().map_or(0, |r| r.seq)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    /// Events with `seq > since`, in order.
    pub fn since(&self, since: u64) -> &[EventRecord] {
        // seq == position + 1, so the slice start is simply `since`.
        let start = usize::try_from(since).unwrap_or(usize::MAX).min(self.records.len());
        &self.records[start..]
    }

    /// Canonical JSON lines, one record per line.
    pub fn to_jsonl(&self) -> String {
        self.records.iter().map(|r| crate::protocol::canonical::to_canonical_line(r)).collect()
    }
}
