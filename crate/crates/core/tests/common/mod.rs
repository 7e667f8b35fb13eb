#![allow(dead_code)]

pub mod mutate;

use std::collections::{BTreeMap, BTreeSet};

use cbrne_core::event::{CompletionReason, EventKind, EventRecord};
use cbrne_core::fusion::{BeliefState, Evidence, EvidenceSource, EvidenceValue};
use cbrne_core::geo::{discretize_region, rectangle_corners, GeoPoint, LocalPoint};
use cbrne_core::planner::{plan_routes, route_metrics, AgentId};
use cbrne_core::protocol::messages::*;
use cbrne_core::protocol::{Envelope, MessageBody, MessageType};
use cbrne_core::retrieval::{KeywordSource, RankedDocument};
use cbrne_core::swarm::{AgentState, AgentStatus, PeerInfo, Pose};
use cbrne_core::world::{Detection, VegetationObservation};
use rand::seq::IndexedRandom;
use rand::Rng;

const WORDS: &[&str] = &["rav-1", "rav-2", "hub", "track", "gamma", "α-β", "say \"hi\"", "two words", "tab\there", "x"];

pub fn word(rng: &mut impl Rng) -> String {
    WORDS.choose(rng).unwrap().to_string()
}

pub fn agent(rng: &mut impl Rng) -> AgentId {
    AgentId::new(format!("rav-{}", rng.random_range(1..=6)))
}

/// Doubles with awkward decimal expansions as well as integral ones.
pub fn real(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    match rng.random_range(0..4) {
        0 => rng.random_range(lo..hi).round(),
        1 => lo,
        _ => rng.random_range(lo..hi),
    }
}

pub fn geo_point(rng: &mut impl Rng) -> GeoPoint {
    GeoPoint::new(real(rng, -89.0, 89.0), real(rng, -179.0, 179.0), real(rng, 0.0, 120.0))
}

pub fn pose(rng: &mut impl Rng) -> Pose {
    Pose { x: real(rng, -500.0, 500.0), y: real(rng, -500.0, 500.0), alt: real(rng, 0.0, 60.0) }
}

pub fn indices(rng: &mut impl Rng) -> Vec<usize> {
    (0..rng.random_range(0..6)).map(|_| rng.random_range(0..200)).collect()
}

pub fn status(rng: &mut impl Rng) -> AgentStatus {
    *[AgentStatus::Idle, AgentStatus::Enroute, AgentStatus::Observing, AgentStatus::Depleted, AgentStatus::Failed]
        .choose(rng)
        .unwrap()
}

pub fn beliefs(rng: &mut impl Rng) -> BeliefState {
    let cats = ["chemical", "biological", "radiological_nuclear", "none"];
    let raw: Vec<f64> = cats.iter().map(|_| rng.random_range(0.01..1.0)).collect();
    let z: f64 = raw.iter().sum();
    let category_posterior: BTreeMap<String, f64> = cats.iter().map(|c| c.to_string()).zip(raw.iter().map(|p| p / z)).collect();
    let substance_posterior = category_posterior
        .iter()
        .map(|(c, p)| {
            let split = rng.random_range(0.0..1.0);
            let dist = if c == "none" {
                BTreeMap::new()
            } else {
                [(format!("{c}-a"), p * split), (format!("{c}-b"), p * (1.0 - split))].into_iter().collect()
            };
            (c.clone(), dist)
        })
        .collect();
    BeliefState {
        category_posterior,
        substance_posterior,
        evidence_count: rng.random_range(0..500),
        last_updated_step: rng.random_range(0..500),
    }
}

pub fn detection(rng: &mut impl Rng) -> Detection {
    Detection {
        label: word(rng),
        confidence: real(rng, 0.0, 1.0),
        object_id: if rng.random_bool(0.5) { Some(word(rng)) } else { None },
    }
}

pub fn observation(rng: &mut impl Rng) -> ObservationReport {
    ObservationReport {
        point_index: rng.random_range(0..100),
        sensor_reading: real(rng, 0.0, 90.0),
        detections: (0..rng.random_range(0..3)).map(|_| detection(rng)).collect(),
        vegetation: VegetationObservation { region_tag: word(rng), damaged: rng.random_bool(0.3) },
        image_meta: ImageMeta { image_id: format!("img-{}", rng.random::<u32>()), agent_id: agent(rng), step: rng.random_range(0..300) },
    }
}

pub fn evidence_value(rng: &mut impl Rng) -> EvidenceValue {
    if rng.random_bool(0.5) {
        EvidenceValue::Number(real(rng, 0.0, 100.0))
    } else {
        EvidenceValue::Label(word(rng))
    }
}

pub fn evidence(rng: &mut impl Rng) -> Evidence {
    Evidence {
        step: rng.random_range(0..300),
        source: *[EvidenceSource::Commander, EvidenceSource::Detector, EvidenceSource::RadSensor, EvidenceSource::Vegetation]
            .choose(rng)
            .unwrap(),
        kind: word(rng),
        value: evidence_value(rng),
        region_tag: if rng.random_bool(0.5) { Some(word(rng)) } else { None },
    }
}

pub fn ranked(rng: &mut impl Rng) -> Vec<RankedDocument> {
    (0..rng.random_range(0..4))
        .map(|i| RankedDocument { doc_id: format!("sop-{i}"), title: word(rng), score: real(rng, 0.0, 1.0) })
        .collect()
}

pub fn event_kind(rng: &mut impl Rng) -> EventKind {
    match rng.random_range(0..13) {
        0 => EventKind::TaskAssignment { agent_id: agent(rng), route: indices(rng) },
        1 => EventKind::Takeoff { agent_id: agent(rng), pose: pose(rng) },
        2 => EventKind::WaypointReached { agent_id: agent(rng), point_index: rng.random_range(0..100) },
        3 => EventKind::Observation { agent_id: agent(rng), report: observation(rng) },
        4 => EventKind::Heartbeat { agent_id: agent(rng), pose: pose(rng), battery: real(rng, 0.0, 5000.0), status: status(rng) },
        5 => EventKind::AgentFailed { agent_id: agent(rng), pose: pose(rng), remaining: indices(rng) },
        6 => EventKind::AgentDepleted { agent_id: agent(rng), pose: pose(rng), remaining: indices(rng) },
        7 => EventKind::Replan {
            failed_agent_id: agent(rng),
            last_seen_step: rng.random_range(0..100),
            orphan_indices: indices(rng),
            new_assignments: (0..rng.random_range(0..3)).map(|_| (agent(rng), indices(rng))).collect(),
            deciders: (0..rng.random_range(1..3)).map(|_| agent(rng)).collect(),
            plans_agree: rng.random_bool(0.9),
        },
        8 => EventKind::MissionComplete {
            reason: if rng.random_bool(0.5) { CompletionReason::AllPointsObserved } else { CompletionReason::NoLiveAgents },
            visited: indices(rng),
            unvisited: indices(rng),
        },
        9 => EventKind::MaxTicksExceeded { max_ticks: rng.random_range(1..10_000), unvisited: indices(rng) },
        10 => EventKind::EvidenceIngested {
            evidence: evidence(rng),
            keywords: (0..rng.random_range(0..3)).map(|_| word(rng)).collect(),
            idempotency_key: if rng.random_bool(0.5) { Some(word(rng)) } else { None },
        },
        11 => EventKind::KeywordsAdded {
            source: *[KeywordSource::Detector, KeywordSource::Fusion, KeywordSource::Commander].choose(rng).unwrap(),
            keywords: (0..rng.random_range(0..3)).map(|_| word(rng)).collect(),
        },
        _ => EventKind::ThreatUpdate { beliefs: beliefs(rng), keywords: vec![word(rng)] },
    }
}

pub fn agent_state(rng: &mut impl Rng) -> AgentState {
    let id = agent(rng);
    AgentState {
        agent_id: id.clone(),
        pose: pose(rng),
        status: status(rng),
        battery: real(rng, 0.0, 5000.0),
        route: indices(rng),
        last_heartbeat_step: rng.random_range(0..100),
        peer_view: [(id, PeerInfo { pose: pose(rng), step: rng.random_range(0..100) })].into_iter().collect(),
        odometer_m: real(rng, 0.0, 3000.0),
        active_ticks: rng.random_range(0..500),
    }
}

/// A small real plan so grids, routes and metrics are mutually consistent.
pub fn plan_snapshot(rng: &mut impl Rng) -> PlanSnapshot {
    let origin = GeoPoint::new(real(rng, -60.0, 60.0), real(rng, -170.0, 170.0), 0.0);
    let corners = rectangle_corners(origin, rng.random_range(10.0..120.0), rng.random_range(10.0..120.0));
    let grid = discretize_region(&corners, rng.random_range(20.0..60.0), 20.0).unwrap();
    let points = grid.local_points();
    let agents: BTreeMap<AgentId, LocalPoint> = (0..rng.random_range(1..4))
        .map(|i| (AgentId::new(format!("rav-{i}")), LocalPoint::new(real(rng, -20.0, 20.0), real(rng, -20.0, 20.0))))
        .collect();
    let plan = plan_routes(&points, &agents).unwrap();
    let metrics = route_metrics(&plan, &points).unwrap();
    PlanSnapshot { mission_id: word(rng), grid, plan, metrics }
}

pub fn body(rng: &mut impl Rng, t: MessageType) -> MessageBody {
    match t {
        MessageType::Register => Register { agent_id: agent(rng), capabilities: vec![word(rng)] }.into(),
        MessageType::TaskAssignment => {
            let snap = plan_snapshot(rng);
            let route = snap.plan.routes.values().next().cloned().unwrap_or_default();
            TaskAssignment { grid: snap.grid, route }.into()
        }
        MessageType::StatusUpdate => {
            StatusUpdate { pose: pose(rng), battery: real(rng, 0.0, 5000.0), status: status(rng), step: rng.random_range(0..500) }.into()
        }
        MessageType::ObservationReport => observation(rng).into(),
        MessageType::PeerFailure => PeerFailure { failed_agent_id: agent(rng), last_seen_step: rng.random_range(0..100) }.into(),
        MessageType::ReplanNotice => ReplanNotice {
            orphan_indices: indices(rng),
            new_assignments: (0..rng.random_range(0..3)).map(|_| (agent(rng), indices(rng))).collect(),
        }
        .into(),
        MessageType::EvidenceSubmission => EvidenceSubmission {
            kind: word(rng),
            value: evidence_value(rng),
            region_tag: if rng.random_bool(0.5) { Some(word(rng)) } else { None },
        }
        .into(),
        MessageType::ThreatUpdate => ThreatUpdate { beliefs: beliefs(rng) }.into(),
        MessageType::Ack => Ack { of_message_id: uuid_from(rng) }.into(),
        MessageType::Error => ErrorBody { code: "invalid_region".into(), detail: word(rng) }.into(),
        MessageType::MissionRequest => MissionRequest {
            mission_id: if rng.random_bool(0.5) { Some(word(rng)) } else { None },
            corners: [geo_point(rng), geo_point(rng), geo_point(rng), geo_point(rng)],
            spacing_m: real(rng, 1.0, 100.0),
            altitude_m: if rng.random_bool(0.5) { Some(real(rng, 0.0, 100.0)) } else { None },
            agents: (0..rng.random_range(0..3)).map(|_| AgentStart { agent_id: agent(rng), start: geo_point(rng) }).collect(),
            scenario_ref: word(rng),
            seed: if rng.random_bool(0.5) { Some(rng.random()) } else { None },
            max_ticks: if rng.random_bool(0.5) { Some(rng.random_range(1..10_000)) } else { None },
        }
        .into(),
        MessageType::PlanSnapshot => plan_snapshot(rng).into(),
        MessageType::MissionSummary => MissionSummary {
            mission_id: word(rng),
            status: *[MissionStatus::Created, MissionStatus::Running, MissionStatus::Complete, MissionStatus::Aborted]
                .choose(rng)
                .unwrap(),
            step: rng.random_range(0..500),
            grid_size: rng.random_range(1..100),
            visited: rng.random_range(0..100),
            makespan_ticks: if rng.random_bool(0.5) { Some(rng.random_range(0..500)) } else { None },
            beliefs: beliefs(rng),
            argmax_category: "radiological_nuclear".into(),
            top_documents: ranked(rng),
            last_seq: rng.random_range(0..1000),
        }
        .into(),
        MessageType::AdvanceRequest => AdvanceRequest { ticks: rng.random_range(0..1000) }.into(),
        MessageType::EventBatch => {
            let n = rng.random_range(0..4);
            let start = rng.random_range(0..50);
            let events: Vec<EventRecord> = (0..n)
                .map(|i| EventRecord { seq: start + i + 1, step: rng.random_range(0..300), kind: event_kind(rng) })
                .collect();
            EventBatch { events, last_seq: start + n }.into()
        }
        MessageType::EvidenceResult => EvidenceResult { beliefs: beliefs(rng), documents: ranked(rng), replayed: rng.random_bool(0.5) }.into(),
        MessageType::DocumentRanking => DocumentRanking {
            documents: ranked(rng),
            keywords: (0..rng.random_range(0..4)).map(|_| (word(rng), rng.random_range(1..9))).collect::<BTreeMap<_, _>>(),
        }
        .into(),
        MessageType::AgentRoster => AgentRoster { agents: (0..rng.random_range(0..3)).map(|_| agent_state(rng)).collect() }.into(),
    }
}

pub fn uuid_from(rng: &mut impl Rng) -> String {
    uuid::Builder::from_random_bytes(rng.random()).into_uuid().to_string()
}

pub fn timestamp(rng: &mut impl Rng) -> String {
    let secs = rng.random_range(1_600_000_000i64..1_900_000_000);
    let millis = rng.random_range(0..1000);
    chrono::DateTime::from_timestamp(secs, millis * 1_000_000)
        .unwrap()
        .to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

pub fn envelope(rng: &mut impl Rng) -> Envelope {
    let t = *MessageType::ALL.choose(rng).unwrap();
    envelope_of(rng, t)
}

pub fn envelope_of(rng: &mut impl Rng, t: MessageType) -> Envelope {
    let payload = body(rng, t);
    Envelope::with_id(uuid_from(rng), timestamp(rng), word(rng), word(rng), payload)
}

/// Distinct values, for sanity checks on generated ids.
pub fn distinct<T: Ord + Clone>(items: &[T]) -> usize {
    items.iter().cloned().collect::<BTreeSet<_>>().len()
}
