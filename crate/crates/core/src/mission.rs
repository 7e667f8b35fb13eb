//! A mission ties the pieces together: plan the survey, drive the simulation,
//! turn observations into evidence and keywords, and keep the event log that
//! makes all of it replayable.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::event::{EventKind, EventLog, EventRecord};
use crate::fusion::{ingest, top_keywords, BeliefState, Evidence, EvidenceSource, EvidenceValue, FusionError};
use crate::geo::{discretize_region, project, GeoError, GridSpec, LocalPoint};
use crate::planner::{agents_from_list, plan_routes, route_metrics, PlanError, RouteMetrics, RoutePlan};
use crate::protocol::messages::{
    AgentRoster, EvidenceResult, EvidenceSubmission, MissionRequest, MissionStatus, MissionSummary, ObservationReport,
    PlanSnapshot,
};
use crate::retrieval::{Analyzer, Index, KeywordSource, QueryState, RankedDocument};
use crate::scenario::{ScenarioFile, DETECTION_KIND, RADIATION_KIND, VEGETATION_KIND};
use crate::swarm::{Simulation, SwarmError};

/// Documents listed in a mission summary.
pub const SUMMARY_DOCUMENTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MissionError {
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Swarm(#[from] SwarmError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error("mission is {0} and accepts no further ticks")]
    Finished(&'static str),
    #[error("idempotency key {0} was already used for different evidence")]
    IdempotencyConflict(String),
    #[error("replayed log diverges from the stored log at seq {0}")]
    ReplayDivergence(u64),
    #[error("invalid mission request: {0}")]
    InvalidRequest(String),
}

impl MissionError {
    /// Whether the error reflects a conflict with mission state rather than a
    /// malformed request.
    pub fn is_conflict(&self) -> bool {
        matches!(self, MissionError::Finished(_) | MissionError::IdempotencyConflict(_))
    }

    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            MissionError::Geo(GeoError::OutOfProjectionRange { .. }) => "out_of_projection_range",
            MissionError::Geo(GeoError::InvalidRegion(_)) => "invalid_region",
            MissionError::Geo(GeoError::InvalidSpacing(_)) => "invalid_spacing",
            MissionError::Geo(GeoError::InvalidCoordinate(_)) => "invalid_coordinate",
            MissionError::Plan(PlanError::NoAgents) => "no_agents",
            MissionError::Plan(PlanError::DuplicateAgent(_)) => "duplicate_agent",
            MissionError::Plan(PlanError::InvalidPlan(_)) => "invalid_plan",
            MissionError::Swarm(_) => "invalid_simulation",
            MissionError::Fusion(FusionError::UnknownEvidenceKind(_)) => "unknown_evidence_kind",
            MissionError::Fusion(FusionError::UnknownEvidenceValue { .. }) => "unknown_evidence_value",
            MissionError::Fusion(FusionError::ImpossibleEvidence) => "impossible_evidence",
            MissionError::Fusion(FusionError::InvalidModel(_)) => "invalid_model",
            MissionError::Finished(_) => "mission_finished",
            MissionError::IdempotencyConflict(_) => "idempotency_conflict",
            MissionError::ReplayDivergence(_) => "replay_divergence",
            MissionError::InvalidRequest(_) => "invalid_request",
        }
    }
}

fn keyword_source(source: EvidenceSource) -> KeywordSource {
    match source {
        EvidenceSource::Commander => KeywordSource::Commander,
        EvidenceSource::Detector | EvidenceSource::RadSensor | EvidenceSource::Vegetation => KeywordSource::Detector,
    }
}

/// Belief and query state derived from the event log alone.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedState {
    pub beliefs: BeliefState,
    pub query: QueryState,
    last_fusion_keywords: Vec<String>,
}

impl DerivedState {
    pub fn new(beliefs: BeliefState) -> Self {
        DerivedState {
            beliefs,
            query: QueryState::default(),
            last_fusion_keywords: Vec::new(),
        }
    }

    /// Folds one event into the state. Events other than evidence, keyword
    /// and threat updates leave it unchanged.
    pub fn apply(&mut self, scenario: &ScenarioFile, analyzer: &Analyzer, record: &EventRecord) -> Result<(), FusionError> {
        match &record.kind {
            EventKind::EvidenceIngested { evidence, keywords, .. } => {
                self.beliefs = ingest(&scenario.model, &self.beliefs, evidence)?;
                self.query.add_keywords(analyzer, keywords, keyword_source(evidence.source), record.step);
            }
            EventKind::KeywordsAdded { source, keywords } => {
                self.query.add_keywords(analyzer, keywords, *source, record.step);
            }
            EventKind::ThreatUpdate { keywords, .. } => {
                // Fusion keywords enter the query only when the belief summary changes.
                if *keywords != self.last_fusion_keywords {
                    self.query.add_keywords(analyzer, keywords, KeywordSource::Fusion, record.step);
                    self.last_fusion_keywords = keywords.clone();
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Replays a whole log from the model prior.
    pub fn replay<'a>(
        scenario: &ScenarioFile,
        analyzer: &Analyzer,
        records: impl IntoIterator<Item = &'a EventRecord>,
    ) -> Result<DerivedState, FusionError> {
        let mut state = DerivedState::new(scenario.model.prior_beliefs());
        for r in records {
            state.apply(scenario, analyzer, r)?;
        }
        Ok(state)
    }
}

#[derive(Debug, Clone)]
pub struct Mission {
    mission_id: String,
    request: MissionRequest,
    scenario: Arc<ScenarioFile>,
    index: Arc<Index>,
    grid: GridSpec,
    plan: RoutePlan,
    metrics: RouteMetrics,
    sim: Simulation,
    derived: DerivedState,
    log: EventLog,
    status: MissionStatus,
    idempotency: BTreeMap<String, EvidenceSubmission>,
    max_ticks: u64,
}

impl Mission {
    /// Discretizes the region, plans routes and logs each agent's assignment
    /// and takeoff. Scene positions are read in the local frame whose origin
    /// is the first corner of the region.
    pub fn create(
        mission_id: impl Into<String>,
        request: MissionRequest,
        scenario: Arc<ScenarioFile>,
        index: Arc<Index>,
    ) -> Result<Mission, MissionError> {
        for c in &request.corners {
            c.validate()?;
        }
        let altitude = request.altitude_m.unwrap_or(scenario.region.altitude_m);
        if !(altitude >= 0.0 && altitude.is_finite()) {
            return Err(MissionError::InvalidRequest(format!("altitude_m {altitude} must be non-negative")));
        }
        let grid = discretize_region(&request.corners, request.spacing_m, altitude)?;
        let origin = *grid.origin();
        let mut starts = Vec::with_capacity(request.agents.len());
        for a in &request.agents {
            a.start.validate()?;
            starts.push((a.agent_id.clone(), project(&origin, &a.start)?));
        }
        let agents = agents_from_list(starts)?;
        let points: Vec<LocalPoint> = grid.local_points();
        let plan = plan_routes(&points, &agents)?;
        let metrics = route_metrics(&plan, &points)?;

        let mut config = scenario.sim.clone();
        if let Some(seed) = request.seed {
            config.seed = seed;
        }
        if let Some(max_ticks) = request.max_ticks {
            config.max_ticks = max_ticks;
        }
        let max_ticks = config.max_ticks;
        let mut sim = Simulation::new(config, scenario.scene.clone(), points, altitude)?;

        let mut log = EventLog::new();
        for (agent_id, route) in &plan.routes {
            log.push(0, EventKind::TaskAssignment { agent_id: agent_id.clone(), route: route.clone() });
        }
        sim.initialize(&plan, &mut log)?;

        Ok(Mission {
            mission_id: mission_id.into(),
            derived: DerivedState::new(scenario.model.prior_beliefs()),
            request,
            scenario,
            index,
            grid,
            plan,
            metrics,
            sim,
            log,
            status: MissionStatus::Created,
            idempotency: BTreeMap::new(),
            max_ticks,
        })
    }

    /// Rebuilds a mission from its request and a stored log by re-running it,
    /// checking every regenerated event against the stored one. Events the
    /// stored log lacks (an operation cut short) are regenerated.
    pub fn recover(
        mission_id: impl Into<String>,
        request: MissionRequest,
        scenario: Arc<ScenarioFile>,
        index: Arc<Index>,
        stored: &[EventRecord],
    ) -> Result<Mission, MissionError> {
        let mut m = Mission::create(mission_id, request, scenario, index)?;
        m.check_prefix(stored)?;
        while m.log.len() < stored.len() {
            let next = &stored[m.log.len()];
            match &next.kind {
                EventKind::EvidenceIngested { evidence, idempotency_key, .. } if evidence.source == EvidenceSource::Commander => {
                    let submission = EvidenceSubmission {
                        kind: evidence.kind.clone(),
                        value: evidence.value.clone(),
                        region_tag: evidence.region_tag.clone(),
                    };
                    m.submit_evidence(submission, idempotency_key.clone())?;
                }
                _ if m.status.is_finished() => return Err(MissionError::ReplayDivergence(next.seq)),
                _ => {
                    m.advance(1)?;
                }
            }
            m.check_prefix(stored)?;
        }
        Ok(m)
    }

    fn check_prefix(&self, stored: &[EventRecord]) -> Result<(), MissionError> {
        for (ours, theirs) in self.log.records().iter().zip(stored) {
            if ours != theirs {
                return Err(MissionError::ReplayDivergence(theirs.seq));
            }
        }
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.mission_id
    }

    pub fn request(&self) -> &MissionRequest {
        &self.request
    }

    pub fn scenario(&self) -> &ScenarioFile {
        &self.scenario
    }

    pub fn index(&self) -> &Index {
        &self.index
    }

    pub fn status(&self) -> MissionStatus {
        self.status
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn plan(&self) -> &RoutePlan {
        &self.plan
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn simulation(&self) -> &Simulation {
        &self.sim
    }

    pub fn beliefs(&self) -> &BeliefState {
        &self.derived.beliefs
    }

    pub fn query(&self) -> &QueryState {
        &self.derived.query
    }

    pub fn derived(&self) -> &DerivedState {
        &self.derived
    }

    pub fn events_since(&self, since: u64) -> &[EventRecord] {
        self.log.since(since)
    }

    pub fn documents(&self, limit: usize) -> Vec<RankedDocument> {
        self.index.rank(&self.derived.query, limit)
    }

    pub fn plan_snapshot(&self) -> PlanSnapshot {
        PlanSnapshot {
            mission_id: self.mission_id.clone(),
            grid: self.grid.clone(),
            plan: self.plan.clone(),
            metrics: self.metrics.clone(),
        }
    }

    pub fn roster(&self) -> AgentRoster {
        let agents = self.sim.agents().map(|a| a.values().cloned().collect()).unwrap_or_default();
        AgentRoster { agents }
    }

    pub fn summary(&self) -> MissionSummary {
        MissionSummary {
            mission_id: self.mission_id.clone(),
            status: self.status,
            step: self.sim.current_step(),
            grid_size: self.grid.len(),
            visited: self.sim.observed().map_or(0, |o| o.len()),
            makespan_ticks: self.sim.terminal_step(),
            beliefs: self.derived.beliefs.clone(),
            argmax_category: self.derived.beliefs.argmax(&self.scenario.model).to_owned(),
            top_documents: self.documents(SUMMARY_DOCUMENTS),
            last_seq: self.log.last_seq(),
        }
    }

    /// Runs up to `ticks` simulation steps, bridging each observation into
    /// evidence and keywords. Stops early when the mission finishes.
    pub fn advance(&mut self, ticks: u64) -> Result<Vec<EventRecord>, MissionError> {
        if self.status.is_finished() {
            return Err(MissionError::Finished(self.status.as_str()));
        }
        let first = self.log.len();
        for _ in 0..ticks {
            self.status = MissionStatus::Running;
            let events = self.sim.tick(&mut self.log)?;
            for e in &events {
                if let EventKind::Observation { report, .. } = &e.kind {
                    self.bridge_observation(e.step, report)?;
                }
            }
            if self.sim.finish_if_done(&mut self.log)? {
                self.status = MissionStatus::Complete;
                break;
            }
            if self.sim.current_step() >= self.max_ticks {
                self.sim.abort_max_ticks(&mut self.log)?;
                self.status = MissionStatus::Aborted;
                break;
            }
        }
        Ok(self.log.records()[first..].to_vec())
    }

    /// Advances until the mission completes or hits its tick limit.
    pub fn run_to_end(&mut self) -> Result<(), MissionError> {
        while !self.status.is_finished() {
            self.advance(1_000)?;
        }
        Ok(())
    }

    fn push_and_apply(&mut self, step: u64, kind: EventKind) -> Result<(), FusionError> {
        let record = self.log.push(step, kind).clone();
        self.derived.apply(&self.scenario, self.index.analyzer(), &record)
    }

    fn threat_update(&mut self, step: u64) -> Result<(), FusionError> {
        let bridge = &self.scenario.keyword_bridge;
        let keywords = top_keywords(&self.scenario.model, &self.derived.beliefs, &bridge.threat, bridge.top_k);
        let beliefs = self.derived.beliefs.clone();
        self.push_and_apply(step, EventKind::ThreatUpdate { beliefs, keywords })
    }

    fn ingest_evidence(&mut self, evidence: Evidence, idempotency_key: Option<String>) -> Result<(), FusionError> {
        // Validate before anything reaches the log.
        ingest(&self.scenario.model, &self.derived.beliefs, &evidence)?;
        let keywords = self.scenario.keyword_bridge.evidence_keywords(&self.scenario.model, &evidence);
        let step = evidence.step;
        self.push_and_apply(step, EventKind::EvidenceIngested { evidence, keywords, idempotency_key })
    }

    fn bridge_observation(&mut self, step: u64, report: &ObservationReport) -> Result<(), FusionError> {
        let model = &self.scenario.model;
        let region_tag = Some(report.vegetation.region_tag.clone());
        let mut evidence = Vec::new();
        if model.likelihoods.contains_key(RADIATION_KIND) {
            evidence.push(Evidence {
                step,
                source: EvidenceSource::RadSensor,
                kind: RADIATION_KIND.into(),
                value: EvidenceValue::Number(report.sensor_reading),
                region_tag: region_tag.clone(),
            });
        }
        if model.likelihoods.contains_key(VEGETATION_KIND) {
            let label = if report.vegetation.damaged { "damaged" } else { "healthy" };
            evidence.push(Evidence {
                step,
                source: EvidenceSource::Vegetation,
                kind: VEGETATION_KIND.into(),
                value: EvidenceValue::Label(label.into()),
                region_tag: region_tag.clone(),
            });
        }
        let mut unmodelled = Vec::new();
        for d in &report.detections {
            let modelled = model.likelihoods.get(DETECTION_KIND).is_some_and(|rows| rows.contains_key(&d.label));
            if modelled {
                evidence.push(Evidence {
                    step,
                    source: EvidenceSource::Detector,
                    kind: DETECTION_KIND.into(),
                    value: EvidenceValue::Label(d.label.clone()),
                    region_tag: region_tag.clone(),
                });
            } else {
                unmodelled.extend(self.scenario.keyword_bridge.label_keywords(&d.label));
            }
        }

        let changed = !evidence.is_empty();
        for e in evidence {
            self.ingest_evidence(e, None)?;
        }
        if !unmodelled.is_empty() {
            self.push_and_apply(step, EventKind::KeywordsAdded { source: KeywordSource::Detector, keywords: unmodelled })?;
        }
        if changed {
            self.threat_update(step)?;
        }
        Ok(())
    }

    /// Ingests commander evidence. A repeated idempotency key with the same
    /// evidence returns the current state without logging anything.
    pub fn submit_evidence(
        &mut self,
        submission: EvidenceSubmission,
        idempotency_key: Option<String>,
    ) -> Result<EvidenceResult, MissionError> {
        if let Some(key) = &idempotency_key {
            if let Some(previous) = self.idempotency.get(key) {
                if *previous != submission {
                    return Err(MissionError::IdempotencyConflict(key.clone()));
                }
                return Ok(self.evidence_result(true));
            }
        }
        let step = self.sim.current_step();
        let evidence = Evidence {
            step,
            source: EvidenceSource::Commander,
            kind: submission.kind.clone(),
            value: submission.value.clone(),
            region_tag: submission.region_tag.clone(),
        };
        self.ingest_evidence(evidence, idempotency_key.clone())?;
        self.threat_update(step)?;
        if let Some(key) = idempotency_key {
            self.idempotency.insert(key, submission);
        }
        Ok(self.evidence_result(false))
    }

    fn evidence_result(&self, replayed: bool) -> EvidenceResult {
        EvidenceResult {
            beliefs: self.derived.beliefs.clone(),
            documents: self.documents(SUMMARY_DOCUMENTS),
            replayed,
        }
    }
}
