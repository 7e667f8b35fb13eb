//! Fixed-tick simulation of the surveying swarm.
//!
//! Each tick visits live agents in id order: a failure draw, movement toward
//! the current waypoint, the battery check, observation on arrival, and a
//! periodic heartbeat. Peer-failure detection then runs on every survivor's
//! own view. An agent unheard for `peer_timeout_heartbeats` heartbeat intervals
//! is declared failed, and each survivor independently recomputes who adopts
//! its unvisited waypoints with [`replan_orphans`].
//!
//! All randomness comes from per-agent ChaCha streams seeded from
//! `sha256(seed ‖ agent_id)`, so draws for one agent do not depend on how
//! many other agents exist or in which order they are processed.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::event::{CompletionReason, EventKind, EventLog, EventRecord};
use crate::geo::LocalPoint;
use crate::planner::{replan_orphans, AgentId, RoutePlan};
use crate::protocol::messages::{ImageMeta, ObservationReport};
use crate::world::SceneGroundTruth;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SwarmError {
    #[error("mission has not been initialized with a route plan")]
    MissionNotInitialized,
    #[error("mission is already initialized")]
    AlreadyInitialized,
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("route plan is inconsistent with the grid: {0}")]
    InvalidPlan(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub alt: f64,
}

impl Pose {
    pub fn local(&self) -> LocalPoint {
        LocalPoint::new(self.x, self.y)
    }

    fn at(p: LocalPoint, alt: f64) -> Pose {
        Pose { x: p.x, y: p.y, alt }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentStatus {
    Idle,
    Enroute,
    Observing,
    Depleted,
    Failed,
}

impl AgentStatus {
    pub fn is_live(&self) -> bool {
        !matches!(self, AgentStatus::Depleted | AgentStatus::Failed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeerInfo {
    pub pose: Pose,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentState {
    pub agent_id: AgentId,
    pub pose: Pose,
    pub status: AgentStatus,
    pub battery: f64,
    /// Remaining waypoint indices, current target first.
    pub route: Vec<usize>,
    pub last_heartbeat_step: u64,
    /// Last heartbeat heard from every agent, this one included.
    pub peer_view: BTreeMap<AgentId, PeerInfo>,
    pub odometer_m: f64,
    /// Ticks spent flying toward a waypoint (each charged the hover cost).
    pub active_ticks: u64,
}

/// Scheduled failure, used to script fault scenarios.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcedFailure {
    pub agent_id: AgentId,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub speed_mps: f64,
    pub tick_seconds: f64,
    pub battery_capacity_m: f64,
    pub hover_cost_m_per_tick: f64,
    pub p_fail_per_tick: f64,
    pub heartbeat_every_ticks: u64,
    pub peer_timeout_heartbeats: u64,
    pub seed: u64,
    #[serde(default = "default_max_ticks")]
    pub max_ticks: u64,
    #[serde(default)]
    pub forced_failures: Vec<ForcedFailure>,
}

fn default_max_ticks() -> u64 {
    10_000
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            speed_mps: 5.0,
            tick_seconds: 1.0,
            battery_capacity_m: 5_000.0,
            hover_cost_m_per_tick: 0.5,
            p_fail_per_tick: 0.0,
            heartbeat_every_ticks: 5,
            peer_timeout_heartbeats: 3,
            seed: 42,
            max_ticks: default_max_ticks(),
            forced_failures: Vec::new(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SwarmError> {
        let bad = |m: &str| Err(SwarmError::InvalidConfig(m.to_owned()));
        if !(self.speed_mps > 0.0 && self.speed_mps.is_finite()) {
            return bad("speed_mps must be positive");
        }
        if !(self.tick_seconds > 0.0 && self.tick_seconds.is_finite()) {
            return bad("tick_seconds must be positive");
        }
        if !(self.battery_capacity_m > 0.0) {
            return bad("battery_capacity_m must be positive");
        }
        if !(self.hover_cost_m_per_tick >= 0.0) {
            return bad("hover_cost_m_per_tick must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.p_fail_per_tick) {
            return bad("p_fail_per_tick must be a probability");
        }
        if self.heartbeat_every_ticks == 0 || self.peer_timeout_heartbeats == 0 {
            return bad("heartbeat interval and timeout must be positive");
        }
        Ok(())
    }

    /// Distance covered in one tick.
    pub fn reach_m(&self) -> f64 {
        self.speed_mps * self.tick_seconds
    }

    /// Ticks without a heartbeat after which a peer is declared failed.
    pub fn timeout_ticks(&self) -> u64 {
        self.peer_timeout_heartbeats * self.heartbeat_every_ticks
    }
}

/// Per-agent stream derived from the mission seed and the agent id.
pub fn agent_rng(seed: u64, agent: &AgentId) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(agent.as_str().as_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

/// What one agent knows about the mission: the assignment table, the points
/// observed so far, and which peers it has declared failed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AgentKnowledge {
    pub assignments: BTreeMap<AgentId, Vec<usize>>,
    pub observed: BTreeSet<usize>,
    pub declared_failed: BTreeSet<AgentId>,
}

/// Orphaned grid indices and their redistribution, as one agent computes it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OrphanPlan {
    pub orphan_indices: Vec<usize>,
    pub new_assignments: BTreeMap<AgentId, Vec<usize>>,
}

/// Computes the redistribution of `failed`'s unvisited waypoints from one
/// agent's knowledge and peer view. Adopters start from the end of their
/// current assignment, or from their last heartbeat position when idle.
pub fn local_orphan_plan(
    knowledge: &AgentKnowledge,
    peer_view: &BTreeMap<AgentId, PeerInfo>,
    failed: &AgentId,
    points: &[LocalPoint],
) -> OrphanPlan {
    let mut orphan_indices: Vec<usize> = knowledge
        .assignments
        .get(failed)
        .into_iter()
        .flatten()
        .copied()
        .filter(|i| !knowledge.observed.contains(i))
        .collect();
    orphan_indices.sort_unstable();
    orphan_indices.dedup();

    let anchors: BTreeMap<AgentId, LocalPoint> = knowledge
        .assignments
        .iter()
        .filter(|(id, _)| *id != failed && !knowledge.declared_failed.contains(*id))
        .filter_map(|(id, assigned)| {
            let anchor = match assigned.last() {
                Some(&i) => points[i],
                None => peer_view.get(id)?.pose.local(),
            };
            Some((id.clone(), anchor))
        })
        .collect();

    let orphan_points: Vec<LocalPoint> = orphan_indices.iter().map(|&i| points[i]).collect();
    let new_assignments = match replan_orphans(&orphan_points, &anchors) {
        Ok(plan) => plan
            .routes
            .into_iter()
            .map(|(id, local)| (id, local.into_iter().map(|j| orphan_indices[j]).collect()))
            .collect(),
        Err(_) => BTreeMap::new(),
    };
    OrphanPlan {
        orphan_indices,
        new_assignments,
    }
}

#[derive(Debug, Clone)]
struct Running {
    agents: BTreeMap<AgentId, AgentState>,
    rngs: BTreeMap<AgentId, ChaCha8Rng>,
    knowledge: BTreeMap<AgentId, AgentKnowledge>,
    observed: BTreeSet<usize>,
    step: u64,
    finished: bool,
    terminal_step: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    config: SimConfig,
    scene: SceneGroundTruth,
    points: Vec<LocalPoint>,
    altitude: f64,
    running: Option<Running>,
}

impl Simulation {
    pub fn new(
        config: SimConfig,
        scene: SceneGroundTruth,
        points: Vec<LocalPoint>,
        altitude: f64,
    ) -> Result<Simulation, SwarmError> {
        config.validate()?;
        Ok(Simulation {
            config,
            scene,
            points,
            altitude,
            running: None,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn points(&self) -> &[LocalPoint] {
        &self.points
    }

    /// Places agents at their start positions with their planned routes and
    /// logs a takeoff for each at step 0.
    pub fn initialize(&mut self, plan: &RoutePlan, log: &mut EventLog) -> Result<(), SwarmError> {
        if self.running.is_some() {
            return Err(SwarmError::AlreadyInitialized);
        }
        plan.check_partition(self.points.len())
            .map_err(|e| SwarmError::InvalidPlan(e.to_string()))?;

        let poses: BTreeMap<AgentId, Pose> = plan
            .start_positions
            .iter()
            .map(|(id, p)| (id.clone(), Pose::at(*p, self.altitude)))
            .collect();
        let peer_view: BTreeMap<AgentId, PeerInfo> = poses
            .iter()
            .map(|(id, pose)| (id.clone(), PeerInfo { pose: *pose, step: 0 }))
            .collect();
        let assignments = plan.routes.clone();

        let mut agents = BTreeMap::new();
        let mut rngs = BTreeMap::new();
        let mut knowledge = BTreeMap::new();
        for (id, pose) in &poses {
            let route = plan.routes.get(id).cloned().unwrap_or_default();
            let status = if route.is_empty() { AgentStatus::Idle } else { AgentStatus::Enroute };
            agents.insert(
                id.clone(),
                AgentState {
                    agent_id: id.clone(),
                    pose: *pose,
                    status,
                    battery: self.config.battery_capacity_m,
                    route,
                    last_heartbeat_step: 0,
                    peer_view: peer_view.clone(),
                    odometer_m: 0.0,
                    active_ticks: 0,
                },
            );
            rngs.insert(id.clone(), agent_rng(self.config.seed, id));
            knowledge.insert(
                id.clone(),
                AgentKnowledge {
                    assignments: assignments.clone(),
                    ..AgentKnowledge::default()
                },
            );
            log.push(0, EventKind::Takeoff { agent_id: id.clone(), pose: *pose });
        }

        self.running = Some(Running {
            agents,
            rngs,
            knowledge,
            observed: BTreeSet::new(),
            step: 0,
            finished: false,
            terminal_step: None,
        });
        Ok(())
    }

    fn running(&self) -> Result<&Running, SwarmError> {
        self.running.as_ref().ok_or(SwarmError::MissionNotInitialized)
    }

    pub fn is_initialized(&self) -> bool {
        self.running.is_some()
    }

    pub fn current_step(&self) -> u64 {
        self.running.as_ref().map_or(0, |r| r.step)
    }

    pub fn is_finished(&self) -> bool {
        self.running.as_ref().is_some_and(|r| r.finished)
    }

    pub fn terminal_step(&self) -> Option<u64> {
        self.running.as_ref().and_then(|r| r.terminal_step)
    }

    pub fn agents(&self) -> Result<&BTreeMap<AgentId, AgentState>, SwarmError> {
        Ok(&self.running()?.agents)
    }

    pub fn observed(&self) -> Result<&BTreeSet<usize>, SwarmError> {
        Ok(&self.running()?.observed)
    }

    pub fn knowledge(&self, agent: &AgentId) -> Option<&AgentKnowledge> {
        self.running.as_ref()?.knowledge.get(agent)
    }

    pub fn unvisited(&self) -> Vec<usize> {
        let observed = self.running.as_ref().map(|r| &r.observed);
        (0..self.points.len())
            .filter(|i| !observed.is_some_and(|o| o.contains(i)))
            .collect()
    }

    /// Moves, observes and heartbeats every live agent, then runs peer-failure
    /// detection. Leaves the completion check to [`Simulation::finish_if_done`].
    pub fn tick(&mut self, log: &mut EventLog) -> Result<Vec<EventRecord>, SwarmError> {
        let first_new = log.len();
        let config = &self.config;
        let scene = &self.scene;
        let points = &self.points;
        let run = self.running.as_mut().ok_or(SwarmError::MissionNotInitialized)?;
        if run.finished {
            return Ok(Vec::new());
        }
        run.step += 1;
        let t = run.step;
        let reach = config.reach_m();

        let ids: Vec<AgentId> = run.agents.keys().cloned().collect();
        for id in &ids {
            let agent = run.agents.get_mut(id).expect("known agent");
            if !agent.status.is_live() {
                continue;
            }
            let rng = run.rngs.get_mut(id).expect("every agent has a stream");

            let drawn = rng.random_bool(config.p_fail_per_tick);
            let forced = config.forced_failures.iter().any(|f| &f.agent_id == id && f.step == t);
            if drawn || forced {
                agent.status = AgentStatus::Failed;
                log.push(
                    t,
                    EventKind::AgentFailed { agent_id: id.clone(), pose: agent.pose, remaining: agent.route.clone() },
                );
                continue;
            }

            let mut arrived = None;
            if let Some(&target) = agent.route.first() {
                let here = agent.pose.local();
                let goal = points[target];
                let d = here.distance(&goal);
                // Within half a tick of travel after this move counts as arrival.
                let moved = if d <= 1.5 * reach { d } else { reach };
                if moved == d {
                    agent.pose = Pose::at(goal, agent.pose.alt);
                    arrived = Some(target);
                } else {
                    let f = moved / d;
                    agent.pose.x = here.x + (goal.x - here.x) * f;
                    agent.pose.y = here.y + (goal.y - here.y) * f;
                }
                agent.battery -= moved + config.hover_cost_m_per_tick;
                agent.odometer_m += moved;
                agent.active_ticks += 1;
                agent.status = AgentStatus::Enroute;
            } else {
                agent.status = AgentStatus::Idle;
            }

            if agent.battery <= 0.0 {
                agent.battery = 0.0;
                agent.status = AgentStatus::Depleted;
                log.push(
                    t,
                    EventKind::AgentDepleted { agent_id: id.clone(), pose: agent.pose, remaining: agent.route.clone() },
                );
                continue;
            }

            if let Some(index) = arrived {
                agent.route.remove(0);
                agent.status = AgentStatus::Observing;
                log.push(t, EventKind::WaypointReached { agent_id: id.clone(), point_index: index });
                let pos = agent.pose.local();
                let sensor_reading = scene.sample_sensor(&pos, rng);
                let detections = scene.sample_detections(&pos, rng);
                let vegetation = scene.vegetation_observation(&pos);
                let report = ObservationReport {
                    point_index: index,
                    sensor_reading,
                    detections,
                    vegetation,
                    image_meta: ImageMeta {
                        image_id: format!("img-{id}-{index:04}-{t}"),
                        agent_id: id.clone(),
                        step: t,
                    },
                };
                log.push(t, EventKind::Observation { agent_id: id.clone(), report });
                let fresh = run.observed.insert(index);
                debug_assert!(fresh, "point {index} observed twice");
                for k in run.knowledge.values_mut() {
                    k.observed.insert(index);
                    if let Some(a) = k.assignments.get_mut(id) {
                        a.retain(|&i| i != index);
                    }
                }
            }

            if t % config.heartbeat_every_ticks == 0 {
                let agent = run.agents.get_mut(id).expect("known agent");
                agent.last_heartbeat_step = t;
                let info = PeerInfo { pose: agent.pose, step: t };
                log.push(
                    t,
                    EventKind::Heartbeat {
                        agent_id: id.clone(),
                        pose: agent.pose,
                        battery: agent.battery,
                        status: agent.status,
                    },
                );
                for other in run.agents.values_mut() {
                    other.peer_view.insert(id.clone(), info);
                }
            }
        }

        Self::detect_peer_failures(config, points, run, t, log);
        Ok(log.records()[first_new..].to_vec())
    }

    /// Logs `mission_complete` if every point is observed or no agent is
    /// live. Returns whether the mission is finished.
    pub fn finish_if_done(&mut self, log: &mut EventLog) -> Result<bool, SwarmError> {
        let n_points = self.points.len();
        let run = self.running.as_mut().ok_or(SwarmError::MissionNotInitialized)?;
        if run.finished {
            return Ok(true);
        }
        let t = run.step;
        let points = &self.points;
        if run.observed.len() == n_points || !run.agents.values().any(|a| a.status.is_live()) {
            let reason = if run.observed.len() == points.len() {
                CompletionReason::AllPointsObserved
            } else {
                CompletionReason::NoLiveAgents
            };
            let visited: Vec<usize> = run.observed.iter().copied().collect();
            let unvisited = (0..points.len()).filter(|i| !run.observed.contains(i)).collect();
            log.push(t, EventKind::MissionComplete { reason, visited, unvisited });
            run.finished = true;
            run.terminal_step = Some(t);
        }
        Ok(run.finished)
    }

    /// Advances one tick, including the completion check. Returns the events
    /// it produced (none once finished).
    pub fn step(&mut self, log: &mut EventLog) -> Result<Vec<EventRecord>, SwarmError> {
        let first_new = log.len();
        self.tick(log)?;
        self.finish_if_done(log)?;
        Ok(log.records()[first_new..].to_vec())
    }

    fn detect_peer_failures(config: &SimConfig, points: &[LocalPoint], run: &mut Running, t: u64, log: &mut EventLog) {
        let survivors: Vec<AgentId> = run
            .agents
            .iter()
            .filter(|(_, a)| a.status.is_live())
            .map(|(id, _)| id.clone())
            .collect();

        // Each survivor judges silence from its own peer view.
        let mut suspected: BTreeMap<AgentId, Vec<AgentId>> = BTreeMap::new();
        for s in &survivors {
            let view = &run.agents[s].peer_view;
            let know = &run.knowledge[s];
            for (peer, info) in view {
                if peer != s && !know.declared_failed.contains(peer) && t - info.step >= config.timeout_ticks() {
                    suspected.entry(peer.clone()).or_default().push(s.clone());
                }
            }
        }

        for (failed, deciders) in suspected {
            let last_seen_step = run.agents[&deciders[0]].peer_view[&failed].step;
            let plans: Vec<OrphanPlan> = deciders
                .iter()
                .map(|s| local_orphan_plan(&run.knowledge[s], &run.agents[s].peer_view, &failed, points))
                .collect();
            let plans_agree = plans.windows(2).all(|w| w[0] == w[1]);

            for (s, plan) in deciders.iter().zip(&plans) {
                let know = run.knowledge.get_mut(s).expect("survivor knowledge");
                know.declared_failed.insert(failed.clone());
                if let Some(a) = know.assignments.get_mut(&failed) {
                    a.clear();
                }
                for (adopter, extra) in &plan.new_assignments {
                    know.assignments.entry(adopter.clone()).or_default().extend(extra);
                }
            }

            let agreed = plans.into_iter().next().expect("at least one decider");
            for (adopter, extra) in &agreed.new_assignments {
                if let Some(a) = run.agents.get_mut(adopter) {
                    a.route.extend(extra);
                }
            }
            log.push(
                t,
                EventKind::Replan {
                    failed_agent_id: failed,
                    last_seen_step,
                    orphan_indices: agreed.orphan_indices,
                    new_assignments: agreed.new_assignments,
                    deciders,
                    plans_agree,
                },
            );
        }
    }

    /// Records the terminal `max_ticks_exceeded` event and stops the mission.
    pub fn abort_max_ticks(&mut self, log: &mut EventLog) -> Result<(), SwarmError> {
        let max_ticks = self.config.max_ticks;
        let unvisited = self.unvisited();
        let run = self.running.as_mut().ok_or(SwarmError::MissionNotInitialized)?;
        if run.finished {
            return Ok(());
        }
        log.push(run.step, EventKind::MaxTicksExceeded { max_ticks, unvisited });
        run.finished = true;
        run.terminal_step = Some(run.step);
        Ok(())
    }

    /// Steps until the mission completes or `max_ticks` is reached.
    /// Returns `true` on completion.
    pub fn run_to_end(&mut self, log: &mut EventLog) -> Result<bool, SwarmError> {
        while !self.is_finished() {
            if self.current_step() >= self.config.max_ticks {
                self.abort_max_ticks(log)?;
                return Ok(false);
            }
            self.step(log)?;
        }
        Ok(matches!(log.records().last().map(|r| &r.kind), Some(EventKind::MissionComplete { .. })))
    }
}
