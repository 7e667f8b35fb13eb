//! Centralized greedy route construction over survey waypoints.
//!
//! Every step picks the globally closest `(agent, unvisited point)` pair,
//! measured from each agent's cursor (its start position, then the last point
//! it was given). Exact distance ties fall to the lower agent id, then the lower
//! point index, so the plan is a pure function of its inputs. Survivors of a
//! peer failure reuse the same procedure through [`replan_orphans`] and reach
//! the same answer without coordinating.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::LocalPoint;

/// Identifier of a surveying agent. Ordering is plain lexicographic.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub String);

impl AgentId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AgentId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("at least one agent is required")]
    NoAgents,
    #[error("duplicate agent id {0}")]
    DuplicateAgent(AgentId),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
}

/// Per-agent ordered waypoint indices plus the positions the routes start from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutePlan {
    pub routes: BTreeMap<AgentId, Vec<usize>>,
    pub start_positions: BTreeMap<AgentId, LocalPoint>,
}

impl RoutePlan {
    /// Checks the partition property against `n_points` waypoints.
    pub fn check_partition(&self, n_points: usize) -> Result<(), PlanError> {
        let mut seen = vec![false; n_points];
        for (agent, route) in &self.routes {
            if !self.start_positions.contains_key(agent) {
                return Err(PlanError::InvalidPlan(format!("route for unknown agent {agent}")));
            }
            for &idx in route {
                match seen.get_mut(idx) {
                    None => return Err(PlanError::InvalidPlan(format!("index {idx} out of range"))),
                    Some(true) => return Err(PlanError::InvalidPlan(format!("index {idx} assigned twice"))),
                    Some(slot) => *slot = true,
                }
            }
        }
        if let Some(agent) = self.start_positions.keys().find(|a| !self.routes.contains_key(*a)) {
            return Err(PlanError::InvalidPlan(format!("agent {agent} has no route")));
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(PlanError::InvalidPlan(format!("index {missing} unassigned")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteMetrics {
    pub per_agent_distance: BTreeMap<AgentId, f64>,
    pub total_distance: f64,
    pub makespan: f64,
}

/// Collects `(id, start)` pairs into the ordered map the planner consumes.
pub fn agents_from_list<I>(agents: I) -> Result<BTreeMap<AgentId, LocalPoint>, PlanError>
where
    I: IntoIterator<Item = (AgentId, LocalPoint)>,
{
    let mut map = BTreeMap::new();
    for (id, start) in agents {
        if map.contains_key(&id) {
            return Err(PlanError::DuplicateAgent(id));
        }
        map.insert(id, start);
    }
    Ok(map)
}

/// A route-construction heuristic. [`GreedyNearest`] is the only one shipped.
pub trait RouteStrategy {
    fn plan(&self, points: &[LocalPoint], agents: &BTreeMap<AgentId, LocalPoint>) -> Result<RoutePlan, PlanError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyNearest;

impl RouteStrategy for GreedyNearest {
    fn plan(&self, points: &[LocalPoint], agents: &BTreeMap<AgentId, LocalPoint>) -> Result<RoutePlan, PlanError> {
        if agents.is_empty() {
            return Err(PlanError::NoAgents);
        }
        let ids: Vec<&AgentId> = agents.keys().collect();
        let mut cursors: Vec<LocalPoint> = agents.values().copied().collect();
        let mut routes: Vec<Vec<usize>> = vec![Vec::new(); ids.len()];
        let mut unvisited: Vec<usize> = (0..points.len()).collect();

        while !unvisited.is_empty() {
            // (squared distance, agent slot, position in `unvisited`); strict `<`
            // while scanning in id then index order realizes the tie-break.
            let mut best: Option<(f64, usize, usize)> = None;
            for (slot, cursor) in cursors.iter().enumerate() {
                for (pos, &idx) in unvisited.iter().enumerate() {
                    let d = cursor.distance_squared(&points[idx]);
                    if best.is_none_or(|(bd, _, _)| d < bd) {
                        best = Some((d, slot, pos));
                    }
                }
            }
            let (_, slot, pos) = best.expect("unvisited is non-empty");
            let idx = unvisited.remove(pos);
            routes[slot].push(idx);
            cursors[slot] = points[idx];
        }

        Ok(RoutePlan {
            routes: ids.iter().map(|id| (*id).clone()).zip(routes).collect(),
            start_positions: agents.clone(),
        })
    }
}

/// Plans routes for `agents` over `points` with the greedy nearest-pair rule.
pub fn plan_routes(points: &[LocalPoint], agents: &BTreeMap<AgentId, LocalPoint>) -> Result<RoutePlan, PlanError> {
    GreedyNearest.plan(points, agents)
}

/// Redistributes the waypoints a failed agent left behind. Indices in the
/// returned plan refer to positions in `orphan_points`.
pub fn replan_orphans(
    orphan_points: &[LocalPoint],
    survivors: &BTreeMap<AgentId, LocalPoint>,
) -> Result<RoutePlan, PlanError> {
    plan_routes(orphan_points, survivors)
}

pub fn route_metrics(plan: &RoutePlan, points: &[LocalPoint]) -> Result<RouteMetrics, PlanError> {
    let mut per_agent_distance = BTreeMap::new();
    for (agent, route) in &plan.routes {
        let start = plan
            .start_positions
            .get(agent)
            .ok_or_else(|| PlanError::InvalidPlan(format!("agent {agent} has no start position")))?;
        let mut cursor = *start;
        let mut distance = 0.0;
        for &idx in route {
            let p = points
                .get(idx)
                .ok_or_else(|| PlanError::InvalidPlan(format!("index {idx} out of range for {} points", points.len())))?;
            distance += cursor.distance(p);
            cursor = *p;
        }
        per_agent_distance.insert(agent.clone(), distance);
    }
    let total_distance = per_agent_distance.values().sum();
    let makespan = per_agent_distance.values().copied().fold(0.0, f64::max);
    Ok(RouteMetrics {
        per_agent_distance,
        total_distance,
        makespan,
    })
}
