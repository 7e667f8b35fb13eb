//! Independent reference implementations used by several test targets.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use cbrne_core::event::{EventKind, EventRecord};
use cbrne_core::geo::{project, GeoPoint, GridSpec, LocalPoint, EARTH_RADIUS_M};
use cbrne_core::planner::AgentId;

pub mod fusion;

/// Corners of a `w × h` rectangle rotated by `theta`, built directly from
/// the projection formulas rather than through the crate.
pub fn rotated_rectangle(lat: f64, lon: f64, w: f64, h: f64, theta: f64) -> [GeoPoint; 4] {
    let (s, c) = theta.sin_cos();
    let local = [(0.0, 0.0), (w * c, w * s), (w * c - h * s, w * s + h * c), (-h * s, h * c)];
    local.map(|(x, y)| {
        let dlat = (y / EARTH_RADIUS_M).to_degrees();
        let dlon = (x / (EARTH_RADIUS_M * lat.to_radians().cos())).to_degrees();
        GeoPoint::new(lat + dlat, lon + dlon, 0.0)
    })
}

/// Every structural grid invariant: counts, serpentine and lattice gaps, no
/// duplicates, altitude, and corners on the lattice.
pub fn check_grid(grid: &GridSpec, corners: &[GeoPoint; 4], spacing: f64, alt: f64) -> Result<(), String> {
    let fail = |msg: String| Err(msg);
    if grid.rows < 2 || grid.cols < 2 {
        return fail(format!("{} × {} lattice", grid.rows, grid.cols));
    }
    if grid.points.len() != grid.rows * grid.cols {
        return fail(format!("{} points for {} × {}", grid.points.len(), grid.rows, grid.cols));
    }
    let local: Vec<LocalPoint> = grid.local_points();
    let tol = spacing * (1.0 + 1e-6);
    for pair in local.windows(2) {
        if pair[0].distance(&pair[1]) > tol {
            return fail(format!("serpentine step {} > {spacing}", pair[0].distance(&pair[1])));
        }
    }
    let mut at = BTreeMap::new();
    for (i, p) in local.iter().enumerate() {
        at.insert(grid.lattice_position(i), *p);
    }
    if at.len() != local.len() {
        return fail("lattice positions repeat".into());
    }
    for (&(r, c), p) in &at {
        for q in [at.get(&(r, c + 1)), at.get(&(r + 1, c))].into_iter().flatten() {
            if p.distance(q) > tol {
                return fail(format!("lattice gap {} > {spacing}", p.distance(q)));
            }
        }
    }
    for (i, p) in local.iter().enumerate() {
        if local[i + 1..].iter().any(|q| p.distance(q) <= 1e-6) {
            return fail(format!("point {i} is duplicated"));
        }
    }
    if grid.points.iter().any(|p| p.alt != alt) {
        return fail("altitude not applied".into());
    }
    let origin = corners[0];
    for c in corners {
        let lc = project(&origin, c).map_err(|e| e.to_string())?;
        if !local.iter().any(|p| p.distance(&lc) < 1e-6) {
            return fail(format!("corner {c:?} is not a lattice point"));
        }
    }
    Ok(())
}

/// Global greedy written independently: materialize every feasible pair and
/// take the lexicographic minimum of (squared distance, agent, point).
pub fn greedy_oracle(points: &[LocalPoint], agents: &BTreeMap<AgentId, LocalPoint>) -> BTreeMap<AgentId, Vec<usize>> {
    let mut cursor: Vec<(AgentId, LocalPoint)> = agents.iter().map(|(a, p)| (a.clone(), *p)).collect();
    let mut routes: BTreeMap<AgentId, Vec<usize>> = agents.keys().map(|a| (a.clone(), vec![])).collect();
    let mut left: Vec<usize> = (0..points.len()).collect();
    while !left.is_empty() {
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (ai, (_, at)) in cursor.iter().enumerate() {
            for &pi in &left {
                let (dx, dy) = (points[pi].x - at.x, points[pi].y - at.y);
                pairs.push((dx * dx + dy * dy, ai, pi));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let (_, ai, pi) = pairs[0];
        routes.get_mut(&cursor[ai].0).unwrap().push(pi);
        cursor[ai].1 = points[pi];
        left.retain(|&i| i != pi);
    }
    routes
}

/// Classic nearest-neighbour tour from `start`; ties to the lower index.
pub fn nearest_neighbour(points: &[LocalPoint], start: LocalPoint) -> Vec<usize> {
    let mut tour = Vec::new();
    let mut visited = vec![false; points.len()];
    let mut at = start;
    for _ in 0..points.len() {
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            if visited[i] {
                continue;
            }
            let d = (p.x - at.x).powi(2) + (p.y - at.y).powi(2);
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        let (i, _) = best.unwrap();
        visited[i] = true;
        tour.push(i);
        at = points[i];
    }
    tour
}

/// One survivor's view while replaying a log.
#[derive(Debug, Clone, Default)]
struct View {
    assignments: BTreeMap<AgentId, Vec<usize>>,
    declared: BTreeSet<AgentId>,
}

/// A replan recomputed from the log alone.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplanCheck {
    pub seq: u64,
    pub failed: AgentId,
    /// Per decider: (orphans, new assignments).
    pub plans: BTreeMap<AgentId, (Vec<usize>, BTreeMap<AgentId, Vec<usize>>)>,
    pub logged: (Vec<usize>, BTreeMap<AgentId, Vec<usize>>),
}

/// Walks `records` and, at every replan, recomputes each decider's orphan
/// plan from what that decider could have known: the initial assignments,
/// broadcast observations, heartbeat positions and earlier replans.
pub fn recompute_replans(
    records: &[EventRecord],
    initial: &BTreeMap<AgentId, Vec<usize>>,
    points: &[LocalPoint],
) -> Vec<ReplanCheck> {
    let mut views: BTreeMap<AgentId, View> = initial
        .keys()
        .map(|a| (a.clone(), View { assignments: initial.clone(), declared: BTreeSet::new() }))
        .collect();
    let mut observed: BTreeSet<usize> = BTreeSet::new();
    let mut last_pose: BTreeMap<AgentId, LocalPoint> = BTreeMap::new();
    let mut checks = Vec::new();
    for r in records {
        match &r.kind {
            EventKind::Takeoff { agent_id, pose } | EventKind::Heartbeat { agent_id, pose, .. } => {
                last_pose.insert(agent_id.clone(), LocalPoint::new(pose.x, pose.y));
            }
            EventKind::Observation { agent_id, report } => {
                observed.insert(report.point_index);
                for v in views.values_mut() {
                    if let Some(a) = v.assignments.get_mut(agent_id) {
                        a.retain(|&i| i != report.point_index);
                    }
                }
            }
            EventKind::Replan { failed_agent_id, orphan_indices, new_assignments, deciders, .. } => {
                let mut plans = BTreeMap::new();
                for d in deciders {
                    let v = &views[d];
                    let mut orphans: Vec<usize> = v.assignments.get(failed_agent_id).cloned().unwrap_or_default();
                    orphans.retain(|i| !observed.contains(i));
                    orphans.sort_unstable();
                    orphans.dedup();
                    let anchors: BTreeMap<AgentId, LocalPoint> = v
                        .assignments
                        .iter()
                        .filter(|(a, _)| *a != failed_agent_id && !v.declared.contains(*a))
                        .map(|(a, route)| (a.clone(), route.last().map_or(last_pose[a], |&i| points[i])))
                        .collect();
                    let assigned = if anchors.is_empty() {
                        BTreeMap::new()
                    } else {
                        let pts: Vec<LocalPoint> = orphans.iter().map(|&i| points[i]).collect();
                        greedy_oracle(&pts, &anchors)
                            .into_iter()
                            .map(|(a, local)| (a, local.into_iter().map(|j| orphans[j]).collect()))
                            .collect()
                    };
                    plans.insert(d.clone(), (orphans, assigned));
                }
                for d in deciders {
                    let (_, assigned) = plans[d].clone();
                    let v = views.get_mut(d).unwrap();
                    v.declared.insert(failed_agent_id.clone());
                    if let Some(a) = v.assignments.get_mut(failed_agent_id) {
                        a.clear();
                    }
                    for (a, extra) in assigned {
                        v.assignments.entry(a).or_default().extend(extra);
                    }
                }
                checks.push(ReplanCheck {
                    seq: r.seq,
                    failed: failed_agent_id.clone(),
                    plans,
                    logged: (orphan_indices.clone(), new_assignments.clone()),
                });
            }
            _ => {}
        }
    }
    checks
}
