use std::path::{Path, PathBuf};
use std::sync::Arc;

use cbrne_core::event::{EventKind, EventRecord};
use cbrne_core::fusion::{posterior_by_enumeration, EvidenceValue};
use cbrne_core::mission::{DerivedState, Mission, MissionError};
use cbrne_core::protocol::messages::{EvidenceSubmission, MissionStatus};
use cbrne_core::retrieval::Index;
use cbrne_core::scenario::ScenarioFile;
use proptest::prelude::*;

mod oracle;

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.json"))
}

fn load(name: &str) -> (Arc<ScenarioFile>, Arc<Index>) {
    let scenario = ScenarioFile::load(&scenario_path(name)).unwrap();
    let index = scenario.load_index(None).unwrap();
    (Arc::new(scenario), Arc::new(index))
}

fn mission(name: &str, seed: Option<u64>) -> Mission {
    let (scenario, index) = load(name);
    let request = scenario.mission_request(name, seed, None);
    Mission::create(name, request, scenario, index).unwrap()
}

fn parse_jsonl(text: &str) -> Vec<EventRecord> {
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn evidence(kind: &str, value: EvidenceValue) -> EvidenceSubmission {
    EvidenceSubmission { kind: kind.into(), value, region_tag: None }
}

#[test]
fn demo_ends_radiological_with_the_rail_sop_on_top() {
    let mut m = mission("train_derailment", Some(42));
    m.run_to_end().unwrap();
    assert_eq!(m.status(), MissionStatus::Complete);
    let summary = m.summary();
    assert_eq!(summary.visited, m.grid().len());
    assert_eq!(summary.argmax_category, "radiological_nuclear");
    assert_eq!(summary.top_documents[0].doc_id, "sop-rad-01");
}

#[test]
fn same_seed_gives_identical_logs_and_other_seeds_do_not() {
    let run = |seed| {
        let mut m = mission("train_derailment", Some(seed));
        m.run_to_end().unwrap();
        m.log().to_jsonl()
    };
    assert_eq!(run(42), run(42));
    assert_ne!(run(42), run(43));
}

#[test]
fn persisted_log_replays_to_the_live_state() {
    let mut m = mission("train_derailment", Some(42));
    m.advance(40).unwrap();
    m.submit_evidence(evidence("hazmat_kit", EvidenceValue::Label("negative".into())), Some("k1".into())).unwrap();
    m.run_to_end().unwrap();
    let stored = parse_jsonl(&m.log().to_jsonl());
    assert_eq!(stored, m.log().records());
    let replayed = DerivedState::replay(m.scenario(), m.index().analyzer(), &stored).unwrap();
    assert_eq!(&replayed, m.derived());
    assert_eq!(m.index().rank(&replayed.query, 20), m.documents(20));
}

#[test]
fn final_beliefs_match_enumeration_over_logged_evidence() {
    let mut m = mission("train_derailment", Some(42));
    m.run_to_end().unwrap();
    let evidence: Vec<_> = m
        .log()
        .records()
        .iter()
        .filter_map(|r| match &r.kind {
            EventKind::EvidenceIngested { evidence, .. } => Some(evidence.clone()),
            _ => None,
        })
        .collect();
    assert!(evidence.len() > 63);
    let oracle = posterior_by_enumeration(&m.scenario().model, &evidence).unwrap();
    assert!(m.beliefs().max_abs_diff(&oracle) < 1e-9);
}

#[test]
fn recovery_regenerates_a_cut_short_log() {
    let mut m = mission("train_derailment", Some(42));
    m.advance(25).unwrap();
    m.submit_evidence(evidence("radiation", EvidenceValue::Number(7.5)), Some("a".into())).unwrap();
    m.advance(30).unwrap();
    let full = m.log().records().to_vec();
    let (scenario, index) = load("train_derailment");
    for cut in [full.len(), full.len() - 1, full.len() - 7, 3] {
        let r = Mission::recover("x", m.request().clone(), scenario.clone(), index.clone(), &full[..cut]).unwrap();
        assert!(r.log().len() >= cut);
        assert_eq!(&r.log().records()[..cut], &full[..cut]);
        if cut == full.len() {
            assert_eq!(r.log().records(), &full[..]);
            assert_eq!(r.derived(), m.derived());
        }
    }
}

#[test]
fn recovery_rejects_a_tampered_log() {
    let mut m = mission("train_derailment", Some(42));
    m.advance(20).unwrap();
    let mut stored = m.log().records().to_vec();
    let target = stored.iter().position(|r| matches!(r.kind, EventKind::Observation { .. })).unwrap();
    if let EventKind::Observation { report, .. } = &mut stored[target].kind {
        report.sensor_reading += 1.0;
    }
    let (scenario, index) = load("train_derailment");
    let err = Mission::recover("x", m.request().clone(), scenario, index, &stored).unwrap_err();
    assert_eq!(err, MissionError::ReplayDivergence(stored[target].seq));
}

#[test]
fn idempotency_keys() {
    let mut m = mission("train_derailment", Some(42));
    let sub = evidence("radiation", EvidenceValue::Number(9.0));
    let first = m.submit_evidence(sub.clone(), Some("key".into())).unwrap();
    assert!(!first.replayed);
    let len = m.log().len();
    let second = m.submit_evidence(sub, Some("key".into())).unwrap();
    assert!(second.replayed);
    assert_eq!(second.beliefs, first.beliefs);
    assert_eq!(m.log().len(), len);
    let clash = m.submit_evidence(evidence("radiation", EvidenceValue::Number(0.1)), Some("key".into()));
    assert!(matches!(clash, Err(MissionError::IdempotencyConflict(_))));
    assert_eq!(m.log().len(), len);
    m.submit_evidence(evidence("radiation", EvidenceValue::Number(9.0)), None).unwrap();
    assert_eq!(m.log().len(), len + 2);
}

#[test]
fn uninformative_evidence_changes_nothing_that_matters() {
    let mut m = mission("train_derailment", Some(42));
    m.advance(30).unwrap();
    let beliefs = m.beliefs().clone();
    let ranking = m.documents(20);
    let result = m.submit_evidence(evidence("vegetation", EvidenceValue::Label("healthy".into())), None).unwrap();
    assert!(result.beliefs.max_abs_diff(&beliefs) < 1e-12);
    assert_eq!(m.documents(20), ranking);
}

#[test]
fn high_radiation_raises_radiological_probability() {
    let mut m = mission("train_derailment", Some(42));
    let before = m.beliefs().probability("radiological_nuclear");
    let after = m.submit_evidence(evidence("radiation", EvidenceValue::Number(50.0)), None).unwrap();
    assert!(after.beliefs.probability("radiological_nuclear") > before);
}

#[test]
fn unknown_evidence_kind_is_rejected_without_logging() {
    let mut m = mission("train_derailment", Some(42));
    let len = m.log().len();
    let err = m.submit_evidence(evidence("smell", EvidenceValue::Label("odd".into())), None).unwrap_err();
    assert!(matches!(err, MissionError::Fusion(_)));
    assert_eq!(m.log().len(), len);
}

#[test]
fn advance_edges() {
    let mut m = mission("train_derailment", Some(42));
    assert!(m.advance(0).unwrap().is_empty());
    assert_eq!(m.status(), MissionStatus::Created);
    m.run_to_end().unwrap();
    assert_eq!(m.advance(1), Err(MissionError::Finished("complete")));
    assert!(m.events_since(m.log().last_seq()).is_empty());
    assert_eq!(m.events_since(0).len(), m.log().len());
}

#[test]
fn tick_limit_aborts() {
    let (scenario, index) = load("train_derailment");
    let request = scenario.mission_request("train_derailment", Some(42), Some(5));
    let mut m = Mission::create("short", request, scenario, index).unwrap();
    m.run_to_end().unwrap();
    assert_eq!(m.status(), MissionStatus::Aborted);
    let last = m.log().records().last().unwrap();
    assert_eq!(last.step, 5);
    assert!(matches!(last.kind, EventKind::MaxTicksExceeded { max_ticks: 5, .. }));
}

#[test]
fn fault_scenario_recovers_full_coverage() {
    let mut m = mission("train_derailment_fault", None);
    m.run_to_end().unwrap();
    assert_eq!(m.status(), MissionStatus::Complete);
    assert_eq!(m.summary().visited, m.grid().len());
    let initial = m
        .log()
        .records()
        .iter()
        .filter_map(|r| match &r.kind {
            EventKind::TaskAssignment { agent_id, route } => Some((agent_id.clone(), route.clone())),
            _ => None,
        })
        .collect();
    let points = m.grid().local_points();
    let checks = oracle::recompute_replans(m.log().records(), &initial, &points);
    assert_eq!(checks.len(), 1);
    assert_eq!(checks[0].failed.as_str(), "rav-2");
    assert!(!checks[0].logged.0.is_empty());
    for plan in checks[0].plans.values() {
        assert_eq!(plan, &checks[0].logged);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn successive_polls_concatenate_to_the_log(chunks in prop::collection::vec(0u64..30, 1..10)) {
        let mut m = mission("train_derailment", Some(42));
        let mut cursor = 0;
        let mut seen: Vec<EventRecord> = m.events_since(cursor).to_vec();
        cursor = m.log().last_seq();
        for n in chunks {
            if m.status().is_finished() {
                break;
            }
            m.advance(n).unwrap();
            let batch = m.events_since(cursor).to_vec();
            if let Some(last) = batch.last() {
                cursor = last.seq;
            }
            seen.extend(batch);
        }
        prop_assert_eq!(&seen[..], m.log().records());
    }
}
