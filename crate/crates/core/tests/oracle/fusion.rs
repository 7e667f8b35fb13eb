//! Random threat models and a brute-force joint posterior.

use std::collections::BTreeMap;

use cbrne_core::fusion::{Bucketing, Evidence, EvidenceSource, EvidenceValue, ThreatModel};
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn normalized(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / z).collect()
}

/// A random model with up to 4 categories × 5 substances and up to three
/// evidence kinds, one of them numeric with threshold buckets.
pub fn random_model(rng: &mut ChaCha8Rng) -> ThreatModel {
    let n_cat = rng.random_range(1..=4);
    let categories: Vec<String> = (0..n_cat).map(|i| format!("cat{i}")).collect();
    let prior = categories.iter().cloned().zip(normalized(rng, n_cat)).collect();
    let mut substances = BTreeMap::new();
    let mut substance_prior = BTreeMap::new();
    for c in &categories {
        let n_sub = rng.random_range(0..=5);
        if n_sub > 0 {
            let names: Vec<String> = (0..n_sub).map(|j| format!("{c}-sub{j}")).collect();
            substance_prior.insert(c.clone(), names.iter().cloned().zip(normalized(rng, n_sub)).collect());
            substances.insert(c.clone(), names);
        }
    }
    let mut likelihoods = BTreeMap::new();
    let mut buckets = BTreeMap::new();
    for k in 0..rng.random_range(1..=3) {
        let kind = format!("kind{k}");
        let labels: Vec<String> = (0..rng.random_range(1..=3)).map(|b| format!("b{b}")).collect();
        let rows = labels
            .iter()
            .map(|b| (b.clone(), categories.iter().map(|c| (c.clone(), rng.random_range(0.05..5.0))).collect()))
            .collect();
        likelihoods.insert(kind.clone(), rows);
        if k == 0 {
            let thresholds = (1..labels.len()).map(|t| t as f64 * 10.0).collect();
            buckets.insert(kind, Bucketing { thresholds, labels });
        }
    }
    let model = ThreatModel { categories, substances, prior, substance_prior, likelihoods, buckets, allow_hard_zero: false };
    model.validate().unwrap();
    model
}

pub fn random_evidence(rng: &mut ChaCha8Rng, model: &ThreatModel, n: usize) -> Vec<Evidence> {
    (0..n)
        .map(|step| {
            let kinds: Vec<&String> = model.likelihoods.keys().collect();
            let kind = (*kinds.choose(rng).unwrap()).clone();
            let value = if model.buckets.contains_key(&kind) {
                EvidenceValue::Number(rng.random_range(0.0..40.0))
            } else {
                let labels: Vec<&String> = model.likelihoods[&kind].keys().collect();
                EvidenceValue::Label((*labels.choose(rng).unwrap()).clone())
            };
            Evidence { step: step as u64, source: EvidenceSource::Commander, kind, value, region_tag: None }
        })
        .collect()
}

/// Joint posterior over (category, substance) by direct multiplication.
pub fn joint_oracle(model: &ThreatModel, evidence: &[Evidence]) -> (BTreeMap<String, f64>, BTreeMap<(String, String), f64>) {
    let mut cells: Vec<(String, Option<String>, f64)> = Vec::new();
    for c in &model.categories {
        let mut w = model.prior[c];
        for e in evidence {
            let bucket = match (&e.value, model.buckets.get(&e.kind)) {
                (EvidenceValue::Number(v), Some(b)) => {
                    let i = b.thresholds.iter().filter(|t| *v >= **t).count();
                    b.labels[i].clone()
                }
                (EvidenceValue::Label(l), _) => l.clone(),
                _ => unreachable!(),
            };
            w *= model.likelihoods[&e.kind][&bucket][c];
        }
        match model.substances.get(c) {
            Some(subs) if !subs.is_empty() => {
                for s in subs {
                    cells.push((c.clone(), Some(s.clone()), w * model.substance_prior[c][s]));
                }
            }
            _ => cells.push((c.clone(), None, w)),
        }
    }
    let z: f64 = cells.iter().map(|c| c.2).sum();
    let mut cats = BTreeMap::new();
    let mut subs = BTreeMap::new();
    for (c, s, w) in cells {
        *cats.entry(c.clone()).or_insert(0.0) += w / z;
        if let Some(s) = s {
            subs.insert((c, s), w / z);
        }
    }
    (cats, subs)
}
