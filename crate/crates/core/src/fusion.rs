//! Discrete Bayesian threat fusion.
//!
//! The hidden state is a `(category, substance)` pair. Evidence items are
//! conditionally independent given the category, and each one multiplies the
//! posterior of every category by a likelihood from the model's table.
//! Continuous readings are first mapped to named buckets by threshold.
//!
//! [`ingest`] updates a belief state one item at a time;
//! [`posterior_by_enumeration`] recomputes the joint from scratch in log space
//! and is used as the reference for it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CHEMICAL: &str = "chemical";
pub const BIOLOGICAL: &str = "biological";
pub const RADIOLOGICAL_NUCLEAR: &str = "radiological_nuclear";
pub const NONE: &str = "none";

/// Category order of the standard model. Ties in argmax resolve to the earlier entry.
pub const DEFAULT_CATEGORIES: [&str; 4] = [CHEMICAL, BIOLOGICAL, RADIOLOGICAL_NUCLEAR, NONE];

const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error("unknown evidence kind {0}")]
    UnknownEvidenceKind(String),
    #[error("evidence kind {kind} has no likelihood row for value {value}")]
    UnknownEvidenceValue { kind: String, value: String },
    #[error("evidence is impossible under every category")]
    ImpossibleEvidence,
    #[error("invalid threat model: {0}")]
    InvalidModel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceSource {
    Commander,
    Detector,
    RadSensor,
    Vegetation,
}

impl EvidenceSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            EvidenceSource::Commander => "commander",
            EvidenceSource::Detector => "detector",
            EvidenceSource::RadSensor => "rad_sensor",
            EvidenceSource::Vegetation => "vegetation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EvidenceValue {
    Number(f64),
    Label(String),
}

impl std::fmt::Display for EvidenceValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EvidenceValue::Number(v) => write!(f, "{v}"),
            EvidenceValue::Label(l) => f.write_str(l),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Evidence {
    pub step: u64,
    pub source: EvidenceSource,
    pub kind: String,
    pub value: EvidenceValue,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_tag: Option<String>,
}

/// Threshold buckets for a numeric evidence kind: values below `thresholds[i]`
/// (and at or above `thresholds[i-1]`) fall in `labels[i]`; the rest in the last label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bucketing {
    pub thresholds: Vec<f64>,
    pub labels: Vec<String>,
}

impl Bucketing {
    pub fn bucket(&self, value: f64) -> &str {
        let i = self.thresholds.iter().take_while(|&&t| value >= t).count();
        &self.labels[i]
    }
}

/// Per category: the likelihood of an observed value bucket.
pub type LikelihoodRow = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThreatModel {
    pub categories: Vec<String>,
    pub substances: BTreeMap<String, Vec<String>>,
    pub prior: BTreeMap<String, f64>,
    pub substance_prior: BTreeMap<String, BTreeMap<String, f64>>,
    /// kind → value bucket → category → likelihood.
    pub likelihoods: BTreeMap<String, BTreeMap<String, LikelihoodRow>>,
    #[serde(default)]
    pub buckets: BTreeMap<String, Bucketing>,
    #[serde(default)]
    pub allow_hard_zero: bool,
}

impl ThreatModel {
    pub fn validate(&self) -> Result<(), FusionError> {
        let bad = |msg: String| Err(FusionError::InvalidModel(msg));
        if self.categories.is_empty() {
            return bad("no categories".into());
        }
        let mut sorted = self.categories.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.categories.len() {
            return bad("duplicate category".into());
        }
        let mut total = 0.0;
        for c in &self.categories {
            let p = match self.prior.get(c) {
                Some(&p) if (0.0..=1.0).contains(&p) => p,
                _ => return bad(format!("prior for {c} missing or not a probability")),
            };
            total += p;
            let subs = self.substances.get(c).map(Vec::as_slice).unwrap_or(&[]);
            if !subs.is_empty() {
                let dist = match self.substance_prior.get(c) {
                    Some(d) => d,
                    None => return bad(format!("substance prior for {c} missing")),
                };
                if dist.len() != subs.len() || subs.iter().any(|s| !dist.contains_key(s)) {
                    return bad(format!("substance prior for {c} does not match its substance list"));
                }
                let sum: f64 = dist.values().sum();
                if dist.values().any(|&p| !(0.0..=1.0).contains(&p)) || (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                    return bad(format!("substance prior for {c} does not sum to 1"));
                }
            }
        }
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return bad(format!("category prior sums to {total}"));
        }
        for key in self.prior.keys().chain(self.substances.keys()) {
            if !self.categories.contains(key) {
                return bad(format!("unknown category {key}"));
            }
        }
        for (kind, rows) in &self.likelihoods {
            for (bucket, row) in rows {
                for c in &self.categories {
                    match row.get(c) {
                        Some(&l) if l.is_finite() && (l > 0.0 || (l == 0.0 && self.allow_hard_zero)) => {}
                        _ => return bad(format!("likelihood {kind}/{bucket}/{c} missing or not positive")),
                    }
                }
                if row.len() != self.categories.len() {
                    return bad(format!("likelihood {kind}/{bucket} names an unknown category"));
                }
            }
        }
        for (kind, b) in &self.buckets {
            if b.labels.len() != b.thresholds.len() + 1 || b.thresholds.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("bucketing for {kind} is malformed"));
            }
            let rows = self
                .likelihoods
                .get(kind)
                .ok_or_else(|| FusionError::InvalidModel(format!("bucketed kind {kind} has no likelihoods")))?;
            if let Some(label) = b.labels.iter().find(|l| !rows.contains_key(*l)) {
                return bad(format!("bucket {kind}/{label} has no likelihood row"));
            }
        }
        Ok(())
    }

    pub fn evidence_kinds(&self) -> impl Iterator<Item = &str> {
        self.likelihoods.keys().map(String::as_str)
    }

    /// Value bucket for an evidence item.
    pub fn bucket_of(&self, kind: &str, value: &EvidenceValue) -> Result<String, FusionError> {
        let rows = self
            .likelihoods
            .get(kind)
            .ok_or_else(|| FusionError::UnknownEvidenceKind(kind.to_owned()))?;
        let bucket = match (value, self.buckets.get(kind)) {
            (EvidenceValue::Number(v), Some(b)) if v.is_finite() => b.bucket(*v).to_owned(),
            (EvidenceValue::Label(l), _) => l.clone(),
            (v, _) => {
                return Err(FusionError::UnknownEvidenceValue {
                    kind: kind.to_owned(),
                    value: v.to_string(),
                })
            }
        };
        if rows.contains_key(&bucket) {
            Ok(bucket)
        } else {
            Err(FusionError::UnknownEvidenceValue {
                kind: kind.to_owned(),
                value: bucket,
            })
        }
    }

    /// Per-category likelihoods of `e`, in category order.
    pub fn likelihoods_of(&self, e: &Evidence) -> Result<Vec<f64>, FusionError> {
        let bucket = self.bucket_of(&e.kind, &e.value)?;
        let row = &self.likelihoods[&e.kind][&bucket];
        Ok(self.categories.iter().map(|c| row[c]).collect())
    }

    fn substances_of(&self, category: &str) -> &[String] {
        self.substances.get(category).map(Vec::as_slice).unwrap_or(&[])
    }

    /// The belief state before any evidence.
    pub fn prior_beliefs(&self) -> BeliefState {
        let category_posterior = self.categories.iter().map(|c| (c.clone(), self.prior[c])).collect();
        let substance_posterior = self
            .categories
            .iter()
            .map(|c| {
                let pc = self.prior[c];
                let dist = self
                    .substances_of(c)
                    .iter()
                    .map(|s| (s.clone(), pc * self.substance_prior[c][s]))
                    .collect();
                (c.clone(), dist)
            })
            .collect();
        BeliefState {
            category_posterior,
            substance_posterior,
            evidence_count: 0,
            last_updated_step: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeliefState {
    pub category_posterior: BTreeMap<String, f64>,
    /// category → substance → joint probability.
    pub substance_posterior: BTreeMap<String, BTreeMap<String, f64>>,
    pub evidence_count: u64,
    pub last_updated_step: u64,
}

impl BeliefState {
    pub fn probability(&self, category: &str) -> f64 {
        self.category_posterior.get(category).copied().unwrap_or(0.0)
    }

    /// Highest-posterior category; ties go to the earliest in `model.categories`.
    pub fn argmax<'m>(&self, model: &'m ThreatModel) -> &'m str {
        let mut best: Option<(&str, f64)> = None;
        for c in &model.categories {
            let p = self.probability(c);
            if best.is_none_or(|(_, bp)| p > bp) {
                best = Some((c, p));
            }
        }
        best.map(|(c, _)| c).unwrap_or(NONE)
    }

    /// Largest absolute difference across all category and substance entries.
    pub fn max_abs_diff(&self, other: &BeliefState) -> f64 {
        let cats = self
            .category_posterior
            .iter()
            .map(|(c, p)| (p - other.probability(c)).abs());
        let subs = self.substance_posterior.iter().flat_map(|(c, dist)| {
            dist.iter().map(move |(s, p)| {
                let q = other.substance_posterior.get(c).and_then(|d| d.get(s)).copied().unwrap_or(0.0);
                (p - q).abs()
            })
        });
        cats.chain(subs).fold(0.0, f64::max)
    }
}

/// Folds one evidence item into `beliefs`.
pub fn ingest(model: &ThreatModel, beliefs: &BeliefState, e: &Evidence) -> Result<BeliefState, FusionError> {
    let likelihoods = model.likelihoods_of(e)?;
    let z: f64 = model
        .categories
        .iter()
        .zip(&likelihoods)
        .map(|(c, l)| beliefs.probability(c) * l)
        .sum();
    if !(z > 0.0) {
        return Err(FusionError::ImpossibleEvidence);
    }
    let mut next = beliefs.clone();
    for (c, l) in model.categories.iter().zip(&likelihoods) {
        let scale = l / z;
        if let Some(p) = next.category_posterior.get_mut(c) {
            *p *= scale;
        }
        if let Some(dist) = next.substance_posterior.get_mut(c) {
            dist.values_mut().for_each(|p| *p *= scale);
        }
    }
    next.evidence_count += 1;
    next.last_updated_step = next.last_updated_step.max(e.step);
    Ok(next)
}

/// Sequential [`ingest`] over a list, starting from the prior.
pub fn ingest_all<'a, I>(model: &ThreatModel, evidence: I) -> Result<BeliefState, FusionError>
where
    I: IntoIterator<Item = &'a Evidence>,
{
    evidence
        .into_iter()
        .try_fold(model.prior_beliefs(), |b, e| ingest(model, &b, e))
}

/// Exact posterior over `(category, substance)` computed from the prior and
/// every likelihood at once, normalized a single time.
pub fn posterior_by_enumeration(model: &ThreatModel, evidence: &[Evidence]) -> Result<BeliefState, FusionError> {
    let mut log_likelihood = vec![0.0_f64; model.categories.len()];
    let mut last_step = 0;
    for e in evidence {
        for (acc, l) in log_likelihood.iter_mut().zip(model.likelihoods_of(e)?) {
            *acc += l.ln();
        }
        last_step = last_step.max(e.step);
    }

    // One cell per (category, substance); a category without substances is a single cell.
    let mut cells: Vec<(usize, Option<&String>, f64)> = Vec::new();
    for (i, c) in model.categories.iter().enumerate() {
        let log_pc = model.prior[c].ln() + log_likelihood[i];
        let subs = model.substances_of(c);
        if subs.is_empty() {
            cells.push((i, None, log_pc));
        }
        for s in subs {
            cells.push((i, Some(s), log_pc + model.substance_prior[c][s].ln()));
        }
    }
    let max = cells.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(FusionError::ImpossibleEvidence);
    }
    let z: f64 = cells.iter().map(|c| (c.2 - max).exp()).sum();

    let mut beliefs = BeliefState {
        category_posterior: model.categories.iter().map(|c| (c.clone(), 0.0)).collect(),
        substance_posterior: model.categories.iter().map(|c| (c.clone(), BTreeMap::new())).collect(),
        evidence_count: evidence.len() as u64,
        last_updated_step: last_step,
    };
    for (i, s, log_p) in cells {
        let p = (log_p - max).exp() / z;
        let c = &model.categories[i];
        *beliefs.category_posterior.get_mut(c).expect("initialized") += p;
        if let Some(s) = s {
            beliefs.substance_posterior.get_mut(c).expect("initialized").insert(s.clone(), p);
        }
    }
    Ok(beliefs)
}

/// Keyword lists attached to categories and substances for document retrieval.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThreatKeywords {
    #[serde(default)]
    pub categories: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub substances: BTreeMap<String, Vec<String>>,
    #[serde(default = "default_substance_threshold")]
    pub substance_threshold: f64,
}

fn default_substance_threshold() -> f64 {
    0.2
}

/// Keywords describing the current belief: those of the most likely category
/// plus those of every substance at or above the threshold.
pub fn top_keywords(model: &ThreatModel, beliefs: &BeliefState, keywords: &ThreatKeywords, k: usize) -> Vec<String> {
    if k == 0 {
        return Vec::new();
    }
    let top = beliefs.argmax(model);
    let mut candidates: Vec<(f64, &String)> = keywords
        .categories
        .get(top)
        .into_iter()
        .flatten()
        .map(|kw| (beliefs.probability(top), kw))
        .collect();
    for (_, dist) in &beliefs.substance_posterior {
        for (s, &p) in dist {
            if p >= keywords.substance_threshold {
                candidates.extend(keywords.substances.get(s).into_iter().flatten().map(|kw| (p, kw)));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    let mut out: Vec<String> = Vec::new();
    for (_, kw) in candidates {
        if !out.contains(kw) {
            out.push(kw.clone());
            if out.len() == k {
                break;
            }
        }
    }
    out
}
