//! Scenario files: one JSON document holding the scene, simulation settings,
//! threat model, survey region, agents and keyword bridge.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fusion::{Evidence, EvidenceValue, FusionError, ThreatKeywords, ThreatModel};
use crate::geo::{GeoError, GeoPoint};
use crate::protocol::messages::{AgentStart, MissionRequest};
use crate::retrieval::{Index, RetrievalError};
use crate::swarm::{SimConfig, SwarmError};
use crate::world::{SceneError, SceneGroundTruth};

pub const RADIATION_KIND: &str = "radiation";
pub const VEGETATION_KIND: &str = "vegetation";
pub const DETECTION_KIND: &str = "detection";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Malformed { path: String, reason: String },
    #[error("scene: {0}")]
    Scene(#[from] SceneError),
    #[error("sim: {0}")]
    Sim(#[from] SwarmError),
    #[error("model: {0}")]
    Model(#[from] FusionError),
    #[error("region: {0}")]
    Region(#[from] GeoError),
    #[error("corpus: {0}")]
    Corpus(#[from] RetrievalError),
    #[error("{0}")]
    Invalid(String),
}

fn default_altitude() -> f64 {
    20.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub corners: [GeoPoint; 4],
    pub spacing_m: f64,
    #[serde(default = "default_altitude")]
    pub altitude_m: f64,
}

fn default_top_k() -> usize {
    5
}

/// How observations turn into retrieval keywords.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeywordBridge {
    /// Detector label → keywords.
    #[serde(default)]
    pub labels: BTreeMap<String, Vec<String>>,
    /// `"kind:bucket"` → keywords, for any ingested evidence.
    #[serde(default)]
    pub evidence: BTreeMap<String, Vec<String>>,
    /// Category and substance keywords for the fusion-driven part of the query.
    #[serde(default)]
    pub threat: ThreatKeywords,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
}

impl KeywordBridge {
    /// Keywords contributed by one evidence item.
    pub fn evidence_keywords(&self, model: &ThreatModel, e: &Evidence) -> Vec<String> {
        let mut out = Vec::new();
        if let Ok(bucket) = model.bucket_of(&e.kind, &e.value) {
            if let Some(kws) = self.evidence.get(&format!("{}:{bucket}", e.kind)) {
                out.extend(kws.iter().cloned());
            }
        }
        if e.kind == DETECTION_KIND {
            if let EvidenceValue::Label(label) = &e.value {
                out.extend(self.label_keywords(label));
            }
        }
        out
    }

    pub fn label_keywords(&self, label: &str) -> Vec<String> {
        self.labels.get(label).cloned().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub scene: SceneGroundTruth,
    pub sim: SimConfig,
    pub model: ThreatModel,
    pub region: RegionSpec,
    pub agents: Vec<AgentStart>,
    #[serde(default)]
    pub keyword_bridge: KeywordBridge,
    /// Corpus directory, relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_dir: Option<PathBuf>,
}

impl ScenarioFile {
    pub fn from_json(text: &str, origin: &str) -> Result<ScenarioFile, ScenarioError> {
        let scenario: ScenarioFile = serde_json::from_str(text).map_err(|e| ScenarioError::Malformed {
            path: origin.to_owned(),
            reason: e.to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Reads and validates a scenario; a relative `corpus_dir` is resolved
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<ScenarioFile, ScenarioError> {
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut scenario = Self::from_json(&text, &path.display().to_string())?;
        if let Some(dir) = &scenario.corpus_dir {
            if dir.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                scenario.corpus_dir = Some(base.join(dir));
            }
        }
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.scene.validate()?;
        self.sim.validate()?;
        self.model.validate()?;
        for c in &self.region.corners {
            c.validate()?;
        }
        if self.agents.is_empty() {
            return Err(ScenarioError::Invalid("scenario has no agents".into()));
        }
        for a in &self.agents {
            a.start.validate()?;
        }
        for f in &self.sim.forced_failures {
            if !self.agents.iter().any(|a| a.agent_id == f.agent_id) {
                return Err(ScenarioError::Invalid(format!("forced failure names unknown agent {}", f.agent_id)));
            }
        }
        for key in self.keyword_bridge.evidence.keys() {
            let Some((kind, bucket)) = key.split_once(':') else {
                return Err(ScenarioError::Invalid(format!("keyword bridge key {key} is not kind:bucket")));
            };
            let known = self.model.likelihoods.get(kind).is_some_and(|rows| rows.contains_key(bucket));
            if !known {
                return Err(ScenarioError::Invalid(format!("keyword bridge key {key} is not in the model")));
            }
        }
        Ok(())
    }

    /// The mission request that surveys this scenario's own region with its
    /// own agents.
    pub fn mission_request(&self, scenario_ref: &str, seed: Option<u64>, max_ticks: Option<u64>) -> MissionRequest {
        MissionRequest {
            mission_id: None,
            corners: self.region.corners,
            spacing_m: self.region.spacing_m,
            altitude_m: Some(self.region.altitude_m),
            agents: self.agents.clone(),
            scenario_ref: scenario_ref.to_owned(),
            seed,
            max_ticks,
        }
    }

    /// Loads the corpus index named by the scenario, or `fallback` if it
    /// names none.
    pub fn load_index(&self, fallback: Option<&Path>) -> Result<Index, ScenarioError> {
        let dir = self
            .corpus_dir
            .as_deref()
            .or(fallback)
            .ok_or_else(|| ScenarioError::Invalid("no corpus directory given".into()))?;
        Ok(Index::load_dir(dir)?)
    }
}
