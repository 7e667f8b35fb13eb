use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use cbrne_core::mission::{Mission, MissionError};
use cbrne_core::protocol::messages::{
    AgentRoster, DocumentRanking, EventBatch, EvidenceResult, EvidenceSubmission, MissionRequest, MissionSummary,
    PlanSnapshot, ThreatUpdate,
};
use cbrne_core::retrieval::Index;
use cbrne_core::scenario::ScenarioFile;
use tokio::sync::{Mutex, RwLock};

use crate::config::HubConfig;
use crate::store::{MissionMeta, Store};
use crate::HubError;

/// Longest advance a single request may ask for.
pub const MAX_ADVANCE_TICKS: u64 = 1_000_000;

struct Entry {
    mission: Mission,
    /// Records already on disk.
    persisted: usize,
}

type Loaded = (Arc<ScenarioFile>, Arc<Index>);

/// All missions the hub serves. Mutations to one mission are serialized
/// through its own lock; different missions proceed independently.
pub struct Hub {
    config: HubConfig,
    store: Store,
    missions: RwLock<BTreeMap<String, Arc<Mutex<Entry>>>>,
    scenarios: std::sync::Mutex<HashMap<String, Loaded>>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl Hub {
    /// Opens the data directory and rebuilds every stored mission by replay.
    /// A mission whose log no longer replays is skipped with a warning.
    pub fn open(config: HubConfig) -> Result<Hub, HubError> {
        let store = Store::open(&config.data_dir)?;
        let hub = Hub {
            config,
            store,
            missions: RwLock::new(BTreeMap::new()),
            scenarios: std::sync::Mutex::new(HashMap::new()),
        };
        let mut recovered = BTreeMap::new();
        for id in hub.store.mission_ids()? {
            match hub.recover(&id) {
                Ok(entry) => {
                    recovered.insert(id, Arc::new(Mutex::new(entry)));
                }
                Err(e) => tracing::warn!(mission = %id, error = %e, "skipping mission that failed to recover"),
            }
        }
        tracing::info!(missions = recovered.len(), "recovered stored missions");
        *hub.missions.try_write().expect("no other handle yet") = recovered;
        Ok(hub)
    }

    fn recover(&self, id: &str) -> Result<Entry, HubError> {
        let meta = self.store.read_meta(id)?;
        let stored = self.store.read_log(id)?;
        let (scenario, index) = self.scenario(&meta.request.scenario_ref)?;
        let mission = Mission::recover(id, meta.request, scenario, index, &stored.records)?;
        if stored.truncated_tail || mission.log().len() != stored.records.len() {
            self.store.rewrite(id, mission.log().records())?;
        }
        let persisted = mission.log().len();
        Ok(Entry { mission, persisted })
    }

    pub fn config(&self) -> &HubConfig {
        &self.config
    }

    /// Loads `{scenarios_dir}/{name}.json` and its corpus, cached by name.
    pub fn scenario(&self, name: &str) -> Result<Loaded, HubError> {
        if !valid_id(name) {
            return Err(HubError::UnknownScenario(name.to_owned()));
        }
        if let Some(hit) = self.scenarios.lock().expect("scenario cache").get(name) {
            return Ok(hit.clone());
        }
        let path = self.config.scenarios_dir.join(format!("{name}.json"));
        if !path.exists() {
            return Err(HubError::UnknownScenario(name.to_owned()));
        }
        let scenario = ScenarioFile::load(&path).map_err(|e| HubError::Scenario(e.to_string()))?;
        let index = match &self.config.corpus_dir {
            Some(dir) => Index::load_dir(dir).map_err(|e| HubError::Scenario(e.to_string()))?,
            None => scenario.load_index(None).map_err(|e| HubError::Scenario(e.to_string()))?,
        };
        let loaded = (Arc::new(scenario), Arc::new(index));
        self.scenarios.lock().expect("scenario cache").insert(name.to_owned(), loaded.clone());
        Ok(loaded)
    }

    async fn entry(&self, id: &str) -> Result<Arc<Mutex<Entry>>, HubError> {
        self.missions.read().await.get(id).cloned().ok_or_else(|| HubError::NotFound(id.to_owned()))
    }

    fn persist(&self, entry: &mut Entry) -> Result<(), HubError> {
        let records = &entry.mission.log().records()[entry.persisted..];
        self.store.append(entry.mission.id(), records)?;
        entry.persisted = entry.mission.log().len();
        Ok(())
    }

    pub async fn mission_ids(&self) -> Vec<String> {
        self.missions.read().await.keys().cloned().collect()
    }

    pub async fn create(&self, request: MissionRequest) -> Result<PlanSnapshot, HubError> {
        let id = match &request.mission_id {
            Some(id) if !valid_id(id) => {
                return Err(HubError::Mission(MissionError::InvalidRequest(format!(
                    "mission_id {id:?} may only use letters, digits, '-' and '_'"
                ))))
            }
            Some(id) => id.clone(),
            None => uuid::Uuid::new_v4().to_string(),
        };
        let (scenario, index) = self.scenario(&request.scenario_ref)?;
        let mut missions = self.missions.write().await;
        if missions.contains_key(&id) || self.store.exists(&id) {
            return Err(HubError::MissionExists(id));
        }
        let mission = Mission::create(id.clone(), request.clone(), scenario, index)?;
        self.store.create(&MissionMeta { mission_id: id.clone(), request })?;
        let mut entry = Entry { mission, persisted: 0 };
        self.persist(&mut entry)?;
        let snapshot = entry.mission.plan_snapshot();
        missions.insert(id, Arc::new(Mutex::new(entry)));
        Ok(snapshot)
    }

    pub async fn summary(&self, id: &str) -> Result<MissionSummary, HubError> {
        Ok(self.entry(id).await?.lock().await.mission.summary())
    }

    pub async fn plan(&self, id: &str) -> Result<PlanSnapshot, HubError> {
        Ok(self.entry(id).await?.lock().await.mission.plan_snapshot())
    }

    pub async fn advance(&self, id: &str, ticks: u64) -> Result<EventBatch, HubError> {
        if ticks > MAX_ADVANCE_TICKS {
            return Err(HubError::Mission(MissionError::InvalidRequest(format!(
                "ticks {ticks} exceeds the per-request limit {MAX_ADVANCE_TICKS}"
            ))));
        }
        let entry = self.entry(id).await?;
        let mut entry = entry.lock().await;
        let result = entry.mission.advance(ticks);
        self.persist(&mut entry)?;
        let events = result?;
        Ok(EventBatch { events, last_seq: entry.mission.log().last_seq() })
    }

    pub async fn submit_evidence(
        &self,
        id: &str,
        submission: EvidenceSubmission,
        idempotency_key: Option<String>,
    ) -> Result<EvidenceResult, HubError> {
        let entry = self.entry(id).await?;
        let mut entry = entry.lock().await;
        let result = entry.mission.submit_evidence(submission, idempotency_key)?;
        self.persist(&mut entry)?;
        Ok(result)
    }

    pub async fn beliefs(&self, id: &str) -> Result<ThreatUpdate, HubError> {
        Ok(ThreatUpdate { beliefs: self.entry(id).await?.lock().await.mission.beliefs().clone() })
    }

    pub async fn documents(&self, id: &str, limit: usize) -> Result<DocumentRanking, HubError> {
        let entry = self.entry(id).await?;
        let entry = entry.lock().await;
        Ok(DocumentRanking {
            documents: entry.mission.documents(limit),
            keywords: entry.mission.query().keywords.clone(),
        })
    }

    pub async fn events(&self, id: &str, since: u64) -> Result<EventBatch, HubError> {
        let entry = self.entry(id).await?;
        let entry = entry.lock().await;
        Ok(EventBatch {
            events: entry.mission.events_since(since).to_vec(),
            last_seq: entry.mission.log().last_seq(),
        })
    }

    pub async fn agents(&self, id: &str) -> Result<AgentRoster, HubError> {
        Ok(self.entry(id).await?.lock().await.mission.roster())
    }
}
