//! One JSON-lines log per mission plus a metadata sidecar.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use cbrne_core::event::EventRecord;
use cbrne_core::protocol::canonical::to_canonical_line;
use cbrne_core::protocol::messages::MissionRequest;
use serde::{Deserialize, Serialize};

use crate::HubError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionMeta {
    pub mission_id: String,
    pub request: MissionRequest,
}

/// A stored log read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredLog {
    pub records: Vec<EventRecord>,
    /// A final line that did not parse, as left by an interrupted write.
    pub truncated_tail: bool,
}

#[derive(Debug, Clone)]
pub struct Store {
    dir: PathBuf,
}

fn io_err(path: &Path, e: std::io::Error) -> HubError {
    HubError::Storage(format!("{}: {e}", path.display()))
}

impl Store {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Store, HubError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        Ok(Store { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn log_path(&self, mission_id: &str) -> PathBuf {
        self.dir.join(format!("{mission_id}.jsonl"))
    }

    pub fn meta_path(&self, mission_id: &str) -> PathBuf {
        self.dir.join(format!("{mission_id}.meta.json"))
    }

    pub fn exists(&self, mission_id: &str) -> bool {
        self.meta_path(mission_id).exists()
    }

    /// Writes the sidecar and an empty log for a new mission.
    pub fn create(&self, meta: &MissionMeta) -> Result<(), HubError> {
        let path = self.meta_path(&meta.mission_id);
        let json = serde_json::to_string_pretty(meta).expect("metadata serializes");
        fs::write(&path, json).map_err(|e| io_err(&path, e))?;
        let log = self.log_path(&meta.mission_id);
        File::create(&log).map_err(|e| io_err(&log, e))?;
        Ok(())
    }

    pub fn append(&self, mission_id: &str, records: &[EventRecord]) -> Result<(), HubError> {
        if records.is_empty() {
            return Ok(());
        }
        let path = self.log_path(mission_id);
        let mut file = OpenOptions::new().append(true).create(true).open(&path).map_err(|e| io_err(&path, e))?;
        let text: String = records.iter().map(to_canonical_line).collect();
        file.write_all(text.as_bytes()).map_err(|e| io_err(&path, e))?;
        file.sync_data().map_err(|e| io_err(&path, e))
    }

    /// Replaces a log wholesale, used after recovery regenerated its tail.
    pub fn rewrite(&self, mission_id: &str, records: &[EventRecord]) -> Result<(), HubError> {
        let path = self.log_path(mission_id);
        let tmp = path.with_extension("jsonl.tmp");
        let text: String = records.iter().map(to_canonical_line).collect();
        fs::write(&tmp, text).map_err(|e| io_err(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| io_err(&path, e))
    }

    pub fn read_meta(&self, mission_id: &str) -> Result<MissionMeta, HubError> {
        let path = self.meta_path(mission_id);
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        serde_json::from_str(&text).map_err(|e| HubError::Storage(format!("{}: {e}", path.display())))
    }

    pub fn read_log(&self, mission_id: &str) -> Result<StoredLog, HubError> {
        let path = self.log_path(mission_id);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(io_err(&path, e)),
        };
        let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        let mut records = Vec::with_capacity(lines.len());
        let mut truncated_tail = false;
        for (i, line) in lines.iter().enumerate() {
            match serde_json::from_str::<EventRecord>(line) {
                Ok(r) => records.push(r),
                Err(_) if i + 1 == lines.len() => truncated_tail = true,
                Err(e) => return Err(HubError::Storage(format!("{}:{}: {e}", path.display(), i + 1))),
            }
        }
        Ok(StoredLog { records, truncated_tail })
    }

    /// Ids of every mission with a sidecar, sorted.
    pub fn mission_ids(&self) -> Result<Vec<String>, HubError> {
        let entries = fs::read_dir(&self.dir).map_err(|e| io_err(&self.dir, e))?;
        let mut ids: Vec<String> = entries
            .filter_map(Result::ok)
            .filter_map(|e| e.file_name().to_str()?.strip_suffix(".meta.json").map(String::from))
            .collect();
        ids.sort();
        Ok(ids)
    }
}
