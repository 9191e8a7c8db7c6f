//! Session records and their on-disk persistence.
//!
//! Each session lives in `<data-dir>/<session_id>.json`, rewritten with
//! write-temp-then-rename after every accepted outcome. On startup every file
//! is replayed from its history and the resulting digest must match the
//! stored one.

use std::collections::HashMap;
use std::ffi::OsStr;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;
use tssort::{
    Algorithm, ComparisonOutcome, EngineParams, PairChoice, RankedItem, SessionSnapshot,
    SortSession,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{0}")]
    Validation(String),
    #[error("session is finished after {0} comparisons")]
    Finished(usize),
    #[error("pair token {given:?} is stale; the current pair token is {current:?}")]
    StalePair { given: String, current: String },
    #[error("storage failure at {path}: {message}")]
    Storage { path: String, message: String },
    #[error("corrupt session file {path}: {message}")]
    Corrupt { path: String, message: String },
    #[error(transparent)]
    Engine(#[from] tssort::Error),
}

fn storage(path: &Path, err: impl std::fmt::Display) -> StoreError {
    StoreError::Storage {
        path: path.display().to_string(),
        message: err.to_string(),
    }
}

/// Document stored per session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistedSession {
    pub schema_version: u32,
    pub session_id: String,
    pub item_labels: Vec<String>,
    pub created_at: String,
    pub updated_at: String,
    pub state_digest: String,
    pub engine_state: SessionSnapshot,
}

/// In-memory session: labels, timestamps and the live engine.
#[derive(Debug, Clone)]
pub struct SessionRecord {
    pub session_id: String,
    pub item_labels: Vec<String>,
    pub created_at: String,
    pub updated_at: String,
    pub session: SortSession,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Token for the pair issued at the current step: `"<step>.<first>.<second>"`.
pub fn pair_token(step: usize, pair: PairChoice) -> String {
    format!("{step}.{}.{}", pair.first, pair.second)
}

pub fn validate_labels(labels: &[String]) -> Result<(), StoreError> {
    if labels.len() < 2 {
        return Err(StoreError::Validation(format!(
            "items: at least 2 distinct nonempty labels required, got {}",
            labels.len()
        )));
    }
    if let Some(pos) = labels.iter().position(|l| l.trim().is_empty()) {
        return Err(StoreError::Validation(format!(
            "items: label {pos} is empty"
        )));
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
        return Err(StoreError::Validation(format!(
            "items: duplicate label {dup:?}"
        )));
    }
    Ok(())
}

impl SessionRecord {
    pub fn create(
        item_labels: Vec<String>,
        algorithm: Algorithm,
        params: EngineParams,
    ) -> Result<Self, StoreError> {
        validate_labels(&item_labels)?;
        let session = SortSession::new(item_labels.len(), algorithm, params)?;
        let created_at = now();
        Ok(SessionRecord {
            session_id: uuid::Uuid::new_v4().simple().to_string(),
            item_labels,
            updated_at: created_at.clone(),
            created_at,
            session,
        })
    }

    /// The pending pair and its token.
    pub fn next_pair(&self) -> Result<(PairChoice, String), StoreError> {
        if self.session.is_finished() {
            return Err(StoreError::Finished(self.session.comparisons_done()));
        }
        let pair = self.session.next_pair()?;
        Ok((pair, pair_token(self.session.comparisons_done(), pair)))
    }

    /// Applies `outcome` if `token` names the pending pair.
    pub fn apply(&mut self, token: &str, outcome: ComparisonOutcome) -> Result<(), StoreError> {
        let (pair, current) = self.next_pair()?;
        if token != current {
            return Err(StoreError::StalePair {
                given: token.to_string(),
                current,
            });
        }
        self.session.apply_outcome(pair, outcome)?;
        self.updated_at = now();
        Ok(())
    }

    pub fn ranking(&self) -> Vec<RankedItem> {
        self.session.ranking()
    }

    pub fn to_persisted(&self) -> PersistedSession {
        PersistedSession {
            schema_version: SCHEMA_VERSION,
            session_id: self.session_id.clone(),
            item_labels: self.item_labels.clone(),
            created_at: self.created_at.clone(),
            updated_at: self.updated_at.clone(),
            state_digest: self.session.state_digest(),
            engine_state: self.session.snapshot(),
        }
    }

    /// Rebuilds a record by replaying the stored history, then checks that
    /// the replayed state matches both the stored ratings and digest.
    pub fn from_persisted(doc: PersistedSession) -> Result<Self, String> {
        if doc.schema_version != SCHEMA_VERSION {
            return Err(format!("unsupported schema_version {}", doc.schema_version));
        }
        validate_labels(&doc.item_labels).map_err(|e| e.to_string())?;
        let snap = doc.engine_state;
        if snap.ratings.len() != doc.item_labels.len() {
            return Err("label count does not match rating count".into());
        }
        let replayed = SortSession::replay(
            doc.item_labels.len(),
            snap.algorithm,
            snap.params,
            snap.budget,
            &snap.history,
        )
        .map_err(|e| format!("history replay failed: {e}"))?;
        if replayed.ratings() != &snap.ratings {
            return Err("stored ratings differ from history replay".into());
        }
        if replayed.state_digest() != doc.state_digest {
            return Err("state digest mismatch".into());
        }
        Ok(SessionRecord {
            session_id: doc.session_id,
            item_labels: doc.item_labels,
            created_at: doc.created_at,
            updated_at: doc.updated_at,
            session: replayed,
        })
    }
}

/// All sessions of one data directory. Each session has its own lock.
#[derive(Debug)]
pub struct SessionStore {
    dir: PathBuf,
    sessions: RwLock<HashMap<String, Arc<Mutex<SessionRecord>>>>,
}

impl SessionStore {
    /// Opens `dir`, creating it if needed, verifies it is writable and loads
    /// every stored session.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| storage(&dir, e))?;
        let probe = dir.join(".write-probe");
        fs::write(&probe, b"").map_err(|e| storage(&dir, e))?;
        fs::remove_file(&probe).map_err(|e| storage(&probe, e))?;

        let mut sessions = HashMap::new();
        for entry in fs::read_dir(&dir).map_err(|e| storage(&dir, e))? {
            let path = entry.map_err(|e| storage(&dir, e))?.path();
            if path.extension() != Some(OsStr::new("json")) {
                continue;
            }
            let corrupt = |message: String| StoreError::Corrupt {
                path: path.display().to_string(),
                message,
            };
            let text = fs::read_to_string(&path).map_err(|e| storage(&path, e))?;
            let doc: PersistedSession =
                serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
            if path.file_stem().and_then(|s| s.to_str()) != Some(doc.session_id.as_str()) {
                return Err(corrupt("file name does not match session_id".into()));
            }
            let record = SessionRecord::from_persisted(doc).map_err(corrupt)?;
            sessions.insert(record.session_id.clone(), Arc::new(Mutex::new(record)));
        }
        tracing::info!(dir = %dir.display(), sessions = sessions.len(), "session store opened");
        Ok(SessionStore {
            dir,
            sessions: RwLock::new(sessions),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("session map poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, id: &str) -> Option<Arc<Mutex<SessionRecord>>> {
        self.sessions
            .read()
            .expect("session map poisoned")
            .get(id)
            .cloned()
    }

    /// Persists `record` and registers it.
    pub fn insert(&self, record: SessionRecord) -> Result<(), StoreError> {
        self.persist(&record)?;
        self.sessions
            .write()
            .expect("session map poisoned")
            .insert(record.session_id.clone(), Arc::new(Mutex::new(record)));
        Ok(())
    }

    /// Atomically rewrites the file of `record`.
    pub fn persist(&self, record: &SessionRecord) -> Result<(), StoreError> {
        let path = self.dir.join(format!("{}.json", record.session_id));
        let tmp = self.dir.join(format!("{}.json.tmp", record.session_id));
        let body =
            serde_json::to_vec_pretty(&record.to_persisted()).map_err(|e| storage(&path, e))?;
        let mut file = File::create(&tmp).map_err(|e| storage(&tmp, e))?;
        file.write_all(&body).map_err(|e| storage(&tmp, e))?;
        file.sync_all().map_err(|e| storage(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| storage(&path, e))
    }
}
