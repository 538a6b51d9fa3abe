//! In-memory registry of datasets and sessions, mirrored to the working
//! directory when one is configured.

use std::collections::HashMap;
use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use metrology::dataset::{MetricDataset, ParseOptions};
use metrology::session::{RefinementSession, SessionDocument};
use sha2::{Digest, Sha256};
use tokio::sync::Mutex;

/// Default cap on request bodies (dataset uploads dominate).
pub const DEFAULT_UPLOAD_LIMIT: usize = 50 * 1024 * 1024;
pub const DEFAULT_PORT: u16 = 8765;

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub upload_limit: usize,
    /// Datasets and session documents are written here and reloaded on start.
    pub workdir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: SocketAddr::from((Ipv4Addr::LOCALHOST, DEFAULT_PORT)),
            upload_limit: DEFAULT_UPLOAD_LIMIT,
            workdir: None,
        }
    }
}

pub type SessionHandle = Arc<Mutex<RefinementSession>>;

#[derive(Debug, Default)]
struct Registry {
    datasets: HashMap<String, Arc<MetricDataset>>,
    sessions: HashMap<String, SessionHandle>,
}

/// Shared service state. Cloning is cheap.
#[derive(Debug, Clone, Default)]
pub struct AppState {
    pub config: Arc<ServiceConfig>,
    registry: Arc<RwLock<Registry>>,
}

/// Content-derived dataset id.
pub fn dataset_id(ds: &MetricDataset) -> String {
    let mut h = Sha256::new();
    h.update(ds.to_csv_string());
    for t in &ds.provenance {
        h.update(t.metric.as_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        Self { config: Arc::new(config), registry: Arc::default() }
    }

    /// Builds the state and reloads whatever the working directory holds.
    /// Unreadable files are skipped with a warning.
    pub fn open(config: ServiceConfig) -> std::io::Result<Self> {
        let state = Self::new(config);
        if let Some(dir) = state.config.workdir.clone() {
            std::fs::create_dir_all(dir.join("datasets"))?;
            std::fs::create_dir_all(dir.join("sessions"))?;
            for path in files_with_extension(&dir.join("datasets"), "csv")? {
                match std::fs::File::open(&path).map_err(|e| e.to_string()).and_then(|f| {
                    MetricDataset::load(f, ParseOptions::default()).map_err(|e| e.to_string())
                }) {
                    Ok(ds) => {
                        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
                        state.write().datasets.insert(id, Arc::new(ds));
                    }
                    Err(e) => tracing::warn!("skipping {}: {e}", path.display()),
                }
            }
            for path in files_with_extension(&dir.join("sessions"), "json")? {
                let loaded = std::fs::read_to_string(&path)
                    .map_err(|e| e.to_string())
                    .and_then(|text| serde_json::from_str::<SessionDocument>(&text).map_err(|e| e.to_string()))
                    .and_then(|doc| RefinementSession::from_document(&doc).map_err(|e| e.to_string()));
                match loaded {
                    Ok(session) => {
                        let id = session.id.clone();
                        state.write().sessions.insert(id, Arc::new(Mutex::new(session)));
                    }
                    Err(e) => tracing::warn!("skipping {}: {e}", path.display()),
                }
            }
        }
        Ok(state)
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, Registry> {
        self.registry.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, Registry> {
        self.registry.write().unwrap_or_else(|e| e.into_inner())
    }

    pub fn dataset(&self, id: &str) -> Option<Arc<MetricDataset>> {
        self.read().datasets.get(id).cloned()
    }

    /// Registers a dataset under its content id and returns the id.
    pub fn insert_dataset(&self, ds: MetricDataset) -> String {
        let id = dataset_id(&ds);
        if let Some(dir) = &self.config.workdir {
            let path = dir.join("datasets").join(format!("{id}.csv"));
            if let Err(e) = std::fs::write(&path, ds.to_csv_string()) {
                tracing::warn!("could not save {}: {e}", path.display());
            }
        }
        self.write().datasets.entry(id.clone()).or_insert_with(|| Arc::new(ds));
        id
    }

    pub fn session(&self, id: &str) -> Option<SessionHandle> {
        self.read().sessions.get(id).cloned()
    }

    /// Registers a session, suffixing its id when an identical one exists.
    pub fn insert_session(&self, mut session: RefinementSession) -> (String, SessionHandle) {
        let mut reg = self.write();
        let base = session.id.clone();
        let mut n = 1;
        while reg.sessions.contains_key(&session.id) {
            n += 1;
            session.id = format!("{base}-{n}");
        }
        let id = session.id.clone();
        self.persist(&session);
        let handle = Arc::new(Mutex::new(session));
        reg.sessions.insert(id.clone(), handle.clone());
        (id, handle)
    }

    /// Writes the session document to the working directory, if any.
    pub fn persist(&self, session: &RefinementSession) {
        let Some(dir) = &self.config.workdir else { return };
        let path = dir.join("sessions").join(format!("{}.json", session.id));
        let doc = session.to_document();
        let written = serde_json::to_vec(&doc).map_err(|e| e.to_string()).and_then(|bytes| {
            std::fs::write(&path, bytes).map_err(|e| e.to_string())
        });
        if let Err(e) = written {
            tracing::warn!("could not save {}: {e}", path.display());
        }
    }
}

fn files_with_extension(dir: &Path, ext: &str) -> std::io::Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some(ext))
        .collect();
    out.sort();
    Ok(out)
}
