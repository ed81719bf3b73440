//! Flat-file scenario store with a content-addressed accuracy-map cache.
//!
//! Layout under the data directory:
//! `scenarios/<id>.toml` for scenarios, `grids/<hash>.json` for computed maps.
//! Scenario file references (rasters, tables) resolve against the data directory.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use eloran_core::coverage::{AccuracyGrid, Scenario};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::ServiceError;

#[derive(Debug, Clone, Serialize)]
pub struct StoredScenario {
    pub id: String,
    pub version: u64,
    pub content_hash: String,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioListing {
    pub id: String,
    pub name: String,
    pub version: u64,
    pub content_hash: String,
    pub has_map: bool,
}

#[derive(Debug)]
struct Entry {
    scenario: Scenario,
    version: u64,
    hash: String,
    grid: Option<Arc<AccuracyGrid>>,
}

#[derive(Debug, Default)]
struct Inner {
    scenarios: BTreeMap<String, Entry>,
    cache: HashMap<String, Arc<AccuracyGrid>>,
}

#[derive(Debug)]
pub struct ScenarioStore {
    data_dir: PathBuf,
    inner: RwLock<Inner>,
}

/// SHA-256 over the scenario's canonical JSON and the bytes of every file it
/// references, so editing a raster in place invalidates cached maps.
pub fn content_hash(scenario: &Scenario, base_dir: &Path) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(scenario).expect("scenario serializes"));
    for rel in scenario.referenced_files() {
        h.update(rel.as_bytes());
        let p = if Path::new(rel).is_absolute() { PathBuf::from(rel) } else { base_dir.join(rel) };
        match std::fs::read(&p) {
            Ok(bytes) => {
                h.update((bytes.len() as u64).to_le_bytes());
                h.update(&bytes);
            }
            Err(_) => h.update(b"\0missing"),
        }
    }
    hex::encode(h.finalize())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ServiceError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| ServiceError::file(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| ServiceError::file(path, e))
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl ScenarioStore {
    /// Opens (creating if needed) a store and loads saved scenarios.
    pub fn open(data_dir: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let data_dir = data_dir.into();
        for sub in ["scenarios", "grids"] {
            let d = data_dir.join(sub);
            std::fs::create_dir_all(&d).map_err(|e| ServiceError::file(&d, e))?;
        }
        let mut inner = Inner::default();
        let dir = data_dir.join("scenarios");
        let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| ServiceError::file(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect();
        files.sort();
        for path in files {
            let Some(id) = path.file_stem().and_then(|s| s.to_str()).filter(|s| valid_id(s)) else {
                continue;
            };
            let text = std::fs::read_to_string(&path).map_err(|e| ServiceError::file(&path, e))?;
            match Scenario::from_toml_str(&text) {
                Ok(scenario) => {
                    let hash = content_hash(&scenario, &data_dir);
                    inner.scenarios.insert(
                        id.to_string(),
                        Entry { scenario, version: 1, hash, grid: None },
                    );
                }
                Err(e) => tracing::warn!(path = %path.display(), error = %e, "skipping unreadable scenario"),
            }
        }
        Ok(Self {
            data_dir,
            inner: RwLock::new(inner),
        })
    }

    pub fn data_dir(&self) -> &Path {
        &self.data_dir
    }

    fn scenario_path(&self, id: &str) -> PathBuf {
        self.data_dir.join("scenarios").join(format!("{id}.toml"))
    }

    fn grid_path(&self, hash: &str) -> PathBuf {
        self.data_dir.join("grids").join(format!("{hash}.json"))
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, Inner> {
        self.inner.read().unwrap_or_else(|p| p.into_inner())
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, Inner> {
        self.inner.write().unwrap_or_else(|p| p.into_inner())
    }

    fn snapshot(id: &str, e: &Entry) -> StoredScenario {
        StoredScenario {
            id: id.to_string(),
            version: e.version,
            content_hash: e.hash.clone(),
            scenario: e.scenario.clone(),
        }
    }

    pub fn create(&self, scenario: Scenario) -> Result<StoredScenario, ServiceError> {
        scenario.validate()?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let hash = content_hash(&scenario, &self.data_dir);
        write_atomic(&self.scenario_path(&id), scenario.to_toml_string().as_bytes())?;
        let mut inner = self.write();
        let grid = inner.cache.get(&hash).cloned();
        let entry = Entry { scenario, version: 1, hash, grid };
        let out = Self::snapshot(&id, &entry);
        inner.scenarios.insert(id, entry);
        Ok(out)
    }

    pub fn get(&self, id: &str) -> Option<StoredScenario> {
        self.read().scenarios.get(id).map(|e| Self::snapshot(id, e))
    }

    pub fn list(&self) -> Vec<ScenarioListing> {
        self.read()
            .scenarios
            .iter()
            .map(|(id, e)| ScenarioListing {
                id: id.clone(),
                name: e.scenario.name.clone(),
                version: e.version,
                content_hash: e.hash.clone(),
                has_map: e.grid.is_some(),
            })
            .collect()
    }

    fn check_version(id: &str, e: &Entry, expected: Option<u64>) -> Result<(), ServiceError> {
        match expected {
            Some(v) if v != e.version => Err(ServiceError::Conflict(format!(
                "scenario {id} is at version {}, not {v}",
                e.version
            ))),
            _ => Ok(()),
        }
    }

    /// Replaces a scenario. `expected_version` (from `If-Match`) must match the
    /// stored version when given. The stored map survives only if the content
    /// hash is unchanged.
    pub fn replace(
        &self,
        id: &str,
        scenario: Scenario,
        expected_version: Option<u64>,
    ) -> Result<StoredScenario, ServiceError> {
        scenario.validate()?;
        let hash = content_hash(&scenario, &self.data_dir);
        let mut inner = self.write();
        let cached = inner.cache.get(&hash).cloned();
        let entry = inner
            .scenarios
            .get_mut(id)
            .ok_or_else(|| ServiceError::NotFound(format!("scenario {id}")))?;
        Self::check_version(id, entry, expected_version)?;
        write_atomic(&self.scenario_path(id), scenario.to_toml_string().as_bytes())?;
        if entry.hash != hash {
            entry.grid = cached;
        }
        entry.scenario = scenario;
        entry.hash = hash;
        entry.version += 1;
        Ok(Self::snapshot(id, entry))
    }

    pub fn delete(&self, id: &str, expected_version: Option<u64>) -> Result<(), ServiceError> {
        let mut inner = self.write();
        let entry = inner
            .scenarios
            .get(id)
            .ok_or_else(|| ServiceError::NotFound(format!("scenario {id}")))?;
        Self::check_version(id, entry, expected_version)?;
        let path = self.scenario_path(id);
        if path.exists() {
            std::fs::remove_file(&path).map_err(|e| ServiceError::file(&path, e))?;
        }
        inner.scenarios.remove(id);
        Ok(())
    }

    /// The map of the scenario's current content, if computed.
    pub fn grid(&self, id: &str) -> Result<Option<Arc<AccuracyGrid>>, ServiceError> {
        self.read()
            .scenarios
            .get(id)
            .map(|e| e.grid.clone())
            .ok_or_else(|| ServiceError::NotFound(format!("scenario {id}")))
    }

    /// A previously computed map for `hash`, from memory or disk.
    pub fn cached(&self, hash: &str) -> Option<Arc<AccuracyGrid>> {
        if let Some(g) = self.read().cache.get(hash) {
            return Some(g.clone());
        }
        let bytes = std::fs::read(self.grid_path(hash)).ok()?;
        let grid: AccuracyGrid = serde_json::from_slice(&bytes).ok()?;
        let grid = Arc::new(grid);
        self.write().cache.insert(hash.to_string(), grid.clone());
        Some(grid)
    }

    /// Records a computed map. It is attached to the scenario only if the
    /// scenario still has content `hash`; returns whether it was attached.
    pub fn put_grid(&self, id: &str, hash: &str, grid: Arc<AccuracyGrid>) -> Result<bool, ServiceError> {
        let path = self.grid_path(hash);
        if !path.exists() {
            let bytes = serde_json::to_vec(grid.as_ref()).map_err(|e| ServiceError::Internal(e.to_string()))?;
            write_atomic(&path, &bytes)?;
        }
        let mut inner = self.write();
        inner.cache.insert(hash.to_string(), grid.clone());
        match inner.scenarios.get_mut(id) {
            Some(e) if e.hash == hash => {
                e.grid = Some(grid);
                Ok(true)
            }
            _ => Ok(false),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use eloran_core::coverage::ConductivitySource;
    use eloran_core::demo::korea_scenario;

    #[test]
    fn versions_and_conflicts() {
        let dir = tempfile::tempdir().unwrap();
        let store = ScenarioStore::open(dir.path()).unwrap();
        let s = store.create(korea_scenario(ConductivitySource::LandCover)).unwrap();
        assert_eq!(s.version, 1);
        let mut edited = s.scenario.clone();
        edited.name = "edited".into();
        assert!(matches!(
            store.replace(&s.id, edited.clone(), Some(7)),
            Err(ServiceError::Conflict(_))
        ));
        let r = store.replace(&s.id, edited, Some(1)).unwrap();
        assert_eq!(r.version, 2);
        assert_ne!(r.content_hash, s.content_hash);
        assert!(matches!(store.delete(&s.id, Some(1)), Err(ServiceError::Conflict(_))));
        store.delete(&s.id, None).unwrap();
        assert!(store.get(&s.id).is_none());
    }

    #[test]
    fn scenarios_persist_across_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let id = {
            let store = ScenarioStore::open(dir.path()).unwrap();
            store.create(korea_scenario(ConductivitySource::ItuBaseline)).unwrap().id
        };
        let store = ScenarioStore::open(dir.path()).unwrap();
        let s = store.get(&id).unwrap();
        assert_eq!(s.scenario, korea_scenario(ConductivitySource::ItuBaseline));
    }

    #[test]
    fn hash_tracks_referenced_files() {
        let dir = tempfile::tempdir().unwrap();
        let s = korea_scenario(ConductivitySource::ItuBaseline);
        let before = content_hash(&s, dir.path());
        std::fs::write(dir.path().join("itu_baseline.asc"), "x").unwrap();
        assert_ne!(before, content_hash(&s, dir.path()));
    }
}
