//! Asynchronous accuracy-map jobs.
//!
//! One active job per scenario: a new submission cancels the previous one.
//! Each job runs on its own thread over an immutable prepared snapshot, and
//! status reads only touch atomics and a short-lived mutex, so polling never
//! waits on a running sweep.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use eloran_core::coverage::{
    evaluation_cell_count, simulate_accuracy_map, CoverageError, PreparedScenario,
};
use serde::Serialize;

use crate::error::ServiceError;
use crate::store::ScenarioStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
    Cancelled,
}

impl JobState {
    pub fn is_terminal(&self) -> bool {
        matches!(self, JobState::Done | JobState::Failed | JobState::Cancelled)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct JobStatus {
    pub job_id: String,
    pub scenario_id: String,
    pub content_hash: String,
    pub state: JobState,
    /// Fraction of cells finished, in [0, 1].
    pub progress: f64,
    pub total_cells: usize,
    /// Set when the map came from the cache without recomputation.
    pub cache_hit: bool,
    pub error: Option<String>,
    /// Where the finished map can be fetched.
    pub result: Option<String>,
}

#[derive(Debug)]
struct Job {
    status: Mutex<JobStatus>,
    cancel: AtomicBool,
    done_cells: AtomicUsize,
}

impl Job {
    /// Applies a state change unless the job already reached a later state.
    fn advance(&self, next: JobState, error: Option<String>) {
        let mut s = self.status.lock().unwrap_or_else(|p| p.into_inner());
        if s.state.is_terminal() || next <= s.state {
            return;
        }
        s.state = next;
        if next == JobState::Done {
            s.progress = 1.0;
            s.result = Some(format!("/api/scenarios/{}/accuracy-map", s.scenario_id));
        }
        s.error = error;
    }

    fn snapshot(&self) -> JobStatus {
        let mut s = self.status.lock().unwrap_or_else(|p| p.into_inner()).clone();
        if s.state == JobState::Running && s.total_cells > 0 {
            s.progress = (self.done_cells.load(Ordering::Relaxed) as f64 / s.total_cells as f64).min(1.0);
        }
        s
    }
}

#[derive(Debug, Default)]
pub struct JobManager {
    jobs: RwLock<HashMap<String, Arc<Job>>>,
    active: Mutex<HashMap<String, Arc<Job>>>,
}

impl JobManager {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn status(&self, job_id: &str) -> Option<JobStatus> {
        self.jobs
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(job_id)
            .map(|j| j.snapshot())
    }

    /// Requests cancellation; the sweep stops between cells.
    pub fn cancel(&self, job_id: &str) -> Option<JobStatus> {
        let job = self.jobs.read().unwrap_or_else(|p| p.into_inner()).get(job_id).cloned()?;
        job.cancel.store(true, Ordering::Relaxed);
        if job.snapshot().state == JobState::Queued {
            job.advance(JobState::Cancelled, None);
        }
        Some(job.snapshot())
    }

    /// Cancels the active job of a scenario, if any.
    pub fn cancel_scenario(&self, scenario_id: &str) {
        let prev = self.active.lock().unwrap_or_else(|p| p.into_inner()).remove(scenario_id);
        if let Some(j) = prev {
            j.cancel.store(true, Ordering::Relaxed);
        }
    }

    fn register(&self, status: JobStatus) -> Arc<Job> {
        let job = Arc::new(Job {
            status: Mutex::new(status.clone()),
            cancel: AtomicBool::new(false),
            done_cells: AtomicUsize::new(0),
        });
        self.jobs
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .insert(status.job_id.clone(), job.clone());
        let prev = self
            .active
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .insert(status.scenario_id.clone(), job.clone());
        if let Some(p) = prev {
            p.cancel.store(true, Ordering::Relaxed);
        }
        job
    }

    /// Starts (or satisfies from cache) a map computation for a stored
    /// scenario. Loading errors surface here rather than in the job.
    pub fn submit(&self, store: &Arc<ScenarioStore>, scenario_id: &str) -> Result<JobStatus, ServiceError> {
        let stored = store
            .get(scenario_id)
            .ok_or_else(|| ServiceError::NotFound(format!("scenario {scenario_id}")))?;
        let mut status = JobStatus {
            job_id: uuid::Uuid::new_v4().simple().to_string(),
            scenario_id: scenario_id.to_string(),
            content_hash: stored.content_hash.clone(),
            state: JobState::Queued,
            progress: 0.0,
            total_cells: 0,
            cache_hit: false,
            error: None,
            result: None,
        };

        if let Some(grid) = store.cached(&stored.content_hash) {
            store.put_grid(scenario_id, &stored.content_hash, grid.clone())?;
            status.total_cells = grid.len();
            status.cache_hit = true;
            let job = self.register(status);
            job.advance(JobState::Done, None);
            return Ok(job.snapshot());
        }

        let prepared = PreparedScenario::prepare(stored.scenario, store.data_dir())?;
        status.total_cells = evaluation_cell_count(&prepared);
        let job = self.register(status);
        let (store, hash, id) = (store.clone(), stored.content_hash, scenario_id.to_string());
        let worker = job.clone();
        std::thread::Builder::new()
            .name(format!("sweep-{id}"))
            .spawn(move || {
                if worker.cancel.load(Ordering::Relaxed) {
                    worker.advance(JobState::Cancelled, None);
                    return;
                }
                worker.advance(JobState::Running, None);
                match simulate_accuracy_map(&prepared, Some(&worker.cancel), Some(&worker.done_cells)) {
                    Ok(grid) => match store.put_grid(&id, &hash, Arc::new(grid)) {
                        Ok(_) => worker.advance(JobState::Done, None),
                        Err(e) => worker.advance(JobState::Failed, Some(e.to_string())),
                    },
                    Err(CoverageError::Cancelled) => worker.advance(JobState::Cancelled, None),
                    Err(e) => worker.advance(JobState::Failed, Some(e.to_string())),
                }
                tracing::info!(scenario = %id, "sweep finished");
            })
            .map_err(|e| ServiceError::Internal(e.to_string()))?;
        Ok(job.snapshot())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn status(state: JobState) -> JobStatus {
        JobStatus {
            job_id: "j".into(),
            scenario_id: "s".into(),
            content_hash: "h".into(),
            state,
            progress: 0.0,
            total_cells: 10,
            cache_hit: false,
            error: None,
            result: None,
        }
    }

    #[test]
    fn transitions_are_monotone() {
        let job = Job {
            status: Mutex::new(status(JobState::Queued)),
            cancel: AtomicBool::new(false),
            done_cells: AtomicUsize::new(0),
        };
        job.advance(JobState::Running, None);
        job.done_cells.store(4, Ordering::Relaxed);
        assert!((job.snapshot().progress - 0.4).abs() < 1e-12);
        job.advance(JobState::Queued, None);
        assert_eq!(job.snapshot().state, JobState::Running);
        job.advance(JobState::Cancelled, None);
        job.advance(JobState::Done, None);
        assert_eq!(job.snapshot().state, JobState::Cancelled);
    }

    #[test]
    fn new_registration_cancels_previous() {
        let m = JobManager::new();
        let first = m.register(status(JobState::Queued));
        let mut s2 = status(JobState::Queued);
        s2.job_id = "k".into();
        m.register(s2);
        assert!(first.cancel.load(Ordering::Relaxed));
    }
}
