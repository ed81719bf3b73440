//! Regional accuracy sweep and simulation-vs-measurement comparison.
//!
//! Per evaluation point: ground-wave field strength from every enabled
//! transmitter, SNR against atmospheric noise, per-station ranging sigma,
//! then the WLS covariance and 2drms accuracy. Stations below the SNR floor
//! or out of curve range are excluded from the fix.

mod compare;
mod scenario;
mod sweep;

pub use compare::{
    compare_fixture, compare_sites, improvement_metric, read_fixture, read_simulated,
    write_comparison_csv, Baseline, ComparisonRecord, ComparisonReport, FixtureRow,
    ImprovementSummary, SimulatedValue,
};
pub use scenario::{
    ClockModeSetting, ConductivityConfig, ConductivitySource, JitterMode, ModelConfig,
    NoiseConfig, PreparedScenario, Region, Scenario, SCHEMA_VERSION, default_curves_for,
};
pub use sweep::{
    evaluate_fields, evaluation_cell_count, simulate_accuracy_map, simulate_point, AccuracyGrid, CellResult,
    GridLayout, PointResult, StationDiagnostics, Unavailable,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error_model::ErrorModelError;
use crate::geodata::{GeoPoint, GeodataError};
use crate::noise::NoiseError;
use crate::propagation::PropagationError;

#[derive(Debug, Error)]
pub enum CoverageError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    Schema(u32),
    #[error("cannot read {path}: {message}")]
    File { path: String, message: String },
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("transmitter {id}: {message}")]
    Transmitter { id: String, message: String },
    #[error(transparent)]
    Geodata(#[from] GeodataError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Model(#[from] ErrorModelError),
    #[error("sweep cancelled")]
    Cancelled,
    #[error("comparison: {0}")]
    Comparison(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Master,
    Secondary,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transmitter {
    pub id: String,
    #[serde(default)]
    pub name: String,
    pub location: GeoPoint,
    pub erp_kw: f64,
    pub gri_designator: u32,
    pub chain_id: String,
    #[serde(default)]
    pub emission_delay_us: f64,
    pub role: Role,
    /// Jitter used when the scenario's jitter mode is `estimated`.
    #[serde(default)]
    pub jitter_m: f64,
    #[serde(default = "default_true")]
    pub enabled: bool,
}

impl Transmitter {
    pub fn validate(&self) -> Result<(), CoverageError> {
        let fail = |message: String| {
            Err(CoverageError::Transmitter {
                id: self.id.clone(),
                message,
            })
        };
        if self.id.trim().is_empty() {
            return fail("empty id".into());
        }
        if !(self.erp_kw.is_finite() && self.erp_kw > 0.0) {
            return fail(format!("erp_kw must be positive, got {}", self.erp_kw));
        }
        if !(4000..=9999).contains(&self.gri_designator) {
            return fail(format!("GRI {} outside [4000, 9999]", self.gri_designator));
        }
        if !(self.emission_delay_us.is_finite() && self.emission_delay_us >= 0.0) {
            return fail(format!("emission delay must be >= 0, got {}", self.emission_delay_us));
        }
        if self.role == Role::Master && self.emission_delay_us != 0.0 {
            return fail("a master must have zero emission delay".into());
        }
        if !(self.jitter_m.is_finite() && self.jitter_m >= 0.0) {
            return fail(format!("jitter must be >= 0, got {}", self.jitter_m));
        }
        Ok(())
    }
}
