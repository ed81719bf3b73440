//! TOR log to jitter report, shared by the CLI and the HTTP API.

use eloran_core::error_model::ErrorModelParams;
use eloran_core::jitter::{
    average_jitters, group_tor_log, pair_series, parse_bandwidth_grid, run_pair, JitterConfig,
    JitterReport, TorLogRow, DEFAULT_OUTLIER_K, DEFAULT_OUTLIER_WINDOW,
};
use serde::Deserialize;

use crate::error::ServiceError;

pub const DEFAULT_BANDWIDTH_GRID: &str = "0.1:1000:60";

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct JitterOptions {
    pub bandwidth_grid: String,
    pub outlier_window: usize,
    pub outlier_k: f64,
    pub integration_time_s: f64,
}

impl Default for JitterOptions {
    fn default() -> Self {
        Self {
            bandwidth_grid: DEFAULT_BANDWIDTH_GRID.into(),
            outlier_window: DEFAULT_OUTLIER_WINDOW,
            outlier_k: DEFAULT_OUTLIER_K,
            integration_time_s: eloran_core::error_model::DEFAULT_INTEGRATION_TIME_S,
        }
    }
}

impl JitterOptions {
    pub fn config(&self) -> Result<JitterConfig, ServiceError> {
        let bandwidth_grid =
            parse_bandwidth_grid(&self.bandwidth_grid).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        if self.outlier_window < 3 {
            return Err(ServiceError::BadRequest(format!(
                "outlier window must be at least 3, got {}",
                self.outlier_window
            )));
        }
        if !(self.outlier_k.is_finite() && self.outlier_k > 0.0) {
            return Err(ServiceError::BadRequest(format!("outlier k must be positive, got {}", self.outlier_k)));
        }
        let params = ErrorModelParams {
            integration_time_s: self.integration_time_s,
            ..Default::default()
        };
        params.validate().map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        Ok(JitterConfig {
            outlier_window: self.outlier_window,
            outlier_k: self.outlier_k,
            bandwidth_grid,
            params,
        })
    }
}

/// Runs every (site, GRI) pair of the log. Per-station failures (e.g. an
/// infeasible inversion) become report errors and the run continues; a log
/// that cannot be paired at all is an error.
pub fn build_jitter_report(rows: &[TorLogRow], opts: &JitterOptions) -> Result<JitterReport, ServiceError> {
    let config = opts.config()?;
    let series = group_tor_log(rows)?;
    let pairs = pair_series(&series)?;
    let mut report = JitterReport {
        metadata: vec![
            ("bandwidth_grid".into(), opts.bandwidth_grid.clone()),
            ("outlier_window".into(), opts.outlier_window.to_string()),
            ("outlier_k".into(), opts.outlier_k.to_string()),
            ("integration_time_s".into(), opts.integration_time_s.to_string()),
            ("pairs".into(), pairs.len().to_string()),
        ],
        ..Default::default()
    };
    for (a, b) in &pairs {
        match run_pair(a, b, &config) {
            Ok(run) => {
                report.metadata.push((
                    format!("removed.{}.{}", a.site_id, a.gri_designator),
                    format!("{}={},{}={}", a.station_id, run.removed.0, b.station_id, run.removed.1),
                ));
                for (series, est) in [(a, run.first), (b, run.second)] {
                    match est {
                        Ok(e) => report.rows.push(e),
                        Err(e) => report.errors.push((series.site_id.clone(), series.station_id.clone(), e.to_string())),
                    }
                }
            }
            Err(e) => {
                for s in [a, b] {
                    report.errors.push((s.site_id.clone(), s.station_id.clone(), e.to_string()));
                }
            }
        }
    }
    if !report.rows.is_empty() {
        report.averages = average_jitters(&report.rows)?;
    }
    Ok(report)
}
