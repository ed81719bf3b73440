use std::fmt::Write as _;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CoverageError, PreparedScenario};
use crate::error_model::measurement_sigma;
use crate::geodata::{polygon_contains, GeoPoint, METERS_PER_DEGREE};
use crate::noise::compute_snr;
use crate::positioning::{accuracy_for, ClockMode, PositioningError, StationGeometry};
use crate::propagation::received_field_strength;

/// Why a point has no accuracy value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unavailable {
    /// Too few stations above the SNR floor.
    SnrFloor,
    /// Too few stations within propagation-curve range.
    Range,
    /// Too few enabled stations for the clock model.
    TooFewStations,
    /// Usable stations form a singular or ill-conditioned geometry.
    RankDeficient,
}

impl Unavailable {
    pub fn as_str(&self) -> &'static str {
        match self {
            Unavailable::SnrFloor => "snr_floor",
            Unavailable::Range => "range",
            Unavailable::TooFewStations => "too_few_stations",
            Unavailable::RankDeficient => "rank_deficient",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationDiagnostics {
    pub station_id: String,
    pub chain_id: String,
    pub distance_m: f64,
    pub azimuth_rad: f64,
    pub field_dbuvm: Option<f64>,
    pub noise_dbuvm: Option<f64>,
    pub snr_db: Option<f64>,
    pub sigma_m: Option<f64>,
    pub used: bool,
    /// Exclusion reason for unused stations.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excluded: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub accuracy_95_m: Option<f64>,
    pub unavailable: Option<Unavailable>,
    pub clock_mode: Option<ClockMode>,
    pub stations: Vec<StationDiagnostics>,
}

impl PointResult {
    pub fn n_stations(&self) -> usize {
        self.stations.iter().filter(|s| s.used).count()
    }
}

/// Full evaluation of one point.
pub fn simulate_point(prepared: &PreparedScenario, point: &GeoPoint) -> PointResult {
    let s = &prepared.scenario;
    let fields: Vec<Result<f64, String>> = s
        .transmitters
        .iter()
        .map(|tx| {
            if !tx.enabled {
                return Err("disabled".into());
            }
            received_field_strength(tx, point, &prepared.grid, &prepared.curves, s.model.path_step_m)
                .map(|lb| lb.field_strength_dbuvm)
                .map_err(|e| format!("range: {e}"))
        })
        .collect();
    evaluate_fields(prepared, point, &fields)
}

/// Everything downstream of propagation, given each transmitter's field
/// strength (or the reason it has none).
pub fn evaluate_fields(
    prepared: &PreparedScenario,
    point: &GeoPoint,
    fields: &[Result<f64, String>],
) -> PointResult {
    let s = &prepared.scenario;
    assert_eq!(fields.len(), s.transmitters.len(), "one field entry per transmitter");
    let mut diags = Vec::with_capacity(fields.len());
    let mut geometry = Vec::new();
    let (mut snr_excluded, mut range_excluded) = (0usize, 0usize);
    for (tx, field) in s.transmitters.iter().zip(fields) {
        let mut d = StationDiagnostics {
            station_id: tx.id.clone(),
            chain_id: tx.chain_id.clone(),
            distance_m: point.distance_m(&tx.location),
            azimuth_rad: point.bearing_rad(&tx.location),
            field_dbuvm: None,
            noise_dbuvm: None,
            snr_db: None,
            sigma_m: None,
            used: false,
            excluded: None,
        };
        let field = match field {
            Ok(f) => *f,
            Err(reason) => {
                if reason.starts_with("range") {
                    range_excluded += 1;
                }
                d.excluded = Some(reason.clone());
                diags.push(d);
                continue;
            }
        };
        d.field_dbuvm = Some(field);
        let noise = match prepared.noise.noise_at(point, s.noise.season) {
            Ok(n) => n,
            Err(e) => {
                d.excluded = Some(format!("noise: {e}"));
                diags.push(d);
                continue;
            }
        };
        d.noise_dbuvm = Some(noise);
        let snr = compute_snr(field, noise);
        d.snr_db = Some(snr.snr_db);
        if snr.snr_db < s.model.snr_floor_db {
            snr_excluded += 1;
            d.excluded = Some("snr_floor".into());
            diags.push(d);
            continue;
        }
        let sigma = prepared
            .params
            .n_pulses(tx.gri_designator)
            .and_then(|n| measurement_sigma(s.jitter_for(tx), &snr, n, &prepared.params));
        match sigma {
            Ok(m) => {
                d.sigma_m = Some(m.sigma_m);
                d.used = true;
                geometry.push(StationGeometry {
                    station_id: tx.id.clone(),
                    azimuth_rad: d.azimuth_rad,
                    sigma_m: m.sigma_m,
                    chain_id: tx.chain_id.clone(),
                });
            }
            Err(e) => d.excluded = Some(format!("model: {e}")),
        }
        diags.push(d);
    }

    let mode = s.model.clock_mode.resolve(&geometry);
    let mut out = PointResult {
        lat_deg: point.lat_deg(),
        lon_deg: point.lon_deg(),
        accuracy_95_m: None,
        unavailable: None,
        clock_mode: Some(mode),
        stations: diags,
    };
    match accuracy_for(&geometry, mode) {
        Ok((_, acc)) => out.accuracy_95_m = Some(acc),
        Err(PositioningError::TooFewStations { .. }) => {
            out.unavailable = Some(if snr_excluded > 0 {
                Unavailable::SnrFloor
            } else if range_excluded > 0 {
                Unavailable::Range
            } else {
                Unavailable::TooFewStations
            });
        }
        Err(_) => out.unavailable = Some(Unavailable::RankDeficient),
    }
    out
}

/// Meter-square cell layout of the evaluation region (row 0 north).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridLayout {
    pub lat_max: f64,
    pub lon_min: f64,
    pub dlat_deg: f64,
    pub dlon_deg: f64,
    pub n_rows: usize,
    pub n_cols: usize,
    pub resolution_m: f64,
}

impl GridLayout {
    pub fn for_region(r: &super::Region) -> Self {
        let mid = 0.5 * (r.lat_min + r.lat_max);
        let dlat = r.resolution_m / METERS_PER_DEGREE;
        let dlon = r.resolution_m / (METERS_PER_DEGREE * mid.to_radians().cos());
        let n_rows = (((r.lat_max - r.lat_min) / dlat) - 1e-9).ceil().max(1.0) as usize;
        let n_cols = (((r.lon_max - r.lon_min) / dlon) - 1e-9).ceil().max(1.0) as usize;
        Self {
            lat_max: r.lat_max,
            lon_min: r.lon_min,
            dlat_deg: dlat,
            dlon_deg: dlon,
            n_rows,
            n_cols,
            resolution_m: r.resolution_m,
        }
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.lat_max - (row as f64 + 0.5) * self.dlat_deg,
            self.lon_min + (col as f64 + 0.5) * self.dlon_deg,
        )
    }

    /// `[lon, lat]` ring of the cell outline, closed.
    pub fn cell_ring(&self, row: usize, col: usize) -> [[f64; 2]; 5] {
        let top = self.lat_max - row as f64 * self.dlat_deg;
        let bottom = top - self.dlat_deg;
        let left = self.lon_min + col as f64 * self.dlon_deg;
        let right = left + self.dlon_deg;
        [[left, bottom], [right, bottom], [right, top], [left, top], [left, bottom]]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub row: usize,
    pub col: usize,
    pub result: PointResult,
}

/// Evaluated cells of a regional sweep, in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyGrid {
    pub layout: GridLayout,
    pub cells: Vec<CellResult>,
}

/// Cells of the region whose centers fall in the mask (all cells when no mask).
fn evaluation_cells(prepared: &PreparedScenario, layout: &GridLayout) -> Vec<(usize, usize, GeoPoint)> {
    let mask = &prepared.scenario.region.mask;
    let mut out = Vec::new();
    for row in 0..layout.n_rows {
        for col in 0..layout.n_cols {
            let (lat, lon) = layout.cell_center(row, col);
            let Ok(p) = GeoPoint::new(lat, lon) else { continue };
            if mask.is_empty() || mask.iter().any(|poly| polygon_contains(poly, &p)) {
                out.push((row, col, p));
            }
        }
    }
    out
}

/// Parallel sweep of every evaluation cell. `cancel` is polled between cells;
/// `progress` counts finished cells.
pub fn simulate_accuracy_map(
    prepared: &PreparedScenario,
    cancel: Option<&AtomicBool>,
    progress: Option<&AtomicUsize>,
) -> Result<AccuracyGrid, CoverageError> {
    let layout = GridLayout::for_region(&prepared.scenario.region);
    let targets = evaluation_cells(prepared, &layout);
    let cancelled = || cancel.is_some_and(|c| c.load(Ordering::Relaxed));
    let cells: Vec<Option<CellResult>> = targets
        .par_iter()
        .map(|&(row, col, p)| {
            if cancelled() {
                return None;
            }
            let result = simulate_point(prepared, &p);
            if let Some(c) = progress {
                c.fetch_add(1, Ordering::Relaxed);
            }
            Some(CellResult { row, col, result })
        })
        .collect();
    if cancelled() {
        return Err(CoverageError::Cancelled);
    }
    Ok(AccuracyGrid {
        layout,
        cells: cells.into_iter().map(|c| c.expect("not cancelled")).collect(),
    })
}

/// Number of cells a sweep of `prepared` evaluates.
pub fn evaluation_cell_count(prepared: &PreparedScenario) -> usize {
    evaluation_cells(prepared, &GridLayout::for_region(&prepared.scenario.region)).len()
}

impl AccuracyGrid {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn available(&self) -> impl Iterator<Item = f64> + '_ {
        self.cells.iter().filter_map(|c| c.result.accuracy_95_m)
    }

    /// `lat,lon,accuracy_95_m,available,n_stations`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lat,lon,accuracy_95_m,available,n_stations\n");
        for c in &self.cells {
            let r = &c.result;
            let acc = r.accuracy_95_m.map(|a| format!("{a:.4}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{:.6},{:.6},{},{},{}",
                r.lat_deg,
                r.lon_deg,
                acc,
                r.accuracy_95_m.is_some(),
                r.n_stations()
            );
        }
        out
    }

    /// FeatureCollection of cell polygons with the CSV properties plus the
    /// unavailability reason.
    pub fn to_geojson(&self) -> serde_json::Value {
        let features: Vec<serde_json::Value> = self
            .cells
            .iter()
            .map(|c| {
                let r = &c.result;
                serde_json::json!({
                    "type": "Feature",
                    "geometry": {
                        "type": "Polygon",
                        "coordinates": [self.layout.cell_ring(c.row, c.col)],
                    },
                    "properties": {
                        "lat": r.lat_deg,
                        "lon": r.lon_deg,
                        "accuracy_95_m": r.accuracy_95_m,
                        "available": r.accuracy_95_m.is_some(),
                        "n_stations": r.n_stations(),
                        "reason": r.unavailable.map(|u| u.as_str()),
                    },
                })
            })
            .collect();
        serde_json::json!({ "type": "FeatureCollection", "features": features })
    }

    /// (min, median, max) accuracy over available cells and the available fraction.
    pub fn summary(&self) -> (Option<(f64, f64, f64)>, f64) {
        let mut v: Vec<f64> = self.available().collect();
        let frac = if self.cells.is_empty() {
            0.0
        } else {
            v.len() as f64 / self.cells.len() as f64
        };
        if v.is_empty() {
            return (None, frac);
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        };
        (Some((v[0], median, v[n - 1])), frac)
    }
}
