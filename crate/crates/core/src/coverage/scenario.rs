//! Scenario configuration (TOML or JSON) and its prepared, file-resolved form.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CoverageError, Transmitter};
use crate::error_model::{ErrorModelParams, PULSES_PER_GRI, RANGE_CONSTANT_M, SPEED_OF_LIGHT_M_PER_US};
use crate::geodata::{
    classify_conductivity, downsample, load_conductivity_grid, load_land_cover, ConductivityGrid,
    DownsampleRule, GroundConstants, NodataPolicy, TerrainClassTable, DEFAULT_PATH_STEP_M,
    METERS_PER_DEGREE,
};
use crate::noise::{load_noise_grid, NoiseModel, Season, DEFAULT_NOISE_DBUVM};
use crate::positioning::{ClockMode, StationGeometry};
use crate::propagation::{AttenuationCurveSet, NortonFlatEarth, DEFAULT_FREQUENCY_HZ};

pub const SCHEMA_VERSION: u32 = 1;
const MIN_RESOLUTION_M: f64 = 1_000.0;
const MIN_TRANSMITTERS: usize = 3;

/// Evaluation region: a lat/lon box swept at `resolution_m`, optionally
/// restricted to cells whose centers fall inside any `mask` polygon
/// (`[lat, lon]` vertices).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub resolution_m: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mask: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConductivitySource {
    LandCover,
    ItuBaseline,
}

impl std::str::FromStr for ConductivitySource {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "land_cover" => Ok(Self::LandCover),
            "itu_baseline" => Ok(Self::ItuBaseline),
            other => Err(format!("unknown conductivity source `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConductivityConfig {
    pub source: ConductivitySource,
    /// Land-cover class raster (source `land_cover`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub land_cover: Option<String>,
    /// Terrain class table CSV; the built-in table when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_table: Option<String>,
    /// `sigma:eps` raster (source `itu_baseline`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub itu_baseline: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub downsample_m: Option<f64>,
    #[serde(default)]
    pub downsample_rule: DownsampleRule,
    #[serde(default)]
    pub nodata_policy: NodataPolicy,
    /// Field strength curve table CSV; Norton curves are generated when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curves: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub season: Season,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant_dbuvm: Option<f64>,
    /// One raster per season.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grids: Option<BTreeMap<Season, String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JitterMode {
    /// Each transmitter's configured (estimated) jitter.
    Estimated,
    /// One jitter for every transmitter.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockModeSetting {
    /// Per-chain clocks when the usable stations span several chains.
    #[default]
    Auto,
    Single,
    PerChain,
}

impl ClockModeSetting {
    pub fn resolve(&self, stations: &[StationGeometry]) -> ClockMode {
        match self {
            ClockModeSetting::Single => ClockMode::Single,
            ClockModeSetting::PerChain => ClockMode::PerChain,
            ClockModeSetting::Auto => {
                let chains: BTreeSet<&str> = stations.iter().map(|s| s.chain_id.as_str()).collect();
                if chains.len() > 1 {
                    ClockMode::PerChain
                } else {
                    ClockMode::Single
                }
            }
        }
    }
}

fn d_jitter_mode() -> JitterMode {
    JitterMode::Estimated
}
fn d_integration() -> f64 {
    crate::error_model::DEFAULT_INTEGRATION_TIME_S
}
fn d_range_constant() -> f64 {
    RANGE_CONSTANT_M
}
fn d_snr_floor() -> f64 {
    -10.0
}
fn d_step() -> f64 {
    DEFAULT_PATH_STEP_M
}
fn d_frequency() -> f64 {
    DEFAULT_FREQUENCY_HZ
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "d_jitter_mode")]
    pub jitter_mode: JitterMode,
    #[serde(default)]
    pub clock_mode: ClockModeSetting,
    #[serde(default = "d_integration")]
    pub integration_time_s: f64,
    #[serde(default = "d_range_constant")]
    pub range_constant_m: f64,
    #[serde(default = "d_snr_floor")]
    pub snr_floor_db: f64,
    #[serde(default = "d_step")]
    pub path_step_m: f64,
    #[serde(default = "d_frequency")]
    pub frequency_hz: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            jitter_mode: d_jitter_mode(),
            clock_mode: ClockModeSetting::default(),
            integration_time_s: d_integration(),
            range_constant_m: d_range_constant(),
            snr_floor_db: d_snr_floor(),
            path_step_m: d_step(),
            frequency_hz: d_frequency(),
        }
    }
}

impl ModelConfig {
    pub fn error_params(&self) -> ErrorModelParams {
        ErrorModelParams {
            range_constant_m: self.range_constant_m,
            pulses_per_gri: PULSES_PER_GRI,
            integration_time_s: self.integration_time_s,
            speed_of_light_m_per_us: SPEED_OF_LIGHT_M_PER_US,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    pub region: Region,
    pub conductivity: ConductivityConfig,
    pub noise: NoiseConfig,
    #[serde(default)]
    pub model: ModelConfig,
    pub transmitters: Vec<Transmitter>,
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, CoverageError> {
    Err(CoverageError::Invalid(msg.into()))
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, CoverageError> {
        let s: Scenario = toml::from_str(text).map_err(|e| CoverageError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_json_str(text: &str) -> Result<Self, CoverageError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| CoverageError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario is TOML-serializable")
    }

    pub fn validate(&self) -> Result<(), CoverageError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CoverageError::Schema(self.schema_version));
        }
        let r = &self.region;
        if !(r.lat_min < r.lat_max && r.lon_min < r.lon_max)
            || !(-90.0..=90.0).contains(&r.lat_min)
            || !(-90.0..=90.0).contains(&r.lat_max)
            || !(-180.0..=180.0).contains(&r.lon_min)
            || !(-180.0..=180.0).contains(&r.lon_max)
        {
            return invalid("region bounds must satisfy min < max within lat/lon range");
        }
        if !(r.resolution_m >= MIN_RESOLUTION_M && r.resolution_m.is_finite()) {
            return invalid(format!("resolution_m must be >= {MIN_RESOLUTION_M}"));
        }
        if r.mask.iter().any(|p| p.len() < 3) {
            return invalid("mask polygons need at least three vertices");
        }
        if self.transmitters.len() < MIN_TRANSMITTERS {
            return invalid(format!(
                "at least {MIN_TRANSMITTERS} transmitters required, got {}",
                self.transmitters.len()
            ));
        }
        let mut ids = BTreeSet::new();
        for t in &self.transmitters {
            t.validate()?;
            if !ids.insert(t.id.as_str()) {
                return invalid(format!("duplicate transmitter id `{}`", t.id));
            }
        }
        let c = &self.conductivity;
        match c.source {
            ConductivitySource::LandCover if c.land_cover.is_none() => {
                return invalid("conductivity source land_cover requires `land_cover`")
            }
            ConductivitySource::ItuBaseline if c.itu_baseline.is_none() => {
                return invalid("conductivity source itu_baseline requires `itu_baseline`")
            }
            _ => {}
        }
        if let Some(d) = c.downsample_m {
            if !(d.is_finite() && d > 0.0) {
                return invalid("downsample_m must be positive");
            }
        }
        if let (Some(_), Some(_)) = (&self.noise.constant_dbuvm, &self.noise.grids) {
            return invalid("noise: give either constant_dbuvm or grids, not both");
        }
        if let Some(v) = self.noise.constant_dbuvm {
            if !v.is_finite() {
                return invalid("noise constant must be finite");
            }
        }
        let m = &self.model;
        if let JitterMode::Fixed(j) = m.jitter_mode {
            if !(j.is_finite() && j >= 0.0) {
                return invalid("fixed jitter must be >= 0");
            }
        }
        m.error_params().validate()?;
        if !m.snr_floor_db.is_finite() {
            return invalid("snr_floor_db must be finite");
        }
        if !(m.path_step_m.is_finite() && m.path_step_m > 0.0) {
            return invalid("path_step_m must be positive");
        }
        if !(50_000.0..=500_000.0).contains(&m.frequency_hz) {
            return invalid("frequency_hz must lie in [50 kHz, 500 kHz]");
        }
        Ok(())
    }

    /// Relative or absolute paths of every external file the scenario reads.
    pub fn referenced_files(&self) -> Vec<&str> {
        let c = &self.conductivity;
        let mut out: Vec<&str> = Vec::new();
        match c.source {
            ConductivitySource::LandCover => {
                out.extend(c.land_cover.as_deref());
                out.extend(c.class_table.as_deref());
            }
            ConductivitySource::ItuBaseline => out.extend(c.itu_baseline.as_deref()),
        }
        out.extend(c.curves.as_deref());
        if let Some(g) = &self.noise.grids {
            out.extend(g.values().map(String::as_str));
        }
        out
    }

    /// Transmitter jitter under the configured jitter mode.
    pub fn jitter_for(&self, tx: &Transmitter) -> f64 {
        match self.model.jitter_mode {
            JitterMode::Estimated => tx.jitter_m,
            JitterMode::Fixed(j) => j,
        }
    }
}

pub(crate) fn resolve_path(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read_file(base: &Path, rel: &str) -> Result<Vec<u8>, CoverageError> {
    let path = resolve_path(base, rel);
    std::fs::read(&path).map_err(|e| CoverageError::File {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// A scenario with its rasters, curves and noise model loaded.
#[derive(Debug, Clone)]
pub struct PreparedScenario {
    pub scenario: Scenario,
    pub grid: ConductivityGrid,
    pub curves: AttenuationCurveSet,
    pub noise: NoiseModel,
    pub params: ErrorModelParams,
}

impl PreparedScenario {
    /// Loads every referenced file relative to `base_dir`.
    pub fn prepare(scenario: Scenario, base_dir: &Path) -> Result<Self, CoverageError> {
        scenario.validate()?;
        let c = &scenario.conductivity;
        let grid = match c.source {
            ConductivitySource::LandCover => {
                let table = match &c.class_table {
                    Some(p) => TerrainClassTable::from_csv(read_file(base_dir, p)?.as_slice())?,
                    None => TerrainClassTable::default(),
                };
                let raw = read_file(base_dir, c.land_cover.as_deref().expect("validated"))?;
                let lc = load_land_cover(raw.as_slice())?;
                classify_conductivity(&lc, &table, c.nodata_policy)?
            }
            ConductivitySource::ItuBaseline => {
                let raw = read_file(base_dir, c.itu_baseline.as_deref().expect("validated"))?;
                load_conductivity_grid(raw.as_slice(), c.nodata_policy)?
            }
        };
        // a target no coarser than the raster (e.g. a coarse ITU map) keeps it as is
        let grid = match c.downsample_m {
            Some(m) if m > grid.frame.cell_size_deg * METERS_PER_DEGREE => downsample(&grid, m, c.downsample_rule)?,
            _ => grid,
        };
        let noise = match (&scenario.noise.grids, scenario.noise.constant_dbuvm) {
            (Some(files), _) => {
                let mut grids = BTreeMap::new();
                for (season, rel) in files {
                    grids.insert(*season, load_noise_grid(read_file(base_dir, rel)?.as_slice())?);
                }
                NoiseModel::seasonal(grids)?
            }
            (None, v) => NoiseModel::Constant(v.unwrap_or(DEFAULT_NOISE_DBUVM)),
        };
        let curves = match &c.curves {
            Some(p) => AttenuationCurveSet::from_csv(scenario.model.frequency_hz, read_file(base_dir, p)?.as_slice())?,
            None => default_curves_for(&grid, scenario.model.frequency_hz)?,
        };
        Ok(Self::assemble(scenario, grid, curves, noise))
    }

    /// Builds from in-memory parts; Norton curves are generated for the grid.
    pub fn from_parts(
        scenario: Scenario,
        grid: ConductivityGrid,
        noise: NoiseModel,
    ) -> Result<Self, CoverageError> {
        scenario.validate()?;
        let curves = default_curves_for(&grid, scenario.model.frequency_hz)?;
        Ok(Self::assemble(scenario, grid, curves, noise))
    }

    pub fn with_curves(
        scenario: Scenario,
        grid: ConductivityGrid,
        curves: AttenuationCurveSet,
        noise: NoiseModel,
    ) -> Result<Self, CoverageError> {
        scenario.validate()?;
        Ok(Self::assemble(scenario, grid, curves, noise))
    }

    fn assemble(scenario: Scenario, grid: ConductivityGrid, curves: AttenuationCurveSet, noise: NoiseModel) -> Self {
        let params = scenario.model.error_params();
        Self {
            scenario,
            grid,
            curves,
            noise,
            params,
        }
    }
}

/// Norton curves for every ground type in `grid`, plus seawater and the
/// default land constants used off-grid and for nodata.
pub fn default_curves_for(grid: &ConductivityGrid, frequency_hz: f64) -> Result<AttenuationCurveSet, CoverageError> {
    let mut grounds: Vec<GroundConstants> = vec![GroundConstants::SEAWATER, GroundConstants::DEFAULT_LAND];
    for g in &grid.cells {
        if !grounds.contains(g) {
            grounds.push(*g);
        }
    }
    Ok(AttenuationCurveSet::generate(&NortonFlatEarth, frequency_hz, &grounds)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOML: &str = r#"
schema_version = 1
name = "t"

[region]
lat_min = 34.0
lat_max = 35.0
lon_min = 126.0
lon_max = 127.0
resolution_m = 7000

[conductivity]
source = "itu_baseline"
itu_baseline = "itu.asc"

[noise]
season = "winter"

[model]
jitter_mode = { fixed = 6.0 }
clock_mode = "per_chain"

[[transmitters]]
id = "a"
location = { lat_deg = 36.0, lon_deg = 129.0 }
erp_kw = 100
gri_designator = 9930
chain_id = "9930"
role = "master"

[[transmitters]]
id = "b"
location = { lat_deg = 35.0, lon_deg = 126.5 }
erp_kw = 100
gri_designator = 9930
chain_id = "9930"
emission_delay_us = 11000
role = "secondary"

[[transmitters]]
id = "c"
location = { lat_deg = 37.0, lon_deg = 122.0 }
erp_kw = 400
gri_designator = 7430
chain_id = "7430"
role = "master"
"#;

    #[test]
    fn parse_defaults_and_round_trip() {
        let s = Scenario::from_toml_str(TOML).unwrap();
        assert_eq!(s.model.jitter_mode, JitterMode::Fixed(6.0));
        assert_eq!(s.model.clock_mode, ClockModeSetting::PerChain);
        assert_eq!(s.model.integration_time_s, 5.0);
        assert_eq!(s.model.snr_floor_db, -10.0);
        assert_eq!(s.noise.season, Season::Winter);
        assert!(s.transmitters[0].enabled);
        let back = Scenario::from_toml_str(&s.to_toml_string()).unwrap();
        assert_eq!(back, s);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(Scenario::from_json_str(&json).unwrap(), s);
    }

    #[test]
    fn rejects_bad_scenarios() {
        let v2 = TOML.replace("schema_version = 1", "schema_version = 2");
        assert!(matches!(Scenario::from_toml_str(&v2), Err(CoverageError::Schema(2))));
        let coarse = TOML.replace("resolution_m = 7000", "resolution_m = 500");
        assert!(Scenario::from_toml_str(&coarse).is_err());
        let bad_master = TOML.replacen("role = \"master\"", "role = \"master\"\nemission_delay_us = 5", 1);
        assert!(matches!(
            Scenario::from_toml_str(&bad_master),
            Err(CoverageError::Transmitter { .. })
        ));
        let unknown = TOML.replace("[model]", "[model]\nbogus = 1");
        assert!(matches!(Scenario::from_toml_str(&unknown), Err(CoverageError::Parse(_))));
    }

    #[test]
    fn missing_raster_names_path() {
        let s = Scenario::from_toml_str(TOML).unwrap();
        let err = PreparedScenario::prepare(s, Path::new("/nonexistent-dir")).unwrap_err();
        match err {
            CoverageError::File { path, .. } => assert!(path.ends_with("itu.asc")),
            other => panic!("{other:?}"),
        }
    }
}
