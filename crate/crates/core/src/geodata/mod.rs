//! Land cover, ground conductivity rasters and great-circle path profiles.

mod path;
mod point;
mod raster;
mod terrain;

pub use path::{sample_path, PathProfile, PathSegment, DEFAULT_PATH_STEP_M};
pub use point::{polygon_contains, GeoPoint, EARTH_RADIUS_M, METERS_PER_DEGREE};
pub use raster::{read_raster, write_raster, Grid, RasterFrame, RasterHeader};
pub use terrain::{
    classify_conductivity, downsample, downsampled_shape, load_conductivity_grid,
    load_land_cover, write_conductivity_grid, write_land_cover, ConductivityGrid,
    DownsampleRule, GroundConstants, LandCoverGrid, NodataPolicy, TerrainClass,
    TerrainClassTable,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeodataError {
    #[error("invalid coordinates lat={lat_deg}, lon={lon_deg}")]
    InvalidPoint { lat_deg: f64, lon_deg: f64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid raster frame: {0}")]
    InvalidFrame(String),
    #[error("invalid terrain class table: {0}")]
    InvalidTable(String),
    #[error("land-cover class code {0} is not in the terrain class table")]
    UnknownClass(i32),
    #[error("nodata cell encountered with nodata policy `error`")]
    NodataNotAllowed,
    #[error("invalid ground constants sigma={conductivity} S/m, eps={permittivity}")]
    InvalidGround { conductivity: f64, permittivity: f64 },
    #[error("path sampling step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("degenerate path: transmitter and receiver coincide")]
    DegeneratePath,
}
