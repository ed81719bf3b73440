//! Self-contained Northeast Asia demo data set.
//!
//! Coastlines are coarse hand-drawn polygons and land-cover classes follow a
//! simple seeded pattern (mountains in the east, farmland in the west, cities
//! as residential/industrial discs). The data is illustrative only; it is meant
//! to exercise the full pipeline at national scale, not to reproduce any
//! surveyed map.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coverage::{
    ConductivityConfig, ConductivitySource, ModelConfig, NoiseConfig, Region, Role, Scenario,
    Transmitter, SCHEMA_VERSION,
};
use crate::geodata::{
    polygon_contains, write_land_cover, write_raster, GeoPoint,
    Grid, GroundConstants, LandCoverGrid, NodataPolicy, RasterFrame, TerrainClassTable,
};
use crate::jitter::write_tor_log;
use crate::noise::Season;
use crate::synthetic::{generate_pair, SyntheticPairConfig};

pub const NODATA_CODE: i32 = -9999;
pub const DEMO_CELL_DEG: f64 = 0.02;
const EXTENT_LAT: (f64, f64) = (29.8, 39.8);
const EXTENT_LON: (f64, f64) = (118.0, 131.0);

const SOUTH_KOREA: [[f64; 2]; 26] = [
    [37.75, 126.2], [37.95, 126.65], [38.3, 127.1], [38.3, 127.8], [38.62, 128.35],
    [38.2, 128.6], [37.75, 128.95], [37.4, 129.25], [36.95, 129.42], [36.4, 129.38],
    [36.08, 129.57], [35.5, 129.45], [35.15, 129.2], [35.05, 128.95], [34.85, 128.4],
    [34.75, 127.75], [34.45, 127.3], [34.3, 126.52], [34.55, 126.3], [34.8, 126.4],
    [35.5, 126.45], [35.98, 126.7], [36.35, 126.55], [36.75, 126.15], [37.0, 126.6],
    [37.45, 126.6],
];

const JEJU: [[f64; 2]; 4] = [[33.2, 126.2], [33.55, 126.3], [33.55, 126.95], [33.25, 126.9]];

const NORTH_KOREA: [[f64; 2]; 11] = [
    [37.7, 124.6], [37.75, 126.2], [37.95, 126.65], [38.3, 127.1], [38.3, 127.8],
    [38.62, 128.35], [39.2, 127.6], [39.8, 127.6], [39.8, 124.3], [38.8, 124.9],
    [38.0, 124.7],
];

const CHINA: [[f64; 2]; 16] = [
    [29.8, 118.0], [29.8, 121.9], [31.0, 121.9], [32.0, 121.4], [33.0, 120.8],
    [34.3, 120.3], [35.1, 119.5], [36.0, 120.3], [36.5, 121.0], [36.9, 122.5],
    [37.45, 122.7], [37.6, 121.0], [37.2, 119.3], [38.0, 118.9], [39.8, 119.2],
    [39.8, 118.0],
];

/// (lat, lon, radius km, class code)
const CITIES: [(f64, f64, f64, i32); 9] = [
    (37.55, 126.98, 14.0, 90),
    (37.46, 126.70, 8.0, 90),
    (35.18, 129.07, 10.0, 90),
    (35.87, 128.60, 9.0, 90),
    (35.16, 126.85, 7.0, 90),
    (36.35, 127.38, 7.0, 90),
    (35.54, 129.31, 7.0, 100),
    (36.02, 129.36, 5.0, 100),
    (36.99, 127.11, 5.0, 90),
];

/// Mainland and Jeju outlines as `[lat, lon]` rings.
pub fn south_korea_mask() -> Vec<Vec<[f64; 2]>> {
    vec![SOUTH_KOREA.to_vec(), JEJU.to_vec()]
}

fn in_south_korea(p: &GeoPoint) -> bool {
    polygon_contains(&SOUTH_KOREA, p) || polygon_contains(&JEJU, p)
}

fn korea_class(p: &GeoPoint, u: f64) -> i32 {
    for &(lat, lon, r_km, code) in &CITIES {
        if p.distance_m(&GeoPoint::new(lat, lon).expect("valid city")) <= r_km * 1e3 {
            return code;
        }
    }
    let (lat, lon) = (p.lat_deg(), p.lon_deg());
    let eastern_ranges = (lon > 127.9 && lat > 35.6) || (lon > 128.0 && lon < 128.9 && lat > 36.3);
    if eastern_ranges {
        match u {
            u if u < 0.65 => 80,
            u if u < 0.85 => 70,
            _ => 60,
        }
    } else if lon < 127.0 {
        match u {
            u if u < 0.55 => 50,
            u if u < 0.85 => 60,
            u if u < 0.95 => 40,
            _ => 20,
        }
    } else {
        match u {
            u if u < 0.45 => 60,
            u if u < 0.7 => 80,
            u if u < 0.9 => 50,
            _ => 90,
        }
    }
}

fn extent_frame(cell_deg: f64) -> RasterFrame {
    let n_rows = ((EXTENT_LAT.1 - EXTENT_LAT.0) / cell_deg).round() as usize;
    let n_cols = ((EXTENT_LON.1 - EXTENT_LON.0) / cell_deg).round() as usize;
    RasterFrame::new(
        GeoPoint::new(EXTENT_LAT.0, EXTENT_LON.0).expect("valid origin"),
        cell_deg,
        n_cols,
        n_rows,
    )
    .expect("valid frame")
}

/// Fine land-cover raster (default-table class codes; North Korea is nodata).
pub fn korea_land_cover(cell_deg: f64, seed: u64) -> LandCoverGrid {
    let frame = extent_frame(cell_deg);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = Vec::with_capacity(frame.len());
    for row in 0..frame.n_rows {
        for col in 0..frame.n_cols {
            let (lat, lon) = frame.cell_center(row, col);
            let p = GeoPoint::new(lat, lon).expect("inside extent");
            let u: f64 = rng.gen();
            let code = if in_south_korea(&p) {
                korea_class(&p, u)
            } else if polygon_contains(&NORTH_KOREA, &p) {
                NODATA_CODE
            } else if polygon_contains(&CHINA, &p) {
                match u {
                    u if u < 0.6 => 50,
                    u if u < 0.85 => 60,
                    _ => 90,
                }
            } else {
                10
            };
            cells.push(code);
        }
    }
    LandCoverGrid {
        grid: Grid::new(frame, cells).expect("sized"),
        nodata_code: NODATA_CODE,
    }
}

/// Coarse one-degree conductivity map in the style of the ITU world atlas:
/// a handful of land sectors, sea elsewhere, no data over North Korea.
/// Cells without data are `None`.
pub fn itu_like_baseline() -> Grid<Option<GroundConstants>> {
    let frame = extent_frame(1.0);
    let west = GroundConstants::new(1e-2, 15.0);
    let east = GroundConstants::new(3e-3, 13.0);
    let china = GroundConstants::new(1e-2, 15.0);
    let mut cells = Vec::with_capacity(frame.len());
    for row in 0..frame.n_rows {
        for col in 0..frame.n_cols {
            let (lat0, lon0) = frame.cell_center(row, col);
            let (mut sk, mut nk, mut cn, mut total) = (0, 0, 0, 0);
            for i in 0..5 {
                for j in 0..5 {
                    let lat = lat0 - 0.4 + 0.2 * i as f64;
                    let lon = lon0 - 0.4 + 0.2 * j as f64;
                    let p = GeoPoint::new(lat, lon).expect("inside extent");
                    total += 1;
                    if in_south_korea(&p) {
                        sk += 1;
                    } else if polygon_contains(&NORTH_KOREA, &p) {
                        nk += 1;
                    } else if polygon_contains(&CHINA, &p) {
                        cn += 1;
                    }
                }
            }
            let half = total / 2;
            cells.push(if nk > half {
                None
            } else if sk > half {
                Some(if lon0 < 127.5 { west } else { east })
            } else if cn > half {
                Some(china)
            } else {
                Some(GroundConstants::SEAWATER)
            });
        }
    }
    Grid::new(frame, cells).expect("sized")
}

#[allow(clippy::too_many_arguments)]
fn tx(
    id: &str,
    name: &str,
    lat: f64,
    lon: f64,
    erp_kw: f64,
    gri: u32,
    role: Role,
    ed_us: f64,
    jitter_m: f64,
) -> Transmitter {
    Transmitter {
        id: id.into(),
        name: name.into(),
        location: GeoPoint::new(lat, lon).expect("valid station"),
        erp_kw,
        gri_designator: gri,
        chain_id: gri.to_string(),
        emission_delay_us: ed_us,
        role,
        jitter_m,
        enabled: true,
    }
}

/// Two Korean and two Chinese stations of two chains, with per-station
/// jitters as averaged estimates. ERPs and emission delays are demo values.
pub fn korea_transmitters() -> Vec<Transmitter> {
    vec![
        tx("pohang", "Pohang", 36.18, 129.34, 100.0, 9930, Role::Master, 0.0, 2.11),
        tx("gwangju", "Gwangju", 35.04, 126.54, 100.0, 9930, Role::Secondary, 11_946.97, 3.21),
        tx("rongcheng", "Rongcheng", 37.06, 122.32, 400.0, 7430, Role::Master, 0.0, 2.13),
        tx("xuancheng", "Xuancheng", 31.07, 118.89, 400.0, 7430, Role::Secondary, 13_459.70, 5.38),
    ]
}

/// Named test locations.
pub fn test_sites() -> Vec<(&'static str, GeoPoint)> {
    [
        ("Incheon", 37.456, 126.705),
        ("Pyeongtaek", 36.99, 127.11),
        ("Dangjin", 36.89, 126.63),
        ("Andong", 36.57, 128.73),
        ("Gumi", 36.12, 128.34),
        ("Jeonju", 35.82, 127.15),
        ("Gwangju", 35.16, 126.85),
        ("Okcheon", 36.31, 127.57),
        ("Gimcheon", 36.14, 128.11),
        ("Daegu", 35.87, 128.60),
    ]
    .into_iter()
    .map(|(n, lat, lon)| (n, GeoPoint::new(lat, lon).expect("valid site")))
    .collect()
}

pub const LAND_COVER_FILE: &str = "landcover.asc";
pub const ITU_FILE: &str = "itu_baseline.asc";
pub const CLASS_TABLE_FILE: &str = "terrain_classes.csv";

/// South Korea at 7 km with the given conductivity source, referencing the
/// demo files by relative path.
pub fn korea_scenario(source: ConductivitySource) -> Scenario {
    let name = match source {
        ConductivitySource::LandCover => "korea-land-cover",
        ConductivitySource::ItuBaseline => "korea-itu-baseline",
    };
    Scenario {
        schema_version: SCHEMA_VERSION,
        name: name.into(),
        region: Region {
            lat_min: 33.0,
            lat_max: 38.7,
            lon_min: 125.9,
            lon_max: 129.7,
            resolution_m: 7_000.0,
            mask: south_korea_mask(),
        },
        conductivity: ConductivityConfig {
            source,
            land_cover: Some(LAND_COVER_FILE.into()),
            class_table: Some(CLASS_TABLE_FILE.into()),
            itu_baseline: Some(ITU_FILE.into()),
            downsample_m: match source {
                ConductivitySource::LandCover => Some(7_000.0),
                ConductivitySource::ItuBaseline => None,
            },
            downsample_rule: Default::default(),
            nodata_policy: NodataPolicy::DefaultLand,
            curves: None,
        },
        noise: NoiseConfig {
            season: Season::Winter,
            constant_dbuvm: Some(crate::noise::DEFAULT_NOISE_DBUVM),
            grids: None,
        },
        model: ModelConfig::default(),
        transmitters: korea_transmitters(),
    }
}

fn write_itu_raster(g: &Grid<Option<GroundConstants>>) -> String {
    write_raster(&g.frame, Some(i64::from(NODATA_CODE)), &g.cells, |c| match c {
        Some(gc) => format!("{}:{}", gc.conductivity_s_per_m, gc.relative_permittivity),
        None => NODATA_CODE.to_string(),
    })
}

/// Writes the demo rasters, class table, both scenarios, site list and a
/// synthetic 24 h TOR log into `dir`; returns the written paths.
pub fn write_demo_data(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: &[u8]| -> std::io::Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, bytes)?;
        written.push(p);
        Ok(())
    };
    put(LAND_COVER_FILE, write_land_cover(&korea_land_cover(DEMO_CELL_DEG, 7)).as_bytes())?;
    put(ITU_FILE, write_itu_raster(&itu_like_baseline()).as_bytes())?;
    let mut table = Vec::new();
    TerrainClassTable::default()
        .to_csv(&mut table)
        .map_err(std::io::Error::other)?;
    put(CLASS_TABLE_FILE, &table)?;
    for source in [ConductivitySource::LandCover, ConductivitySource::ItuBaseline] {
        let s = korea_scenario(source);
        put(&format!("{}.toml", s.name), s.to_toml_string().as_bytes())?;
    }
    let mut sites = String::from("site,lat,lon\n");
    for (name, p) in test_sites() {
        sites.push_str(&format!("{name},{},{}\n", p.lat_deg(), p.lon_deg()));
    }
    put("sites.csv", sites.as_bytes())?;
    let cfg = SyntheticPairConfig {
        site_id: "Okcheon".into(),
        station_ids: ("pohang".into(), "gwangju".into()),
        ..Default::default()
    };
    let (a, b) = generate_pair(&cfg).map_err(std::io::Error::other)?;
    let mut log = Vec::new();
    write_tor_log(&mut log, &[a, b]).map_err(std::io::Error::other)?;
    put("tor_log.csv", &log)?;
    Ok(written)
}
