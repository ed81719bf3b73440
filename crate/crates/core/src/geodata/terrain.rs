use std::collections::HashMap;
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use super::raster::{read_raster, write_raster, Grid, RasterFrame};
use super::{GeodataError, METERS_PER_DEGREE};

/// Electrical ground constants of a homogeneous stretch of terrain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundConstants {
    pub conductivity_s_per_m: f64,
    pub relative_permittivity: f64,
}

impl GroundConstants {
    pub const SEAWATER: GroundConstants = GroundConstants::new(5.0, 80.0);
    /// "Pasture land, medium hills and forest", used for land without data.
    pub const DEFAULT_LAND: GroundConstants = GroundConstants::new(5e-3, 13.0);

    pub const fn new(conductivity_s_per_m: f64, relative_permittivity: f64) -> Self {
        Self {
            conductivity_s_per_m,
            relative_permittivity,
        }
    }

    pub fn validate(&self) -> Result<(), GeodataError> {
        let s = self.conductivity_s_per_m;
        let e = self.relative_permittivity;
        if !(s.is_finite() && s > 0.0 && e.is_finite() && e >= 1.0) {
            return Err(GeodataError::InvalidGround {
                conductivity: s,
                permittivity: e,
            });
        }
        Ok(())
    }

    fn key(&self) -> (u64, u64) {
        (
            self.conductivity_s_per_m.to_bits(),
            self.relative_permittivity.to_bits(),
        )
    }

    /// Orders by conductivity, then permittivity.
    fn cmp_conservative(&self, other: &Self) -> std::cmp::Ordering {
        self.conductivity_s_per_m
            .total_cmp(&other.conductivity_s_per_m)
            .then(self.relative_permittivity.total_cmp(&other.relative_permittivity))
    }
}

/// One row of the terrain class table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerrainClass {
    pub class_code: i32,
    pub terrain_name: String,
    #[serde(rename = "conductivity_s_per_m")]
    pub conductivity_s_per_m: f64,
    pub relative_permittivity: f64,
}

impl TerrainClass {
    pub fn ground(&self) -> GroundConstants {
        GroundConstants::new(self.conductivity_s_per_m, self.relative_permittivity)
    }
}

/// Mapping from land-cover class codes to ground constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TerrainClassTable {
    entries: Vec<TerrainClass>,
}

const DEFAULT_CLASSES: [(i32, &str, f64, f64); 10] = [
    (10, "Seawater", 5.0, 80.0),
    (20, "Fresh water", 8e-3, 80.0),
    (30, "Dry sandy, flat coastal land", 8e-3, 10.0),
    (40, "Marshy, forested flat land", 8e-3, 12.0),
    (50, "Rich agricultural land, low hills", 1e-2, 15.0),
    (60, "Pasture land, medium hills and forest", 5e-3, 13.0),
    (70, "Rocky land, steep hills", 2e-3, 10.0),
    (80, "Mountainous", 1e-3, 5.0),
    (90, "Residential area", 2e-3, 5.0),
    (100, "Industrial area", 1e-4, 3.0),
];

impl Default for TerrainClassTable {
    fn default() -> Self {
        let entries = DEFAULT_CLASSES
            .iter()
            .map(|&(code, name, s, e)| TerrainClass {
                class_code: code,
                terrain_name: name.to_string(),
                conductivity_s_per_m: s,
                relative_permittivity: e,
            })
            .collect();
        Self { entries }
    }
}

impl TerrainClassTable {
    pub fn new(entries: Vec<TerrainClass>) -> Result<Self, GeodataError> {
        let mut seen = std::collections::HashSet::new();
        for e in &entries {
            if !seen.insert(e.class_code) {
                return Err(GeodataError::InvalidTable(format!(
                    "duplicate class code {}",
                    e.class_code
                )));
            }
            let s = e.conductivity_s_per_m;
            if !(s > 0.0 && s <= 10.0) {
                return Err(GeodataError::InvalidTable(format!(
                    "class {} conductivity {s} outside (0, 10] S/m",
                    e.class_code
                )));
            }
            let p = e.relative_permittivity;
            if !(1.0..=100.0).contains(&p) {
                return Err(GeodataError::InvalidTable(format!(
                    "class {} permittivity {p} outside [1, 100]",
                    e.class_code
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[TerrainClass] {
        &self.entries
    }

    pub fn lookup(&self, code: i32) -> Option<&TerrainClass> {
        self.entries.iter().find(|e| e.class_code == code)
    }

    pub fn by_name(&self, name: &str) -> Option<&TerrainClass> {
        self.entries.iter().find(|e| e.terrain_name == name)
    }

    /// Reads the `class_code,terrain_name,conductivity_s_per_m,relative_permittivity` CSV.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, GeodataError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut entries = Vec::new();
        for row in rdr.deserialize() {
            entries.push(row.map_err(|e| GeodataError::InvalidTable(e.to_string()))?);
        }
        Self::new(entries)
    }

    pub fn to_csv<W: Write>(&self, writer: W) -> Result<(), GeodataError> {
        let mut w = csv::Writer::from_writer(writer);
        for e in &self.entries {
            w.serialize(e)
                .map_err(|e| GeodataError::InvalidTable(e.to_string()))?;
        }
        w.flush()
            .map_err(|e| GeodataError::InvalidTable(e.to_string()))
    }
}

/// Land-cover class raster.
#[derive(Debug, Clone, PartialEq)]
pub struct LandCoverGrid {
    pub grid: Grid<i32>,
    pub nodata_code: i32,
}

/// Effective ground constants raster.
pub type ConductivityGrid = Grid<GroundConstants>;

/// How cells without land-cover data are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodataPolicy {
    Seawater,
    #[default]
    DefaultLand,
    Error,
}

impl NodataPolicy {
    pub fn resolve(&self) -> Option<GroundConstants> {
        match self {
            NodataPolicy::Seawater => Some(GroundConstants::SEAWATER),
            NodataPolicy::DefaultLand => Some(GroundConstants::DEFAULT_LAND),
            NodataPolicy::Error => None,
        }
    }
}

/// Aggregation rule for [`downsample`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DownsampleRule {
    #[default]
    ModeClass,
    MedianConductivity,
}

pub fn load_land_cover<R: BufRead>(reader: R) -> Result<LandCoverGrid, GeodataError> {
    let (header, cells) = read_raster(reader, |tok, _| {
        tok.parse::<i32>().map_err(|e| e.to_string())
    })?;
    let nodata = header.nodata_value.ok_or(GeodataError::Parse {
        line: 0,
        message: "land-cover raster requires a `nodata_value` header".into(),
    })?;
    let nodata_code = i32::try_from(nodata).map_err(|_| GeodataError::Parse {
        line: 0,
        message: format!("nodata_value {nodata} does not fit a class code"),
    })?;
    Ok(LandCoverGrid {
        grid: Grid::new(header.frame, cells)?,
        nodata_code,
    })
}

pub fn write_land_cover(grid: &LandCoverGrid) -> String {
    write_raster(
        &grid.grid.frame,
        Some(grid.nodata_code as i64),
        &grid.grid.cells,
        |c| c.to_string(),
    )
}

/// Loads a conductivity raster of `sigma:eps` tokens; nodata tokens are
/// resolved by `policy`.
pub fn load_conductivity_grid<R: BufRead>(
    reader: R,
    policy: NodataPolicy,
) -> Result<ConductivityGrid, GeodataError> {
    let (header, cells) = read_raster(reader, |tok, nodata| {
        if let Some(nd) = nodata {
            if tok.parse::<i64>().ok() == Some(nd) {
                return policy
                    .resolve()
                    .ok_or_else(|| "nodata cell with nodata policy `error`".to_string());
            }
        }
        let (s, e) = tok
            .split_once(':')
            .ok_or_else(|| "expected `sigma:eps`".to_string())?;
        let g = GroundConstants::new(
            s.parse().map_err(|e| format!("sigma: {e}"))?,
            e.parse().map_err(|e| format!("eps: {e}"))?,
        );
        g.validate().map_err(|e| e.to_string())?;
        Ok(g)
    })?;
    Grid::new(header.frame, cells)
}

pub fn write_conductivity_grid(grid: &ConductivityGrid) -> String {
    write_raster(&grid.frame, None, &grid.cells, |g| {
        format!("{}:{}", g.conductivity_s_per_m, g.relative_permittivity)
    })
}

/// Replace each land-cover class by its ground constants.
pub fn classify_conductivity(
    grid: &LandCoverGrid,
    table: &TerrainClassTable,
    nodata_policy: NodataPolicy,
) -> Result<ConductivityGrid, GeodataError> {
    let lut: HashMap<i32, GroundConstants> = table
        .entries()
        .iter()
        .map(|e| (e.class_code, e.ground()))
        .collect();
    let cells = grid
        .grid
        .cells
        .iter()
        .map(|&code| {
            if code == grid.nodata_code {
                nodata_policy
                    .resolve()
                    .ok_or(GeodataError::NodataNotAllowed)
            } else {
                lut.get(&code)
                    .copied()
                    .ok_or(GeodataError::UnknownClass(code))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Grid::new(grid.grid.frame, cells)
}

fn target_cell_deg(frame: &RasterFrame, target_cell_m: f64) -> Result<f64, GeodataError> {
    if !(target_cell_m.is_finite() && target_cell_m > 0.0) {
        return Err(GeodataError::InvalidFrame(format!(
            "target cell size must be positive, got {target_cell_m}"
        )));
    }
    let source = frame.cell_size_deg;
    let target = target_cell_m / METERS_PER_DEGREE;
    if (target - source).abs() <= 1e-9 * source {
        return Ok(source);
    }
    if target < source {
        return Err(GeodataError::InvalidFrame(format!(
            "target cell {target_cell_m} m is finer than source cell {:.3} m",
            source * METERS_PER_DEGREE
        )));
    }
    Ok(target)
}

fn blocks(n_cells: usize, source_deg: f64, target_deg: f64) -> usize {
    let ratio = n_cells as f64 * source_deg / target_deg;
    ((ratio - 1e-9).ceil() as usize).max(1)
}

/// Output `(n_cols, n_rows)` of [`downsample`] without materializing anything.
pub fn downsampled_shape(
    frame: &RasterFrame,
    target_cell_m: f64,
) -> Result<(usize, usize), GeodataError> {
    let t = target_cell_deg(frame, target_cell_m)?;
    Ok((
        blocks(frame.n_cols, frame.cell_size_deg, t),
        blocks(frame.n_rows, frame.cell_size_deg, t),
    ))
}

/// Aggregate to a coarser raster over the same extent.
///
/// Source cells are assigned to the output block containing their center.
/// `ModeClass` keeps the most frequent ground pair (ties go to the lower
/// conductivity); `MedianConductivity` keeps the lower-median pair ordered by
/// conductivity. A block that receives no source center takes the source cell
/// under its own center.
pub fn downsample(
    grid: &ConductivityGrid,
    target_cell_m: f64,
    rule: DownsampleRule,
) -> Result<ConductivityGrid, GeodataError> {
    let src = &grid.frame;
    let t = target_cell_deg(src, target_cell_m)?;
    let (out_cols, out_rows) = downsampled_shape(src, target_cell_m)?;
    let c = src.cell_size_deg;

    let mut counts: Vec<HashMap<(u64, u64), (GroundConstants, usize)>> =
        vec![HashMap::new(); out_cols * out_rows];
    for row in 0..src.n_rows {
        let y = (src.n_rows - row) as f64 * c - 0.5 * c;
        let orow_s = ((y / t).floor() as usize).min(out_rows - 1);
        let orow = out_rows - 1 - orow_s;
        for col in 0..src.n_cols {
            let x = (col as f64 + 0.5) * c;
            let ocol = ((x / t).floor() as usize).min(out_cols - 1);
            let g = *grid.get(row, col);
            counts[orow * out_cols + ocol]
                .entry(g.key())
                .and_modify(|e| e.1 += 1)
                .or_insert((g, 1));
        }
    }

    let frame = RasterFrame::new(src.origin, t, out_cols, out_rows)?;
    let mut cells = Vec::with_capacity(out_cols * out_rows);
    for (i, block) in counts.into_iter().enumerate() {
        if block.is_empty() {
            let (orow, ocol) = (i / out_cols, i % out_cols);
            let (lat, lon) = frame.cell_center(orow, ocol);
            let srow = (((src.lat_max() - lat) / c).floor().max(0.0) as usize).min(src.n_rows - 1);
            let scol = (((lon - src.lon_min()) / c).floor().max(0.0) as usize).min(src.n_cols - 1);
            cells.push(*grid.get(srow, scol));
            continue;
        }
        let mut values: Vec<(GroundConstants, usize)> = block.into_values().collect();
        values.sort_by(|a, b| a.0.cmp_conservative(&b.0));
        let chosen = match rule {
            DownsampleRule::ModeClass => {
                // values are sorted ascending, so the first maximum is the conservative one
                let mut best = values[0];
                for v in &values[1..] {
                    if v.1 > best.1 {
                        best = *v;
                    }
                }
                best.0
            }
            DownsampleRule::MedianConductivity => {
                let total: usize = values.iter().map(|v| v.1).sum();
                let target_rank = (total - 1) / 2;
                let mut seen = 0;
                let mut pick = values[0].0;
                for (g, n) in &values {
                    if seen + n > target_rank {
                        pick = *g;
                        break;
                    }
                    seen += n;
                }
                pick
            }
        };
        cells.push(chosen);
    }
    Grid::new(frame, cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodata::GeoPoint;

    fn table() -> TerrainClassTable {
        TerrainClassTable::default()
    }

    #[test]
    fn parse_two_by_two() {
        let src = "ncols 2\nnrows 2\nxllcorner 126\nyllcorner 35\ncellsize 0.5\nnodata_value -9999\n10 20\n30 40\n";
        let g = load_land_cover(src.as_bytes()).unwrap();
        assert_eq!(g.grid.frame.n_cols, 2);
        assert_eq!(g.grid.frame.n_rows, 2);
        assert_eq!(g.grid.cells, vec![10, 20, 30, 40]);
    }

    #[test]
    fn short_row_is_parse_error() {
        let src = "ncols 3\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nnodata_value -1\n1 2\n3 4\n";
        match load_land_cover(src.as_bytes()) {
            Err(GeodataError::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_token_is_parse_error() {
        let src = "ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nnodata_value -1\nforest\n";
        assert!(matches!(
            load_land_cover(src.as_bytes()),
            Err(GeodataError::Parse { line: 7, .. })
        ));
    }

    #[test]
    fn nodata_is_retained_then_resolved_by_policy() {
        let src = "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nnodata_value -9999\n-9999 80\n";
        let g = load_land_cover(src.as_bytes()).unwrap();
        assert_eq!(g.grid.cells[0], -9999);
        let c = classify_conductivity(&g, &table(), NodataPolicy::Seawater).unwrap();
        assert_eq!(c.cells[0], GroundConstants::new(5.0, 80.0));
        assert_eq!(c.cells[1], GroundConstants::new(1e-3, 5.0));
        let c = classify_conductivity(&g, &table(), NodataPolicy::DefaultLand).unwrap();
        assert_eq!(c.cells[0], GroundConstants::new(5e-3, 13.0));
        assert!(matches!(
            classify_conductivity(&g, &table(), NodataPolicy::Error),
            Err(GeodataError::NodataNotAllowed)
        ));
    }

    #[test]
    fn unmapped_code_is_named() {
        let frame = RasterFrame::new(GeoPoint::new(0.0, 0.0).unwrap(), 1.0, 1, 1).unwrap();
        let g = LandCoverGrid {
            grid: Grid::new(frame, vec![77]).unwrap(),
            nodata_code: -1,
        };
        let err = classify_conductivity(&g, &table(), NodataPolicy::Seawater).unwrap_err();
        assert!(matches!(err, GeodataError::UnknownClass(77)));
        assert!(err.to_string().contains("77"));
    }

    #[test]
    fn table_rejects_bad_rows() {
        let dup = "class_code,terrain_name,conductivity_s_per_m,relative_permittivity\n1,a,0.1,10\n1,b,0.2,10\n";
        assert!(TerrainClassTable::from_csv(dup.as_bytes()).is_err());
        let bad_sigma = "class_code,terrain_name,conductivity_s_per_m,relative_permittivity\n1,a,11,10\n";
        assert!(TerrainClassTable::from_csv(bad_sigma.as_bytes()).is_err());
        let bad_eps = "class_code,terrain_name,conductivity_s_per_m,relative_permittivity\n1,a,0.1,0.5\n";
        assert!(TerrainClassTable::from_csv(bad_eps.as_bytes()).is_err());
    }

    #[test]
    fn table_csv_round_trip() {
        let mut buf = Vec::new();
        table().to_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            "class_code,terrain_name,conductivity_s_per_m,relative_permittivity\n"
        ));
        assert_eq!(TerrainClassTable::from_csv(text.as_bytes()).unwrap(), table());
    }

    fn sigma_grid(cells: Vec<GroundConstants>, n: usize, cell_deg: f64) -> ConductivityGrid {
        let frame = RasterFrame::new(GeoPoint::new(0.0, 0.0).unwrap(), cell_deg, n, n).unwrap();
        Grid::new(frame, cells).unwrap()
    }

    #[test]
    fn mode_of_five_sea_four_mountain() {
        let sea = GroundConstants::SEAWATER;
        let mtn = GroundConstants::new(1e-3, 5.0);
        let cells = vec![sea, mtn, sea, mtn, sea, mtn, sea, mtn, sea];
        let g = sigma_grid(cells, 3, 0.01);
        let target = 3.0 * 0.01 * METERS_PER_DEGREE;
        let out = downsample(&g, target, DownsampleRule::ModeClass).unwrap();
        assert_eq!(out.cells, vec![sea]);
        let out = downsample(&g, target, DownsampleRule::MedianConductivity).unwrap();
        // sorted: 4 mountainous then 5 seawater; lower median is rank 4 -> seawater
        assert_eq!(out.cells, vec![sea]);
    }

    #[test]
    fn mode_tie_prefers_lower_conductivity() {
        let sea = GroundConstants::SEAWATER;
        let mtn = GroundConstants::new(1e-3, 5.0);
        let g = sigma_grid(vec![sea, mtn, mtn, sea], 2, 0.01);
        let out = downsample(&g, 2.0 * 0.01 * METERS_PER_DEGREE, DownsampleRule::ModeClass).unwrap();
        assert_eq!(out.cells, vec![mtn]);
    }

    #[test]
    fn uniform_block_and_identity() {
        let farm = GroundConstants::new(1e-2, 15.0);
        let g = sigma_grid(vec![farm; 16], 4, 0.02);
        let out = downsample(&g, 4.0 * 0.02 * METERS_PER_DEGREE, DownsampleRule::ModeClass).unwrap();
        assert_eq!(out.cells, vec![farm]);
        let same = downsample(&g, 0.02 * METERS_PER_DEGREE, DownsampleRule::ModeClass).unwrap();
        assert_eq!(same, g);
    }

    #[test]
    fn thirty_meter_to_seven_km_shape() {
        // 210 km square of 30 m cells
        let c = 30.0 / METERS_PER_DEGREE;
        let frame = RasterFrame::new(GeoPoint::new(35.0, 127.0).unwrap(), c, 7000, 7000).unwrap();
        assert_eq!(downsampled_shape(&frame, 7000.0).unwrap(), (30, 30));
    }

    #[test]
    fn thirty_meter_block_materialized() {
        // 21 km square of 30 m cells -> 3 x 3 at 7 km
        let c = 30.0 / METERS_PER_DEGREE;
        let farm = GroundConstants::new(1e-2, 15.0);
        let g = sigma_grid(vec![farm; 700 * 700], 700, c);
        let out = downsample(&g, 7000.0, DownsampleRule::ModeClass).unwrap();
        assert_eq!((out.frame.n_cols, out.frame.n_rows), (3, 3));
        assert!(out.cells.iter().all(|&x| x == farm));
    }

    #[test]
    fn finer_target_rejected() {
        let g = sigma_grid(vec![GroundConstants::SEAWATER; 4], 2, 0.1);
        assert!(downsample(&g, 100.0, DownsampleRule::ModeClass).is_err());
    }

    #[test]
    fn conductivity_raster_round_trip_and_nodata() {
        let src = "ncols 2\nnrows 1\nxllcorner 124\nyllcorner 33\ncellsize 0.5\nnodata_value -9999\n0.003:10 -9999\n";
        let g = load_conductivity_grid(src.as_bytes(), NodataPolicy::DefaultLand).unwrap();
        assert_eq!(g.cells[0], GroundConstants::new(3e-3, 10.0));
        assert_eq!(g.cells[1], GroundConstants::DEFAULT_LAND);
        let text = write_conductivity_grid(&g);
        let back = load_conductivity_grid(text.as_bytes(), NodataPolicy::Error).unwrap();
        assert_eq!(back, g);
        assert!(load_conductivity_grid(src.as_bytes(), NodataPolicy::Error).is_err());
        let neg = "ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n-0.1:10\n";
        assert!(load_conductivity_grid(neg.as_bytes(), NodataPolicy::Seawater).is_err());
    }
}
