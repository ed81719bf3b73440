//! Atmospheric noise lookup and SNR.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodata::{read_raster, GeoPoint, GeodataError, Grid};

pub const DEFAULT_NOISE_DBUVM: f64 = 52.0;

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("no noise grid for season {0}")]
    MissingSeason(Season),
    #[error("location ({lat}, {lon}) outside the noise grid extent")]
    OutOfExtent { lat: f64, lon: f64 },
    #[error("noise values must be finite")]
    NonFinite,
    #[error(transparent)]
    Raster(#[from] GeodataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Season {
    Spring,
    Summer,
    Autumn,
    Winter,
}

impl Season {
    pub const ALL: [Season; 4] = [Season::Spring, Season::Summer, Season::Autumn, Season::Winter];

    pub fn as_str(&self) -> &'static str {
        match self {
            Season::Spring => "spring",
            Season::Summer => "summer",
            Season::Autumn => "autumn",
            Season::Winter => "winter",
        }
    }
}

impl std::fmt::Display for Season {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Season {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Season::ALL
            .into_iter()
            .find(|x| x.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown season `{s}`"))
    }
}

/// Noise field strength in the receiver bandwidth, dB(uV/m).
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    Constant(f64),
    Seasonal(BTreeMap<Season, Grid<f64>>),
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::Constant(DEFAULT_NOISE_DBUVM)
    }
}

impl NoiseModel {
    /// Requires a finite grid for every season.
    pub fn seasonal(grids: BTreeMap<Season, Grid<f64>>) -> Result<Self, NoiseError> {
        for s in Season::ALL {
            let g = grids.get(&s).ok_or(NoiseError::MissingSeason(s))?;
            if g.cells.iter().any(|v| !v.is_finite()) {
                return Err(NoiseError::NonFinite);
            }
        }
        Ok(NoiseModel::Seasonal(grids))
    }

    pub fn noise_at(&self, location: &GeoPoint, season: Season) -> Result<f64, NoiseError> {
        match self {
            NoiseModel::Constant(v) => Ok(*v),
            NoiseModel::Seasonal(grids) => {
                let g = grids.get(&season).ok_or(NoiseError::MissingSeason(season))?;
                bilinear(g, location)
            }
        }
    }
}

/// Reads one seasonal noise raster (values in dB(uV/m)).
pub fn load_noise_grid<R: BufRead>(reader: R) -> Result<Grid<f64>, NoiseError> {
    let (header, cells) = read_raster(reader, |tok, _| {
        tok.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("invalid noise value `{tok}`"))
    })?;
    Ok(Grid::new(header.frame, cells)?)
}

/// Bilinear interpolation between cell centers; points between the outermost
/// centers and the raster edge take the edge values.
fn bilinear(g: &Grid<f64>, p: &GeoPoint) -> Result<f64, NoiseError> {
    let f = &g.frame;
    if !f.contains(p) {
        return Err(NoiseError::OutOfExtent {
            lat: p.lat_deg(),
            lon: p.lon_deg(),
        });
    }
    // continuous (row, col) in cell-center coordinates, row 0 north
    let fr = (f.lat_max() - p.lat_deg()) / f.cell_size_deg - 0.5;
    let fc = (p.lon_deg() - f.lon_min()) / f.cell_size_deg - 0.5;
    let fr = fr.clamp(0.0, (f.n_rows - 1) as f64);
    let fc = fc.clamp(0.0, (f.n_cols - 1) as f64);
    let (r0, c0) = (fr.floor() as usize, fc.floor() as usize);
    let (r1, c1) = ((r0 + 1).min(f.n_rows - 1), (c0 + 1).min(f.n_cols - 1));
    let (tr, tc) = (fr - r0 as f64, fc - c0 as f64);
    let top = g.get(r0, c0) * (1.0 - tc) + g.get(r0, c1) * tc;
    let bottom = g.get(r1, c0) * (1.0 - tc) + g.get(r1, c1) * tc;
    Ok(top * (1.0 - tr) + bottom * tr)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrEstimate {
    pub snr_db: f64,
    pub snr_linear: f64,
    pub signal_dbuvm: f64,
    pub noise_dbuvm: f64,
}

impl SnrEstimate {
    /// An estimate carrying only a linear ratio (signal/noise levels set relative to 0 dB noise).
    pub fn from_linear(snr_linear: f64) -> Self {
        let snr_db = 10.0 * snr_linear.log10();
        Self {
            snr_db,
            snr_linear,
            signal_dbuvm: snr_db,
            noise_dbuvm: 0.0,
        }
    }

    pub fn from_db(snr_db: f64) -> Self {
        compute_snr(snr_db, 0.0)
    }
}

pub fn compute_snr(signal_dbuvm: f64, noise_dbuvm: f64) -> SnrEstimate {
    let snr_db = signal_dbuvm - noise_dbuvm;
    SnrEstimate {
        snr_db,
        snr_linear: 10f64.powf(snr_db / 10.0),
        signal_dbuvm,
        noise_dbuvm,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodata::RasterFrame;

    fn ramp() -> Grid<f64> {
        // 3x4 cells of 1 degree, value = 10*row + col
        let frame = RasterFrame::new(GeoPoint::new(30.0, 120.0).unwrap(), 1.0, 4, 3).unwrap();
        let cells = (0..3)
            .flat_map(|r| (0..4).map(move |c| (10 * r + c) as f64))
            .collect();
        Grid::new(frame, cells).unwrap()
    }

    fn all_seasons(g: Grid<f64>) -> NoiseModel {
        NoiseModel::seasonal(Season::ALL.into_iter().map(|s| (s, g.clone())).collect()).unwrap()
    }

    #[test]
    fn constant_model() {
        let p = GeoPoint::new(-40.0, 10.0).unwrap();
        assert_eq!(NoiseModel::default().noise_at(&p, Season::Winter).unwrap(), 52.0);
    }

    #[test]
    fn uniform_grid() {
        let g = ramp().map(|_| 60.0);
        let m = all_seasons(g);
        for (lat, lon) in [(30.1, 120.1), (31.5, 122.2), (32.99, 123.99)] {
            let v = m.noise_at(&GeoPoint::new(lat, lon).unwrap(), Season::Summer).unwrap();
            assert!((v - 60.0).abs() < 1e-12);
        }
    }

    #[test]
    fn node_identity_and_midpoint() {
        let m = all_seasons(ramp());
        let g = ramp();
        for r in 0..3 {
            for c in 0..4 {
                let (lat, lon) = g.frame.cell_center(r, c);
                let v = m.noise_at(&GeoPoint::new(lat, lon).unwrap(), Season::Spring).unwrap();
                assert!((v - (10 * r + c) as f64).abs() < 1e-9);
            }
        }
        // halfway between centers of (0,0),(0,1),(1,0),(1,1): mean of 0,1,10,11
        let v = m.noise_at(&GeoPoint::new(32.0, 121.0).unwrap(), Season::Spring).unwrap();
        assert!((v - 5.5).abs() < 1e-9);
    }

    #[test]
    fn out_of_extent_and_missing_season() {
        let m = all_seasons(ramp());
        assert!(matches!(
            m.noise_at(&GeoPoint::new(10.0, 121.0).unwrap(), Season::Spring),
            Err(NoiseError::OutOfExtent { .. })
        ));
        let only = [(Season::Spring, ramp())].into_iter().collect();
        assert!(matches!(
            NoiseModel::seasonal(only),
            Err(NoiseError::MissingSeason(Season::Summer))
        ));
    }

    #[test]
    fn snr_arithmetic() {
        let s = compute_snr(70.0, 52.0);
        assert_eq!(s.snr_db, 18.0);
        assert!((s.snr_linear - 63.095_734_448_019_32).abs() < 1e-9);
        let e = compute_snr(52.0, 52.0);
        assert_eq!((e.snr_db, e.snr_linear), (0.0, 1.0));
        assert_eq!(compute_snr(52.0, 70.0).snr_db, -18.0);
    }

    #[test]
    fn load_grid_text() {
        let text = "ncols 2\nnrows 1\nxllcorner 126\nyllcorner 35\ncellsize 0.5\n55.5 56\n";
        let g = load_noise_grid(text.as_bytes()).unwrap();
        assert_eq!(g.cells, vec![55.5, 56.0]);
    }
}
