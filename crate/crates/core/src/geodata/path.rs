use serde::{Deserialize, Serialize};

use super::{ConductivityGrid, GeoPoint, GeodataError, GroundConstants};

/// Default along-path sampling step.
pub const DEFAULT_PATH_STEP_M: f64 = 1_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSegment {
    pub length_m: f64,
    pub ground: GroundConstants,
}

/// Piecewise-homogeneous propagation path, ordered from transmitter to receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathProfile {
    segments: Vec<PathSegment>,
    total_length_m: f64,
}

impl PathProfile {
    /// Builds a profile, merging adjacent segments with identical ground constants.
    pub fn new(segments: Vec<PathSegment>) -> Result<Self, GeodataError> {
        let mut merged: Vec<PathSegment> = Vec::with_capacity(segments.len());
        for s in segments {
            if !(s.length_m.is_finite() && s.length_m > 0.0) {
                return Err(GeodataError::DegeneratePath);
            }
            s.ground.validate()?;
            match merged.last_mut() {
                Some(last) if last.ground == s.ground => last.length_m += s.length_m,
                _ => merged.push(s),
            }
        }
        if merged.is_empty() {
            return Err(GeodataError::DegeneratePath);
        }
        let total_length_m = merged.iter().map(|s| s.length_m).sum();
        Ok(Self {
            segments: merged,
            total_length_m,
        })
    }

    /// Single homogeneous segment.
    pub fn homogeneous(length_m: f64, ground: GroundConstants) -> Result<Self, GeodataError> {
        Self::new(vec![PathSegment { length_m, ground }])
    }

    pub fn segments(&self) -> &[PathSegment] {
        &self.segments
    }

    pub fn total_length_m(&self) -> f64 {
        self.total_length_m
    }

    pub fn reversed(&self) -> Self {
        let mut segments = self.segments.clone();
        segments.reverse();
        Self {
            segments,
            total_length_m: self.total_length_m,
        }
    }
}

/// Samples the great circle from `tx` to `rx` through `grid`.
///
/// The path is split into `ceil(D / step_m)` equal intervals; each interval
/// takes the ground constants of the cell under its midpoint (seawater off
/// the grid) and equal neighbours are merged. Sampling always runs in a
/// canonical endpoint order so that swapping `tx` and `rx` yields exactly the
/// reversed segment list.
pub fn sample_path(
    tx: &GeoPoint,
    rx: &GeoPoint,
    grid: &ConductivityGrid,
    step_m: f64,
) -> Result<PathProfile, GeodataError> {
    if !(step_m.is_finite() && step_m > 0.0) {
        return Err(GeodataError::InvalidStep(step_m));
    }
    let distance = tx.distance_m(rx);
    if distance <= 0.0 {
        return Err(GeodataError::DegeneratePath);
    }
    let swapped = (tx.lat_deg(), tx.lon_deg()) > (rx.lat_deg(), rx.lon_deg());
    let (a, b) = if swapped { (rx, tx) } else { (tx, rx) };

    let n = ((distance / step_m).ceil() as usize).max(1);
    let interval = distance / n as f64;
    let mut runs: Vec<(GroundConstants, usize)> = Vec::new();
    for k in 0..n {
        let p = a.interpolate(b, (k as f64 + 0.5) / n as f64);
        let g = grid.at(&p).copied().unwrap_or(GroundConstants::SEAWATER);
        match runs.last_mut() {
            Some(last) if last.0 == g => last.1 += 1,
            _ => runs.push((g, 1)),
        }
    }
    if swapped {
        runs.reverse();
    }
    let segments = runs
        .into_iter()
        .map(|(ground, count)| PathSegment {
            length_m: count as f64 * interval,
            ground,
        })
        .collect::<Vec<_>>();
    let mut profile = PathProfile::new(segments)?;
    profile.total_length_m = distance;
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodata::{Grid, RasterFrame};

    fn sea_land_grid() -> ConductivityGrid {
        // lon [0,1) seawater, [1,2) mountainous, lat [-1, 1)
        let frame = RasterFrame::new(GeoPoint::new(-1.0, 0.0).unwrap(), 1.0, 2, 2).unwrap();
        let mtn = GroundConstants::new(1e-3, 5.0);
        Grid::new(frame, vec![GroundConstants::SEAWATER, mtn, GroundConstants::SEAWATER, mtn])
            .unwrap()
    }

    #[test]
    fn uniform_sea_is_one_segment() {
        let frame = RasterFrame::new(GeoPoint::new(30.0, 120.0).unwrap(), 1.0, 5, 5).unwrap();
        let g = Grid::new(frame, vec![GroundConstants::SEAWATER; 25]).unwrap();
        let tx = GeoPoint::new(31.2, 121.1).unwrap();
        let rx = GeoPoint::new(34.5, 124.0).unwrap();
        let p = sample_path(&tx, &rx, &g, 1000.0).unwrap();
        assert_eq!(p.segments().len(), 1);
        assert_eq!(p.segments()[0].ground, GroundConstants::SEAWATER);
        let d = tx.distance_m(&rx);
        assert!((p.total_length_m() - d).abs() / d < 1e-3);
    }

    #[test]
    fn boundary_at_midpoint_gives_two_equal_segments() {
        let g = sea_land_grid();
        let tx = GeoPoint::new(0.0, 0.5).unwrap();
        let rx = GeoPoint::new(0.0, 1.5).unwrap();
        let p = sample_path(&tx, &rx, &g, 1000.0).unwrap();
        assert_eq!(p.segments().len(), 2);
        let (s0, s1) = (p.segments()[0], p.segments()[1]);
        assert_eq!(s0.ground, GroundConstants::SEAWATER);
        assert!((s0.length_m - s1.length_m).abs() < 1e-6);
        let sum: f64 = p.segments().iter().map(|s| s.length_m).sum();
        assert!((sum - p.total_length_m()).abs() / p.total_length_m() < 1e-6);
    }

    #[test]
    fn coincident_endpoints_rejected() {
        let g = sea_land_grid();
        let p = GeoPoint::new(0.0, 0.5).unwrap();
        assert!(matches!(
            sample_path(&p, &p, &g, 1000.0),
            Err(GeodataError::DegeneratePath)
        ));
    }

    #[test]
    fn off_grid_is_seawater() {
        let g = sea_land_grid();
        let tx = GeoPoint::new(5.0, 1.5).unwrap();
        let rx = GeoPoint::new(6.0, 1.5).unwrap();
        let p = sample_path(&tx, &rx, &g, 1000.0).unwrap();
        assert_eq!(p.segments(), &[PathSegment {
            length_m: p.segments()[0].length_m,
            ground: GroundConstants::SEAWATER
        }]);
    }

    #[test]
    fn merge_adjacent_equal_segments() {
        let sea = GroundConstants::SEAWATER;
        let p = PathProfile::new(vec![
            PathSegment { length_m: 1.0, ground: sea },
            PathSegment { length_m: 2.0, ground: sea },
        ])
        .unwrap();
        assert_eq!(p.segments().len(), 1);
        assert_eq!(p.total_length_m(), 3.0);
        assert!(PathProfile::new(vec![]).is_err());
    }
}
