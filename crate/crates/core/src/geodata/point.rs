use serde::{Deserialize, Serialize};

use super::GeodataError;

/// Mean earth radius used for all great-circle geometry.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Length of one degree of arc on the [`EARTH_RADIUS_M`] sphere.
pub const METERS_PER_DEGREE: f64 = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;

/// A validated latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint", into = "RawPoint")]
pub struct GeoPoint {
    lat_deg: f64,
    lon_deg: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPoint {
    lat_deg: f64,
    lon_deg: f64,
}

impl TryFrom<RawPoint> for GeoPoint {
    type Error = GeodataError;

    fn try_from(raw: RawPoint) -> Result<Self, Self::Error> {
        GeoPoint::new(raw.lat_deg, raw.lon_deg)
    }
}

impl From<GeoPoint> for RawPoint {
    fn from(p: GeoPoint) -> Self {
        RawPoint {
            lat_deg: p.lat_deg,
            lon_deg: p.lon_deg,
        }
    }
}

impl GeoPoint {
    /// Latitude must lie in [-90, 90] and longitude in [-180, 180).
    pub fn new(lat_deg: f64, lon_deg: f64) -> Result<Self, GeodataError> {
        if !lat_deg.is_finite() || !lon_deg.is_finite() {
            return Err(GeodataError::InvalidPoint { lat_deg, lon_deg });
        }
        if !(-90.0..=90.0).contains(&lat_deg) || !(-180.0..180.0).contains(&lon_deg) {
            return Err(GeodataError::InvalidPoint { lat_deg, lon_deg });
        }
        Ok(Self { lat_deg, lon_deg })
    }

    pub fn lat_deg(&self) -> f64 {
        self.lat_deg
    }

    pub fn lon_deg(&self) -> f64 {
        self.lon_deg
    }

    fn to_unit_vector(self) -> [f64; 3] {
        let (lat, lon) = (self.lat_deg.to_radians(), self.lon_deg.to_radians());
        [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
    }

    fn from_unit_vector(v: [f64; 3]) -> Self {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let lat = (v[2] / norm).clamp(-1.0, 1.0).asin().to_degrees();
        let mut lon = v[1].atan2(v[0]).to_degrees();
        if lon >= 180.0 {
            lon -= 360.0;
        }
        Self {
            lat_deg: lat,
            lon_deg: lon,
        }
    }

    /// Great-circle distance in meters (haversine).
    pub fn distance_m(&self, other: &GeoPoint) -> f64 {
        let (lat1, lat2) = (self.lat_deg.to_radians(), other.lat_deg.to_radians());
        let dlat = lat2 - lat1;
        let dlon = (other.lon_deg - self.lon_deg).to_radians();
        let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
        2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
    }

    /// Initial bearing from `self` toward `other`, radians clockwise from north in [0, 2π).
    pub fn bearing_rad(&self, other: &GeoPoint) -> f64 {
        let (lat1, lat2) = (self.lat_deg.to_radians(), other.lat_deg.to_radians());
        let dlon = (other.lon_deg - self.lon_deg).to_radians();
        let y = dlon.sin() * lat2.cos();
        let x = lat1.cos() * lat2.sin() - lat1.sin() * lat2.cos() * dlon.cos();
        let b = y.atan2(x);
        let two_pi = 2.0 * std::f64::consts::PI;
        let b = b.rem_euclid(two_pi);
        if b >= two_pi {
            0.0
        } else {
            b
        }
    }

    /// Point at `fraction` of the way along the great circle from `self` to `other`.
    pub fn interpolate(&self, other: &GeoPoint, fraction: f64) -> GeoPoint {
        let a = self.to_unit_vector();
        let b = other.to_unit_vector();
        let dot = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0);
        let omega = dot.acos();
        if omega < 1e-15 {
            return *self;
        }
        let s = omega.sin();
        let wa = ((1.0 - fraction) * omega).sin() / s;
        let wb = (fraction * omega).sin() / s;
        GeoPoint::from_unit_vector([
            wa * a[0] + wb * b[0],
            wa * a[1] + wb * b[1],
            wa * a[2] + wb * b[2],
        ])
    }
}

/// Even-odd point-in-polygon test in lat/lon space; vertices are `[lat, lon]`.
pub fn polygon_contains(vertices: &[[f64; 2]], point: &GeoPoint) -> bool {
    let (y, x) = (point.lat_deg(), point.lon_deg());
    let mut inside = false;
    let n = vertices.len();
    if n < 3 {
        return false;
    }
    let mut j = n - 1;
    for i in 0..n {
        let (yi, xi) = (vertices[i][0], vertices[i][1]);
        let (yj, xj) = (vertices[j][0], vertices[j][1]);
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range() {
        assert!(GeoPoint::new(91.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, 180.0).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
        assert!(GeoPoint::new(-90.0, -180.0).is_ok());
    }

    #[test]
    fn one_degree_of_latitude() {
        let a = GeoPoint::new(10.0, 20.0).unwrap();
        let b = GeoPoint::new(11.0, 20.0).unwrap();
        assert!((a.distance_m(&b) - METERS_PER_DEGREE).abs() < 1e-6);
    }

    #[test]
    fn cardinal_bearings() {
        let o = GeoPoint::new(0.0, 0.0).unwrap();
        let n = GeoPoint::new(1.0, 0.0).unwrap();
        let e = GeoPoint::new(0.0, 1.0).unwrap();
        let s = GeoPoint::new(-1.0, 0.0).unwrap();
        let w = GeoPoint::new(0.0, -1.0).unwrap();
        let half_pi = std::f64::consts::FRAC_PI_2;
        assert!(o.bearing_rad(&n).abs() < 1e-12);
        assert!((o.bearing_rad(&e) - half_pi).abs() < 1e-12);
        assert!((o.bearing_rad(&s) - 2.0 * half_pi).abs() < 1e-12);
        assert!((o.bearing_rad(&w) - 3.0 * half_pi).abs() < 1e-12);
    }

    #[test]
    fn interpolation_midpoint_on_equator() {
        let a = GeoPoint::new(0.0, 0.0).unwrap();
        let b = GeoPoint::new(0.0, 2.0).unwrap();
        let m = a.interpolate(&b, 0.5);
        assert!(m.lat_deg().abs() < 1e-12);
        assert!((m.lon_deg() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn square_polygon() {
        let sq = [[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]];
        assert!(polygon_contains(&sq, &GeoPoint::new(0.5, 0.5).unwrap()));
        assert!(!polygon_contains(&sq, &GeoPoint::new(1.5, 0.5).unwrap()));
    }
}
