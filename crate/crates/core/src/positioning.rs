//! Weighted least-squares position error covariance and 2drms accuracy.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest accepted condition number of the normal matrix.
pub const MAX_CONDITION: f64 = 1e12;
pub const MIN_MONTE_CARLO_TRIALS: usize = 1_000;

#[derive(Debug, Error, PartialEq)]
pub enum PositioningError {
    #[error("station {index}: sigma must be positive and finite, got {sigma}")]
    NonPositiveSigma { index: usize, sigma: f64 },
    #[error("{got} stations cannot resolve {needed} unknowns")]
    TooFewStations { needed: usize, got: usize },
    #[error("rank-deficient geometry (condition number {condition:e})")]
    RankDeficient { condition: f64 },
    #[error("dimension mismatch: G is {g_rows}x{g_cols}, W is {w}x{w}")]
    Dimension { g_rows: usize, g_cols: usize, w: usize },
    #[error("monte-carlo needs at least {MIN_MONTE_CARLO_TRIALS} trials, got {0}")]
    Trials(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationGeometry {
    pub station_id: String,
    /// Azimuth from the user to the transmitter, clockwise from north, in [0, 2pi).
    pub azimuth_rad: f64,
    pub sigma_m: f64,
    pub chain_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    /// One common receiver clock column.
    #[default]
    Single,
    /// One clock column per chain.
    PerChain,
}

impl ClockMode {
    pub fn unknowns(&self, stations: &[StationGeometry]) -> usize {
        match self {
            ClockMode::Single => 3,
            ClockMode::PerChain => 2 + chain_ids(stations).len(),
        }
    }
}

/// Distinct chain ids in order of first appearance.
pub fn chain_ids(stations: &[StationGeometry]) -> Vec<&str> {
    let mut out: Vec<&str> = Vec::new();
    for s in stations {
        if !out.contains(&s.chain_id.as_str()) {
            out.push(&s.chain_id);
        }
    }
    out
}

/// `diag(1 / sigma_i^2)`.
pub fn build_weight_matrix(sigmas_m: &[f64]) -> Result<DMatrix<f64>, PositioningError> {
    for (index, &sigma) in sigmas_m.iter().enumerate() {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(PositioningError::NonPositiveSigma { index, sigma });
        }
    }
    if sigmas_m.is_empty() {
        return Err(PositioningError::TooFewStations { needed: 1, got: 0 });
    }
    let d = DVector::from_iterator(sigmas_m.len(), sigmas_m.iter().map(|s| 1.0 / (s * s)));
    Ok(DMatrix::from_diagonal(&d))
}

/// Rows `[cos theta, sin theta, clock...]`.
pub fn build_geometry_matrix(
    stations: &[StationGeometry],
    mode: ClockMode,
) -> Result<DMatrix<f64>, PositioningError> {
    let needed = mode.unknowns(stations);
    if stations.len() < needed {
        return Err(PositioningError::TooFewStations {
            needed,
            got: stations.len(),
        });
    }
    let chains = chain_ids(stations);
    Ok(DMatrix::from_fn(stations.len(), needed, |i, j| {
        let s = &stations[i];
        match (j, mode) {
            (0, _) => s.azimuth_rad.cos(),
            (1, _) => s.azimuth_rad.sin(),
            (_, ClockMode::Single) => 1.0,
            (_, ClockMode::PerChain) => {
                if chains[j - 2] == s.chain_id {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }))
}

/// `(G^T W G)^-1`; rows/cols 0 and 1 are the horizontal coordinates, the rest clock terms.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionErrorCovariance {
    pub matrix: DMatrix<f64>,
}

impl PositionErrorCovariance {
    pub fn sigma_x2(&self) -> f64 {
        self.matrix[(0, 0)]
    }

    pub fn sigma_y2(&self) -> f64 {
        self.matrix[(1, 1)]
    }

    pub fn sigma_xy(&self) -> f64 {
        self.matrix[(0, 1)]
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.matrix.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

pub fn position_covariance(
    g: &DMatrix<f64>,
    w: &DMatrix<f64>,
) -> Result<PositionErrorCovariance, PositioningError> {
    if w.nrows() != g.nrows() || w.ncols() != g.nrows() {
        return Err(PositioningError::Dimension {
            g_rows: g.nrows(),
            g_cols: g.ncols(),
            w: w.nrows(),
        });
    }
    if g.nrows() < g.ncols() {
        return Err(PositioningError::TooFewStations {
            needed: g.ncols(),
            got: g.nrows(),
        });
    }
    let mut normal = g.transpose() * w * g;
    normal = (&normal + normal.transpose()) * 0.5;
    let eig = normal.clone().symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(PositioningError::RankDeficient { condition });
    }
    let inv = normal
        .cholesky()
        .ok_or(PositioningError::RankDeficient { condition })?
        .inverse();
    Ok(PositionErrorCovariance {
        matrix: (&inv + inv.transpose()) * 0.5,
    })
}

/// `2 sqrt(sigma_x^2 + sigma_y^2)`.
pub fn horizontal_accuracy_95(cov: &PositionErrorCovariance) -> f64 {
    2.0 * (cov.sigma_x2() + cov.sigma_y2()).max(0.0).sqrt()
}

/// Covariance and 2drms accuracy for a station set.
pub fn accuracy_for(
    stations: &[StationGeometry],
    mode: ClockMode,
) -> Result<(PositionErrorCovariance, f64), PositioningError> {
    let g = build_geometry_matrix(stations, mode)?;
    let sigmas: Vec<f64> = stations.iter().map(|s| s.sigma_m).collect();
    let w = build_weight_matrix(&sigmas)?;
    let cov = position_covariance(&g, &w)?;
    let acc = horizontal_accuracy_95(&cov);
    Ok((cov, acc))
}

/// Empirical `2 * rms` horizontal error of WLS fixes under zero-mean Gaussian
/// range errors with the stations' sigmas.
///
/// Each trial solves the whitened system `sqrt(W) G x = sqrt(W) r` by QR,
/// independently of the normal-equation inverse used analytically.
pub fn monte_carlo_accuracy(
    stations: &[StationGeometry],
    mode: ClockMode,
    trials: usize,
    seed: u64,
) -> Result<f64, PositioningError> {
    if trials < MIN_MONTE_CARLO_TRIALS {
        return Err(PositioningError::Trials(trials));
    }
    let g = build_geometry_matrix(stations, mode)?;
    let sigmas: Vec<f64> = stations.iter().map(|s| s.sigma_m).collect();
    build_weight_matrix(&sigmas)?;
    // the analytic path applies the conditioning guard; reuse it here
    accuracy_for(stations, mode)?;

    let mut a = g.clone();
    for (i, s) in sigmas.iter().enumerate() {
        a.row_mut(i).scale_mut(1.0 / s);
    }
    let qr = a.qr();
    let (q, r) = (qr.q(), qr.r());
    let n = stations.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum_sq = 0.0;
    let mut z = DVector::zeros(n);
    for _ in 0..trials {
        // whitened range error r_i / sigma_i is standard normal
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        let rhs = q.transpose() * &z;
        let x = r
            .solve_upper_triangular(&rhs)
            .ok_or(PositioningError::RankDeficient {
                condition: f64::INFINITY,
            })?;
        sum_sq += x[0] * x[0] + x[1] * x[1];
    }
    Ok(2.0 * (sum_sq / trials as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn st(id: &str, az: f64, sigma: f64, chain: &str) -> StationGeometry {
        StationGeometry {
            station_id: id.into(),
            azimuth_rad: az,
            sigma_m: sigma,
            chain_id: chain.into(),
        }
    }

    fn cardinal(sigma: f64) -> Vec<StationGeometry> {
        (0..4).map(|k| st(&format!("s{k}"), k as f64 * FRAC_PI_2, sigma, "A")).collect()
    }

    #[test]
    fn weights() {
        let w = build_weight_matrix(&[1.0, 2.0]).unwrap();
        assert_eq!(w, DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.25])));
        assert_eq!(build_weight_matrix(&[1.0; 3]).unwrap(), DMatrix::identity(3, 3));
        assert!(matches!(
            build_weight_matrix(&[1.0, 0.0]),
            Err(PositioningError::NonPositiveSigma { index: 1, .. })
        ));
    }

    #[test]
    fn cardinal_geometry_rows() {
        let g = build_geometry_matrix(&cardinal(1.0), ClockMode::Single).unwrap();
        let expect = [[1.0, 0.0, 1.0], [0.0, 1.0, 1.0], [-1.0, 0.0, 1.0], [0.0, -1.0, 1.0]];
        for (i, row) in expect.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((g[(i, j)] - v).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn per_chain_indicator_columns() {
        let s = vec![
            st("a", 0.1, 1.0, "9930"),
            st("b", 1.2, 1.0, "9930"),
            st("c", 2.5, 1.0, "7430"),
            st("d", 4.0, 1.0, "7430"),
        ];
        let g = build_geometry_matrix(&s, ClockMode::PerChain).unwrap();
        assert_eq!(g.shape(), (4, 4));
        let clocks: Vec<[f64; 2]> = (0..4).map(|i| [g[(i, 2)], g[(i, 3)]]).collect();
        assert_eq!(clocks, vec![[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]]);
    }

    #[test]
    fn too_few_stations() {
        let s = &cardinal(1.0)[..2];
        assert!(matches!(
            build_geometry_matrix(s, ClockMode::Single),
            Err(PositioningError::TooFewStations { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn cardinal_covariance() {
        let (cov, acc) = accuracy_for(&cardinal(1.0), ClockMode::Single).unwrap();
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.5, 0.25]));
        assert!((cov.matrix - expect).abs().max() < 1e-12);
        assert!((acc - 2.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_is_rank_deficient() {
        let s: Vec<_> = (0..4).map(|k| st(&k.to_string(), 0.0, 1.0, "A")).collect();
        assert!(matches!(
            accuracy_for(&s, ClockMode::Single),
            Err(PositioningError::RankDeficient { .. })
        ));
    }

    #[test]
    fn sigma_scaling_law() {
        let s = vec![
            st("a", 0.3, 2.0, "A"),
            st("b", 2.0, 3.0, "A"),
            st("c", 3.9, 1.5, "A"),
            st("d", 5.1, 4.0, "A"),
        ];
        let (c1, _) = accuracy_for(&s, ClockMode::Single).unwrap();
        let scaled: Vec<_> = s.iter().map(|x| StationGeometry { sigma_m: 3.0 * x.sigma_m, ..x.clone() }).collect();
        let (c3, _) = accuracy_for(&scaled, ClockMode::Single).unwrap();
        assert!((c3.matrix - c1.matrix * 9.0).abs().max() < 1e-9);
    }

    #[test]
    fn unit_diagonal_accuracy() {
        let cov = PositionErrorCovariance {
            matrix: DMatrix::identity(3, 3),
        };
        assert!((horizontal_accuracy_95(&cov) - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_is_deterministic_and_close() {
        let s = cardinal(3.0);
        let a = monte_carlo_accuracy(&s, ClockMode::Single, 20_000, 7).unwrap();
        let b = monte_carlo_accuracy(&s, ClockMode::Single, 20_000, 7).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert!((a / 6.0 - 1.0).abs() < 0.015, "{a}");
        assert!(matches!(
            monte_carlo_accuracy(&s, ClockMode::Single, 10, 7),
            Err(PositioningError::Trials(10))
        ));
    }
}
