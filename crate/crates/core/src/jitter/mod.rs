//! Transmitter jitter estimation from raw time-of-reception logs.
//!
//! For two stations of one chain observed at one site, the TOR biases
//! (propagation and receiver effects) are common to both and cancel in the
//! TDOA, so `var(TDOA) = sigma_1^2 + sigma_2^2` once each TOR series is
//! stripped of its slowly varying bias. The bias is estimated with a Gaussian
//! kernel whose bandwidth `b` minimizes
//! `e(b) = |sigma_1^2(b) + sigma_2^2(b) - var(TDOA)|`, and each detrended
//! variance is inverted for the jitter through the ranging error model.

mod io;
mod outliers;
mod smoothing;

pub use io::{
    format_time, group_tor_log, pair_series, parse_bandwidth_grid, read_jitter_report,
    read_tor_log, write_jitter_report, write_tor_log, JitterReport, ReportError, TorLogRow,
};
pub use outliers::{
    remove_outliers, OutlierFiltered, DEFAULT_OUTLIER_K, DEFAULT_OUTLIER_WINDOW, MAD_FLOOR,
};
pub use smoothing::{sample_variance, KernelSmoother, KERNEL_SUPPORT};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error_model::{ErrorModelError, ErrorModelParams};

/// Maximum timestamp difference for two records to share an epoch.
pub const ALIGN_TOLERANCE_S: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum JitterError {
    #[error("series {0}: timestamps must be finite and strictly increasing")]
    Unordered(String),
    #[error("series {0}: non-finite TOR or SNR")]
    NonFinite(String),
    #[error("need at least {needed} samples, have {got}")]
    TooShort { needed: usize, got: usize },
    #[error("bandwidth must be positive, got {0}")]
    Bandwidth(f64),
    #[error("bandwidth grid must be non-empty, positive and sorted")]
    BandwidthGrid,
    #[error("series are not a same-chain pair: {0}")]
    NotAPair(String),
    #[error("infeasible jitter: sigma_i^2 is {deficit_m2} m^2 below the SNR noise term")]
    Infeasible { deficit_m2: f64 },
    #[error(transparent)]
    Model(#[from] ErrorModelError),
    #[error("{stage}: {source}")]
    Stage {
        stage: PipelineStage,
        #[source]
        source: Box<JitterError>,
    },
    #[error("pairing: {0}")]
    Pairing(String),
    #[error("tor log: {0}")]
    Log(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineStage {
    Validation,
    OutlierRemoval,
    Alignment,
    BandwidthSearch,
    Inversion,
}

impl std::fmt::Display for PipelineStage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PipelineStage::Validation => "validation",
            PipelineStage::OutlierRemoval => "outlier_removal",
            PipelineStage::Alignment => "alignment",
            PipelineStage::BandwidthSearch => "bandwidth_search",
            PipelineStage::Inversion => "inversion",
        })
    }
}

impl JitterError {
    fn at(self, stage: PipelineStage) -> Self {
        JitterError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost stage tag, if any.
    pub fn stage(&self) -> Option<PipelineStage> {
        match self {
            JitterError::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorRecord {
    pub timestamp_s: f64,
    pub tor_us: f64,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorSeries {
    pub station_id: String,
    pub site_id: String,
    pub gri_designator: u32,
    records: Vec<TorRecord>,
}

impl TorSeries {
    pub fn new(
        station_id: impl Into<String>,
        site_id: impl Into<String>,
        gri_designator: u32,
        records: Vec<TorRecord>,
    ) -> Result<Self, JitterError> {
        let station_id = station_id.into();
        if records.iter().any(|r| !(r.tor_us.is_finite() && r.snr_db.is_finite())) {
            return Err(JitterError::NonFinite(station_id));
        }
        let ordered = records.iter().all(|r| r.timestamp_s.is_finite())
            && records.windows(2).all(|w| w[1].timestamp_s > w[0].timestamp_s);
        if !ordered {
            return Err(JitterError::Unordered(station_id));
        }
        Ok(Self {
            station_id,
            site_id: site_id.into(),
            gri_designator,
            records,
        })
    }

    /// Same identity with a subset of records (which must keep time order).
    pub fn with_records(&self, records: Vec<TorRecord>) -> Self {
        debug_assert!(records.windows(2).all(|w| w[1].timestamp_s > w[0].timestamp_s));
        Self {
            station_id: self.station_id.clone(),
            site_id: self.site_id.clone(),
            gri_designator: self.gri_designator,
            records,
        }
    }

    pub fn records(&self) -> &[TorRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.timestamp_s).collect()
    }

    pub fn tor(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.tor_us).collect()
    }

    /// Mean SNR in dB.
    pub fn mean_snr_db(&self) -> Option<f64> {
        if self.records.is_empty() {
            return None;
        }
        Some(self.records.iter().map(|r| r.snr_db).sum::<f64>() / self.records.len() as f64)
    }

    fn require(&self, needed: usize) -> Result<(), JitterError> {
        if self.len() < needed {
            return Err(JitterError::TooShort {
                needed,
                got: self.len(),
            });
        }
        Ok(())
    }

    pub fn smoother(&self) -> KernelSmoother {
        KernelSmoother::new(&self.times(), &self.tor())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetrendResult {
    pub bandwidth_s: f64,
    pub bias_series: Vec<f64>,
    pub residual_variance_us2: f64,
}

fn check_bandwidth(b: f64) -> Result<(), JitterError> {
    if b.is_finite() && b > 0.0 {
        Ok(())
    } else {
        Err(JitterError::Bandwidth(b))
    }
}

/// Kernel estimate of the slowly varying TOR bias.
pub fn gaussian_smooth(series: &TorSeries, bandwidth_s: f64) -> Result<Vec<f64>, JitterError> {
    check_bandwidth(bandwidth_s)?;
    Ok(series.smoother().smooth(bandwidth_s))
}

fn residual_variance(tor: &[f64], bias: &[f64]) -> f64 {
    let r: Vec<f64> = tor.iter().zip(bias).map(|(t, b)| t - b).collect();
    sample_variance(&r).expect("caller checked length")
}

pub fn detrend(series: &TorSeries, bandwidth_s: f64) -> Result<DetrendResult, JitterError> {
    series.require(2)?;
    let bias_series = gaussian_smooth(series, bandwidth_s)?;
    let residual_variance_us2 = residual_variance(&series.tor(), &bias_series);
    Ok(DetrendResult {
        bandwidth_s,
        bias_series,
        residual_variance_us2,
    })
}

/// `sigma_i^2(b)`: unbiased variance of TOR minus its kernel bias estimate.
pub fn detrended_variance(series: &TorSeries, bandwidth_s: f64) -> Result<f64, JitterError> {
    Ok(detrend(series, bandwidth_s)?.residual_variance_us2)
}

/// Unbiased variance of the raw TOR.
pub fn raw_variance(series: &TorSeries) -> Result<f64, JitterError> {
    series.require(2)?;
    Ok(sample_variance(&series.tor()).expect("length checked"))
}

/// Matches records of two series whose timestamps differ by at most
/// [`ALIGN_TOLERANCE_S`], preferring the nearest partner; returns index pairs.
pub fn align_epochs(a: &TorSeries, b: &TorSeries) -> Vec<(usize, usize)> {
    let (ra, rb) = (a.records(), b.records());
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < ra.len() && j < rb.len() {
        let (ta, tb) = (ra[i].timestamp_s, rb[j].timestamp_s);
        if ta < tb - ALIGN_TOLERANCE_S {
            i += 1;
        } else if tb < ta - ALIGN_TOLERANCE_S {
            j += 1;
        } else {
            let d = (ta - tb).abs();
            if i + 1 < ra.len() && (ra[i + 1].timestamp_s - tb).abs() < d {
                i += 1;
            } else if j + 1 < rb.len() && (rb[j + 1].timestamp_s - ta).abs() < d {
                j += 1;
            } else {
                out.push((i, j));
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// `(TOR_1 - TOR_2) + (ED_1 - ED_2)` per matched epoch, stamped with the first series' time.
pub fn tdoa_series(
    tor1: &TorSeries,
    tor2: &TorSeries,
    ed1_us: f64,
    ed2_us: f64,
) -> Result<Vec<(f64, f64)>, JitterError> {
    let pairs = align_epochs(tor1, tor2);
    if pairs.len() < 2 {
        return Err(JitterError::TooShort {
            needed: 2,
            got: pairs.len(),
        });
    }
    let (r1, r2) = (tor1.records(), tor2.records());
    Ok(pairs
        .into_iter()
        .map(|(i, j)| (r1[i].timestamp_s, (r1[i].tor_us - r2[j].tor_us) + (ed1_us - ed2_us)))
        .collect())
}

pub fn tdoa_variance(tor1: &TorSeries, tor2: &TorSeries) -> Result<f64, JitterError> {
    let d: Vec<f64> = tdoa_series(tor1, tor2, 0.0, 0.0)?.into_iter().map(|x| x.1).collect();
    Ok(sample_variance(&d).expect("at least two epochs"))
}

/// `e(b) = |sigma_1^2(b) + sigma_2^2(b) - var(TDOA)|`.
pub fn bias_elimination_error(
    tor1: &TorSeries,
    tor2: &TorSeries,
    bandwidth_s: f64,
) -> Result<f64, JitterError> {
    let s1 = detrended_variance(tor1, bandwidth_s)?;
    let s2 = detrended_variance(tor2, bandwidth_s)?;
    Ok((s1 + s2 - tdoa_variance(tor1, tor2)?).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthPoint {
    pub bandwidth_s: f64,
    pub sigma1_us2: f64,
    pub sigma2_us2: f64,
    pub e_us2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSearch {
    pub tdoa_variance_us2: f64,
    pub curve: Vec<BandwidthPoint>,
    pub best: BandwidthPoint,
}

/// `n` log-spaced values in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == 0 {
                    lo
                } else if i == n - 1 {
                    hi
                } else {
                    (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp()
                }
            })
            .collect(),
    }
}

/// Default search grid: 60 log-spaced bandwidths from 0.1 s to 1000 s.
pub fn default_bandwidth_grid() -> Vec<f64> {
    log_grid(0.1, 1000.0, 60)
}

fn check_grid(grid: &[f64]) -> Result<(), JitterError> {
    let ok = !grid.is_empty()
        && grid.iter().all(|b| b.is_finite() && *b > 0.0)
        && grid.windows(2).all(|w| w[1] > w[0]);
    if ok {
        Ok(())
    } else {
        Err(JitterError::BandwidthGrid)
    }
}

/// Grid argmin of `e(b)`; ties resolve to the smaller bandwidth.
pub fn optimize_bandwidth(
    tor1: &TorSeries,
    tor2: &TorSeries,
    grid: &[f64],
) -> Result<BandwidthSearch, JitterError> {
    check_grid(grid)?;
    tor1.require(2)?;
    tor2.require(2)?;
    let tdoa = tdoa_variance(tor1, tor2)?;
    let (k1, k2) = (tor1.smoother(), tor2.smoother());
    let (t1, t2) = (tor1.tor(), tor2.tor());
    let curve: Vec<BandwidthPoint> = grid
        .iter()
        .map(|&b| {
            let s1 = residual_variance(&t1, &k1.smooth(b));
            let s2 = residual_variance(&t2, &k2.smooth(b));
            BandwidthPoint {
                bandwidth_s: b,
                sigma1_us2: s1,
                sigma2_us2: s2,
                e_us2: (s1 + s2 - tdoa).abs(),
            }
        })
        .collect();
    let best = *curve
        .iter()
        .reduce(|best, p| if p.e_us2 < best.e_us2 { p } else { best })
        .expect("grid non-empty");
    Ok(BandwidthSearch {
        tdoa_variance_us2: tdoa,
        curve,
        best,
    })
}

/// Inverts the ranging error model for the jitter in meters:
/// `J = sqrt(sigma_i^2 - K^2 / (N * SNR))` with `sigma_i^2` converted to m^2.
pub fn estimate_jitter(
    sigma_i_us2: f64,
    snr_linear: f64,
    n_pulses: f64,
    params: &ErrorModelParams,
) -> Result<f64, JitterError> {
    let sigma_m2 = sigma_i_us2 * params.speed_of_light_m_per_us.powi(2);
    let noise_m2 = params.snr_variance_m2(snr_linear, n_pulses)?;
    let radicand = sigma_m2 - noise_m2;
    if radicand < 0.0 {
        return Err(JitterError::Infeasible {
            deficit_m2: -radicand,
        });
    }
    Ok(radicand.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JitterConfig {
    pub outlier_window: usize,
    pub outlier_k: f64,
    pub bandwidth_grid: Vec<f64>,
    pub params: ErrorModelParams,
}

impl Default for JitterConfig {
    fn default() -> Self {
        Self {
            outlier_window: DEFAULT_OUTLIER_WINDOW,
            outlier_k: DEFAULT_OUTLIER_K,
            bandwidth_grid: default_bandwidth_grid(),
            params: ErrorModelParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JitterEstimate {
    pub station_id: String,
    pub site_id: String,
    pub jitter_m: f64,
    pub sigma_i_us2: f64,
    pub snr_linear: f64,
    pub n_pulses: f64,
    pub optimal_bandwidth_s: f64,
    pub bias_elimination_error_us2: f64,
}

/// Everything produced by one pair run; a per-station inversion can fail
/// independently of the other.
#[derive(Debug)]
pub struct PairRun {
    pub search: BandwidthSearch,
    pub removed: (usize, usize),
    pub first: Result<JitterEstimate, JitterError>,
    pub second: Result<JitterEstimate, JitterError>,
}

fn station_estimate(
    series: &TorSeries,
    sigma_i_us2: f64,
    best: &BandwidthPoint,
    params: &ErrorModelParams,
) -> Result<JitterEstimate, JitterError> {
    let snr_db = series.mean_snr_db().ok_or(JitterError::TooShort { needed: 1, got: 0 })?;
    let snr_linear = 10f64.powf(snr_db / 10.0);
    let n_pulses = params.n_pulses(series.gri_designator)?;
    let jitter_m = estimate_jitter(sigma_i_us2, snr_linear, n_pulses, params)?;
    Ok(JitterEstimate {
        station_id: series.station_id.clone(),
        site_id: series.site_id.clone(),
        jitter_m,
        sigma_i_us2,
        snr_linear,
        n_pulses,
        optimal_bandwidth_s: best.bandwidth_s,
        bias_elimination_error_us2: best.e_us2,
    })
}

/// Full pipeline for one same-chain pair at one site, keeping per-station
/// inversion failures separate.
pub fn run_pair(tor1: &TorSeries, tor2: &TorSeries, config: &JitterConfig) -> Result<PairRun, JitterError> {
    use PipelineStage::*;
    if tor1.site_id != tor2.site_id {
        return Err(JitterError::NotAPair(format!(
            "sites {} and {} differ",
            tor1.site_id, tor2.site_id
        ))
        .at(Validation));
    }
    if tor1.gri_designator != tor2.gri_designator {
        return Err(JitterError::NotAPair(format!(
            "GRIs {} and {} differ",
            tor1.gri_designator, tor2.gri_designator
        ))
        .at(Validation));
    }
    if tor1.station_id == tor2.station_id {
        return Err(JitterError::NotAPair(format!("station {} paired with itself", tor1.station_id)).at(Validation));
    }
    check_grid(&config.bandwidth_grid).map_err(|e| e.at(Validation))?;
    config.params.validate().map_err(|e| JitterError::from(e).at(Validation))?;

    let window = config.outlier_window.max(3);
    let f1 = remove_outliers(tor1, window, config.outlier_k);
    let f2 = remove_outliers(tor2, window, config.outlier_k);
    f1.series.require(2).map_err(|e| e.at(OutlierRemoval))?;
    f2.series.require(2).map_err(|e| e.at(OutlierRemoval))?;
    let (s1, s2) = (&f1.series, &f2.series);

    tdoa_variance(s1, s2).map_err(|e| e.at(Alignment))?;
    let search = optimize_bandwidth(s1, s2, &config.bandwidth_grid).map_err(|e| e.at(BandwidthSearch))?;
    let best = search.best;
    let first = station_estimate(s1, best.sigma1_us2, &best, &config.params).map_err(|e| e.at(Inversion));
    let second = station_estimate(s2, best.sigma2_us2, &best, &config.params).map_err(|e| e.at(Inversion));
    Ok(PairRun {
        search,
        removed: (f1.removed.len(), f2.removed.len()),
        first,
        second,
    })
}

/// Jitters of both stations of a pair; any stage error is returned tagged.
pub fn estimate_pair_jitters(
    tor1: &TorSeries,
    tor2: &TorSeries,
    config: &JitterConfig,
) -> Result<(JitterEstimate, JitterEstimate), JitterError> {
    let run = run_pair(tor1, tor2, config)?;
    Ok((run.first?, run.second?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationAverage {
    pub station_id: String,
    pub mean_jitter_m: f64,
    pub n_sites: usize,
}

/// Arithmetic mean of `jitter_m` per station, in order of first appearance.
pub fn average_jitters(estimates: &[JitterEstimate]) -> Result<Vec<StationAverage>, JitterError> {
    if estimates.is_empty() {
        return Err(JitterError::TooShort { needed: 1, got: 0 });
    }
    let mut out: Vec<(String, f64, usize)> = Vec::new();
    for e in estimates {
        match out.iter_mut().find(|(id, ..)| *id == e.station_id) {
            Some(entry) => {
                entry.1 += e.jitter_m;
                entry.2 += 1;
            }
            None => out.push((e.station_id.clone(), e.jitter_m, 1)),
        }
    }
    Ok(out
        .into_iter()
        .map(|(station_id, sum, n)| StationAverage {
            station_id,
            mean_jitter_m: sum / n as f64,
            n_sites: n,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(id: &str, t: &[f64], v: &[f64]) -> TorSeries {
        let recs = t
            .iter()
            .zip(v)
            .map(|(&timestamp_s, &tor_us)| TorRecord {
                timestamp_s,
                tor_us,
                snr_db: 20.0,
            })
            .collect();
        TorSeries::new(id, "site", 9930, recs).unwrap()
    }

    #[test]
    fn series_validation() {
        let r = |t: f64| TorRecord {
            timestamp_s: t,
            tor_us: 1.0,
            snr_db: 1.0,
        };
        assert!(TorSeries::new("a", "s", 9930, vec![r(1.0), r(1.0)]).is_err());
        assert!(TorSeries::new("a", "s", 9930, vec![r(2.0), r(1.0)]).is_err());
    }

    #[test]
    fn raw_variance_examples() {
        let s = series("a", &[0.0, 1.0], &[5.0, 7.0]);
        assert_eq!(raw_variance(&s).unwrap(), 2.0);
        let c = series("a", &[0.0, 1.0, 2.0], &[3.0; 3]);
        assert_eq!(raw_variance(&c).unwrap(), 0.0);
    }

    #[test]
    fn alignment_prefers_nearest_and_drops_unmatched() {
        let a = series("a", &[0.0, 1.0, 2.0, 5.0], &[0.0; 4]);
        let b = series("b", &[0.4, 0.6, 2.2, 9.0], &[0.0; 4]);
        assert_eq!(align_epochs(&a, &b), vec![(0, 0), (1, 1), (2, 2)]);
        let swapped: Vec<_> = align_epochs(&b, &a).into_iter().map(|(i, j)| (j, i)).collect();
        assert_eq!(swapped, align_epochs(&a, &b));
    }

    #[test]
    fn identical_series_zero_tdoa() {
        let t: Vec<f64> = (0..10).map(f64::from).collect();
        let v: Vec<f64> = t.iter().map(|x| x.sin()).collect();
        let a = series("a", &t, &v);
        let b = series("b", &t, &v);
        assert!(tdoa_series(&a, &b, 0.0, 0.0).unwrap().iter().all(|x| x.1 == 0.0));
        let short = series("c", &[100.0], &[1.0]);
        assert!(tdoa_series(&a, &short, 0.0, 0.0).is_err());
    }

    #[test]
    fn jitter_inversion() {
        let p = ErrorModelParams::default();
        // noise term 16 m^2 with SNR 1
        let n = 337.5 * 337.5 / 16.0;
        let c = p.speed_of_light_m_per_us;
        let j = estimate_jitter(25.0 / (c * c), 1.0, n, &p).unwrap();
        assert!((j - 3.0).abs() < 1e-9);
        let zero = estimate_jitter(16.0 / (c * c), 1.0, n, &p).unwrap();
        assert!(zero.abs() < 1e-6);
        match estimate_jitter(9.0 / (c * c), 1.0, n, &p) {
            Err(JitterError::Infeasible { deficit_m2 }) => assert!((deficit_m2 - 7.0).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn singleton_grid() {
        let t: Vec<f64> = (0..50).map(f64::from).collect();
        let a = series("a", &t, &t.iter().map(|x| (x * 0.37).sin()).collect::<Vec<_>>());
        let b = series("b", &t, &t.iter().map(|x| (x * 0.11).cos()).collect::<Vec<_>>());
        let s = optimize_bandwidth(&a, &b, &[2.5]).unwrap();
        assert_eq!(s.best.bandwidth_s, 2.5);
        assert!(optimize_bandwidth(&a, &b, &[]).is_err());
        assert!(optimize_bandwidth(&a, &b, &[2.0, 1.0]).is_err());
    }

    #[test]
    fn averages() {
        let mk = |st: &str, j: f64| JitterEstimate {
            station_id: st.into(),
            site_id: "x".into(),
            jitter_m: j,
            sigma_i_us2: 0.0,
            snr_linear: 1.0,
            n_pulses: 1.0,
            optimal_bandwidth_s: 1.0,
            bias_elimination_error_us2: 0.0,
        };
        let a = average_jitters(&[mk("PH", 2.67), mk("XC", 7.26), mk("PH", 1.75), mk("PH", 1.90)]).unwrap();
        assert_eq!(format!("{:.2}", a[0].mean_jitter_m), "2.11");
        assert_eq!(a[1].mean_jitter_m, 7.26);
        assert!(average_jitters(&[]).is_err());
    }

    #[test]
    fn grid_shape() {
        let g = default_bandwidth_grid();
        assert_eq!(g.len(), 60);
        assert_eq!((g[0], g[59]), (0.1, 1000.0));
    }

    #[test]
    fn mismatched_pair_is_tagged() {
        let t: Vec<f64> = (0..10).map(f64::from).collect();
        let a = series("a", &t, &t);
        let mut b = series("b", &t, &t);
        b.gri_designator = 7430;
        let err = estimate_pair_jitters(&a, &b, &JitterConfig::default()).unwrap_err();
        assert_eq!(err.stage(), Some(PipelineStage::Validation));
    }
}
