//! Ground-wave field strength at LF over homogeneous and mixed paths.
//!
//! Field strength curves are tabulated per set of ground constants at a
//! reference ERP of 1 kW and interpolated linearly in log-distance. The
//! default curve provider is the flat-earth Norton approximation; digitized
//! curve tables can be loaded from CSV instead. Mixed paths use Millington's
//! forward/reverse average.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coverage::Transmitter;
use crate::geodata::{
    sample_path, ConductivityGrid, GeoPoint, GeodataError, GroundConstants, PathProfile,
    TerrainClassTable,
};

pub const DEFAULT_FREQUENCY_HZ: f64 = 100_000.0;
pub const CURVE_MIN_DISTANCE_M: f64 = 1_000.0;
pub const CURVE_MAX_DISTANCE_M: f64 = 2_500_000.0;
pub const CURVE_SAMPLES: usize = 256;
const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;
/// Distance beyond which the most conductive curve must dominate all others.
const ORDERING_CHECK_FROM_M: f64 = 50_000.0;

#[derive(Debug, Error)]
pub enum PropagationError {
    #[error("distance {distance_m} m outside curve range [{min_m}, {max_m}] m")]
    OutOfRange {
        distance_m: f64,
        min_m: f64,
        max_m: f64,
    },
    #[error("frequency {0} Hz outside [50 kHz, 500 kHz]")]
    Frequency(f64),
    #[error("non-physical ground constants: sigma={0} S/m, eps={1}")]
    NonPhysical(f64, f64),
    #[error("invalid curve for sigma={sigma}, eps={eps}: {message}")]
    InvalidCurve {
        sigma: f64,
        eps: f64,
        message: String,
    },
    #[error("curve set violates conductivity ordering at {distance_m} m (sigma={sigma}, eps={eps})")]
    Ordering { distance_m: f64, sigma: f64, eps: f64 },
    #[error("empty curve set")]
    Empty,
    #[error("erp must be positive, got {0} kW")]
    Erp(f64),
    #[error("curve table: {0}")]
    Table(String),
    #[error(transparent)]
    Path(#[from] GeodataError),
}

/// A source of 1 kW ground-wave field strength curves.
pub trait GroundWaveModel: Send + Sync {
    fn field_dbuvm_1kw(&self, distance_m: f64, ground: GroundConstants, frequency_hz: f64) -> f64;
}

/// Flat-earth Norton/Sommerfeld ground wave.
///
/// `E = 20 log10(300 / d_km) + 60 + 20 log10 |F(p)|` dB(uV/m) with
/// `|F| ~ (2 + 0.3p) / (2 + p + 0.6p^2)` and the vertical-polarization
/// numerical distance `p = (pi d / (lambda x)) cos b`, `x = 60 sigma lambda`,
/// `b = atan((eps + 1) / x)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct NortonFlatEarth;

/// Unattenuated reference field of a 1 kW short monopole, dB(uV/m).
pub fn reference_field_dbuvm(distance_m: f64) -> f64 {
    20.0 * (300.0 / (distance_m / 1000.0)).log10() + 60.0
}

pub fn numerical_distance(distance_m: f64, ground: GroundConstants, frequency_hz: f64) -> f64 {
    let lambda = SPEED_OF_LIGHT_M_S / frequency_hz;
    let x = 60.0 * ground.conductivity_s_per_m * lambda;
    let b = ((ground.relative_permittivity + 1.0) / x).atan();
    std::f64::consts::PI * distance_m / (lambda * x) * b.cos()
}

pub fn norton_attenuation(p: f64) -> f64 {
    (2.0 + 0.3 * p) / (2.0 + p + 0.6 * p * p)
}

impl GroundWaveModel for NortonFlatEarth {
    fn field_dbuvm_1kw(&self, distance_m: f64, ground: GroundConstants, frequency_hz: f64) -> f64 {
        let p = numerical_distance(distance_m, ground, frequency_hz);
        reference_field_dbuvm(distance_m) + 20.0 * norton_attenuation(p).log10()
    }
}

/// `n` log-spaced distances spanning the default curve range.
pub fn log_spaced_distances(n: usize) -> Vec<f64> {
    let (lo, hi) = (CURVE_MIN_DISTANCE_M.ln(), CURVE_MAX_DISTANCE_M.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                CURVE_MIN_DISTANCE_M
            } else if i == n - 1 {
                CURVE_MAX_DISTANCE_M
            } else {
                (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Sampled 1 kW field strength versus distance for one set of ground constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttenuationCurve {
    ground: GroundConstants,
    distances_m: Vec<f64>,
    field_dbuvm: Vec<f64>,
}

impl AttenuationCurve {
    pub fn new(
        ground: GroundConstants,
        distances_m: Vec<f64>,
        field_dbuvm: Vec<f64>,
    ) -> Result<Self, PropagationError> {
        let invalid = |message: String| PropagationError::InvalidCurve {
            sigma: ground.conductivity_s_per_m,
            eps: ground.relative_permittivity,
            message,
        };
        if distances_m.len() != field_dbuvm.len() || distances_m.len() < 2 {
            return Err(invalid("need at least two (distance, field) samples".into()));
        }
        if distances_m.iter().chain(&field_dbuvm).any(|v| !v.is_finite()) || distances_m[0] <= 0.0 {
            return Err(invalid("non-finite or non-positive sample".into()));
        }
        for w in distances_m.windows(2) {
            if w[1] <= w[0] {
                return Err(invalid(format!("distances not increasing at {} m", w[1])));
            }
        }
        for (i, w) in field_dbuvm.windows(2).enumerate() {
            if w[1] >= w[0] {
                return Err(invalid(format!(
                    "field not strictly decreasing at {} m",
                    distances_m[i + 1]
                )));
            }
        }
        Ok(Self {
            ground,
            distances_m,
            field_dbuvm,
        })
    }

    pub fn ground(&self) -> GroundConstants {
        self.ground
    }

    pub fn distances_m(&self) -> &[f64] {
        &self.distances_m
    }

    pub fn field_dbuvm(&self) -> &[f64] {
        &self.field_dbuvm
    }

    pub fn min_distance_m(&self) -> f64 {
        self.distances_m[0]
    }

    pub fn max_distance_m(&self) -> f64 {
        *self.distances_m.last().expect("curve has samples")
    }

    /// Log-distance-linear interpolation.
    pub fn value_at(&self, distance_m: f64) -> Result<f64, PropagationError> {
        let (lo, hi) = (self.min_distance_m(), self.max_distance_m());
        if !(distance_m >= lo * (1.0 - 1e-12) && distance_m <= hi * (1.0 + 1e-12)) {
            return Err(PropagationError::OutOfRange {
                distance_m,
                min_m: lo,
                max_m: hi,
            });
        }
        let d = distance_m.clamp(lo, hi);
        let i = self.distances_m.partition_point(|&x| x <= d);
        if i == 0 {
            return Ok(self.field_dbuvm[0]);
        }
        if i >= self.distances_m.len() {
            return Ok(*self.field_dbuvm.last().expect("curve has samples"));
        }
        let (d0, d1) = (self.distances_m[i - 1], self.distances_m[i]);
        let (e0, e1) = (self.field_dbuvm[i - 1], self.field_dbuvm[i]);
        if d == d0 {
            return Ok(e0);
        }
        let t = (d.ln() - d0.ln()) / (d1.ln() - d0.ln());
        Ok(e0 + t * (e1 - e0))
    }
}

/// A family of attenuation curves keyed by ground constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttenuationCurveSet {
    frequency_hz: f64,
    curves: Vec<AttenuationCurve>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CurveRow {
    sigma_s_per_m: f64,
    epsilon: f64,
    distance_m: f64,
    field_dbuvm: f64,
}

impl AttenuationCurveSet {
    /// Validates monotonicity of every curve and that the most conductive curve
    /// is never below another at sampled distances of 50 km and beyond.
    pub fn new(frequency_hz: f64, mut curves: Vec<AttenuationCurve>) -> Result<Self, PropagationError> {
        if curves.is_empty() {
            return Err(PropagationError::Empty);
        }
        curves.sort_by(|a, b| {
            a.ground
                .conductivity_s_per_m
                .total_cmp(&b.ground.conductivity_s_per_m)
                .then(a.ground.relative_permittivity.total_cmp(&b.ground.relative_permittivity))
        });
        curves.dedup_by(|a, b| a.ground == b.ground);
        let set = Self {
            frequency_hz,
            curves,
        };
        set.check_ordering()?;
        Ok(set)
    }

    fn check_ordering(&self) -> Result<(), PropagationError> {
        let top = self.curves.last().expect("non-empty");
        for c in &self.curves[..self.curves.len() - 1] {
            for (&d, &e) in c.distances_m.iter().zip(&c.field_dbuvm) {
                if d < ORDERING_CHECK_FROM_M || d < top.min_distance_m() || d > top.max_distance_m() {
                    continue;
                }
                if top.value_at(d)? < e - 1e-9 {
                    return Err(PropagationError::Ordering {
                        distance_m: d,
                        sigma: c.ground.conductivity_s_per_m,
                        eps: c.ground.relative_permittivity,
                    });
                }
            }
        }
        Ok(())
    }

    /// Tabulate `model` for each set of ground constants on the default 256-point grid.
    pub fn generate(
        model: &dyn GroundWaveModel,
        frequency_hz: f64,
        grounds: &[GroundConstants],
    ) -> Result<Self, PropagationError> {
        if !(50_000.0..=500_000.0).contains(&frequency_hz) {
            return Err(PropagationError::Frequency(frequency_hz));
        }
        let distances = log_spaced_distances(CURVE_SAMPLES);
        let curves = grounds
            .iter()
            .map(|&g| {
                if !(g.conductivity_s_per_m > 0.0 && g.relative_permittivity >= 1.0) {
                    return Err(PropagationError::NonPhysical(
                        g.conductivity_s_per_m,
                        g.relative_permittivity,
                    ));
                }
                let fields = distances
                    .iter()
                    .map(|&d| model.field_dbuvm_1kw(d, g, frequency_hz))
                    .collect();
                AttenuationCurve::new(g, distances.clone(), fields)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(frequency_hz, curves)
    }

    pub fn frequency_hz(&self) -> f64 {
        self.frequency_hz
    }

    pub fn curves(&self) -> &[AttenuationCurve] {
        &self.curves
    }

    /// Exact match on ground constants, otherwise the curve nearest in
    /// log-conductivity (ties broken by permittivity).
    pub fn curve_for(&self, ground: GroundConstants) -> &AttenuationCurve {
        if let Some(c) = self.curves.iter().find(|c| c.ground == ground) {
            return c;
        }
        let ls = ground.conductivity_s_per_m.ln();
        self.curves
            .iter()
            .min_by(|a, b| {
                let da = (a.ground.conductivity_s_per_m.ln() - ls).abs();
                let db = (b.ground.conductivity_s_per_m.ln() - ls).abs();
                da.total_cmp(&db).then(
                    (a.ground.relative_permittivity - ground.relative_permittivity)
                        .abs()
                        .total_cmp(&(b.ground.relative_permittivity - ground.relative_permittivity).abs()),
                )
            })
            .expect("non-empty curve set")
    }

    /// Reads `sigma_s_per_m,epsilon,distance_m,field_dbuvm` rows.
    pub fn from_csv<R: Read>(frequency_hz: f64, reader: R) -> Result<Self, PropagationError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut grouped: BTreeMap<(u64, u64), (GroundConstants, Vec<(f64, f64)>)> = BTreeMap::new();
        for row in rdr.deserialize::<CurveRow>() {
            let row = row.map_err(|e| PropagationError::Table(e.to_string()))?;
            let g = GroundConstants::new(row.sigma_s_per_m, row.epsilon);
            if !(g.conductivity_s_per_m > 0.0 && g.relative_permittivity >= 1.0) {
                return Err(PropagationError::NonPhysical(g.conductivity_s_per_m, g.relative_permittivity));
            }
            grouped
                .entry((g.conductivity_s_per_m.to_bits(), g.relative_permittivity.to_bits()))
                .or_insert_with(|| (g, Vec::new()))
                .1
                .push((row.distance_m, row.field_dbuvm));
        }
        let curves = grouped
            .into_values()
            .map(|(g, mut samples)| {
                samples.sort_by(|a, b| a.0.total_cmp(&b.0));
                let (d, e) = samples.into_iter().unzip();
                AttenuationCurve::new(g, d, e)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(frequency_hz, curves)
    }

    pub fn to_csv<W: Write>(&self, writer: W) -> Result<(), PropagationError> {
        let mut w = csv::Writer::from_writer(writer);
        for c in &self.curves {
            for (&d, &e) in c.distances_m.iter().zip(&c.field_dbuvm) {
                w.serialize(CurveRow {
                    sigma_s_per_m: c.ground.conductivity_s_per_m,
                    epsilon: c.ground.relative_permittivity,
                    distance_m: d,
                    field_dbuvm: e,
                })
                .map_err(|e| PropagationError::Table(e.to_string()))?;
            }
        }
        w.flush().map_err(|e| PropagationError::Table(e.to_string()))
    }
}

/// Norton curves for every class of `terrain_table`.
pub fn generate_default_curves(
    frequency_hz: f64,
    terrain_table: &TerrainClassTable,
) -> Result<AttenuationCurveSet, PropagationError> {
    let grounds: Vec<GroundConstants> = terrain_table.entries().iter().map(|e| e.ground()).collect();
    AttenuationCurveSet::generate(&NortonFlatEarth, frequency_hz, &grounds)
}

/// 1 kW field strength at `distance_m` over homogeneous ground.
pub fn homogeneous_field_strength(
    distance_m: f64,
    ground: GroundConstants,
    curves: &AttenuationCurveSet,
) -> Result<f64, PropagationError> {
    curves.curve_for(ground).value_at(distance_m)
}

fn chained_field(
    segments: &[&crate::geodata::PathSegment],
    curves: &AttenuationCurveSet,
) -> Result<f64, PropagationError> {
    let mut field = 0.0_f64;
    let mut cumulative = 0.0_f64;
    let last = segments.len() - 1;
    for (k, seg) in segments.iter().enumerate() {
        let curve = curves.curve_for(seg.ground);
        // breakpoints inside the near field sit where all curves coincide;
        // only the receiver distance itself is range-checked
        if k > 0 {
            field -= curve.value_at(cumulative.max(curve.min_distance_m()))?;
        }
        cumulative += seg.length_m;
        let at = if k == last { cumulative } else { cumulative.max(curve.min_distance_m()) };
        field += curve.value_at(at)?;
    }
    Ok(field)
}

/// Millington mixed-path field strength at 1 kW ERP.
pub fn millington_mixed_path(
    path: &PathProfile,
    curves: &AttenuationCurveSet,
) -> Result<f64, PropagationError> {
    let segs = path.segments();
    if segs.len() == 1 {
        return homogeneous_field_strength(path.total_length_m(), segs[0].ground, curves);
    }
    let forward: Vec<_> = segs.iter().collect();
    let reverse: Vec<_> = segs.iter().rev().collect();
    let (forward, reverse) = (chained_field(&forward, curves)?, chained_field(&reverse, curves)?);
    Ok(0.5 * (forward + reverse))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkBudget {
    pub tx: GeoPoint,
    pub rx: GeoPoint,
    pub erp_kw: f64,
    pub field_strength_dbuvm: f64,
    pub path: PathProfile,
}

pub fn received_field_strength(
    tx: &Transmitter,
    rx: &GeoPoint,
    grid: &ConductivityGrid,
    curves: &AttenuationCurveSet,
    step_m: f64,
) -> Result<LinkBudget, PropagationError> {
    if !(tx.erp_kw.is_finite() && tx.erp_kw > 0.0) {
        return Err(PropagationError::Erp(tx.erp_kw));
    }
    let path = sample_path(&tx.location, rx, grid, step_m)?;
    let field = millington_mixed_path(&path, curves)? + 10.0 * tx.erp_kw.log10();
    Ok(LinkBudget {
        tx: tx.location,
        rx: *rx,
        erp_kw: tx.erp_kw,
        field_strength_dbuvm: field,
        path,
    })
}
