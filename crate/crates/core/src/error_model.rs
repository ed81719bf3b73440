//! Ranging error of bias-removed TOR measurements.
//!
//! `sigma^2 = J^2 + K^2 / (N * SNR)` with `K = 337.5 m`, `N` the number of
//! pulses accumulated over the integration time and `SNR` a linear power ratio.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::noise::SnrEstimate;

pub const RANGE_CONSTANT_M: f64 = 337.5;
pub const PULSES_PER_GRI: u32 = 8;
pub const DEFAULT_INTEGRATION_TIME_S: f64 = 5.0;
pub const SPEED_OF_LIGHT_M_PER_US: f64 = 299.792458;
/// One GRI designator unit is 10 us.
const GRI_UNIT_S: f64 = 1e-5;

#[derive(Debug, Error, PartialEq)]
pub enum ErrorModelError {
    #[error("GRI designator {0} outside [4000, 9999]")]
    Gri(u32),
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("jitter must be non-negative, got {0} m")]
    NegativeJitter(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorModelParams {
    pub range_constant_m: f64,
    pub pulses_per_gri: u32,
    pub integration_time_s: f64,
    pub speed_of_light_m_per_us: f64,
}

impl Default for ErrorModelParams {
    fn default() -> Self {
        Self {
            range_constant_m: RANGE_CONSTANT_M,
            pulses_per_gri: PULSES_PER_GRI,
            integration_time_s: DEFAULT_INTEGRATION_TIME_S,
            speed_of_light_m_per_us: SPEED_OF_LIGHT_M_PER_US,
        }
    }
}

fn positive(name: &'static str, value: f64) -> Result<f64, ErrorModelError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ErrorModelError::NonPositive { name, value })
    }
}

impl ErrorModelParams {
    pub fn validate(&self) -> Result<(), ErrorModelError> {
        positive("range_constant_m", self.range_constant_m)?;
        positive("pulses_per_gri", self.pulses_per_gri as f64)?;
        positive("integration_time_s", self.integration_time_s)?;
        positive("speed_of_light_m_per_us", self.speed_of_light_m_per_us)?;
        Ok(())
    }

    /// Pulses accumulated by a station of `gri_designator` over the configured integration time.
    pub fn n_pulses(&self, gri_designator: u32) -> Result<f64, ErrorModelError> {
        n_pulses_with(gri_designator, self.integration_time_s, self.pulses_per_gri)
    }

    /// SNR-driven variance term `K^2 / (N * SNR)` in m^2.
    pub fn snr_variance_m2(&self, snr_linear: f64, n_pulses: f64) -> Result<f64, ErrorModelError> {
        positive("snr_linear", snr_linear)?;
        positive("n_pulses", n_pulses)?;
        Ok(self.range_constant_m.powi(2) / (n_pulses * snr_linear))
    }

    pub fn us_to_m(&self, us: f64) -> f64 {
        us * self.speed_of_light_m_per_us
    }

    pub fn m_to_us(&self, m: f64) -> f64 {
        m / self.speed_of_light_m_per_us
    }
}

/// `8 * T / (GRI * 10 us)` with the default eight pulses per GRI.
pub fn n_pulses(gri_designator: u32, integration_time_s: f64) -> Result<f64, ErrorModelError> {
    n_pulses_with(gri_designator, integration_time_s, PULSES_PER_GRI)
}

fn n_pulses_with(gri: u32, integration_time_s: f64, per_gri: u32) -> Result<f64, ErrorModelError> {
    if !(4000..=9999).contains(&gri) {
        return Err(ErrorModelError::Gri(gri));
    }
    positive("integration_time_s", integration_time_s)?;
    Ok(per_gri as f64 * integration_time_s / (gri as f64 * GRI_UNIT_S))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementNoise {
    pub sigma_m: f64,
    pub sigma_us: f64,
    pub jitter_m: f64,
    pub snr_linear: f64,
    pub n_pulses: f64,
}

pub fn measurement_sigma(
    jitter_m: f64,
    snr: &SnrEstimate,
    n_pulses: f64,
    params: &ErrorModelParams,
) -> Result<MeasurementNoise, ErrorModelError> {
    if !(jitter_m.is_finite() && jitter_m >= 0.0) {
        return Err(ErrorModelError::NegativeJitter(jitter_m));
    }
    let noise_m2 = params.snr_variance_m2(snr.snr_linear, n_pulses)?;
    let sigma_m = (jitter_m * jitter_m + noise_m2).sqrt();
    Ok(MeasurementNoise {
        sigma_m,
        sigma_us: params.m_to_us(sigma_m),
        jitter_m,
        snr_linear: snr.snr_linear,
        n_pulses,
    })
}
