//! eLoran repeatable-accuracy simulation.
//!
//! The pipeline predicts ground-wave field strength over land-cover-derived
//! conductivity, combines it with atmospheric noise into SNR, converts SNR and
//! transmitter jitter into ranging error, and maps the per-station errors into
//! a weighted-least-squares position covariance and 95% (2drms) accuracy.
//! The [`jitter`] module estimates transmitter jitter from raw time-of-reception
//! logs by Gaussian-kernel detrending tuned against the TDOA variance.

pub mod coverage;
pub mod demo;
pub mod error_model;
pub mod geodata;
pub mod jitter;
pub mod noise;
pub mod positioning;
pub mod propagation;
pub mod synthetic;

pub use coverage::{Scenario, Transmitter};
pub use geodata::GeoPoint;
