//! Locally adaptive variable-bandwidth local polynomial regression.

pub mod bandwidth;
pub mod cli;
pub mod discrepancy;
mod engine;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod oracle;
pub mod polyproj;
pub mod signals;
pub mod tuning;

pub use bandwidth::{select_bandwidth, BandwidthResult, Semantics};
pub use discrepancy::{t_stat, DiscrepancyResult, Variant};
pub use error::{LaserError, Result};
pub use estimator::{fit, fit_at, predict_at, FitResult};
