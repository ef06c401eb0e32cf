//! Antenna radiation-pattern reconstruction in a multipath environment.
//!
//! A handful of sense antennas record the voltages produced by three reference
//! dipoles (along z, x and y) and by the antenna under test. Because the room
//! maps the l = 1 vector-spherical-harmonic coefficients of any source linearly
//! onto those voltages, the AUT's dipole orientation, and with it its far
//! field and radiation resistance, can be recovered by matrix inversion on a
//! well-chosen sensor subset, by least squares on every sensor, or by least
//! squares constrained to a unit-norm orientation.
//!
//! ```
//! use mpat_core::config::CampaignConfig;
//! use mpat_core::simulator::run_campaign;
//! use mpat_core::Execution;
//!
//! let result = run_campaign(&CampaignConfig::default(), Execution::default()).unwrap();
//! assert_eq!(result.rows.len(), 10);
//! ```

pub mod config;
pub mod dataset;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod io;
pub mod simulator;
pub mod stats;
pub mod vsh;

pub use error::{Error, Result};
pub use exec::Execution;
