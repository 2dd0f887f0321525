//! Link-level toolkit for tracking millimeter-wave downlink SNR from sparse,
//! directional synchronization-signal measurements.
//!
//! The pipeline is:
//!
//! 1. [`channel`] draws a static multipath realization and evaluates the
//!    time-varying response with a common local-blockage factor from
//!    [`blockage`].
//! 2. [`syncsig`] simulates matched-filter outputs on the narrowband
//!    sub-signals of each synchronization burst and forms the unbiased raw
//!    wideband SNR estimate on the directional scan schedule.
//! 3. [`filters`] smooths the raw estimate (none, first order, moving average).
//! 4. [`eval`] scores filtered traces against the true wideband SNR.
//!
//! [`calib`] derives target SNRs from rate requirements, [`sounder`] turns
//! channel-sounder captures into blockage traces, and [`arrays`] provides the
//! steering vectors and codebooks used on both ends of the link.

pub mod arrays;
pub mod blockage;
pub mod calib;
pub mod channel;
mod error;
pub mod eval;
pub mod filters;
pub mod par;
pub mod rng;
pub mod sounder;
pub mod syncsig;
pub mod units;

pub use error::{Error, Result};
pub use num_complex::{Complex32, Complex64};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;
