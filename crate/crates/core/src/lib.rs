//! Design and simulation primitives for transmon-molecule dispersive readout.
//!
//! All frequencies are cyclic (Hz) and all energies are stored as E/h.
//! The crate only needs `alloc`.

#![cfg_attr(not(test), no_std)]
#![cfg_attr(test, allow(unused_imports))]

extern crate alloc;

pub mod calibration;
pub mod circuit;
pub mod error;
pub mod limits;
pub mod optimizer;
pub mod readout;
pub mod scalar;
pub mod special;
pub mod spectrum;
pub mod units;

pub use circuit::{
    derive_bare_modes, flux_tuned_inductance, hybridize, infer_bare_losses, BareModeParams,
    CavityParams, CircuitParams, PolaritonParams, ReadoutMode,
};
pub use error::{Error, Result};
pub use units::RateConvention;
