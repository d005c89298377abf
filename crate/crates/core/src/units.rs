//! Physical constants (exact SI 2019 values) and the single conversion
//! boundary between cyclic frequencies (Hz) and angular rates (rad/s).
//!
//! Every frequency stored in this crate is cyclic, i.e. ω/2π in hertz.
//! Energies are likewise stored divided by Planck's constant.

use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Elementary charge (C).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Planck constant (J s).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant (J s).
pub const HBAR: f64 = PLANCK / (2.0 * PI);
/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Reduced flux quantum ħ/2e (Wb).
pub const REDUCED_FLUX_QUANTUM: f64 = HBAR / (2.0 * ELEMENTARY_CHARGE);
/// Flux quantum h/2e (Wb).
pub const FLUX_QUANTUM: f64 = PLANCK / (2.0 * ELEMENTARY_CHARGE);

/// Converts a cyclic frequency (Hz) to an angular rate (rad/s).
#[inline]
pub fn angular(hz: f64) -> f64 {
    2.0 * PI * hz
}

/// Converts an energy in joules to hertz (E/h).
#[inline]
pub fn joules_to_hz(joules: f64) -> f64 {
    joules / PLANCK
}

/// Converts an energy expressed in hertz (E/h) to joules.
#[inline]
pub fn hz_to_joules(hz: f64) -> f64 {
    hz * PLANCK
}

/// How a frequency-valued quantity is turned into a rate (1/s) inside a
/// formula mixing frequencies and rates.
///
/// `Angular` multiplies every frequency by 2π before use, which is the
/// dimensionally consistent reading. `Cyclic` plugs ω/2π values in
/// directly, the way many tabulated numbers are quoted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RateConvention {
    #[default]
    Angular,
    Cyclic,
}

impl RateConvention {
    /// Rate in 1/s corresponding to a cyclic frequency under this convention.
    #[inline]
    pub fn rate(self, hz: f64) -> f64 {
        match self {
            RateConvention::Angular => angular(hz),
            RateConvention::Cyclic => hz,
        }
    }
}
