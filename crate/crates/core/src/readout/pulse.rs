//! Semiclassical pointer dynamics of the readout mode and the analytic SNR.

use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::ReadoutMode;
use crate::error::{Error, Result};
use crate::units::angular;

use super::QubitState;

/// A rectangular readout drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutPulse {
    /// Drive frequency (Hz).
    pub omega_d: f64,
    /// Steady-state photon number of the |0⟩ pointer.
    pub n_bar: f64,
    /// Duration (s).
    pub t_r: f64,
    /// Idle time between consecutive pulses (s).
    #[serde(default = "default_ring_gap")]
    pub ring_gap: f64,
}

pub fn default_ring_gap() -> f64 {
    500e-9
}

impl ReadoutPulse {
    /// Drive halfway between the |0⟩ and |1⟩ resonances.
    pub fn midpoint(mode: &ReadoutMode, n_bar: f64, t_r: f64) -> Self {
        ReadoutPulse { omega_d: mode.omega_r + mode.chi_qr, n_bar, t_r, ring_gap: default_ring_gap() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_r.is_finite() && self.t_r > 0.0) {
            return Err(Error::domain("t_r", "pulse duration must be finite and strictly positive"));
        }
        if !(self.n_bar.is_finite() && self.n_bar >= 0.0) {
            return Err(Error::domain("n_bar", "photon number must be finite and >= 0"));
        }
        if !self.omega_d.is_finite() {
            return Err(Error::domain("omega_d", "must be finite"));
        }
        if !(self.ring_gap.is_finite() && self.ring_gap >= 0.0) {
            return Err(Error::domain("ring_gap", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Angular detuning of the pointer for qubit state `s` from the drive.
pub fn detuning(mode: &ReadoutMode, omega_d: f64, s: QubitState) -> f64 {
    angular(mode.omega_r + 2.0 * mode.chi_qr * s.pointer_index() - omega_d)
}

/// Drive amplitude (1/s) whose |0⟩ steady state holds `n_bar` photons.
pub fn drive_amplitude(mode: &ReadoutMode, pulse: &ReadoutPulse) -> f64 {
    let kappa = angular(mode.kappa_r);
    let d0 = detuning(mode, pulse.omega_d, QubitState::Ground);
    (pulse.n_bar * (d0 * d0 + 0.25 * kappa * kappa)).sqrt()
}

/// Closed-form solution of `dα/dt = −iΔα − (κ/2)α − iε` with α(0) = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointerDynamics {
    pub epsilon: f64,
    pub lambda: Complex64,
    pub steady_state: Complex64,
}

impl PointerDynamics {
    pub fn new(mode: &ReadoutMode, pulse: &ReadoutPulse, s: QubitState) -> Self {
        Self::with_drive(mode, pulse.omega_d, drive_amplitude(mode, pulse), s)
    }

    pub fn with_drive(mode: &ReadoutMode, omega_d: f64, epsilon: f64, s: QubitState) -> Self {
        let delta = detuning(mode, omega_d, s);
        let half_kappa = 0.5 * angular(mode.kappa_r);
        let lambda = Complex64::new(-half_kappa, -delta);
        let steady_state = Complex64::new(0.0, -epsilon) / Complex64::new(half_kappa, delta);
        PointerDynamics { epsilon, lambda, steady_state }
    }

    pub fn at(&self, t: f64) -> Complex64 {
        self.steady_state * (Complex64::new(1.0, 0.0) - (self.lambda * t).exp())
    }

    /// Mean of α(t) over `[0, duration]`.
    pub fn time_average(&self, duration: f64) -> Complex64 {
        let x = self.lambda * duration;
        let ring_up = if x.norm() < 1e-8 {
            Complex64::new(1.0, 0.0) + x * 0.5
        } else {
            (x.exp() - 1.0) / x
        };
        self.steady_state * (Complex64::new(1.0, 0.0) - ring_up)
    }

    pub fn photons_steady(&self) -> f64 {
        self.steady_state.norm_sqr()
    }
}

/// Sampled pointer trajectory for one qubit state.
#[derive(Debug, Clone, PartialEq)]
pub struct CavityResponse {
    pub times: Vec<f64>,
    pub amplitudes: Vec<Complex64>,
    pub steady_state: Complex64,
    pub n_steady: f64,
}

/// Integrates the pointer equation on a uniform grid of step `dt` with a
/// fourth-order Runge–Kutta scheme.
pub fn cavity_response(
    state: QubitState,
    pulse: &ReadoutPulse,
    mode: &ReadoutMode,
    dt: f64,
) -> Result<CavityResponse> {
    pulse.validate()?;
    if !(mode.kappa_r > 0.0) {
        return Err(Error::domain("kappa_r", "readout mode must be lossy"));
    }
    let kappa = angular(mode.kappa_r);
    if !(dt > 0.0) || dt > 1.0 / (20.0 * kappa) {
        return Err(Error::Config(alloc::format!(
            "trajectory step {dt:e} s exceeds 1/(20 kappa) = {:e} s",
            1.0 / (20.0 * kappa)
        )));
    }
    let dyn_ = PointerDynamics::new(mode, pulse, state);
    let eps = Complex64::new(0.0, -dyn_.epsilon);
    let f = |a: Complex64| dyn_.lambda * a + eps;
    let steps = (pulse.t_r / dt).ceil() as usize;
    let h = pulse.t_r / steps as f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut amplitudes = Vec::with_capacity(steps + 1);
    let mut a = Complex64::new(0.0, 0.0);
    times.push(0.0);
    amplitudes.push(a);
    for k in 1..=steps {
        let k1 = f(a);
        let k2 = f(a + k1 * (0.5 * h));
        let k3 = f(a + k2 * (0.5 * h));
        let k4 = f(a + k3 * h);
        a += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        times.push(k as f64 * h);
        amplitudes.push(a);
    }
    Ok(CavityResponse {
        times,
        amplitudes,
        steady_state: dyn_.steady_state,
        n_steady: dyn_.photons_steady(),
    })
}

/// Analytic SNR of an integrated heterodyne record, in the angular convention.
pub fn snr_analytic(mode: &ReadoutMode, n_bar: f64, t_r: f64, eta: f64) -> f64 {
    let kappa = angular(mode.kappa_r);
    let chi = angular(mode.chi_qr);
    let denom = 0.25 * kappa * kappa + chi * chi;
    if denom == 0.0 {
        return 0.0;
    }
    (4.0 * eta * t_r * n_bar * kappa * chi * chi / denom).max(0.0).sqrt()
}
