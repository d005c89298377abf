//! Monte-Carlo single-shot readout: pointer dynamics, the qubit jump
//! process, IQ classification and the fidelity/QNDness estimators.

mod classify;
mod experiment;
mod pulse;
mod rates;
mod shot;

pub use classify::{best_split, empirical_snr, fit_thresholds, Thresholds};
pub use experiment::{
    analytic_leak_noise, fidelity_report, qnd_report, qnd_sweep, sweep_cell, sweep_cell_seed, FidelityCounts,
    FidelityReport, PointerModel, QndCounts, QndReport, ReadoutSetup, ShotRow, Simulator,
};
pub use pulse::{
    cavity_response, default_ring_gap, detuning, drive_amplitude, snr_analytic, CavityResponse,
    PointerDynamics, ReadoutPulse,
};
pub use rates::{BudgetGeometry, ErrorBudget, InducedProbability, RateModel};
pub use shot::{derive_key, evolve, shot_rng, simulate_shot, Generator, ShotRecord};

use serde::{Deserialize, Serialize};

/// Qubit levels tracked by the simulator, also used as measurement labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QubitState {
    #[serde(rename = "0")]
    Ground,
    #[serde(rename = "1")]
    Excited,
    #[serde(rename = "l")]
    Leaked,
}

impl QubitState {
    pub const ALL: [QubitState; 3] = [QubitState::Ground, QubitState::Excited, QubitState::Leaked];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    #[inline]
    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }

    /// Number of 2χ pulls the state applies to the readout mode.
    #[inline]
    pub fn pointer_index(self) -> f64 {
        self as usize as f64
    }

    pub fn symbol(self) -> &'static str {
        match self {
            QubitState::Ground => "0",
            QubitState::Excited => "1",
            QubitState::Leaked => "l",
        }
    }
}
