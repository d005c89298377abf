//! Closed-form high-power limits, the equivalent transverse-coupling
//! comparator and the qubit coherence budget.

use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::circuit::{BareModeParams, PolaritonParams, ReadoutMode};
use crate::error::{Error, Result};
use crate::units::{RateConvention, BOLTZMANN, PLANCK};

/// Critical photon numbers of the readout mode. Degenerate limits are `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPhotons {
    /// Breakdown of the rotating-wave treatment of the |1⟩–|3⟩ hybridization.
    pub n_rwa: f64,
    /// Counter-rotating |2ω_r − ω_13| resonance, evaluated literally.
    pub n_rwa2: f64,
    /// Onset of Kerr bistability.
    pub n_bifurc: f64,
    /// Bare ancilla excitations allowed by the low phase-drop expansion.
    pub n_lowphi_ancilla: f64,
    /// The same limit expressed in readout photons.
    pub n_lowphi: f64,
    pub n_crit: f64,
    pub omega_13: f64,
}

/// Ancilla quantities entering the low phase-drop limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AncillaNonlinearity {
    pub e_j: f64,
    pub dilution: f64,
    pub e_ca: f64,
}

impl From<&BareModeParams> for AncillaNonlinearity {
    fn from(b: &BareModeParams) -> Self {
        AncillaNonlinearity { e_j: b.e_j(), dilution: b.dilution, e_ca: b.e_ca }
    }
}

/// Anharmonic-oscillator estimate of the |1⟩ → |3⟩ transition.
pub fn omega_13_estimate(omega_q: f64, alpha_q: f64) -> f64 {
    2.0 * omega_q + 3.0 * alpha_q
}

fn finite(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::domain(name, "must be finite"))
    }
}

fn ratio_or_infinity(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        f64::INFINITY
    } else {
        (num / den).abs()
    }
}

pub fn critical_photons(bare: &BareModeParams, pol: &PolaritonParams, omega_13: f64) -> Result<CriticalPhotons> {
    critical_photons_for(&pol.readout_mode(), pol.theta, &AncillaNonlinearity::from(bare), omega_13)
}

pub fn critical_photons_for(
    mode: &ReadoutMode,
    theta: f64,
    ancilla: &AncillaNonlinearity,
    omega_13: f64,
) -> Result<CriticalPhotons> {
    let chi = finite("chi_qr", mode.chi_qr)?;
    let alpha = finite("alpha_r", mode.alpha_r)?;
    let kappa = finite("kappa_r", mode.kappa_r)?;
    let omega_r = finite("omega_r", mode.omega_r)?;
    let theta = finite("theta", theta)?;
    let omega_13 = finite("omega_13", omega_13)?;
    if kappa < 0.0 {
        return Err(Error::domain("kappa_r", "must be >= 0"));
    }
    for (name, v) in [("e_j", ancilla.e_j), ("e_ca", ancilla.e_ca)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::domain(name, "must be finite and strictly positive"));
        }
    }
    if !(ancilla.dilution.is_finite() && ancilla.dilution >= 1.0) {
        return Err(Error::domain("dilution", "must be finite and >= 1"));
    }

    let sqrt6 = 6f64.sqrt();
    let n_rwa = ratio_or_infinity(omega_13, sqrt6 * chi);
    let n_rwa2 = ratio_or_infinity(2.0 / sqrt6 * (2.0 * omega_r - omega_13), chi);
    let n_bifurc = ratio_or_infinity(kappa, 3.0 * 3f64.sqrt() * alpha);
    let n_lowphi_ancilla = 0.5 * (ancilla.e_j * ancilla.dilution / ancilla.e_ca).sqrt();
    let n_lowphi = ratio_or_infinity(n_lowphi_ancilla, theta.sin().powi(2));
    let n_crit = n_rwa.min(n_rwa2).min(n_bifurc).min(n_lowphi);
    Ok(CriticalPhotons { n_rwa, n_rwa2, n_bifurc, n_lowphi_ancilla, n_lowphi, n_crit, omega_13 })
}

/// Standard transverse readout with the same dispersive shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransverseEquivalent {
    pub g_x: f64,
    pub t1_purcell: f64,
    pub n_std_crit: f64,
    pub convention: RateConvention,
}

pub fn equivalent_transverse(
    bare: &BareModeParams,
    pol: &PolaritonParams,
    kappa_out: f64,
    convention: RateConvention,
) -> Result<TransverseEquivalent> {
    let mode = pol.readout_mode();
    equivalent_transverse_for(bare.omega_q, bare.alpha_q, mode.omega_r, mode.chi_qr, kappa_out, convention)
}

/// Transverse coupling `g` giving `χ = g²α/[Δ(Δ+α)]` with `Δ = ω_q − ω_r`.
pub fn equivalent_transverse_for(
    omega_q: f64,
    alpha_q: f64,
    omega_r: f64,
    chi_qr: f64,
    kappa_out: f64,
    convention: RateConvention,
) -> Result<TransverseEquivalent> {
    for (name, v) in [("omega_q", omega_q), ("alpha_q", alpha_q), ("omega_r", omega_r), ("chi_qr", chi_qr)] {
        finite(name, v)?;
    }
    if !(kappa_out.is_finite() && kappa_out > 0.0) {
        return Err(Error::domain("kappa_out", "must be finite and strictly positive"));
    }
    if alpha_q == 0.0 {
        return Err(Error::domain("alpha_q", "a harmonic qubit has no dispersive equivalent"));
    }
    let delta = omega_q - omega_r;
    let g2 = chi_qr * delta * (delta + alpha_q) / alpha_q;
    if g2 < 0.0 {
        return Err(Error::domain("chi_qr", "no transverse coupling reproduces this dispersive shift"));
    }
    let g_x = g2.sqrt();
    let t1_purcell = ratio_or_infinity(delta * delta, convention.rate(kappa_out) * g2);
    let n_std_crit = ratio_or_infinity(delta * delta, 4.0 * g2);
    Ok(TransverseEquivalent { g_x, t1_purcell, n_std_crit, convention })
}

/// Dispersive shift back from a transverse coupling.
pub fn transverse_dispersive_shift(g_x: f64, delta: f64, alpha_q: f64) -> f64 {
    g_x * g_x * alpha_q / (delta * (delta + alpha_q))
}

/// Bose–Einstein occupation of a mode at frequency `f` (Hz).
pub fn thermal_occupation(f: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    let x = PLANCK * f / (BOLTZMANN * temperature);
    1.0 / x.exp_m1()
}

/// A mode dephasing the qubit through thermal photons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersiveMode {
    pub omega: f64,
    pub chi: f64,
    pub kappa: f64,
}

impl DispersiveMode {
    pub fn lower(p: &PolaritonParams) -> Self {
        DispersiveMode { omega: p.omega_l, chi: p.chi_ql, kappa: p.kappa_l }
    }

    pub fn upper(p: &PolaritonParams) -> Self {
        DispersiveMode { omega: p.omega_u, chi: p.chi_qu, kappa: p.kappa_u }
    }
}

/// Qubit quantities entering the dielectric-loss estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitSpec {
    pub omega_q: f64,
    pub e_cq: f64,
    pub e_jq: f64,
}

impl From<&BareModeParams> for QubitSpec {
    fn from(b: &BareModeParams) -> Self {
        QubitSpec { omega_q: b.omega_q, e_cq: b.e_cq, e_jq: b.e_jq }
    }
}

impl QubitSpec {
    /// Transmon zero-point value of |⟨0|φ|1⟩|².
    pub fn phi01_squared(&self) -> f64 {
        (2.0 * self.e_cq / self.e_jq).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dielectric {
    Quality(f64),
    T1Target(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Thermal {
    Temperature(f64),
    T2Target(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherenceInputs {
    pub dielectric: Dielectric,
    pub thermal: Thermal,
    /// Temperature in the dielectric-loss factor; defaults to the mode temperature.
    #[serde(default)]
    pub sample_temperature: Option<f64>,
    #[serde(default)]
    pub phi01_squared: Option<f64>,
    #[serde(default)]
    pub convention: RateConvention,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceBudget {
    pub gamma1_diel: f64,
    pub q_diel: f64,
    pub t2_thermal: f64,
    pub t_eff: f64,
    pub n_th_l: f64,
    pub n_th_r: f64,
}

/// Γ1·Q for the dielectric-loss model, i.e. the rate at unit quality factor.
pub fn dielectric_rate_times_q(qubit: &QubitSpec, phi01_squared: f64, temperature: f64) -> f64 {
    let f = qubit.omega_q;
    let thermal = if temperature <= 0.0 {
        2.0
    } else {
        let x = PLANCK * f / (2.0 * BOLTZMANN * temperature);
        1.0 / x.tanh() + 1.0
    };
    PI * f * f / (2.0 * qubit.e_cq) * phi01_squared * thermal
}

/// Thermal-photon dephasing rate from the given modes.
pub fn thermal_dephasing_rate(modes: &[DispersiveMode], temperature: f64, convention: RateConvention) -> f64 {
    modes
        .iter()
        .map(|m| {
            let n = thermal_occupation(m.omega, temperature);
            let two_chi = convention.rate(2.0 * m.chi);
            if m.kappa == 0.0 {
                if n == 0.0 { 0.0 } else { f64::INFINITY }
            } else {
                n * (n + 1.0) * two_chi * two_chi / convention.rate(m.kappa)
            }
        })
        .sum()
}

const T_LO: f64 = 1e-4;
const T_HI: f64 = 10.0;

/// Temperature reproducing a thermal dephasing time, by bisection in ln T.
pub fn invert_temperature(modes: &[DispersiveMode], t2: f64, convention: RateConvention) -> Result<f64> {
    let target = 1.0 / t2;
    let f = |t: f64| thermal_dephasing_rate(modes, t, convention) - target;
    let (mut lo, mut hi) = (T_LO.ln(), T_HI.ln());
    if !(f(T_LO) < 0.0 && f(T_HI) > 0.0) {
        return Err(Error::Inversion { what: "thermal dephasing rate vs temperature", lo: T_LO, hi: T_HI });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid.exp()) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

pub fn coherence_budget(
    qubit: &QubitSpec,
    lower: &DispersiveMode,
    readout: &DispersiveMode,
    inputs: &CoherenceInputs,
) -> Result<CoherenceBudget> {
    let modes = [*lower, *readout];
    let (t_eff, rate2) = match inputs.thermal {
        Thermal::Temperature(t) => {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::domain("temperature", "must be finite and >= 0"));
            }
            (t, thermal_dephasing_rate(&modes, t, inputs.convention))
        }
        Thermal::T2Target(t2) => {
            if !(t2.is_finite() && t2 > 0.0) {
                return Err(Error::domain("t2_target", "must be finite and strictly positive"));
            }
            let t = invert_temperature(&modes, t2, inputs.convention)?;
            (t, 1.0 / t2)
        }
    };
    let phi01 = inputs.phi01_squared.unwrap_or_else(|| qubit.phi01_squared());
    let sample_t = inputs.sample_temperature.unwrap_or(t_eff);
    let unit = dielectric_rate_times_q(qubit, phi01, sample_t);
    let (q_diel, gamma1_diel) = match inputs.dielectric {
        Dielectric::Quality(q) => {
            if !(q.is_finite() && q > 0.0) {
                return Err(Error::domain("q_diel", "must be finite and strictly positive"));
            }
            (q, unit / q)
        }
        Dielectric::T1Target(t1) => {
            if !(t1.is_finite() && t1 > 0.0) {
                return Err(Error::domain("t1_target", "must be finite and strictly positive"));
            }
            (unit * t1, 1.0 / t1)
        }
    };
    Ok(CoherenceBudget {
        gamma1_diel,
        q_diel,
        t2_thermal: 1.0 / rate2,
        t_eff,
        n_th_l: thermal_occupation(lower.omega, t_eff),
        n_th_r: thermal_occupation(readout.omega, t_eff),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table1_mode() -> ReadoutMode {
        ReadoutMode { omega_r: 7.290e9, chi_qr: -0.77e6, alpha_r: -6.82e3, kappa_r: 17.9e6 }
    }

    fn ancilla() -> AncillaNonlinearity {
        AncillaNonlinearity { e_j: 3.84e9, dilution: 23.1, e_ca: 29.8e6 }
    }

    #[test]
    fn table1_critical_numbers() {
        let c = critical_photons_for(&table1_mode(), 0.273, &ancilla(), 3.90e9).unwrap();
        assert!((c.n_rwa - 2068.0).abs() < 5.0);
        assert!((c.n_bifurc - 505.1).abs() < 0.1);
        assert!((c.n_lowphi - 377.0).abs() < 2.0, "{}", c.n_lowphi);
        assert_eq!(c.n_crit, c.n_lowphi);
        // (2/√6)·|2·7.290 − 3.90| GHz / 0.77 MHz
        let hand = 2.0 / 6f64.sqrt() * (2.0 * 7.290e9 - 3.90e9) / 0.77e6;
        assert!((c.n_rwa2 - hand).abs() < 1e-6 * hand);
        assert!(c.n_rwa2 > 1.1e4);
    }

    #[test]
    fn vanishing_parameters_give_infinity() {
        let mut m = table1_mode();
        m.chi_qr = 0.0;
        let c = critical_photons_for(&m, 0.273, &ancilla(), 3.9e9).unwrap();
        assert!(c.n_rwa.is_infinite() && c.n_rwa2.is_infinite());
        assert!(c.n_crit.is_finite());
        let mut m = table1_mode();
        m.alpha_r = 0.0;
        assert!(critical_photons_for(&m, 0.273, &ancilla(), 3.9e9).unwrap().n_bifurc.is_infinite());
        assert!(critical_photons_for(&table1_mode(), 0.0, &ancilla(), 3.9e9).unwrap().n_lowphi.is_infinite());
        let mut m = table1_mode();
        m.kappa_r = f64::NAN;
        assert!(critical_photons_for(&m, 0.273, &ancilla(), 3.9e9).is_err());
    }

    #[test]
    fn transverse_comparator_table1() {
        let angular = equivalent_transverse_for(2.0332e9, -73.1e6, 7.290e9, -0.77e6, 13e6, RateConvention::Angular).unwrap();
        assert!((angular.g_x / 515e6 - 1.0).abs() < 0.10);
        assert!((angular.n_std_crit - 26.0).abs() <= 3.0);
        let r = angular.t1_purcell / 800e-9;
        assert!(r > 0.5 && r < 2.0, "{}", angular.t1_purcell);
        let cyclic = equivalent_transverse_for(2.0332e9, -73.1e6, 7.290e9, -0.77e6, 13e6, RateConvention::Cyclic).unwrap();
        assert!((cyclic.t1_purcell / angular.t1_purcell - 2.0 * PI).abs() < 1e-9);
        assert_eq!(cyclic.g_x, angular.g_x);
    }

    #[test]
    fn transverse_limits_and_errors() {
        let t = equivalent_transverse_for(2e9, -73e6, 7.3e9, 0.0, 13e6, RateConvention::Angular).unwrap();
        assert_eq!(t.g_x, 0.0);
        assert!(t.n_std_crit.is_infinite() && t.t1_purcell.is_infinite());
        assert!(equivalent_transverse_for(2e9, -73e6, 7.3e9, 0.77e6, 13e6, RateConvention::Angular).is_err());
    }

    #[test]
    fn doubling_detuning_scales_n_std() {
        let a = equivalent_transverse_for(2.0e9, -73e6, 7.0e9, -0.77e6, 13e6, RateConvention::Angular).unwrap();
        let b = equivalent_transverse_for(2.0e9, -73e6, 12.0e9, -0.77e6, 13e6, RateConvention::Angular).unwrap();
        let expect = a.n_std_crit * 4.0 * (a.g_x / b.g_x).powi(2);
        assert!((b.n_std_crit - expect).abs() < 1e-9 * expect);
    }

    #[test]
    fn thermal_occupations_at_effective_temperature() {
        let nl = thermal_occupation(6.432e9, 38.7e-3);
        let nr = thermal_occupation(7.29e9, 38.7e-3);
        assert!((nl / 3.4e-4 - 1.0).abs() < 0.02, "{nl}");
        assert!((nr / 1.2e-4 - 1.0).abs() < 0.02, "{nr}");
        assert_eq!(thermal_occupation(6e9, 0.0), 0.0);
    }

    fn modes() -> (DispersiveMode, DispersiveMode) {
        (
            DispersiveMode { omega: 6.432e9, chi: -9.64e6, kappa: 2.84e6 },
            DispersiveMode { omega: 7.29e9, chi: -0.77e6, kappa: 17.9e6 },
        )
    }

    fn qubit() -> QubitSpec {
        QubitSpec { omega_q: 2.0332e9, e_cq: 73.1e6, e_jq: 7.68e9 }
    }

    #[test]
    fn zero_temperature_has_no_dephasing() {
        let (l, r) = modes();
        assert_eq!(thermal_dephasing_rate(&[l, r], 0.0, RateConvention::Angular), 0.0);
    }

    #[test]
    fn quality_factor_from_t1() {
        let (l, r) = modes();
        let inputs = CoherenceInputs {
            dielectric: Dielectric::T1Target(124.5e-6),
            thermal: Thermal::Temperature(30e-3),
            sample_temperature: None,
            phi01_squared: None,
            convention: RateConvention::Cyclic,
        };
        let b = coherence_budget(&qubit(), &l, &r, &inputs).unwrap();
        // π f²/(2E_C)·√(2E_C/E_J)·[coth(hf/2kT)+1]·T1 by hand
        let f = 2.0332e9;
        let x = PLANCK * f / (2.0 * BOLTZMANN * 30e-3);
        let hand = PI * f * f / (2.0 * 73.1e6) * (2.0 * 73.1e6 / 7.68e9f64).sqrt() * (1.0 / x.tanh() + 1.0) * 124.5e-6;
        assert!((b.q_diel / hand - 1.0).abs() < 1e-12);
        assert!((b.q_diel / 2.67e6 - 1.0).abs() < 0.20);
    }

    #[test]
    fn cyclic_thermal_dephasing_matches_echo_time() {
        let (l, r) = modes();
        let rate = thermal_dephasing_rate(&[l, r], 38.7e-3, RateConvention::Cyclic);
        assert!(((1.0 / rate) / 22.6e-6 - 1.0).abs() < 0.05, "{}", 1.0 / rate);
    }

    #[test]
    fn unbracketed_inversion_reports_interval() {
        let (l, r) = modes();
        let err = invert_temperature(&[l, r], 1e-30, RateConvention::Angular).unwrap_err();
        assert!(matches!(err, Error::Inversion { lo, hi, .. } if lo == T_LO && hi == T_HI));
    }

    proptest! {
        #[test]
        fn critical_minimum_and_scaling(kappa in 1e5f64..1e8, theta in 0.05f64..0.75, k in 1.1f64..5.0) {
            let mut m = table1_mode();
            m.kappa_r = kappa;
            let a = critical_photons_for(&m, theta, &ancilla(), 3.9e9).unwrap();
            prop_assert_eq!(a.n_crit, a.n_rwa.min(a.n_rwa2).min(a.n_bifurc).min(a.n_lowphi));
            m.kappa_r = kappa * k;
            let b = critical_photons_for(&m, theta, &ancilla(), 3.9e9).unwrap();
            prop_assert!((b.n_bifurc / a.n_bifurc - k).abs() < 1e-9 * k);
            prop_assert!((a.n_lowphi * theta.sin().powi(2) - a.n_lowphi_ancilla).abs() < 1e-9 * a.n_lowphi_ancilla);
        }

        #[test]
        fn transverse_round_trip(wq in 1e9f64..6e9, wr in 6.5e9f64..9e9, alpha in -300e6f64..-50e6, chi in -5e6f64..-1e3) {
            let t = equivalent_transverse_for(wq, alpha, wr, chi, 13e6, RateConvention::Angular).unwrap();
            let back = transverse_dispersive_shift(t.g_x, wq - wr, alpha);
            prop_assert!((back - chi).abs() <= 1e-9 * chi.abs());
        }

        #[test]
        fn coherence_round_trip(t in 0.02f64..0.2, q in 1e5f64..1e8, cyclic in proptest::bool::ANY) {
            let (l, r) = modes();
            let convention = if cyclic { RateConvention::Cyclic } else { RateConvention::Angular };
            let fwd = coherence_budget(&qubit(), &l, &r, &CoherenceInputs {
                dielectric: Dielectric::Quality(q),
                thermal: Thermal::Temperature(t),
                sample_temperature: None,
                phi01_squared: None,
                convention,
            }).unwrap();
            let inv = coherence_budget(&qubit(), &l, &r, &CoherenceInputs {
                dielectric: Dielectric::T1Target(1.0 / fwd.gamma1_diel),
                thermal: Thermal::T2Target(fwd.t2_thermal),
                sample_temperature: None,
                phi01_squared: None,
                convention,
            }).unwrap();
            prop_assert!((inv.t_eff / t - 1.0).abs() < 1e-6);
            prop_assert!((inv.q_diel / q - 1.0).abs() < 1e-6);
            prop_assert!(fwd.n_th_l >= 0.0 && fwd.n_th_l < 1.0);
        }
    }
}
