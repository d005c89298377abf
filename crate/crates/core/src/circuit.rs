//! Analytic circuit model: bare qubit/ancilla parameters from the lumped
//! circuit elements, ancilla–cavity hybridization into polaritons, and
//! the inverse of the polariton loss relations.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::units::{ELEMENTARY_CHARGE, FLUX_QUANTUM, PLANCK, REDUCED_FLUX_QUANTUM};

/// Raw electrical elements of the transmon molecule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitParams {
    /// Shunt capacitance of each transmon (F).
    pub c_s: f64,
    /// Capacitance of the LC branch (F).
    pub c_t: f64,
    /// Single-junction Josephson energy divided by h (Hz).
    pub e_j: f64,
    /// Loop inductance at zero flux (H).
    pub l_a0: f64,
    /// Loop-to-SQUID area ratio.
    #[serde(default = "default_area_ratio")]
    pub a_ratio: f64,
    /// External flux through the molecule loop (Wb).
    #[serde(default)]
    pub phi_ext: f64,
}

fn default_area_ratio() -> f64 {
    28.0
}

impl CircuitParams {
    pub fn new(c_s: f64, c_t: f64, e_j: f64, l_a0: f64) -> Self {
        CircuitParams { c_s, c_t, e_j, l_a0, a_ratio: default_area_ratio(), phi_ext: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        positive("c_s", self.c_s)?;
        positive("c_t", self.c_t)?;
        positive("e_j", self.e_j)?;
        positive("l_a0", self.l_a0)?;
        if !(self.a_ratio >= 1.0) || !self.a_ratio.is_finite() {
            return Err(Error::domain("a_ratio", "must be finite and >= 1"));
        }
        if !self.phi_ext.is_finite() {
            return Err(Error::domain("phi_ext", "must be finite"));
        }
        Ok(())
    }

    /// Loop inductance at the configured flux bias.
    pub fn loop_inductance(&self) -> Result<f64> {
        flux_tuned_inductance(self.l_a0, self.phi_ext, self.a_ratio)
    }
}

pub(crate) fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(name, "must be finite and strictly positive"))
    }
}

/// Analytic parameters of the qubit and ancilla modes. Frequencies and
/// energies are cyclic (Hz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BareModeParams {
    pub e_cq: f64,
    pub e_ca: f64,
    pub e_jq: f64,
    /// Josephson inductance φ0²/E_J (H).
    pub l_j: f64,
    /// Loop inductance used for the derivation (H).
    pub l_a: f64,
    /// Inductive dilution factor 1 + 2L_J/L_a.
    pub dilution: f64,
    pub omega_q: f64,
    pub omega_a: f64,
    pub alpha_q: f64,
    pub alpha_a: f64,
    pub chi_qa: f64,
}

impl BareModeParams {
    /// Single-junction Josephson energy (Hz).
    pub fn e_j(&self) -> f64 {
        0.5 * self.e_jq
    }
}

/// Closed-form mode quantities, generic so the optimizer can differentiate
/// them exactly.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ModeQuantities<S> {
    pub e_cq: S,
    pub e_ca: S,
    pub e_jq: S,
    pub l_j: S,
    pub dilution: S,
    pub chi_qa: S,
    pub alpha_q: S,
    pub alpha_a: S,
    pub omega_q: S,
    pub omega_a: S,
}

pub(crate) fn mode_quantities<S: Scalar>(c_s: S, c_t: S, e_j: S, l_a: S) -> ModeQuantities<S> {
    let e2_over_h = ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / PLANCK;
    let e_cq = S::constant(e2_over_h) / c_s.scale(4.0);
    let e_ca = S::constant(e2_over_h) / (c_t.scale(8.0) + c_s.scale(4.0));
    let e_jq = e_j.scale(2.0);
    let l_j = S::constant(REDUCED_FLUX_QUANTUM * REDUCED_FLUX_QUANTUM / PLANCK) / e_j;
    let dilution = S::constant(1.0) + (l_j / l_a).scale(2.0);
    let chi_qa = -(e_cq * e_ca / dilution).sqrt();
    let alpha_q = -e_cq;
    let alpha_a = -(e_ca / dilution);
    // Plasma frequency √(8 E_Jq E_Cq) = 4√(E_J E_Cq), the same form as the ancilla.
    let omega_q = (e_j * e_cq).sqrt().scale(4.0) + alpha_q + chi_qa;
    let omega_a = (e_j * e_ca * dilution).sqrt().scale(4.0) + alpha_a + chi_qa;
    ModeQuantities { e_cq, e_ca, e_jq, l_j, dilution, chi_qa, alpha_q, alpha_a, omega_q, omega_a }
}

/// Derives the bare-mode parameters from the circuit elements.
pub fn derive_bare_modes(circuit: &CircuitParams) -> Result<BareModeParams> {
    circuit.validate()?;
    let l_a = circuit.loop_inductance()?;
    let q = mode_quantities(circuit.c_s, circuit.c_t, circuit.e_j, l_a);
    Ok(BareModeParams {
        e_cq: q.e_cq,
        e_ca: q.e_ca,
        e_jq: q.e_jq,
        l_j: q.l_j,
        l_a,
        dilution: q.dilution,
        omega_q: q.omega_q,
        omega_a: q.omega_a,
        alpha_q: q.alpha_q,
        alpha_a: q.alpha_a,
        chi_qa: q.chi_qa,
    })
}

/// SQUID-chain inductance at flux `phi_ext`: `L_a0 / |cos(π Φ_ext / (Φ0 A_ratio))|`.
pub fn flux_tuned_inductance(l_a0: f64, phi_ext: f64, a_ratio: f64) -> Result<f64> {
    positive("l_a0", l_a0)?;
    let arg = core::f64::consts::PI * phi_ext / (FLUX_QUANTUM * a_ratio);
    let c = Float::abs(Float::cos(arg));
    if !(c > 1e-9) {
        return Err(Error::OutOfRange(alloc::format!(
            "flux-tuned inductance diverges: |cos({arg:.6})| = {c:e}"
        )));
    }
    Ok(l_a0 / c)
}

/// Bare cavity and its coupling to the ancilla. Frequencies and loss rates in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityParams {
    pub omega_c: f64,
    pub g_ac: f64,
    pub kappa_c: f64,
    pub kappa_a: f64,
    pub kappa_in: f64,
    pub kappa_out: f64,
}

impl CavityParams {
    pub fn validate(&self) -> Result<()> {
        positive("omega_c", self.omega_c)?;
        if !self.g_ac.is_finite() {
            return Err(Error::domain("g_ac", "must be finite"));
        }
        for (name, v) in [
            ("kappa_c", self.kappa_c),
            ("kappa_a", self.kappa_a),
            ("kappa_in", self.kappa_in),
            ("kappa_out", self.kappa_out),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::domain(name, "loss rates must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// Hybridized ancilla–cavity modes (lower `l`, upper `u`) and their
/// couplings to the qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolaritonParams {
    pub theta: f64,
    pub omega_l: f64,
    pub omega_u: f64,
    pub alpha_l: f64,
    pub alpha_u: f64,
    pub chi_ql: f64,
    pub chi_qu: f64,
    pub chi_ul: f64,
    pub kappa_l: f64,
    pub kappa_u: f64,
}

/// Dispersive parameters of the mode used for readout (the upper polariton).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutMode {
    pub omega_r: f64,
    pub chi_qr: f64,
    pub alpha_r: f64,
    pub kappa_r: f64,
}

impl PolaritonParams {
    pub fn readout_mode(&self) -> ReadoutMode {
        ReadoutMode {
            omega_r: self.omega_u,
            chi_qr: self.chi_qu,
            alpha_r: self.alpha_u,
            kappa_r: self.kappa_u,
        }
    }
}

/// Mixing angle of the ancilla–cavity pair.
///
/// `½·atan2(2g, ω_c − ω_a)` keeps `ω_u` the upper eigenvalue on both sides
/// of the bare resonance and gives exactly π/4 at degeneracy.
pub fn mixing_angle(omega_a: f64, omega_c: f64, g_ac: f64) -> f64 {
    0.5 * (2.0 * g_ac).atan2(omega_c - omega_a)
}

/// Hybridizes the ancilla with the cavity.
pub fn hybridize(bare: &BareModeParams, cavity: &CavityParams) -> Result<PolaritonParams> {
    cavity.validate()?;
    let theta = mixing_angle(bare.omega_a, cavity.omega_c, cavity.g_ac);
    let (s, c) = theta.sin_cos();
    let (s2, c2) = (s * s, c * c);
    let split = Float::sin(2.0 * theta) * cavity.g_ac;
    Ok(PolaritonParams {
        theta,
        omega_l: s2 * cavity.omega_c + c2 * bare.omega_a - split,
        omega_u: c2 * cavity.omega_c + s2 * bare.omega_a + split,
        alpha_l: c2 * c2 * bare.alpha_a,
        alpha_u: s2 * s2 * bare.alpha_a,
        chi_ql: c2 * bare.chi_qa,
        chi_qu: s2 * bare.chi_qa,
        chi_ul: 2.0 * c2 * s2 * bare.alpha_a,
        kappa_l: cavity.kappa_c * s2 + cavity.kappa_a * c2,
        kappa_u: cavity.kappa_c * c2 + cavity.kappa_a * s2,
    })
}

/// Polariton losses from bare losses (the forward relation).
pub fn polariton_losses(kappa_c: f64, kappa_a: f64, theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    let (s2, c2) = (s * s, c * c);
    (kappa_c * s2 + kappa_a * c2, kappa_c * c2 + kappa_a * s2)
}

/// Inverts the polariton loss relations: returns `(kappa_c, kappa_a)`.
pub fn infer_bare_losses(kappa_l: f64, kappa_u: f64, theta: f64) -> Result<(f64, f64)> {
    for (name, v) in [("kappa_l", kappa_l), ("kappa_u", kappa_u), ("theta", theta)] {
        if !v.is_finite() {
            return Err(Error::domain(name, "must be finite"));
        }
    }
    let (s, c) = theta.sin_cos();
    let (s2, c2) = (s * s, c * c);
    // determinant c⁴ − s⁴ = cos 2θ
    let det = c2 - s2;
    if det.abs() < 1e-12 {
        return Err(Error::Degenerate(alloc::format!(
            "loss inversion is singular at theta = {theta} (cos 2θ = {det:e})"
        )));
    }
    let kappa_c = (kappa_u * c2 - kappa_l * s2) / det;
    let kappa_a = (kappa_l * c2 - kappa_u * s2) / det;
    Ok((kappa_c, kappa_a))
}
