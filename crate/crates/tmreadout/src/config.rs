//! Run configuration: one TOML document per run, strict schema.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tmreadout_core::calibration::{FitOptions, StarkSynthesis};
use tmreadout_core::limits::CoherenceInputs;
use tmreadout_core::optimizer::{AscentOptions, RewardConfig};
use tmreadout_core::readout::{ErrorBudget, RateModel};
use tmreadout_core::spectrum::{FockCutoffs, SpectrumOptions};
use tmreadout_core::{CavityParams, CircuitParams, ReadoutMode};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EmitFormat {
    #[default]
    ColumnarText,
    StructuredDocument,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub emit_format: Option<EmitFormat>,
    pub circuit: CircuitParams,
    pub cavity: CavitySection,
    pub measured: Option<MeasuredSection>,
    pub pulse: Option<PulseSection>,
    pub rates: Option<RatesSection>,
    pub experiment: Option<ExperimentSection>,
    pub sweep: Option<SweepSection>,
    pub calibration: Option<CalibrationSection>,
    pub reward: Option<RewardConfig>,
    pub optimize: Option<OptimizeSection>,
    pub spectrum: Option<SpectrumSection>,
    pub limits: Option<LimitsSection>,
}

/// Cavity and its coupling. Bare losses are given directly or inferred
/// from the measured polariton losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySection {
    pub omega_c: f64,
    pub g_ac: f64,
    pub kappa_c: Option<f64>,
    pub kappa_a: Option<f64>,
    pub kappa_l: Option<f64>,
    pub kappa_u: Option<f64>,
    pub kappa_in: f64,
    pub kappa_out: f64,
}

/// Measured readout-mode parameters; they replace the derived ones wherever
/// the readout mode enters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasuredSection {
    pub omega_r: f64,
    pub chi_qr: f64,
    pub alpha_r: f64,
    pub kappa_r: f64,
    pub theta: Option<f64>,
    pub omega_q: Option<f64>,
    pub alpha_q: Option<f64>,
    pub omega_13: Option<f64>,
}

impl MeasuredSection {
    pub fn readout_mode(&self) -> ReadoutMode {
        ReadoutMode { omega_r: self.omega_r, chi_qr: self.chi_qr, alpha_r: self.alpha_r, kappa_r: self.kappa_r }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseShape {
    pub n_bar: f64,
    pub t_r: f64,
    /// Drive frequency; halfway between the two pointer resonances when absent.
    pub omega_d: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    pub n_bar: f64,
    pub t_r: f64,
    pub omega_d: Option<f64>,
    pub ring_gap: Option<f64>,
    /// Pre-selection pulse; the readout pulse when absent.
    pub pre: Option<PulseShape>,
}

/// Exactly one of `budget` and `explicit`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSection {
    pub budget: Option<ErrorBudget>,
    pub explicit: Option<RateModel>,
    /// Center of the induced-transition step; the computed critical photon number when absent.
    pub n_crit: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub eta: f64,
    pub shots: u64,
    #[serde(default = "default_calibration_shots")]
    pub calibration_shots: usize,
    #[serde(default)]
    pub thermal_population: f64,
    /// Write one record per fidelity shot.
    #[serde(default)]
    pub emit_shots: bool,
    #[serde(default = "default_batch")]
    pub batch_size: u64,
}

fn default_calibration_shots() -> usize {
    20_000
}

fn default_batch() -> u64 {
    1 << 15
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub durations: Vec<f64>,
    pub photons: Vec<f64>,
    pub shots_per_cell: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n).map(|k| self.start + (self.stop - self.start) * k as f64 / (n - 1) as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    /// Read the map from this file instead of synthesizing one.
    pub map_file: Option<PathBuf>,
    pub synthesis: Option<StarkSynthesis>,
    pub powers: Option<Grid>,
    pub probe: Option<Grid>,
    #[serde(default)]
    pub fit: FitOptions,
    /// Cross-Kerr used to convert shifts; the readout mode's when absent.
    pub chi_qr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    #[serde(default)]
    pub ascent: AscentOptions,
    /// Additional start points, run alongside the configured circuit.
    #[serde(default)]
    pub starts: Vec<CircuitParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    #[serde(default)]
    pub cutoffs: FockCutoffs,
    #[serde(default)]
    pub options: SpectrumOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsSection {
    pub coherence: Option<CoherenceInputs>,
}

/// A parsed configuration together with the digest of its source text.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub sha256: String,
    pub source: Option<PathBuf>,
}

impl LoadedConfig {
    pub fn from_str(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(LoadedConfig { config, sha256: hex_digest(text.as_bytes()), source: None })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut loaded = Self::from_str(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        loaded.source = Some(path.to_path_buf());
        Ok(loaded)
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn config_err(section: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("[{section}] {e}"))
}

impl RunConfig {
    /// Checks every section against the invariants of the module it feeds.
    pub fn validate(&self) -> Result<()> {
        self.circuit.validate().map_err(|e| config_err("circuit", e))?;
        self.cavity_params()?.validate().map_err(|e| config_err("cavity", e))?;
        if let Some(r) = &self.rates {
            match (&r.budget, &r.explicit) {
                (Some(_), None) => {}
                (None, Some(m)) => m.validate().map_err(|e| config_err("rates.explicit", e))?,
                _ => return Err(CliError::Config("[rates] needs exactly one of `budget` and `explicit`".into())),
            }
        }
        if let Some(e) = &self.experiment {
            if !(e.eta > 0.0 && e.eta.is_finite()) {
                return Err(CliError::Config("[experiment] eta must be finite and > 0".into()));
            }
            if e.batch_size == 0 {
                return Err(CliError::Config("[experiment] batch_size must be positive".into()));
            }
        }
        if let Some(s) = &self.sweep {
            if s.durations.is_empty() || s.photons.is_empty() {
                return Err(CliError::Config("[sweep] durations and photons must be non-empty".into()));
            }
        }
        if let Some(r) = &self.reward {
            r.validate().map_err(|e| config_err("reward", e))?;
        }
        if let Some(o) = &self.optimize {
            for c in &o.starts {
                c.validate().map_err(|e| config_err("optimize.starts", e))?;
            }
        }
        if let Some(c) = &self.calibration {
            match (&c.map_file, &c.synthesis) {
                (Some(_), None) => {}
                (None, Some(s)) => {
                    s.validate().map_err(|e| config_err("calibration.synthesis", e))?;
                    if c.powers.is_none() || c.probe.is_none() {
                        return Err(CliError::Config(
                            "[calibration] a synthetic map needs `powers` and `probe` grids".into(),
                        ));
                    }
                }
                _ => {
                    return Err(CliError::Config("[calibration] needs exactly one of `map_file` and `synthesis`".into()))
                }
            }
        }
        if let Some(s) = &self.spectrum {
            s.cutoffs.validate(s.options.max_dimension).map_err(|e| config_err("spectrum", e))?;
        }
        Ok(())
    }

    pub fn cavity_params(&self) -> Result<CavityParams> {
        let c = &self.cavity;
        let (kappa_c, kappa_a) = match (c.kappa_c, c.kappa_a, c.kappa_l, c.kappa_u) {
            (Some(kc), Some(ka), None, None) => (kc, ka),
            (None, None, Some(kl), Some(ku)) => {
                let bare = tmreadout_core::derive_bare_modes(&self.circuit).map_err(|e| config_err("circuit", e))?;
                let theta = tmreadout_core::circuit::mixing_angle(bare.omega_a, c.omega_c, c.g_ac);
                tmreadout_core::infer_bare_losses(kl, ku, theta).map_err(|e| config_err("cavity", e))?
            }
            _ => {
                return Err(CliError::Config(
                    "[cavity] give either kappa_c and kappa_a, or kappa_l and kappa_u".into(),
                ))
            }
        };
        Ok(CavityParams {
            omega_c: c.omega_c,
            g_ac: c.g_ac,
            kappa_c,
            kappa_a,
            kappa_in: c.kappa_in,
            kappa_out: c.kappa_out,
        })
    }

    pub fn section<'a, T>(&'a self, value: &'a Option<T>, name: &str) -> Result<&'a T> {
        value.as_ref().ok_or_else(|| CliError::Config(format!("missing section [{name}]")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[circuit]
c_s = 132e-15
c_t = 96.6e-15
e_j = 3.84e9
l_a0 = 3.85e-9

[cavity]
omega_c = 7.23e9
g_ac = 224e6
kappa_l = 2.84e6
kappa_u = 17.9e6
kappa_in = 0.153e6
kappa_out = 13.0e6
"#;

    #[test]
    fn minimal_config_loads() {
        let c = LoadedConfig::from_str(MINIMAL).unwrap();
        let k = c.config.cavity_params().unwrap();
        assert!((k.kappa_c / 19.1e6 - 1.0).abs() < 0.05);
        assert_eq!(c.sha256.len(), 64);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = MINIMAL.replace("c_t = ", "c_tt = ");
        let err = LoadedConfig::from_str(&text).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("c_tt"), "{err}");
    }

    #[test]
    fn missing_field_is_named() {
        let text = MINIMAL.replace("e_j = 3.84e9\n", "");
        let err = LoadedConfig::from_str(&text).unwrap_err();
        assert!(err.to_string().contains("e_j"), "{err}");
    }

    #[test]
    fn ambiguous_losses_are_rejected() {
        let text = MINIMAL.replace("kappa_l = 2.84e6", "kappa_c = 19e6");
        assert!(LoadedConfig::from_str(&text).is_err());
    }

    #[test]
    fn invalid_physics_is_a_config_error() {
        let text = MINIMAL.replace("c_s = 132e-15", "c_s = -1.0");
        assert_eq!(LoadedConfig::from_str(&text).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn grid_points() {
        assert_eq!(Grid { start: 0.0, stop: 1.0, count: 3 }.points(), vec![0.0, 0.5, 1.0]);
        assert_eq!(Grid { start: 2.0, stop: 5.0, count: 1 }.points(), vec![2.0]);
    }
}
