use alloc::vec::Vec;
use core::ops::{AddAssign, Range};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::ReadoutMode;
use crate::error::{Error, Result};
use crate::special::assignment_error;
use crate::units::angular;

use super::classify::{fit_thresholds, Thresholds};
use super::pulse::{snr_analytic, PointerDynamics, ReadoutPulse};
use super::rates::RateModel;
use super::shot::{derive_key, evolve, shot_rng, simulate_shot, Generator};
use super::QubitState;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Seed of sweep cell `index`; cell 0 reuses the run seed.
pub fn sweep_cell_seed(seed: u64, index: u64) -> u64 {
    seed.wrapping_add(index.wrapping_mul(GOLDEN))
}

/// Pointer means of the three qubit states and the noise anchoring the
/// analytic SNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointerModel {
    pub means: [Complex64; 3],
    /// Per-quadrature noise standard deviation.
    pub sigma: f64,
    pub snr: f64,
}

impl PointerModel {
    pub fn new(mode: &ReadoutMode, pulse: &ReadoutPulse, eta: f64) -> Result<Self> {
        pulse.validate()?;
        if !(mode.kappa_r > 0.0) {
            return Err(Error::domain("kappa_r", "readout mode must be lossy"));
        }
        if !(eta > 0.0) {
            return Err(Error::domain("eta", "detection efficiency must be strictly positive"));
        }
        let means = QubitState::ALL.map(|s| PointerDynamics::new(mode, pulse, s).time_average(pulse.t_r));
        let snr = snr_analytic(mode, pulse.n_bar, pulse.t_r, eta);
        let sep = (means[1] - means[0]).norm();
        if !(sep > 0.0 && snr > 0.0) {
            return Err(Error::Config("readout pulse does not separate |0⟩ and |1⟩".into()));
        }
        let sigma = if snr.is_infinite() { 0.0 } else { sep / (2f64.sqrt() * snr) };
        Ok(PointerModel { means, sigma, snr })
    }
}

/// Leakage assignments from noise alone at midpoint separators, `[P(l|0), P(l|1)]`.
pub fn analytic_leak_noise(pointer: &PointerModel) -> [f64; 2] {
    if pointer.sigma == 0.0 {
        return [0.0, 0.0];
    }
    let t = Thresholds::midpoints(&pointer.means);
    let tail = |m: Complex64| {
        let d = ((m - t.leak_origin) * t.leak_axis.conj()).re;
        0.5 * crate::special::erfc((t.leak_threshold - d) / (2f64.sqrt() * pointer.sigma))
    };
    [tail(pointer.means[0]), tail(pointer.means[1])]
}

/// Everything needed to simulate the fidelity and QND sequences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutSetup {
    pub mode: ReadoutMode,
    pub pulse: ReadoutPulse,
    /// Pre-selection pulse; the readout pulse when absent.
    pub pre_pulse: Option<ReadoutPulse>,
    pub rates: RateModel,
    pub eta: f64,
    /// Calibration shots per class used to fit the separators.
    pub calibration_shots: usize,
    /// Probability of starting in the wrong computational state.
    pub thermal_population: f64,
}

impl ReadoutSetup {
    pub fn pre_pulse(&self) -> ReadoutPulse {
        self.pre_pulse.unwrap_or(self.pulse)
    }

    pub fn validate(&self) -> Result<()> {
        self.pulse.validate()?;
        self.pre_pulse().validate()?;
        self.rates.validate()?;
        if self.calibration_shots == 0 {
            return Err(Error::Config("calibration_shots must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.thermal_population) {
            return Err(Error::domain("thermal_population", "must lie in [0, 1]"));
        }
        let min_gap = 9.0 / angular(self.mode.kappa_r);
        if self.pulse.ring_gap < min_gap {
            return Err(Error::Config(alloc::format!(
                "ring_gap {:e} s is shorter than 9/kappa = {min_gap:e} s",
                self.pulse.ring_gap
            )));
        }
        Ok(())
    }
}

/// One emitted readout record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotRow {
    pub index: u64,
    pub prep: QubitState,
    pub i: f64,
    pub q: f64,
    pub label: QubitState,
    pub jump_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FidelityCounts {
    /// Shots per preparation.
    pub total: [u64; 2],
    /// Shots surviving pre-selection per preparation.
    pub kept: [u64; 2],
    /// `[prep][label]` over {0, 1, l}.
    pub three_state: [[u64; 3]; 2],
    /// `[prep][label]` with the binary separator only.
    pub binary: [[u64; 2]; 2],
}

impl AddAssign for FidelityCounts {
    fn add_assign(&mut self, o: Self) {
        for p in 0..2 {
            self.total[p] += o.total[p];
            self.kept[p] += o.kept[p];
            for j in 0..3 {
                self.three_state[p][j] += o.three_state[p][j];
            }
            for j in 0..2 {
                self.binary[p][j] += o.binary[p][j];
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QndCounts {
    pub total: u64,
    /// `[first][second]` over {0, 1, l}.
    pub three_state: [[u64; 3]; 3],
    pub binary: [[u64; 2]; 2],
}

impl AddAssign for QndCounts {
    fn add_assign(&mut self, o: Self) {
        self.total += o.total;
        for i in 0..3 {
            for j in 0..3 {
                self.three_state[i][j] += o.three_state[i][j];
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                self.binary[i][j] += o.binary[i][j];
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub fidelity: f64,
    pub fidelity_ps: f64,
    /// `P(label | prep)`, rows prep ∈ {0, 1}, columns label ∈ {0, 1, l}.
    pub conditional: [[f64; 3]; 2],
    pub binary_conditional: [[f64; 2]; 2],
    pub thresholds: Thresholds,
    pub counts: FidelityCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QndReport {
    pub p_qnd: f64,
    pub p_qnd_ps: f64,
    /// `Prob(m1, m2)` over {0, 1, l}².
    pub joint: [[f64; 3]; 3],
    pub joint_binary: [[f64; 2]; 2],
    pub thresholds: Thresholds,
    pub counts: QndCounts,
}

pub fn fidelity_report(counts: &FidelityCounts, thresholds: &Thresholds) -> Result<FidelityReport> {
    let mut conditional = [[0.0; 3]; 2];
    let mut binary_conditional = [[0.0; 2]; 2];
    for p in 0..2 {
        let kept = counts.kept[p];
        if kept == 0 {
            return Err(Error::Statistics(alloc::format!("no shots prepared in |{p}⟩ survived pre-selection")));
        }
        for j in 0..3 {
            conditional[p][j] = counts.three_state[p][j] as f64 / kept as f64;
        }
        for j in 0..2 {
            binary_conditional[p][j] = counts.binary[p][j] as f64 / kept as f64;
        }
    }
    let fidelity = 1.0 - 0.5 * (binary_conditional[0][1] + binary_conditional[1][0]);
    let denom = 2.0 - conditional[0][2] - conditional[1][2];
    let fidelity_ps = if denom > 0.0 {
        (conditional[1][1] + conditional[0][0]) / denom
    } else {
        return Err(Error::Statistics("every shot was classified as leaked".into()));
    };
    Ok(FidelityReport { fidelity, fidelity_ps, conditional, binary_conditional, thresholds: *thresholds, counts: *counts })
}

pub fn qnd_report(counts: &QndCounts, thresholds: &Thresholds) -> Result<QndReport> {
    if counts.total == 0 {
        return Err(Error::Statistics("no QND shots".into()));
    }
    let n = counts.total as f64;
    let joint = counts.three_state.map(|row| row.map(|c| c as f64 / n));
    let joint_binary = counts.binary.map(|row| row.map(|c| c as f64 / n));
    let p_qnd = joint_binary[0][0] + joint_binary[1][1];
    let (l, z, o) = (2, 0, 1);
    let denom = 1.0 - joint[l][z] - joint[l][o] - joint[l][l];
    if !(denom > 0.0) {
        return Err(Error::Statistics("every first measurement was classified as leaked".into()));
    }
    let p_qnd_ps = (joint[z][z] + joint[o][o]) / denom;
    Ok(QndReport { p_qnd, p_qnd_ps, joint, joint_binary, thresholds: *thresholds, counts: *counts })
}

/// A calibrated simulator for one setup and seed.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub setup: ReadoutSetup,
    pub pointer: PointerModel,
    pub pre_pointer: PointerModel,
    pub thresholds: Thresholds,
    pub pre_thresholds: Thresholds,
    drive: Generator,
    pre_drive: Generator,
    idle: Generator,
    seed: u64,
}

fn prep_of(index: u64) -> QubitState {
    if index % 2 == 0 {
        QubitState::Ground
    } else {
        QubitState::Excited
    }
}

impl Simulator {
    pub fn new(setup: ReadoutSetup, seed: u64) -> Result<Self> {
        setup.validate()?;
        let pre = setup.pre_pulse();
        let pointer = PointerModel::new(&setup.mode, &setup.pulse, setup.eta)?;
        let pre_pointer = PointerModel::new(&setup.mode, &pre, setup.eta)?;
        let drive = Generator::new(setup.rates.rates(Some(setup.pulse.n_bar)));
        let pre_drive = Generator::new(setup.rates.rates(Some(pre.n_bar)));
        let idle = Generator::new(setup.rates.rates(None));
        let mut sim = Simulator {
            setup,
            pointer,
            pre_pointer,
            thresholds: Thresholds::midpoints(&pointer.means),
            pre_thresholds: Thresholds::midpoints(&pre_pointer.means),
            drive,
            pre_drive,
            idle,
            seed,
        };
        sim.thresholds = sim.calibrate(&pointer, &drive, setup.pulse.t_r, "calibration")?;
        sim.pre_thresholds = if setup.pre_pulse.is_none() || setup.pre_pulse == Some(setup.pulse) {
            sim.thresholds
        } else {
            sim.calibrate(&pre_pointer, &pre_drive, pre.t_r, "calibration-pre")?
        };
        Ok(sim)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn calibrate(&self, pointer: &PointerModel, drive: &Generator, t_r: f64, tag: &str) -> Result<Thresholds> {
        if pointer.sigma == 0.0 {
            return Ok(Thresholds::midpoints(&pointer.means));
        }
        let key = derive_key(self.seed, tag);
        let n = self.setup.calibration_shots as u64;
        let mut clouds: [Vec<Complex64>; 3] = Default::default();
        for (c, cloud) in clouds.iter_mut().enumerate() {
            let s = QubitState::from_index(c);
            cloud.reserve(n as usize);
            for i in 0..n {
                let mut rng = shot_rng(key, c as u64 * n + i);
                cloud.push(simulate_shot(s, s, t_r, &pointer.means, pointer.sigma, drive, &mut rng).iq);
            }
        }
        fit_thresholds(&clouds[0], &clouds[1], &clouds[2])
    }

    fn initial_state<R: Rng>(&self, prep: QubitState, rng: &mut R) -> QubitState {
        let p = self.setup.thermal_population;
        if p > 0.0 && rng.random::<f64>() < p {
            match prep {
                QubitState::Ground => QubitState::Excited,
                _ => QubitState::Ground,
            }
        } else {
            prep
        }
    }

    fn idle_gap<R: Rng>(&self, state: QubitState, rng: &mut R) -> QubitState {
        let mut occ = [0.0; 3];
        evolve(state, self.setup.pulse.ring_gap, &self.idle, rng, None, &mut occ)
    }

    /// Pre-selection pulse, idle gap, readout pulse for shots in `range`.
    pub fn fidelity_counts(&self, range: Range<u64>, mut rows: Option<&mut Vec<ShotRow>>) -> FidelityCounts {
        let key = derive_key(self.seed, "fidelity");
        let pre = self.setup.pre_pulse();
        let mut counts = FidelityCounts::default();
        for index in range {
            let prep = prep_of(index);
            let p = prep.index();
            let mut rng = shot_rng(key, index);
            let s0 = self.initial_state(prep, &mut rng);
            let first = simulate_shot(prep, s0, pre.t_r, &self.pre_pointer.means, self.pre_pointer.sigma, &self.pre_drive, &mut rng);
            let s1 = self.idle_gap(first.final_state(), &mut rng);
            let read = simulate_shot(prep, s1, self.setup.pulse.t_r, &self.pointer.means, self.pointer.sigma, &self.drive, &mut rng);
            counts.total[p] += 1;
            let label = self.thresholds.classify(read.iq);
            if let Some(out) = rows.as_deref_mut() {
                out.push(ShotRow { index, prep, i: read.iq.re, q: read.iq.im, label, jump_count: read.jump_count() });
            }
            if self.pre_thresholds.classify(first.iq) != prep {
                continue;
            }
            counts.kept[p] += 1;
            counts.three_state[p][label.index()] += 1;
            counts.binary[p][self.thresholds.binary(read.iq).index()] += 1;
        }
        counts
    }

    /// Two identical readout pulses separated by the idle gap.
    pub fn qnd_counts(&self, range: Range<u64>) -> QndCounts {
        let key = derive_key(self.seed, "qnd");
        let t_r = self.setup.pulse.t_r;
        let (means, sigma) = (&self.pointer.means, self.pointer.sigma);
        let mut counts = QndCounts::default();
        for index in range {
            let prep = prep_of(index);
            let mut rng = shot_rng(key, index);
            let s0 = self.initial_state(prep, &mut rng);
            let first = simulate_shot(prep, s0, t_r, means, sigma, &self.drive, &mut rng);
            let s1 = self.idle_gap(first.final_state(), &mut rng);
            let second = simulate_shot(prep, s1, t_r, means, sigma, &self.drive, &mut rng);
            counts.total += 1;
            let (a, b) = (self.thresholds.classify(first.iq), self.thresholds.classify(second.iq));
            counts.three_state[a.index()][b.index()] += 1;
            let (a, b) = (self.thresholds.binary(first.iq), self.thresholds.binary(second.iq));
            counts.binary[a.index()][b.index()] += 1;
        }
        counts
    }

    pub fn fidelity_experiment(&self, n_shots: u64) -> Result<FidelityReport> {
        fidelity_report(&self.fidelity_counts(0..n_shots, None), &self.thresholds)
    }

    pub fn qnd_experiment(&self, n_shots: u64) -> Result<QndReport> {
        qnd_report(&self.qnd_counts(0..n_shots), &self.thresholds)
    }

    /// Theoretical binary assignment error of the noise model.
    pub fn assignment_error(&self) -> f64 {
        assignment_error(self.pointer.snr)
    }
}

/// `1 − P_qnd` over a grid of durations (rows) and photon numbers (columns).
pub fn qnd_sweep(
    setup: &ReadoutSetup,
    durations: &[f64],
    photons: &[f64],
    shots_per_cell: u64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(durations.len());
    for (i, &t_r) in durations.iter().enumerate() {
        let mut row = Vec::with_capacity(photons.len());
        for (j, &n_bar) in photons.iter().enumerate() {
            let cell = (i * photons.len() + j) as u64;
            row.push(1.0 - sweep_cell(setup, t_r, n_bar, shots_per_cell, sweep_cell_seed(seed, cell))?.p_qnd);
        }
        out.push(row);
    }
    Ok(out)
}

/// QND experiment at one `(t_r, n_bar)` grid point.
pub fn sweep_cell(setup: &ReadoutSetup, t_r: f64, n_bar: f64, shots: u64, seed: u64) -> Result<QndReport> {
    let mut s = *setup;
    s.pulse.t_r = t_r;
    s.pulse.n_bar = n_bar;
    s.pre_pulse = None;
    Simulator::new(s, seed)?.qnd_experiment(shots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::readout::rates::InducedProbability;

    fn mode() -> ReadoutMode {
        ReadoutMode { omega_r: 7.290e9, chi_qr: -0.77e6, alpha_r: -6.82e3, kappa_r: 17.9e6 }
    }

    fn setup(rates: RateModel, eta: f64) -> ReadoutSetup {
        ReadoutSetup {
            mode: mode(),
            pulse: ReadoutPulse::midpoint(&mode(), 89.0, 400e-9),
            pre_pulse: None,
            rates,
            eta,
            calibration_shots: 2000,
            thermal_population: 0.0,
        }
    }

    #[test]
    fn ideal_readout_is_perfect() {
        let sim = Simulator::new(setup(RateModel::zero(), f64::INFINITY), 1).unwrap();
        let f = sim.fidelity_experiment(2000).unwrap();
        assert_eq!(f.fidelity, 1.0);
        assert_eq!(f.fidelity_ps, 1.0);
        let q = sim.qnd_experiment(2000).unwrap();
        assert_eq!(q.p_qnd, 1.0);
        assert_eq!(q.p_qnd_ps, 1.0);
    }

    #[test]
    fn decay_during_readout_half_weighting() {
        let mut rates = RateModel::zero();
        rates.gamma_down = 1.0 / 124.5e-6;
        let sim = Simulator::new(setup(rates, f64::INFINITY), 3).unwrap();
        let n = 400_000u64;
        let mut wrong = 0u64;
        for i in 0..n {
            let mut rng = shot_rng(99, i);
            let rec = simulate_shot(QubitState::Excited, QubitState::Excited, 400e-9, &sim.pointer.means, 0.0, &sim.drive, &mut rng);
            if sim.thresholds.binary(rec.iq) == QubitState::Ground {
                wrong += 1;
            }
        }
        let p = 1.0 - (-400e-9_f64 / (2.0 * 124.5e-6)).exp();
        assert!((p - 1.6e-3).abs() < 0.05e-3);
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        let got = wrong as f64 / n as f64;
        // ring-up makes the pointer means unequal in magnitude, so the crossing
        // point sits slightly off t = T/2
        assert!((got - p).abs() < 3.0 * sd + 0.05 * p, "{got} vs {p}");
    }

    #[test]
    fn relaxation_only_qnd_matches_markov_chain() {
        let mut rates = RateModel::zero();
        rates.gamma_down = 2e4;
        let sim = Simulator::new(setup(rates, f64::INFINITY), 5).unwrap();
        let n = 200_000u64;
        let q = sim.qnd_experiment(n).unwrap();
        // a decay between the two pulse midpoints splits the outcomes of prep |1⟩
        let p = 0.5 * (1.0 - (-2e4f64 * (400e-9 + 500e-9)).exp());
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        assert!(((1.0 - q.p_qnd) - p).abs() < 3.0 * sd + 0.03 * p, "{} vs {p}", 1.0 - q.p_qnd);
    }

    #[test]
    fn long_pulses_with_balanced_rates_decorrelate() {
        let mut rates = RateModel::zero();
        rates.gamma_down = 1.0 / 124.5e-6;
        rates.gamma_up = rates.gamma_down;
        let mut s = setup(rates, f64::INFINITY);
        s.pulse.ring_gap = 10.0 * 124.5e-6;
        let q = Simulator::new(s, 9).unwrap().qnd_experiment(40_000).unwrap();
        assert!((1.0 - q.p_qnd - 0.5).abs() < 0.02, "{}", q.p_qnd);
    }

    #[test]
    fn deterministic_and_batch_additive() {
        let mut rates = RateModel::zero();
        rates.gamma_down = 1e4;
        rates.induced_10 = InducedProbability::constant(0.01);
        let sim = Simulator::new(setup(rates, 0.2), 17).unwrap();
        let whole = sim.fidelity_counts(0..3000, None);
        let mut parts = sim.fidelity_counts(0..1234, None);
        parts += sim.fidelity_counts(1234..3000, None);
        assert_eq!(whole, parts);
        let again = Simulator::new(setup(rates, 0.2), 17).unwrap();
        assert_eq!(again.fidelity_counts(0..3000, None), whole);
        assert_eq!(again.thresholds, sim.thresholds);
        let other = Simulator::new(setup(rates, 0.2), 18).unwrap();
        assert_ne!(other.fidelity_counts(0..3000, None), whole);
    }

    #[test]
    fn shot_rows_are_emitted_for_every_shot() {
        let sim = Simulator::new(setup(RateModel::zero(), 0.2), 2).unwrap();
        let mut rows = Vec::new();
        let c = sim.fidelity_counts(0..100, Some(&mut rows));
        assert_eq!(rows.len(), 100);
        assert_eq!(c.total[0] + c.total[1], 100);
        assert!(rows.windows(2).all(|w| w[0].index < w[1].index));
    }

    #[test]
    fn rows_are_stochastic() {
        let mut rates = RateModel::zero();
        rates.induced_01 = InducedProbability::constant(0.05);
        rates.leak_from_1 = InducedProbability::constant(0.05);
        let sim = Simulator::new(setup(rates, 0.2), 4).unwrap();
        let f = sim.fidelity_experiment(5000).unwrap();
        for row in f.conditional {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let q = sim.qnd_experiment(5000).unwrap();
        assert!((q.joint.iter().flatten().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(q.counts.three_state.iter().flatten().sum::<u64>(), 5000);
    }

    #[test]
    fn empty_selection_is_a_statistics_error() {
        let counts = FidelityCounts { total: [10, 10], kept: [0, 10], ..Default::default() };
        let t = Thresholds::midpoints(&[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(1.0, 1.0)]);
        assert!(matches!(fidelity_report(&counts, &t), Err(Error::Statistics(_))));
        assert!(matches!(qnd_report(&QndCounts::default(), &t), Err(Error::Statistics(_))));
    }

    #[test]
    fn short_ring_gap_is_rejected() {
        let mut s = setup(RateModel::zero(), 0.2);
        s.pulse.ring_gap = 10e-9;
        assert!(matches!(Simulator::new(s, 0), Err(Error::Config(_))));
    }

    #[test]
    fn fidelity_monotone_in_each_rate() {
        let base = RateModel::zero();
        let variants: [fn(&mut RateModel, f64); 4] = [
            |m, v| m.gamma_down = v * 1e5,
            |m, v| m.induced_10 = InducedProbability::constant(v),
            |m, v| m.induced_01 = InducedProbability::constant(v),
            |m, v| m.gamma_up = v * 1e5,
        ];
        for set in variants {
            let mut last_f = 1.1;
            let mut last_q = 1.1;
            for v in [0.0, 0.02, 0.1] {
                let mut r = base;
                set(&mut r, v);
                let sim = Simulator::new(setup(r, 0.2), 21).unwrap();
                let f = sim.fidelity_experiment(20_000).unwrap().fidelity;
                let q = sim.qnd_experiment(20_000).unwrap().p_qnd;
                assert!(f <= last_f + 2e-3 && q <= last_q + 2e-3);
                last_f = f;
                last_q = q;
            }
        }
    }

    #[test]
    fn sweep_cell_zero_matches_direct_run() {
        let s = setup(RateModel::zero(), 0.2);
        let m = qnd_sweep(&s, &[400e-9], &[89.0], 2000, 77).unwrap();
        let direct = Simulator::new(s, 77).unwrap().qnd_experiment(2000).unwrap();
        assert_eq!(m[0][0], 1.0 - direct.p_qnd);
    }
}
