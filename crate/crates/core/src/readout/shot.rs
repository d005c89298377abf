use alloc::vec::Vec;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::QubitState;

/// Key for an experiment's random streams, from the run seed and a tag.
pub fn derive_key(seed: u64, tag: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    seed ^ h
}

/// Independent random stream for shot `index` under `key`.
pub fn shot_rng(key: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

/// Off-diagonal transition rates `r[from][to]` of the three-level jump process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Generator {
    pub rates: [[f64; 3]; 3],
}

impl Generator {
    pub fn new(rates: [[f64; 3]; 3]) -> Self {
        let mut rates = rates;
        for (i, row) in rates.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        Generator { rates }
    }

    #[inline]
    pub fn escape_rate(&self, s: QubitState) -> f64 {
        self.rates[s.index()].iter().sum()
    }
}

/// Samples the jump process for `duration` starting in `state`, appending
/// `(t0 + t, new_state)` for every jump and accumulating time spent in each
/// level into `occupancy`.
pub fn evolve<R: Rng + ?Sized>(
    mut state: QubitState,
    duration: f64,
    generator: &Generator,
    rng: &mut R,
    mut path: Option<&mut Vec<(f64, QubitState)>>,
    occupancy: &mut [f64; 3],
) -> QubitState {
    let mut t = 0.0;
    loop {
        let total = generator.escape_rate(state);
        let remaining = duration - t;
        if total <= 0.0 {
            occupancy[state.index()] += remaining;
            return state;
        }
        let u: f64 = rng.random();
        let wait = if total.is_infinite() { 0.0 } else { -(1.0 - u).ln() / total };
        if wait >= remaining {
            occupancy[state.index()] += remaining;
            return state;
        }
        occupancy[state.index()] += wait;
        t += wait;
        let row = &generator.rates[state.index()];
        let pick: f64 = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut next = state;
        for (j, r) in row.iter().enumerate() {
            if *r <= 0.0 {
                continue;
            }
            acc += r;
            next = QubitState::from_index(j);
            if pick < acc || total.is_infinite() {
                break;
            }
        }
        state = next;
        if let Some(p) = path.as_deref_mut() {
            p.push((t, state));
        }
    }
}

/// One integrated readout record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub prep: QubitState,
    pub iq: Complex64,
    /// `(time, state)` from the start of the pulse, beginning with `(0, initial)`.
    pub true_path: Vec<(f64, QubitState)>,
}

impl ShotRecord {
    pub fn final_state(&self) -> QubitState {
        self.true_path.last().map(|p| p.1).unwrap_or(self.prep)
    }

    pub fn jump_count(&self) -> usize {
        self.true_path.len().saturating_sub(1)
    }
}

/// Integrates one pulse: the noiseless signal mixes the state-conditioned
/// pointer means by the time spent in each state, then circular Gaussian
/// noise of per-quadrature width `sigma` is added.
pub fn simulate_shot<R: Rng + ?Sized>(
    prep: QubitState,
    initial: QubitState,
    duration: f64,
    means: &[Complex64; 3],
    sigma: f64,
    generator: &Generator,
    rng: &mut R,
) -> ShotRecord {
    let mut path = Vec::with_capacity(2);
    path.push((0.0, initial));
    let mut occupancy = [0.0; 3];
    evolve(initial, duration, generator, rng, Some(&mut path), &mut occupancy);
    let mut signal = Complex64::new(0.0, 0.0);
    for (m, o) in means.iter().zip(occupancy) {
        signal += m * (o / duration);
    }
    if sigma > 0.0 {
        let ni: f64 = rng.sample(StandardNormal);
        let nq: f64 = rng.sample(StandardNormal);
        signal += Complex64::new(ni, nq) * sigma;
    }
    ShotRecord { prep, iq: signal, true_path: path }
}
