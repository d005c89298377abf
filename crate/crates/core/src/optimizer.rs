//! Design optimizer over the four circuit elements (E_J, C_s, C_t, L_a0).
//!
//! The reward is a product of smooth factors in (0, 1], one per design
//! constraint, each raised to its weight. Ascent runs on ln R in the
//! logarithms of the elements.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::circuit::{mode_quantities, CavityParams, CircuitParams};
use crate::error::{Error, Result};
use crate::scalar::{Dual, Scalar};

/// Shape of one reward factor as a function of its design metric `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    /// `exp(−((x − target)/width)²/2)`
    Gaussian,
    /// Logistic step up at `target`.
    Above,
    /// Logistic step down at `target`.
    Below,
    /// Sum of two logistic steps, close to 1 whenever `|x| > target`.
    Outside,
    /// `exp(−x/width)`, for a positive metric to be minimized.
    Decay,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constraint {
    pub shape: Shape,
    #[serde(default)]
    pub target: f64,
    pub width: f64,
    #[serde(default = "unit_weight")]
    pub weight: f64,
}

fn unit_weight() -> f64 {
    1.0
}

impl Constraint {
    pub const fn new(shape: Shape, target: f64, width: f64) -> Self {
        Constraint { shape, target, width, weight: 1.0 }
    }

    fn validate(&self, name: &'static str) -> Result<()> {
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::domain(name, "constraint width must be finite and > 0"));
        }
        if !(self.weight.is_finite() && self.weight >= 0.0) {
            return Err(Error::domain(name, "constraint weight must be finite and >= 0"));
        }
        if !self.target.is_finite() {
            return Err(Error::domain(name, "constraint target must be finite"));
        }
        Ok(())
    }

    /// Logarithm of the factor, before weighting.
    pub fn ln_factor<S: Scalar>(&self, x: S) -> S {
        let u = (x - S::constant(self.target)).scale(1.0 / self.width);
        match self.shape {
            Shape::Gaussian => -(u * u).scale(0.5),
            Shape::Above => ln_logistic(u),
            Shape::Below => ln_logistic(-u),
            Shape::Outside => {
                let v = (-x - S::constant(self.target)).scale(1.0 / self.width);
                (logistic(u) + logistic(v)).ln()
            }
            Shape::Decay => -x.scale(1.0 / self.width),
        }
    }
}

fn logistic<S: Scalar>(z: S) -> S {
    let one = S::constant(1.0);
    if z.value() >= 0.0 {
        one / (one + (-z).exp())
    } else {
        let e = z.exp();
        e / (one + e)
    }
}

fn ln_logistic<S: Scalar>(z: S) -> S {
    let one = S::constant(1.0);
    if z.value() >= 0.0 {
        -(one + (-z).exp()).ln()
    } else {
        z - (one + z.exp()).ln()
    }
}

pub const FACTOR_NAMES: [&str; 8] =
    ["omega_a", "alpha_q", "ej_over_ec", "chi_qa", "delta_02a", "delta_02c", "delta_qc", "alpha_a"];

/// Per-constraint shapes. Metrics are in Hz except the dimensionless E_Jq/E_Cq.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    /// Ancilla frequency.
    pub omega_a: Constraint,
    /// Qubit anharmonicity (signed).
    pub alpha_q: Constraint,
    pub ej_over_ec: Constraint,
    /// Magnitude of the qubit–ancilla cross-Kerr.
    pub chi_qa: Constraint,
    /// Signed ω_02 − ω_a.
    pub delta_02a: Constraint,
    /// Signed ω_02 − ω_c.
    pub delta_02c: Constraint,
    /// Signed ω_q − ω_c.
    pub delta_qc: Constraint,
    /// Magnitude of the ancilla anharmonicity.
    pub alpha_a: Constraint,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            omega_a: Constraint::new(Shape::Gaussian, 7.3e9, 1e9),
            alpha_q: Constraint::new(Shape::Gaussian, -100e6, 50e6),
            ej_over_ec: Constraint::new(Shape::Above, 100.0, 10.0),
            chi_qa: Constraint::new(Shape::Above, 10e6, 2e6),
            delta_02a: Constraint::new(Shape::Outside, 300e6, 50e6),
            delta_02c: Constraint::new(Shape::Outside, 300e6, 50e6),
            delta_qc: Constraint::new(Shape::Outside, 2e9, 0.5e9),
            alpha_a: Constraint::new(Shape::Decay, 0.0, 5e6),
        }
    }
}

impl RewardConfig {
    pub fn constraints(&self) -> [&Constraint; 8] {
        [
            &self.omega_a,
            &self.alpha_q,
            &self.ej_over_ec,
            &self.chi_qa,
            &self.delta_02a,
            &self.delta_02c,
            &self.delta_qc,
            &self.alpha_a,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (c, name) in self.constraints().into_iter().zip(FACTOR_NAMES) {
            c.validate(name)?;
        }
        Ok(())
    }

    /// Same shapes with every weight multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        let mut out = *self;
        for c in [
            &mut out.omega_a,
            &mut out.alpha_q,
            &mut out.ej_over_ec,
            &mut out.chi_qa,
            &mut out.delta_02a,
            &mut out.delta_02c,
            &mut out.delta_qc,
            &mut out.alpha_a,
        ] {
            c.weight *= k;
        }
        out
    }
}

/// Design metrics the constraints act on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignMetrics<S = f64> {
    pub omega_q: S,
    pub omega_a: S,
    pub alpha_q: S,
    pub alpha_a: S,
    pub ej_over_ec: S,
    pub chi_qa: S,
    pub delta_02a: S,
    pub delta_02c: S,
    pub delta_qc: S,
}

impl<S: Scalar> DesignMetrics<S> {
    /// Metric fed to each constraint, in `FACTOR_NAMES` order.
    fn inputs(&self) -> [S; 8] {
        [
            self.omega_a,
            self.alpha_q,
            self.ej_over_ec,
            self.chi_qa.abs(),
            self.delta_02a,
            self.delta_02c,
            self.delta_qc,
            self.alpha_a.abs(),
        ]
    }

    /// Unweighted ln-factors.
    pub fn ln_factors(&self, cfg: &RewardConfig) -> [S; 8] {
        let x = self.inputs();
        let c = cfg.constraints();
        core::array::from_fn(|i| c[i].ln_factor(x[i]))
    }

    pub fn ln_reward(&self, cfg: &RewardConfig) -> S {
        let w = cfg.constraints();
        self.ln_factors(cfg).iter().zip(w).fold(S::constant(0.0), |acc, (f, c)| acc + f.scale(c.weight))
    }
}

/// Log-coordinates `[ln E_J, ln C_s, ln C_t, ln L_a0]`.
pub fn to_log(circuit: &CircuitParams) -> [f64; 4] {
    [circuit.e_j.ln(), circuit.c_s.ln(), circuit.c_t.ln(), circuit.l_a0.ln()]
}

pub fn from_log(x: [f64; 4], template: &CircuitParams) -> CircuitParams {
    CircuitParams { e_j: x[0].exp(), c_s: x[1].exp(), c_t: x[2].exp(), l_a0: x[3].exp(), ..*template }
}

fn metrics_at<S: Scalar>(x: [S; 4], flux_scale: f64, omega_c: f64) -> DesignMetrics<S> {
    let [e_j, c_s, c_t, l_a0] = x.map(|v| v.exp());
    let q = mode_quantities(c_s, c_t, e_j, l_a0.scale(flux_scale));
    let omega_02 = q.omega_q.scale(2.0) + q.alpha_q;
    let wc = S::constant(omega_c);
    DesignMetrics {
        omega_q: q.omega_q,
        omega_a: q.omega_a,
        alpha_q: q.alpha_q,
        alpha_a: q.alpha_a,
        ej_over_ec: q.e_jq / q.e_cq,
        chi_qa: q.chi_qa,
        delta_02a: omega_02 - q.omega_a,
        delta_02c: omega_02 - wc,
        delta_qc: q.omega_q - wc,
    }
}

/// Ratio L_a/L_a0 at the circuit's flux bias.
fn flux_scale(circuit: &CircuitParams) -> Result<f64> {
    Ok(circuit.loop_inductance()? / circuit.l_a0)
}

pub fn design_metrics(circuit: &CircuitParams, cavity: &CavityParams) -> Result<DesignMetrics> {
    circuit.validate()?;
    cavity.validate()?;
    Ok(metrics_at(to_log(circuit), flux_scale(circuit)?, cavity.omega_c))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorValue {
    pub name: &'static str,
    pub value: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewardEvaluation {
    pub value: f64,
    pub ln_value: f64,
    pub factors: Vec<FactorValue>,
    pub metrics: Option<DesignMetrics>,
    pub diagnostic: Option<String>,
}

impl RewardEvaluation {
    fn failed(reason: String) -> Self {
        RewardEvaluation {
            value: 0.0,
            ln_value: f64::NEG_INFINITY,
            factors: Vec::new(),
            metrics: None,
            diagnostic: Some(reason),
        }
    }
}

/// Reward in [0, 1]; zero, with a diagnostic, when the circuit cannot be derived.
pub fn reward(circuit: &CircuitParams, cavity: &CavityParams, cfg: &RewardConfig) -> RewardEvaluation {
    let m = match design_metrics(circuit, cavity) {
        Ok(m) => m,
        Err(e) => return RewardEvaluation::failed(e.to_string()),
    };
    let ln_f = m.ln_factors(cfg);
    let ln_value = m.ln_reward(cfg);
    if !ln_value.is_finite() {
        return RewardEvaluation::failed("non-finite reward".to_string());
    }
    RewardEvaluation {
        value: ln_value.exp(),
        ln_value,
        factors: ln_f
            .iter()
            .zip(cfg.constraints())
            .zip(FACTOR_NAMES)
            .map(|((f, c), name)| FactorValue { name, value: f.exp(), weight: c.weight })
            .collect(),
        metrics: Some(m),
        diagnostic: None,
    }
}

fn log_point_duals(circuit: &CircuitParams) -> [Dual<4>; 4] {
    let x = to_log(circuit);
    core::array::from_fn(|i| Dual::variable(x[i], i))
}

/// Exact gradient of each unweighted ln-factor with respect to the log-coordinates.
pub fn factor_gradients(circuit: &CircuitParams, cavity: &CavityParams, cfg: &RewardConfig) -> Result<[[f64; 4]; 8]> {
    circuit.validate()?;
    cavity.validate()?;
    let m = metrics_at(log_point_duals(circuit), flux_scale(circuit)?, cavity.omega_c);
    Ok(m.ln_factors(cfg).map(|f| f.eps))
}

/// Exact gradient of ln R with respect to the log-coordinates.
pub fn ln_reward_gradient(circuit: &CircuitParams, cavity: &CavityParams, cfg: &RewardConfig) -> Result<[f64; 4]> {
    circuit.validate()?;
    cavity.validate()?;
    Ok(metrics_at(log_point_duals(circuit), flux_scale(circuit)?, cavity.omega_c).ln_reward(cfg).eps)
}

/// Central differences of `f` at `x` with step `h` per coordinate.
pub fn central_difference<F: FnMut([f64; 4]) -> f64>(mut f: F, x: [f64; 4], h: f64) -> [f64; 4] {
    core::array::from_fn(|i| {
        let mut up = x;
        let mut dn = x;
        up[i] += h;
        dn[i] -= h;
        (f(up) - f(dn)) / (2.0 * h)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AscentOptions {
    /// Stop once ‖∇ ln R‖ in log-coordinates falls below this.
    pub gradient_tolerance: f64,
    pub max_steps: usize,
    pub difference_step: f64,
    pub initial_step: f64,
    /// Sufficient-increase constant of the backtracking search.
    pub armijo: f64,
    /// Line-search step below which the search is considered stalled.
    pub min_step: f64,
}

impl Default for AscentOptions {
    fn default() -> Self {
        AscentOptions {
            gradient_tolerance: 1e-6,
            max_steps: 10_000,
            difference_step: 1e-5,
            initial_step: 1e-3,
            armijo: 1e-4,
            min_step: 1e-14,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    GradientTolerance,
    MaxSteps,
    LineSearchStalled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub reward: f64,
    pub ln_reward: f64,
    pub e_j: f64,
    pub c_s: f64,
    pub c_t: f64,
    pub l_a0: f64,
    pub gradient_norm: f64,
    pub step_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub params: CircuitParams,
    pub reward: f64,
    pub ln_reward: f64,
    pub gradient: [f64; 4],
    pub steps: usize,
    pub termination: Termination,
    pub trajectory: Vec<TrajectoryPoint>,
}

fn norm(g: &[f64; 4]) -> f64 {
    g.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Steepest ascent on ln R with finite-difference gradients and Armijo backtracking.
pub fn gradient_ascent(
    init: &CircuitParams,
    cavity: &CavityParams,
    cfg: &RewardConfig,
    opts: &AscentOptions,
) -> Result<OptimizerState> {
    cfg.validate()?;
    let start = reward(init, cavity, cfg);
    if !(start.value > 0.0) {
        return Err(Error::Initialization(
            start.diagnostic.unwrap_or_else(|| "reward underflows to zero at the start point".to_string()),
        ));
    }
    let ln_r = |x: [f64; 4]| reward(&from_log(x, init), cavity, cfg).ln_value;

    let mut x = to_log(init);
    let mut f = start.ln_value;
    let mut g = central_difference(ln_r, x, opts.difference_step);
    let mut t = opts.initial_step;
    let record = |step: usize, x: [f64; 4], f: f64, g: &[f64; 4], t: f64| {
        let p = from_log(x, init);
        TrajectoryPoint {
            step,
            reward: f.exp(),
            ln_reward: f,
            e_j: p.e_j,
            c_s: p.c_s,
            c_t: p.c_t,
            l_a0: p.l_a0,
            gradient_norm: norm(g),
            step_size: t,
        }
    };
    let mut trajectory = alloc::vec![record(0, x, f, &g, 0.0)];
    let mut steps = 0;
    let termination = loop {
        let gn2 = g.iter().map(|v| v * v).sum::<f64>();
        if gn2.sqrt() < opts.gradient_tolerance {
            break Termination::GradientTolerance;
        }
        if steps >= opts.max_steps {
            break Termination::MaxSteps;
        }
        // try a longer step than last time, then backtrack
        t *= 2.0;
        let accepted = loop {
            let trial: [f64; 4] = core::array::from_fn(|i| x[i] + t * g[i]);
            let ft = ln_r(trial);
            // reject rounding ties
            if ft.is_finite() && ft >= f + opts.armijo * t * gn2 && ft.exp() > f.exp() {
                break Some((trial, ft));
            }
            t *= 0.5;
            if t < opts.min_step {
                break None;
            }
        };
        let Some((trial, ft)) = accepted else {
            break Termination::LineSearchStalled;
        };
        x = trial;
        f = ft;
        g = central_difference(ln_r, x, opts.difference_step);
        steps += 1;
        trajectory.push(record(steps, x, f, &g, t));
    };
    Ok(OptimizerState {
        params: from_log(x, init),
        reward: f.exp(),
        ln_reward: f,
        gradient: g,
        steps,
        termination,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn previous() -> (CircuitParams, CavityParams) {
        (CircuitParams::new(110e-15, 59.6e-15, 29.2e9, 5.32e-9), cavity(7.169e9))
    }

    fn current() -> (CircuitParams, CavityParams) {
        (CircuitParams::new(132e-15, 96.6e-15, 3.84e9, 3.85e-9), cavity(7.23e9))
    }

    fn cavity(omega_c: f64) -> CavityParams {
        CavityParams { omega_c, g_ac: 224e6, kappa_c: 19e6, kappa_a: 1.6e6, kappa_in: 0.0, kappa_out: 19e6 }
    }

    #[test]
    fn factors_are_one_at_targets_with_infinite_margin() {
        let cfg = RewardConfig::default();
        let m = DesignMetrics {
            omega_q: 2e9,
            omega_a: 7.3e9,
            alpha_q: -100e6,
            alpha_a: -1e-3,
            ej_over_ec: 1e9,
            chi_qa: -1e12,
            delta_02a: 1e15,
            delta_02c: -1e15,
            delta_qc: 1e15,
        };
        let r = m.ln_reward(&cfg).exp();
        assert!((r - 1.0).abs() < 1e-6, "{r}");
    }

    #[test]
    fn current_sample_scores_above_previous() {
        let cfg = RewardConfig::default();
        let (pc, pk) = previous();
        let (cc, ck) = current();
        let rp = reward(&pc, &pk, &cfg);
        let rc = reward(&cc, &ck, &cfg);
        assert!(rp.value > 0.0 && rp.value < rc.value, "{} {}", rp.value, rc.value);
        assert!(rc.value <= 1.0);
    }

    #[test]
    fn invalid_circuit_has_zero_reward_and_diagnostic() {
        let (mut c, k) = current();
        c.c_s = -1.0;
        let r = reward(&c, &k, &RewardConfig::default());
        assert_eq!(r.value, 0.0);
        assert!(r.diagnostic.is_some());
        assert!(matches!(
            gradient_ascent(&c, &k, &RewardConfig::default(), &AscentOptions::default()),
            Err(Error::Initialization(_))
        ));
    }

    #[test]
    fn threshold_crossing_moves_one_factor() {
        let cfg = RewardConfig::default();
        let (c, k) = current();
        let mut m = design_metrics(&c, &k).unwrap();
        let before = m.ln_factors(&cfg);
        m.chi_qa = -14e6;
        let after = m.ln_factors(&cfg);
        for i in 0..8 {
            if FACTOR_NAMES[i] == "chi_qa" {
                assert!(after[i] > before[i] + 0.1);
            } else {
                assert_eq!(after[i], before[i]);
            }
        }
    }

    #[test]
    fn ascent_from_previous_sample() {
        let cfg = RewardConfig::default();
        let (c, k) = previous();
        let s = gradient_ascent(&c, &k, &cfg, &AscentOptions::default()).unwrap();
        for w in s.trajectory.windows(2) {
            assert!(w[1].reward > w[0].reward, "step {}", w[1].step);
        }
        let m0 = design_metrics(&c, &k).unwrap();
        let m1 = design_metrics(&s.params, &k).unwrap();
        assert!(m1.omega_q < m0.omega_q);
        assert!(m1.alpha_a.abs() < m0.alpha_a.abs());
        assert!(s.reward > reward(&c, &k, &cfg).value);
    }

    #[test]
    fn restart_at_optimum_stops_quickly() {
        let cfg = RewardConfig::default();
        let (c, k) = current();
        let s = gradient_ascent(&c, &k, &cfg, &AscentOptions::default()).unwrap();
        let again = gradient_ascent(&s.params, &k, &cfg, &AscentOptions::default()).unwrap();
        assert!(again.steps <= 2, "{:?} after {} steps", again.termination, again.steps);
        let (a, b) = (to_log(&s.params), to_log(&again.params));
        for i in 0..4 {
            assert!((a[i] - b[i]).abs() < 1e-6);
        }
    }

    fn circuit_strategy() -> impl Strategy<Value = CircuitParams> {
        (60e-15..200e-15f64, 30e-15..150e-15f64, 2e9..40e9f64, 1e-9..10e-9f64)
            .prop_map(|(c_s, c_t, e_j, l_a)| CircuitParams::new(c_s, c_t, e_j, l_a))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn dual_gradients_match_differences(c in circuit_strategy()) {
            let cfg = RewardConfig::default();
            let k = cavity(7.23e9);
            let exact = factor_gradients(&c, &k, &cfg).unwrap();
            for (i, row) in exact.iter().enumerate() {
                let fd = central_difference(
                    |x| metrics_at(x, 1.0, k.omega_c).ln_factors(&cfg)[i],
                    to_log(&c),
                    1e-5,
                );
                let err = norm(&core::array::from_fn(|j| row[j] - fd[j]));
                prop_assert!(err <= 1e-4 * norm(row) + 1e-9, "{} {:?} {:?}", FACTOR_NAMES[i], row, fd);
            }
        }

        #[test]
        fn reward_is_smooth(c in circuit_strategy(), dir in prop::array::uniform4(-1.0..1.0f64)) {
            let cfg = RewardConfig::default();
            let k = cavity(7.23e9);
            let x0 = to_log(&c);
            let n = norm(&dir).max(1e-3);
            let at = |s: f64| reward(&from_log(core::array::from_fn(|i| x0[i] + s * dir[i] / n), &c), &k, &cfg).value;
            let second = |h: f64| (at(h) - 2.0 * at(0.0) + at(-h)) / (h * h);
            let (a, b) = (second(2e-3), second(1e-3));
            prop_assert!(a.is_finite() && b.is_finite());
            prop_assert!((a - b).abs() <= 0.05 * a.abs().max(b.abs()) + 1e-3, "{a} {b}");
        }

        #[test]
        fn weight_scaling_keeps_argmax(k_scale in 0.1..10.0f64, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let cfg = RewardConfig::default();
            let scaled = cfg.scaled(k_scale);
            let k = cavity(7.23e9);
            let points: Vec<CircuitParams> = (0..16)
                .map(|_| CircuitParams::new(
                    rng.random_range(60e-15..200e-15),
                    rng.random_range(30e-15..150e-15),
                    rng.random_range(2e9..40e9),
                    rng.random_range(1e-9..10e-9),
                ))
                .collect();
            let argmax = |cfg: &RewardConfig| {
                points
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (i, reward(p, &k, cfg).ln_value))
                    .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
                    .0
            };
            prop_assert_eq!(argmax(&cfg), argmax(&scaled));
        }
    }
}
