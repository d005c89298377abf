//! Command implementations. Each command reads a validated config, runs the
//! corresponding core module and emits a summary plus optional data tables.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use tmreadout_core::calibration::{
    fit_line, photons_from_shift, synth_stark_map, LineFit, PhotonCalibration, StarkMap,
};
use tmreadout_core::limits::{
    coherence_budget, critical_photons_for, equivalent_transverse_for, omega_13_estimate, AncillaNonlinearity,
    CriticalPhotons, DispersiveMode, QubitSpec, TransverseEquivalent,
};
use tmreadout_core::optimizer::{design_metrics, gradient_ascent, reward, OptimizerState};
use tmreadout_core::readout::{
    analytic_leak_noise, default_ring_gap, derive_key, fidelity_report, qnd_report, shot_rng, snr_analytic,
    sweep_cell, sweep_cell_seed, BudgetGeometry, FidelityCounts, PointerModel, QndCounts, RateModel,
    ReadoutPulse, ReadoutSetup, ShotRow, Simulator,
};
use tmreadout_core::spectrum::{analyze, solve, FockCutoffs, SpectrumOptions};
use tmreadout_core::units::RateConvention;
use tmreadout_core::{
    derive_bare_modes, hybridize, BareModeParams, CavityParams, PolaritonParams, ReadoutMode,
};

use crate::config::{EmitFormat, LoadedConfig, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{map_rows, read_stark_map, Emitter, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Bare-mode and polariton parameters from the circuit elements.
    Derive,
    /// Exact diagonalization of the two-mode circuit Hamiltonian.
    Spectrum,
    /// Critical photon numbers, transverse comparator and coherence budget.
    Limits,
    /// Nonlinear versus equivalent transverse readout.
    Compare,
    /// Monte-Carlo fidelity and QNDness at the configured pulse.
    Simulate,
    /// 1 − P_qnd over a grid of pulse durations and photon numbers.
    QndSweep,
    /// AC-Stark photon-number calibration.
    Calibrate,
    /// Gradient ascent of the design reward.
    Optimize,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Derive => "derive",
            Command::Spectrum => "spectrum",
            Command::Limits => "limits",
            Command::Compare => "compare",
            Command::Simulate => "simulate",
            Command::QndSweep => "qnd-sweep",
            Command::Calibrate => "calibrate",
            Command::Optimize => "optimize",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunContext {
    pub seed: Option<u64>,
    /// Worker threads; 0 picks the rayon default.
    pub workers: usize,
    pub format: Option<EmitFormat>,
    pub out: Option<PathBuf>,
}

pub struct Outcome {
    pub summary: serde_json::Value,
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
}

struct Run<'a> {
    cfg: &'a RunConfig,
    seed: Option<u64>,
    emitter: Emitter,
    lines: Vec<String>,
}

impl Run<'_> {
    fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| CliError::Config("this command requires a seed (--seed or `seed` in the config)".into()))
    }

    fn say(&mut self, line: impl Into<String>) {
        self.lines.push(line.into());
    }
}

pub fn run(command: Command, loaded: &LoadedConfig, ctx: &RunContext) -> Result<Outcome> {
    let cfg = &loaded.config;
    let seed = ctx.seed.or(cfg.seed);
    let format = ctx.format.or(cfg.emit_format).unwrap_or_default();
    let out = ctx.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} workers: {e}", ctx.workers)))?;
    let mut run = Run { cfg, seed, emitter: Emitter::new(&out, format)?, lines: Vec::new() };
    let result = pool.install(|| match command {
        Command::Derive => cmd_derive(&mut run),
        Command::Spectrum => cmd_spectrum(&mut run),
        Command::Limits => cmd_limits(&mut run),
        Command::Compare => cmd_compare(&mut run),
        Command::Simulate => cmd_simulate(&mut run),
        Command::QndSweep => cmd_qnd_sweep(&mut run),
        Command::Calibrate => cmd_calibrate(&mut run),
        Command::Optimize => cmd_optimize(&mut run),
    })?;
    let provenance = Provenance {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.name().into(),
        config_sha256: loaded.sha256.clone(),
        seed,
    };
    run.emitter.summary(&provenance, &result)?;
    Ok(Outcome { summary: result, files: run.emitter.files().to_vec(), lines: run.lines })
}

/// Everything derived from the circuit, with measured values substituted where given.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Model {
    pub bare: BareModeParams,
    pub cavity: CavityParams,
    pub polaritons: PolaritonParams,
    pub readout: ReadoutMode,
    pub theta: f64,
    pub omega_q: f64,
    pub alpha_q: f64,
    pub measured: bool,
}

pub fn model(cfg: &RunConfig) -> Result<Model> {
    let bare = derive_bare_modes(&cfg.circuit)?;
    let cavity = cfg.cavity_params()?;
    let polaritons = hybridize(&bare, &cavity)?;
    let m = cfg.measured.as_ref();
    Ok(Model {
        bare,
        cavity,
        polaritons,
        readout: m.map(|m| m.readout_mode()).unwrap_or_else(|| polaritons.readout_mode()),
        theta: m.and_then(|m| m.theta).unwrap_or(polaritons.theta),
        omega_q: m.and_then(|m| m.omega_q).unwrap_or(bare.omega_q),
        alpha_q: m.and_then(|m| m.alpha_q).unwrap_or(bare.alpha_q),
        measured: m.is_some(),
    })
}

#[derive(Debug, Clone, Serialize)]
struct ParameterRow {
    name: &'static str,
    value: f64,
    unit: &'static str,
}

fn parameter_table(m: &Model) -> Vec<ParameterRow> {
    let (b, p, k) = (&m.bare, &m.polaritons, &m.cavity);
    let row = |name, value, unit| ParameterRow { name, value, unit };
    vec![
        row("omega_q", b.omega_q, "Hz"),
        row("omega_a", b.omega_a, "Hz"),
        row("omega_c", k.omega_c, "Hz"),
        row("omega_u", p.omega_u, "Hz"),
        row("omega_l", p.omega_l, "Hz"),
        row("alpha_q", b.alpha_q, "Hz"),
        row("alpha_a", b.alpha_a, "Hz"),
        row("alpha_u", p.alpha_u, "Hz"),
        row("alpha_l", p.alpha_l, "Hz"),
        row("chi_qa", b.chi_qa, "Hz"),
        row("chi_qu", p.chi_qu, "Hz"),
        row("chi_ql", p.chi_ql, "Hz"),
        row("chi_ul", p.chi_ul, "Hz"),
        row("g_ac", k.g_ac, "Hz"),
        row("kappa_u", p.kappa_u, "Hz"),
        row("kappa_l", p.kappa_l, "Hz"),
        row("kappa_c", k.kappa_c, "Hz"),
        row("kappa_a", k.kappa_a, "Hz"),
        row("theta", p.theta, "rad"),
        row("e_cq", b.e_cq, "Hz"),
        row("e_ca", b.e_ca, "Hz"),
        row("e_jq", b.e_jq, "Hz"),
        row("ej_over_ec", b.e_jq / b.e_cq, ""),
        row("l_j", b.l_j, "H"),
        row("l_a", b.l_a, "H"),
        row("dilution", b.dilution, ""),
    ]
}

fn cmd_derive(run: &mut Run) -> Result<serde_json::Value> {
    let m = model(run.cfg)?;
    let table = parameter_table(&m);
    for r in &table {
        run.say(format!("{:<12} {:>16.6e} {}", r.name, r.value, r.unit));
    }
    run.emitter.table("parameters", &table)?;
    Ok(json!({
        "bare": m.bare,
        "cavity": m.cavity,
        "polaritons": m.polaritons,
        "readout_mode": m.polaritons.readout_mode(),
    }))
}

fn spectrum_settings(cfg: &RunConfig) -> (FockCutoffs, SpectrumOptions) {
    cfg.spectrum.map(|s| (s.cutoffs, s.options)).unwrap_or_default()
}

#[derive(Debug, Clone, Serialize)]
struct LevelRow {
    index: usize,
    energy: f64,
    k: Option<usize>,
    n: Option<usize>,
    overlap: f64,
}

fn cmd_spectrum(run: &mut Run) -> Result<serde_json::Value> {
    let (cutoffs, opts) = spectrum_settings(run.cfg);
    let bare = derive_bare_modes(&run.cfg.circuit)?;
    let report = analyze(&run.cfg.circuit, &cutoffs, &opts)?;
    let p = &report.params;
    let rel = |num: f64, ana: f64| (num - ana) / ana;
    let relative = json!({
        "omega_q": rel(p.omega_q, bare.omega_q),
        "alpha_q": rel(p.alpha_q, bare.alpha_q),
        "omega_a": rel(p.omega_a, bare.omega_a),
        "alpha_a": rel(p.alpha_a, bare.alpha_a),
        "chi_qa": rel(p.chi_qa, bare.chi_qa),
    });
    run.say(format!("cutoffs ({}, {})  dimension {}", cutoffs.n_q, cutoffs.n_a, cutoffs.dimension()));
    run.say(format!("omega_q {:.6e} Hz  (analytic {:.6e})", p.omega_q, bare.omega_q));
    run.say(format!("alpha_q {:.6e} Hz  (analytic {:.6e})", p.alpha_q, bare.alpha_q));
    run.say(format!("chi_qa  {:.6e} Hz  (analytic {:.6e})", p.chi_qa, bare.chi_qa));
    run.say(format!("cutoff doubling moves omega_q by {:.3e} Hz", report.convergence.omega_q));
    let levels: Vec<LevelRow> = report
        .levels
        .iter()
        .enumerate()
        .map(|(index, (energy, label, overlap))| LevelRow {
            index,
            energy: *energy,
            k: label.map(|l| l.0),
            n: label.map(|l| l.1),
            overlap: *overlap,
        })
        .collect();
    run.emitter.table("levels", &levels)?;
    Ok(json!({ "report": report, "analytic": bare, "relative_difference": relative }))
}

/// Critical photon numbers of the configured (possibly measured) readout mode.
pub fn critical_numbers(cfg: &RunConfig, m: &Model) -> Result<(CriticalPhotons, &'static str)> {
    let (omega_13, source) = match cfg.measured.and_then(|x| x.omega_13) {
        Some(w) => (w, "measured"),
        None => match cfg.spectrum {
            Some(s) => (solve(&cfg.circuit, &s.cutoffs, &s.options)?.0.omega_13, "spectrum"),
            None => (omega_13_estimate(m.omega_q, m.alpha_q), "anharmonic-estimate"),
        },
    };
    Ok((critical_photons_for(&m.readout, m.theta, &AncillaNonlinearity::from(&m.bare), omega_13)?, source))
}

fn transverse(m: &Model, convention: RateConvention) -> Result<TransverseEquivalent> {
    Ok(equivalent_transverse_for(
        m.omega_q,
        m.alpha_q,
        m.readout.omega_r,
        m.readout.chi_qr,
        m.cavity.kappa_out,
        convention,
    )?)
}

fn n_rwa2_note(c: &CriticalPhotons) -> String {
    format!(
        "n_rwa2 = (2/sqrt 6)|2 omega_r - omega_13|/|chi_qr| = {:.4e} evaluated literally; \
         the value 3595 quoted for the reference sample does not follow from this expression \
         (direct evaluation gives about 1.1e4), and n_rwa2 never sets n_crit there",
        c.n_rwa2
    )
}

fn cmd_limits(run: &mut Run) -> Result<serde_json::Value> {
    let m = model(run.cfg)?;
    let (crit, source) = critical_numbers(run.cfg, &m)?;
    let angular = transverse(&m, RateConvention::Angular)?;
    let cyclic = transverse(&m, RateConvention::Cyclic)?;
    let coherence = match run.cfg.limits.and_then(|l| l.coherence) {
        Some(inputs) => {
            let qubit = QubitSpec { omega_q: m.omega_q, e_cq: m.bare.e_cq, e_jq: m.bare.e_jq };
            let lower = DispersiveMode::lower(&m.polaritons);
            let mut upper = DispersiveMode::upper(&m.polaritons);
            if m.measured {
                upper = DispersiveMode { omega: m.readout.omega_r, chi: m.readout.chi_qr, kappa: m.readout.kappa_r };
            }
            Some(coherence_budget(&qubit, &lower, &upper, &inputs)?)
        }
        None => None,
    };
    for (name, v) in [
        ("n_rwa", crit.n_rwa),
        ("n_rwa2", crit.n_rwa2),
        ("n_bifurc", crit.n_bifurc),
        ("n_lowphi", crit.n_lowphi),
        ("n_crit", crit.n_crit),
    ] {
        run.say(format!("{name:<9} {v:.1}"));
    }
    run.say(format!("omega_13 {:.6e} Hz ({source})", crit.omega_13));
    run.say(format!("n_std    {:.1}   g_x {:.4e} Hz", angular.n_std_crit, angular.g_x));
    run.say(format!("T1_purcell {:.4e} s (angular), {:.4e} s (cyclic)", angular.t1_purcell, cyclic.t1_purcell));
    #[derive(Serialize)]
    struct Row {
        name: &'static str,
        value: f64,
    }
    let mut rows = vec![
        Row { name: "n_rwa", value: crit.n_rwa },
        Row { name: "n_rwa2", value: crit.n_rwa2 },
        Row { name: "n_bifurc", value: crit.n_bifurc },
        Row { name: "n_lowphi_ancilla", value: crit.n_lowphi_ancilla },
        Row { name: "n_lowphi", value: crit.n_lowphi },
        Row { name: "n_crit", value: crit.n_crit },
        Row { name: "omega_13", value: crit.omega_13 },
        Row { name: "g_x", value: angular.g_x },
        Row { name: "n_std_crit", value: angular.n_std_crit },
        Row { name: "t1_purcell_angular", value: angular.t1_purcell },
        Row { name: "t1_purcell_cyclic", value: cyclic.t1_purcell },
    ];
    if let Some(c) = &coherence {
        rows.push(Row { name: "q_diel", value: c.q_diel });
        rows.push(Row { name: "t2_thermal", value: c.t2_thermal });
        rows.push(Row { name: "t_eff", value: c.t_eff });
    }
    run.emitter.table("limits", &rows)?;
    Ok(json!({
        "critical_photons": crit,
        "omega_13_source": source,
        "transverse": { "angular": angular, "cyclic": cyclic },
        "coherence": coherence,
        "notes": [n_rwa2_note(&crit)],
    }))
}

fn cmd_compare(run: &mut Run) -> Result<serde_json::Value> {
    let m = model(run.cfg)?;
    let (crit, _) = critical_numbers(run.cfg, &m)?;
    let angular = transverse(&m, RateConvention::Angular)?;
    let cyclic = transverse(&m, RateConvention::Cyclic)?;
    let ratio = crit.n_crit / angular.n_std_crit;
    run.say(format!("cos-phi coupling: n_crit {:.1}, no Purcell decay channel", crit.n_crit));
    run.say(format!(
        "transverse equivalent: g_x {:.4e} Hz, n_std {:.1}, T1_purcell {:.4e} s",
        angular.g_x, angular.n_std_crit, angular.t1_purcell
    ));
    run.say(format!("photon-number advantage {ratio:.1}x"));
    #[derive(Serialize)]
    struct Row {
        scheme: &'static str,
        n_crit: f64,
        chi: f64,
        g_x: f64,
        t1_purcell_angular: f64,
        t1_purcell_cyclic: f64,
    }
    let rows = [
        Row {
            scheme: "cos-phi",
            n_crit: crit.n_crit,
            chi: m.readout.chi_qr,
            g_x: 0.0,
            t1_purcell_angular: f64::INFINITY,
            t1_purcell_cyclic: f64::INFINITY,
        },
        Row {
            scheme: "transverse",
            n_crit: angular.n_std_crit,
            chi: m.readout.chi_qr,
            g_x: angular.g_x,
            t1_purcell_angular: angular.t1_purcell,
            t1_purcell_cyclic: cyclic.t1_purcell,
        },
    ];
    run.emitter.table("compare", &rows)?;
    Ok(json!({
        "cos_phi": { "n_crit": crit.n_crit, "chi_qr": m.readout.chi_qr },
        "transverse": { "angular": angular, "cyclic": cyclic },
        "n_crit_ratio": ratio,
    }))
}

/// Readout setup from the `[pulse]`, `[experiment]` and `[rates]` sections.
pub fn readout_setup(cfg: &RunConfig, m: &Model) -> Result<(ReadoutSetup, Option<BudgetGeometry>)> {
    let p = cfg.section(&cfg.pulse, "pulse")?;
    let e = cfg.section(&cfg.experiment, "experiment")?;
    let r = cfg.section(&cfg.rates, "rates")?;
    let mid = m.readout.omega_r + m.readout.chi_qr;
    let ring_gap = p.ring_gap.unwrap_or_else(default_ring_gap);
    let pulse = ReadoutPulse { omega_d: p.omega_d.unwrap_or(mid), n_bar: p.n_bar, t_r: p.t_r, ring_gap };
    let pre_pulse =
        p.pre.map(|s| ReadoutPulse { omega_d: s.omega_d.unwrap_or(mid), n_bar: s.n_bar, t_r: s.t_r, ring_gap });
    let (rates, geometry) = match (&r.budget, &r.explicit) {
        (Some(budget), None) => {
            let n_crit = match r.n_crit {
                Some(n) => n,
                None => critical_numbers(cfg, m)?.0.n_crit,
            };
            let pointer = PointerModel::new(&m.readout, &pulse, e.eta)?;
            let geo = BudgetGeometry {
                t_pre: pre_pulse.unwrap_or(pulse).t_r,
                gap: ring_gap,
                t_r: pulse.t_r,
                n_bar: pulse.n_bar,
                n_crit,
                leak_noise: analytic_leak_noise(&pointer),
            };
            (RateModel::from_budget(budget, &geo)?, Some(geo))
        }
        (None, Some(explicit)) => (*explicit, None),
        _ => return Err(CliError::Config("[rates] needs exactly one of `budget` and `explicit`".into())),
    };
    let setup = ReadoutSetup {
        mode: m.readout,
        pulse,
        pre_pulse,
        rates,
        eta: e.eta,
        calibration_shots: e.calibration_shots,
        thermal_population: e.thermal_population,
    };
    setup.validate()?;
    Ok((setup, geometry))
}

fn batches(total: u64, size: u64) -> Vec<std::ops::Range<u64>> {
    (0..total.div_ceil(size)).map(|b| b * size..((b + 1) * size).min(total)).collect()
}

/// Fidelity counts over `0..shots`, computed in fixed batches and merged in order.
pub fn parallel_fidelity(sim: &Simulator, shots: u64, batch: u64, keep_rows: bool) -> (FidelityCounts, Vec<ShotRow>) {
    let parts: Vec<(FidelityCounts, Vec<ShotRow>)> = batches(shots, batch)
        .into_par_iter()
        .map(|range| {
            let mut rows = Vec::new();
            let c = sim.fidelity_counts(range, keep_rows.then_some(&mut rows));
            (c, rows)
        })
        .collect();
    let mut total = FidelityCounts::default();
    let mut rows = Vec::new();
    for (c, r) in parts {
        total += c;
        rows.extend(r);
    }
    (total, rows)
}

pub fn parallel_qnd(sim: &Simulator, shots: u64, batch: u64) -> QndCounts {
    let parts: Vec<QndCounts> = batches(shots, batch).into_par_iter().map(|r| sim.qnd_counts(r)).collect();
    let mut total = QndCounts::default();
    for c in parts {
        total += c;
    }
    total
}

fn cmd_simulate(run: &mut Run) -> Result<serde_json::Value> {
    let seed = run.seed()?;
    let m = model(run.cfg)?;
    let (setup, geometry) = readout_setup(run.cfg, &m)?;
    let e = *run.cfg.section(&run.cfg.experiment, "experiment")?;
    let sim = Simulator::new(setup, seed)?;
    let (fc, rows) = parallel_fidelity(&sim, e.shots, e.batch_size, e.emit_shots);
    let fidelity = fidelity_report(&fc, &sim.thresholds)?;
    let qnd = qnd_report(&parallel_qnd(&sim, e.shots, e.batch_size), &sim.thresholds)?;
    if e.emit_shots {
        run.emitter.table("shots", &rows)?;
    }
    let snr = snr_analytic(&setup.mode, setup.pulse.n_bar, setup.pulse.t_r, setup.eta);
    run.say(format!("shots {}  seed {seed}", e.shots));
    run.say(format!("SNR (analytic) {snr:.3}   assignment error {:.3e}", sim.assignment_error()));
    run.say(format!("F      {:.4} %", 100.0 * fidelity.fidelity));
    run.say(format!("F_ps   {:.4} %", 100.0 * fidelity.fidelity_ps));
    run.say(format!("P_qnd  {:.4} %", 100.0 * qnd.p_qnd));
    run.say(format!("P_qnd_ps {:.4} %", 100.0 * qnd.p_qnd_ps));
    run.say(format!("P(l|1) {:.4} %", 100.0 * fidelity.conditional[1][2]));
    Ok(json!({
        "shots": e.shots,
        "setup": setup,
        "budget_geometry": geometry.map(|g| json!({
            "t_pre": g.t_pre, "gap": g.gap, "t_r": g.t_r, "n_bar": g.n_bar, "n_crit": g.n_crit,
            "leak_noise": g.leak_noise,
        })),
        "snr_analytic": snr,
        "assignment_error": sim.assignment_error(),
        "pointer": sim.pointer,
        "fidelity": fidelity,
        "qnd": qnd,
    }))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepRow {
    pub t_r: f64,
    pub n_bar: f64,
    pub p_qnd: f64,
    pub p_qnd_ps: f64,
    pub one_minus_p_qnd: f64,
}

fn cmd_qnd_sweep(run: &mut Run) -> Result<serde_json::Value> {
    let seed = run.seed()?;
    let m = model(run.cfg)?;
    let (setup, _) = readout_setup(run.cfg, &m)?;
    let sweep = run.cfg.section(&run.cfg.sweep, "sweep")?.clone();
    let np = sweep.photons.len();
    let mut sink = run.emitter.sink::<SweepRow>("qnd_sweep")?;
    let mut matrix = Vec::with_capacity(sweep.durations.len());
    for (i, &t_r) in sweep.durations.iter().enumerate() {
        let row: Vec<SweepRow> = sweep
            .photons
            .par_iter()
            .enumerate()
            .map(|(j, &n_bar)| {
                let cell = sweep_cell_seed(seed, (i * np + j) as u64);
                sweep_cell(&setup, t_r, n_bar, sweep.shots_per_cell, cell).map(|q| SweepRow {
                    t_r,
                    n_bar,
                    p_qnd: q.p_qnd,
                    p_qnd_ps: q.p_qnd_ps,
                    one_minus_p_qnd: 1.0 - q.p_qnd,
                })
            })
            .collect::<std::result::Result<_, _>>()?;
        for r in &row {
            sink.push(r)?;
        }
        matrix.push(row.iter().map(|r| r.one_minus_p_qnd).collect::<Vec<_>>());
    }
    sink.finish()?;
    run.say(format!("{:>10} | {}", "T_r \\ n", sweep.photons.iter().map(|n| format!("{n:>7.0}")).collect::<String>()));
    for (t, row) in sweep.durations.iter().zip(&matrix) {
        run.say(format!("{:>8.0}ns | {}", t * 1e9, row.iter().map(|v| format!("{:>7.4}", v)).collect::<String>()));
    }
    Ok(json!({
        "durations": sweep.durations,
        "photons": sweep.photons,
        "shots_per_cell": sweep.shots_per_cell,
        "one_minus_p_qnd": matrix,
    }))
}

#[derive(Debug, Clone, Copy, Serialize)]
struct FitRow {
    power: f64,
    center: f64,
    center_sigma: f64,
    width: f64,
    amplitude: f64,
    offset: f64,
    reduced_chi2: f64,
    converged: bool,
    flagged: bool,
    true_center: Option<f64>,
}

/// Fits every row of `map` concurrently, merged by row index.
pub fn fit_map(map: &StarkMap, opts: &tmreadout_core::calibration::FitOptions) -> Vec<LineFit> {
    map.response.par_iter().map(|row| fit_line(&map.probe_freqs, row, opts)).collect()
}

fn cmd_calibrate(run: &mut Run) -> Result<serde_json::Value> {
    let c = run.cfg.section(&run.cfg.calibration, "calibration")?.clone();
    let chi_qr = match c.chi_qr {
        Some(chi) => chi,
        None => model(run.cfg)?.readout.chi_qr,
    };
    let map = match (&c.map_file, &c.synthesis) {
        (Some(path), _) => read_stark_map(path)?,
        (None, Some(synth)) => {
            let powers = c.powers.map(|g| g.points()).unwrap_or_default();
            let probe = c.probe.map(|g| g.points()).unwrap_or_default();
            let mut rng = shot_rng(derive_key(run.seed.unwrap_or(0), "stark-map"), 0);
            let map = synth_stark_map(synth, &powers, &probe, &mut rng)?;
            run.emitter.table("stark_map", &map_rows(&map))?;
            map
        }
        (None, None) => return Err(CliError::Config("[calibration] needs `map_file` or `synthesis`".into())),
    };
    let fits = fit_map(&map, &c.fit);
    let cal: PhotonCalibration = photons_from_shift(&map.powers, &fits, chi_qr)?;
    let rows: Vec<FitRow> = fits
        .iter()
        .enumerate()
        .map(|(i, f)| FitRow {
            power: map.powers[i],
            center: f.center,
            center_sigma: f.center_sigma,
            width: f.width,
            amplitude: f.amplitude,
            offset: f.offset,
            reduced_chi2: f.reduced_chi2,
            converged: f.converged,
            flagged: f.flagged,
            true_center: map.true_centers.as_ref().map(|t| t[i]),
        })
        .collect();
    run.emitter.table("line_fits", &rows)?;
    let flagged: Vec<usize> = fits.iter().enumerate().filter(|(_, f)| f.flagged).map(|(i, _)| i).collect();
    let max_power = map.powers.last().copied().unwrap_or(0.0);
    let (n_max, beyond) = cal.photons(max_power);
    run.say(format!("slope {:.6e} Hz/W  ({:.3e} photons/W)", cal.slope, cal.photons_per_watt));
    run.say(format!("rows used {}  flagged {}  reduced chi2 {:.3}", cal.rows_used, cal.rows_flagged, cal.reduced_chi2));
    let pulse_point = run.cfg.pulse.map(|p| {
        let power = p.n_bar / cal.photons_per_watt;
        let (_, extrapolated) = cal.photons(power);
        json!({ "n_bar": p.n_bar, "power": power, "shift": cal.shift_for_photons(p.n_bar), "extrapolated": extrapolated })
    });
    Ok(json!({
        "calibration": cal,
        "chi_qr": chi_qr,
        "flagged_rows": flagged,
        "photons_at_max_power": { "power": max_power, "n_bar": n_max, "extrapolated": beyond },
        "pulse": pulse_point,
    }))
}

#[derive(Debug, Clone, Copy, Serialize)]
struct TrajectoryRow {
    start: usize,
    step: usize,
    reward: f64,
    ln_reward: f64,
    e_j: f64,
    c_s: f64,
    c_t: f64,
    l_a0: f64,
    gradient_norm: f64,
    step_size: f64,
}

fn cmd_optimize(run: &mut Run) -> Result<serde_json::Value> {
    let cfg = run.cfg;
    let reward_cfg = cfg.reward.unwrap_or_default();
    let opts = cfg.optimize.as_ref().map(|o| o.ascent).unwrap_or_default();
    let cavity = cfg.cavity_params()?;
    let mut starts = vec![cfg.circuit];
    if let Some(o) = &cfg.optimize {
        starts.extend(o.starts.iter().copied());
    }
    let states: Vec<OptimizerState> = starts
        .par_iter()
        .map(|s| gradient_ascent(s, &cavity, &reward_cfg, &opts))
        .collect::<std::result::Result<_, _>>()?;
    let best = states
        .iter()
        .enumerate()
        .fold(0, |b, (i, s)| if s.reward > states[b].reward { i } else { b });
    let rows: Vec<TrajectoryRow> = states
        .iter()
        .enumerate()
        .flat_map(|(start, s)| {
            s.trajectory.iter().map(move |t| TrajectoryRow {
                start,
                step: t.step,
                reward: t.reward,
                ln_reward: t.ln_reward,
                e_j: t.e_j,
                c_s: t.c_s,
                c_t: t.c_t,
                l_a0: t.l_a0,
                gradient_norm: t.gradient_norm,
                step_size: t.step_size,
            })
        })
        .collect();
    run.emitter.table("trajectory", &rows)?;
    let runs: Vec<serde_json::Value> = states
        .iter()
        .zip(&starts)
        .map(|(s, init)| -> Result<serde_json::Value> {
            Ok(json!({
                "initial": init,
                "initial_reward": reward(init, &cavity, &reward_cfg),
                "initial_metrics": design_metrics(init, &cavity)?,
                "final": s.params,
                "final_reward": reward(&s.params, &cavity, &reward_cfg),
                "final_metrics": design_metrics(&s.params, &cavity)?,
                "steps": s.steps,
                "termination": s.termination,
                "gradient": s.gradient,
            }))
        })
        .collect::<Result<_>>()?;
    let b = &states[best];
    run.say(format!("start reward {:.6}  final reward {:.6}  steps {}", states[0].trajectory[0].reward, b.reward, b.steps));
    let fm = design_metrics(&b.params, &cavity)?;
    run.say(format!(
        "E_J {:.4e} Hz  C_s {:.4e} F  C_t {:.4e} F  L_a0 {:.4e} H",
        b.params.e_j, b.params.c_s, b.params.c_t, b.params.l_a0
    ));
    run.say(format!("omega_q {:.4e} Hz  omega_a {:.4e} Hz  alpha_a {:.4e} Hz", fm.omega_q, fm.omega_a, fm.alpha_a));
    Ok(json!({ "reward_config": reward_cfg, "options": opts, "best": best, "runs": runs }))
}
