//! Exact diagonalization of the truncated two-mode molecule Hamiltonian in a
//! product harmonic-oscillator basis.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::circuit::{derive_bare_modes, CircuitParams};
use crate::error::{Error, Result};

/// Fock-space truncation per mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FockCutoffs {
    #[serde(default = "default_cutoff")]
    pub n_q: usize,
    #[serde(default = "default_cutoff")]
    pub n_a: usize,
}

fn default_cutoff() -> usize {
    15
}

impl Default for FockCutoffs {
    fn default() -> Self {
        FockCutoffs { n_q: 15, n_a: 15 }
    }
}

impl FockCutoffs {
    pub fn new(n_q: usize, n_a: usize) -> Self {
        FockCutoffs { n_q, n_a }
    }

    pub fn dimension(&self) -> usize {
        self.n_q * self.n_a
    }

    pub fn doubled(&self) -> Self {
        FockCutoffs { n_q: 2 * self.n_q, n_a: 2 * self.n_a }
    }

    pub fn validate(&self, max_dimension: usize) -> Result<()> {
        if self.n_q < 5 || self.n_a < 5 {
            return Err(Error::domain("cutoffs", "each Fock cutoff must be at least 5"));
        }
        if self.dimension() > max_dimension {
            return Err(Error::domain(
                "cutoffs",
                format!("dimension {} exceeds the budget of {max_dimension}", self.dimension()),
            ));
        }
        Ok(())
    }
}

/// Numerical settings for building and diagonalizing the Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumOptions {
    /// Extra Fock levels used when evaluating cos φ before truncation.
    pub cos_padding: usize,
    /// Maximum allowed change of the truncated cos φ block when the padding is doubled.
    pub cos_tolerance: f64,
    /// Eigenpair residual bound relative to ‖H‖.
    pub residual_tolerance: f64,
    pub max_iterations: usize,
    pub max_dimension: usize,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions {
            cos_padding: 20,
            cos_tolerance: 1e-9,
            residual_tolerance: 1e-9,
            max_iterations: 0,
            max_dimension: 4096,
        }
    }
}

/// Single-mode operators in a truncated Fock basis.
#[derive(Debug, Clone)]
pub struct ModeOperators {
    /// Zero-point phase amplitude, φ = z(a + a†).
    pub z: f64,
    pub n2: DMatrix<f64>,
    pub phi2: DMatrix<f64>,
    pub cos_phi: DMatrix<f64>,
}

impl ModeOperators {
    /// Operators for a mode with charging energy `e_c` and quadratic
    /// potential `(e_eff/2) φ²`.
    pub fn new(dim: usize, e_c: f64, e_eff: f64, opts: &SpectrumOptions) -> Result<Self> {
        let z = (2.0 * e_c / e_eff).powf(0.25);
        let cos_phi = cos_phi_checked(dim, z, opts.cos_padding.max(1), opts.cos_tolerance)?;
        Ok(ModeOperators { z, n2: n_squared(dim, z), phi2: phi_squared(dim, z), cos_phi })
    }
}

/// Exact matrix elements of n² = −(a† − a)²/(4z²).
fn n_squared(dim: usize, z: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, dim);
    let c = 1.0 / (4.0 * z * z);
    for k in 0..dim {
        m[(k, k)] = c * (2.0 * k as f64 + 1.0);
        if k + 2 < dim {
            let v = -c * ((k as f64 + 1.0) * (k as f64 + 2.0)).sqrt();
            m[(k, k + 2)] = v;
            m[(k + 2, k)] = v;
        }
    }
    m
}

/// Exact matrix elements of φ² = z²(a + a†)².
fn phi_squared(dim: usize, z: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, dim);
    let c = z * z;
    for k in 0..dim {
        m[(k, k)] = c * (2.0 * k as f64 + 1.0);
        if k + 2 < dim {
            let v = c * ((k as f64 + 1.0) * (k as f64 + 2.0)).sqrt();
            m[(k, k + 2)] = v;
            m[(k + 2, k)] = v;
        }
    }
    m
}

fn phi_matrix(dim: usize, z: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, dim);
    for k in 0..dim - 1 {
        let v = z * ((k + 1) as f64).sqrt();
        m[(k, k + 1)] = v;
        m[(k + 1, k)] = v;
    }
    m
}

/// cos φ on a `dim + pad` basis via eigendecomposition, truncated to `dim`.
fn cos_phi_padded(dim: usize, z: f64, pad: usize) -> DMatrix<f64> {
    let big = dim + pad;
    let eig = SymmetricEigen::new(phi_matrix(big, z));
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, lambda) in eig.eigenvalues.iter().enumerate() {
        let c = lambda.cos();
        scaled.column_mut(j).scale_mut(c);
    }
    let full = &scaled * v.transpose();
    let mut out = full.view((0, 0), (dim, dim)).into_owned();
    symmetrize(&mut out);
    out
}

fn cos_phi_checked(dim: usize, z: f64, pad: usize, tol: f64) -> Result<DMatrix<f64>> {
    let coarse = cos_phi_padded(dim, z, pad);
    let fine = cos_phi_padded(dim, z, 2 * pad);
    let defect = (&coarse - &fine).amax();
    if defect > tol {
        return Err(Error::Convergence { what: "cos(phi) truncation", defect, tolerance: tol });
    }
    Ok(fine)
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// The three pieces of the Hamiltonian, each on the full product space.
#[derive(Debug, Clone)]
pub struct HamiltonianTerms {
    pub qubit: DMatrix<f64>,
    pub ancilla: DMatrix<f64>,
    /// −2E_J (cos φ_q − 1)(cos φ_a − 1)
    pub coupling: DMatrix<f64>,
    pub cutoffs: FockCutoffs,
}

impl HamiltonianTerms {
    pub fn total(&self) -> DMatrix<f64> {
        let mut h = &self.qubit + &self.ancilla + &self.coupling;
        symmetrize(&mut h);
        h
    }
}

/// Product-space index of |k⟩_q ⊗ |n⟩_a.
#[inline]
pub fn product_index(k: usize, n: usize, cutoffs: &FockCutoffs) -> usize {
    k * cutoffs.n_a + n
}

pub fn hamiltonian_terms(
    circuit: &CircuitParams,
    cutoffs: &FockCutoffs,
    opts: &SpectrumOptions,
) -> Result<HamiltonianTerms> {
    cutoffs.validate(opts.max_dimension)?;
    let bare = derive_bare_modes(circuit)?;
    let e_j = bare.e_j();
    let ratio = bare.l_j / bare.l_a;
    let q = ModeOperators::new(cutoffs.n_q, bare.e_cq, bare.e_jq, opts)?;
    let a = ModeOperators::new(cutoffs.n_a, bare.e_ca, 2.0 * e_j * bare.dilution, opts)?;

    let iq = DMatrix::<f64>::identity(cutoffs.n_q, cutoffs.n_q);
    let ia = DMatrix::<f64>::identity(cutoffs.n_a, cutoffs.n_a);
    let hq = &q.n2 * (4.0 * bare.e_cq) - &q.cos_phi * bare.e_jq;
    let ha = &a.n2 * (4.0 * bare.e_ca) - &a.cos_phi * (2.0 * e_j) + &a.phi2 * (2.0 * e_j * ratio);
    let cq = &q.cos_phi - &iq;
    let ca = &a.cos_phi - &ia;
    Ok(HamiltonianTerms {
        qubit: hq.kronecker(&ia),
        ancilla: iq.kronecker(&ha),
        coupling: cq.kronecker(&ca) * (-2.0 * e_j),
        cutoffs: *cutoffs,
    })
}

/// Builds the Hamiltonian (Hz) on the `n_q · n_a` product space.
/// Largest coupling element between states whose qubit or ancilla parity
/// differs, relative to the largest coupling element.
pub fn parity_violation(terms: &HamiltonianTerms) -> f64 {
    let c = terms.cutoffs;
    let scale = terms.coupling.amax();
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for i in 0..c.dimension() {
        for j in 0..c.dimension() {
            let (ki, ni) = (i / c.n_a, i % c.n_a);
            let (kj, nj) = (j / c.n_a, j % c.n_a);
            if (ki + kj) % 2 == 1 || (ni + nj) % 2 == 1 {
                worst = worst.max(terms.coupling[(i, j)].abs());
            }
        }
    }
    worst / scale
}

pub fn build_hamiltonian(circuit: &CircuitParams, cutoffs: &FockCutoffs) -> Result<DMatrix<f64>> {
    build_hamiltonian_with(circuit, cutoffs, &SpectrumOptions::default())
}

pub fn build_hamiltonian_with(
    circuit: &CircuitParams,
    cutoffs: &FockCutoffs,
    opts: &SpectrumOptions,
) -> Result<DMatrix<f64>> {
    Ok(hamiltonian_terms(circuit, cutoffs, opts)?.total())
}

/// ‖H − Hᵀ‖_F / ‖H‖_F.
pub fn hermiticity_defect(h: &DMatrix<f64>) -> f64 {
    let norm = h.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (h - h.transpose()).norm() / norm
}

/// Overlaps within this distance of ½ count as ambiguous.
const LABEL_MARGIN: f64 = 1e-9;

/// Eigenvalues sorted ascending with their bare-state assignments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSpectrum {
    pub energies: Vec<f64>,
    /// `(k, n)` for eigenstate `i`, if its largest bare-state weight exceeds ½
    /// and that bare state was not already claimed by a lower eigenstate.
    pub labels: Vec<Option<(usize, usize)>>,
    /// Largest squared overlap of each eigenstate with a bare product state.
    pub overlaps: Vec<f64>,
    pub cutoffs: FockCutoffs,
}

impl LabeledSpectrum {
    pub fn index_of(&self, k: usize, n: usize) -> Option<usize> {
        self.labels.iter().position(|l| *l == Some((k, n)))
    }

    pub fn energy(&self, k: usize, n: usize) -> Result<f64> {
        self.index_of(k, n).map(|i| self.energies[i]).ok_or(Error::MissingLabel(k, n))
    }

    pub fn overlap(&self, k: usize, n: usize) -> Result<f64> {
        self.index_of(k, n).map(|i| self.overlaps[i]).ok_or(Error::MissingLabel(k, n))
    }
}

pub fn diagonalize_and_label(h: &DMatrix<f64>, cutoffs: &FockCutoffs) -> Result<LabeledSpectrum> {
    diagonalize_and_label_with(h, cutoffs, &SpectrumOptions::default())
}

pub fn diagonalize_and_label_with(
    h: &DMatrix<f64>,
    cutoffs: &FockCutoffs,
    opts: &SpectrumOptions,
) -> Result<LabeledSpectrum> {
    let dim = h.nrows();
    if h.ncols() != dim || dim != cutoffs.dimension() {
        return Err(Error::domain("hamiltonian", "matrix shape does not match the cutoffs"));
    }
    let eig = SymmetricEigen::try_new(h.clone(), f64::EPSILON, opts.max_iterations).ok_or_else(|| {
        Error::Eigensolver {
            iterations: opts.max_iterations,
            reason: "symmetric QR iteration did not converge".into(),
        }
    })?;

    let scale = h.norm().max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    for j in 0..dim {
        let v = eig.eigenvectors.column(j);
        let r = (h * v - v * eig.eigenvalues[j]).norm();
        worst = worst.max(r);
    }
    if worst > opts.residual_tolerance * scale {
        return Err(Error::Eigensolver {
            iterations: opts.max_iterations,
            reason: format!("residual {:e} exceeds {:e}·‖H‖", worst / scale, opts.residual_tolerance),
        });
    }

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut claimed = vec![false; dim];
    let mut energies = Vec::with_capacity(dim);
    let mut labels = Vec::with_capacity(dim);
    let mut overlaps = Vec::with_capacity(dim);
    for &j in &order {
        let v = eig.eigenvectors.column(j);
        let (best, weight) = v
            .iter()
            .enumerate()
            .map(|(i, x)| (i, x * x))
            .fold((0, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        energies.push(eig.eigenvalues[j]);
        overlaps.push(weight);
        if weight > 0.5 + LABEL_MARGIN && !claimed[best] {
            claimed[best] = true;
            labels.push(Some((best / cutoffs.n_a, best % cutoffs.n_a)));
        } else {
            labels.push(None);
        }
    }
    Ok(LabeledSpectrum { energies, labels, overlaps, cutoffs: *cutoffs })
}

/// Mode parameters read off a labeled spectrum (Hz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericModeParams {
    pub omega_q: f64,
    pub alpha_q: f64,
    pub omega_a: f64,
    pub alpha_a: f64,
    pub chi_qa: f64,
    /// |1⟩ → |3⟩ transition of the qubit mode.
    pub omega_13: f64,
}

impl NumericModeParams {
    fn max_abs_difference(&self, other: &Self) -> NumericModeParams {
        NumericModeParams {
            omega_q: (self.omega_q - other.omega_q).abs(),
            alpha_q: (self.alpha_q - other.alpha_q).abs(),
            omega_a: (self.omega_a - other.omega_a).abs(),
            alpha_a: (self.alpha_a - other.alpha_a).abs(),
            chi_qa: (self.chi_qa - other.chi_qa).abs(),
            omega_13: (self.omega_13 - other.omega_13).abs(),
        }
    }
}

pub fn extract_numeric_params(labeled: &LabeledSpectrum) -> Result<NumericModeParams> {
    let e = |k, n| labeled.energy(k, n);
    let e00 = e(0, 0)?;
    let e10 = e(1, 0)?;
    let e20 = e(2, 0)?;
    let e30 = e(3, 0)?;
    let e01 = e(0, 1)?;
    let e02 = e(0, 2)?;
    let e11 = e(1, 1)?;
    Ok(NumericModeParams {
        omega_q: e10 - e00,
        alpha_q: (e20 - e10) - (e10 - e00),
        omega_a: e01 - e00,
        alpha_a: (e02 - e01) - (e01 - e00),
        chi_qa: 0.5 * (e11 - e10 - e01 + e00),
        omega_13: e30 - e10,
    })
}

/// Numeric parameters at the requested cutoffs plus the change observed
/// when both cutoffs are doubled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub cutoffs: FockCutoffs,
    pub params: NumericModeParams,
    pub refined: NumericModeParams,
    pub convergence: NumericModeParams,
    pub hermiticity_defect: f64,
    pub parity_violation: f64,
    /// Squared overlaps of (0,0), (1,0), (0,1), (1,1), (2,0).
    pub low_overlaps: [f64; 5],
    /// Lowest part of the spectrum relative to the ground state.
    pub levels: Vec<(f64, Option<(usize, usize)>, f64)>,
}

pub fn analyze(circuit: &CircuitParams, cutoffs: &FockCutoffs, opts: &SpectrumOptions) -> Result<SpectrumReport> {
    let (params, labeled, defect) = solve(circuit, cutoffs, opts)?;
    let (refined, _, _) = solve(circuit, &cutoffs.doubled(), opts)?;
    let parity = parity_violation(&hamiltonian_terms(circuit, cutoffs, opts)?);
    let mut low = [0.0; 5];
    for (slot, (k, n)) in low.iter_mut().zip([(0, 0), (1, 0), (0, 1), (1, 1), (2, 0)]) {
        *slot = labeled.overlap(k, n)?;
    }
    let e0 = labeled.energies[0];
    let levels = (0..labeled.energies.len().min(20))
        .map(|i| (labeled.energies[i] - e0, labeled.labels[i], labeled.overlaps[i]))
        .collect();
    Ok(SpectrumReport {
        cutoffs: *cutoffs,
        params,
        refined,
        convergence: params.max_abs_difference(&refined),
        hermiticity_defect: defect,
        parity_violation: parity,
        low_overlaps: low,
        levels,
    })
}

/// Builds, diagonalizes and extracts in one step.
pub fn solve(
    circuit: &CircuitParams,
    cutoffs: &FockCutoffs,
    opts: &SpectrumOptions,
) -> Result<(NumericModeParams, LabeledSpectrum, f64)> {
    let h = build_hamiltonian_with(circuit, cutoffs, opts)?;
    let defect = hermiticity_defect(&h);
    let labeled = diagonalize_and_label_with(&h, cutoffs, opts)?;
    Ok((extract_numeric_params(&labeled)?, labeled, defect))
}
