//! Photon-number calibration from the AC-Stark shift of the qubit line:
//! a synthetic two-tone spectroscopy generator, per-power Lorentzian fits and
//! the linear photons-per-power law.

use alloc::vec::Vec;

use nalgebra::{Matrix4, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-level anti-crossing of the qubit line with a parasitic defect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TlsArtifact {
    pub frequency: f64,
    pub coupling: f64,
}

/// Forward model of the spectroscopy map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StarkSynthesis {
    pub omega_q: f64,
    pub chi_qr: f64,
    /// Readout photons per unit drive power.
    pub photons_per_watt: f64,
    /// Full width at half maximum (Hz).
    pub linewidth: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default)]
    pub offset: f64,
    /// Standard deviation of the additive noise, in response units.
    pub noise_level: f64,
    #[serde(default)]
    pub tls: Option<TlsArtifact>,
}

fn one() -> f64 {
    1.0
}

impl StarkSynthesis {
    pub fn validate(&self) -> Result<()> {
        if !(self.linewidth.is_finite() && self.linewidth > 0.0) {
            return Err(Error::domain("linewidth", "must be finite and strictly positive"));
        }
        if !(self.noise_level.is_finite() && self.noise_level >= 0.0) {
            return Err(Error::domain("noise_level", "must be finite and >= 0"));
        }
        for (n, v) in [("omega_q", self.omega_q), ("chi_qr", self.chi_qr), ("photons_per_watt", self.photons_per_watt)] {
            if !v.is_finite() {
                return Err(Error::domain(n, "must be finite"));
            }
        }
        Ok(())
    }

    pub fn photons(&self, power: f64) -> f64 {
        self.photons_per_watt * power
    }

    /// Unperturbed line center at drive power `power`.
    pub fn center(&self, power: f64) -> f64 {
        self.omega_q + 2.0 * self.chi_qr * self.photons(power)
    }

    /// Noiseless response at probe frequency `f`.
    pub fn response(&self, power: f64, f: f64) -> f64 {
        let c = self.center(power);
        let line = |center: f64, weight: f64| weight * self.amplitude * lorentzian(f, center, self.linewidth);
        let signal = match self.tls {
            None => line(c, 1.0),
            Some(t) => {
                let half = 0.5 * (c - t.frequency);
                let split = (half * half + t.coupling * t.coupling).sqrt();
                let mid = 0.5 * (c + t.frequency);
                // weight of the qubit in each branch
                let w_up = if split == 0.0 { 0.5 } else { 0.5 * (1.0 + half / split) };
                line(mid + split, w_up) + line(mid - split, 1.0 - w_up)
            }
        };
        signal + self.offset
    }
}

#[inline]
fn lorentzian(f: f64, center: f64, fwhm: f64) -> f64 {
    let x = (f - center) / (0.5 * fwhm);
    1.0 / (1.0 + x * x)
}

/// Result of fitting a single power row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
    pub offset: f64,
    /// One-standard-deviation uncertainty of `center`.
    pub center_sigma: f64,
    pub reduced_chi2: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the row should not enter the linear law.
    pub flagged: bool,
}

/// Spectroscopy map: one response row per drive power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarkMap {
    pub powers: Vec<f64>,
    pub probe_freqs: Vec<f64>,
    pub response: Vec<Vec<f64>>,
    /// Generator centers per row, when the map is synthetic.
    pub true_centers: Option<Vec<f64>>,
    pub line_fits: Option<Vec<LineFit>>,
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1]) && v.iter().all(|x| x.is_finite())
}

impl StarkMap {
    pub fn validate(&self) -> Result<()> {
        if !strictly_increasing(&self.powers) || !strictly_increasing(&self.probe_freqs) {
            return Err(Error::domain("stark_map", "grid axes must be finite and strictly increasing"));
        }
        if self.response.len() != self.powers.len() || self.response.iter().any(|r| r.len() != self.probe_freqs.len()) {
            return Err(Error::domain("stark_map", "response shape does not match the axes"));
        }
        Ok(())
    }
}

pub fn synth_stark_map<R: Rng + ?Sized>(
    model: &StarkSynthesis,
    powers: &[f64],
    probe_freqs: &[f64],
    rng: &mut R,
) -> Result<StarkMap> {
    model.validate()?;
    let response = powers
        .iter()
        .map(|&p| {
            probe_freqs
                .iter()
                .map(|&f| {
                    let noise: f64 = if model.noise_level > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
                    model.response(p, f) + model.noise_level * noise
                })
                .collect()
        })
        .collect();
    let map = StarkMap {
        powers: powers.to_vec(),
        probe_freqs: probe_freqs.to_vec(),
        response,
        true_centers: Some(powers.iter().map(|&p| model.center(p)).collect()),
        line_fits: None,
    };
    map.validate()?;
    Ok(map)
}

/// Noise estimate from the median absolute first difference.
pub fn noise_estimate(y: &[f64]) -> f64 {
    if y.len() < 3 {
        return 0.0;
    }
    let mut d: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    let med = median(&mut d);
    let mut dev: Vec<f64> = d.iter().map(|x| (x - med).abs()).collect();
    1.482_602_218_505_602 * median(&mut dev) / 2f64.sqrt()
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Settings of the row fitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Rows with a larger reduced χ² are flagged.
    pub chi2_threshold: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { max_iterations: 200, chi2_threshold: 2.0 }
    }
}

/// Levenberg–Marquardt fit of `A/(1 + (2(f − c)/w)²) + b` to one row.
pub fn fit_line(freqs: &[f64], y: &[f64], opts: &FitOptions) -> LineFit {
    let n = freqs.len();
    let failed = LineFit {
        center: f64::NAN,
        width: f64::NAN,
        amplitude: f64::NAN,
        offset: f64::NAN,
        center_sigma: f64::INFINITY,
        reduced_chi2: f64::INFINITY,
        iterations: 0,
        converged: false,
        flagged: true,
    };
    if n < 6 || y.len() != n {
        return failed;
    }
    // work on a unit-scaled abscissa
    let f0 = freqs[0];
    let scale = freqs[n - 1] - f0;
    let x: Vec<f64> = freqs.iter().map(|f| (f - f0) / scale).collect();

    let mut sorted = y.to_vec();
    let base = median(&mut sorted);
    let (imax, _) = y
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, v)| if (v - base).abs() > acc.1 { (i, (v - base).abs()) } else { acc });
    let amp0 = y[imax] - base;
    let half = base + 0.5 * amp0;
    let above = y.iter().filter(|v| if amp0 > 0.0 { **v > half } else { **v < half }).count().max(2);
    let dx = 1.0 / (n - 1) as f64;
    let mut p = Vector4::new(amp0, x[imax], above as f64 * dx, base);

    let model = |p: &Vector4<f64>, xi: f64| {
        let u = 2.0 * (xi - p[1]) / p[2];
        p[0] / (1.0 + u * u) + p[3]
    };
    let ssr_of = |p: &Vector4<f64>| x.iter().zip(y).map(|(xi, yi)| (yi - model(p, *xi)).powi(2)).sum::<f64>();
    let normal = |p: &Vector4<f64>| {
        let mut jtj = Matrix4::<f64>::zeros();
        let mut jtr = Vector4::<f64>::zeros();
        for (xi, yi) in x.iter().zip(y) {
            let u = 2.0 * (xi - p[1]) / p[2];
            let d = 1.0 + u * u;
            let l = 1.0 / d;
            let dl_du = -2.0 * u / (d * d);
            let j = Vector4::new(l, p[0] * dl_du * (-2.0 / p[2]), p[0] * dl_du * (-u / p[2]), 1.0);
            let r = yi - (p[0] * l + p[3]);
            jtj += j * j.transpose();
            jtr += j * r;
        }
        (jtj, jtr)
    };

    let mut ssr = ssr_of(&p);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..opts.max_iterations {
        iterations = it + 1;
        let (jtj, jtr) = normal(&p);
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj;
            for k in 0..4 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = a.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + step;
            if !(trial[2] > 0.0) || trial.iter().any(|v| !v.is_finite()) {
                lambda *= 10.0;
                continue;
            }
            let s = ssr_of(&trial);
            if s <= ssr {
                let rel = (ssr - s) / ssr.max(f64::MIN_POSITIVE);
                let small_step = step.iter().zip(trial.iter()).all(|(d, v)| d.abs() <= 1e-10 * (v.abs() + 1e-10));
                p = trial;
                ssr = s;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if rel < 1e-12 || small_step {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // no downhill step at any damping: already at the minimum
            converged = ssr.is_finite();
            break;
        }
        if converged {
            break;
        }
    }

    let sigma_noise = noise_estimate(y);
    let dof = (n - 4) as f64;
    let floor = f64::EPSILON * y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let sigma = sigma_noise.max(floor);
    let reduced_chi2 = ssr / (sigma * sigma * dof);
    let (jtj, _) = normal(&p);
    let center_sigma = jtj
        .try_inverse()
        .map(|cov| (cov[(1, 1)].max(0.0)).sqrt() * sigma_noise * scale)
        .unwrap_or(f64::INFINITY);
    let inside = p[1] >= 0.0 && p[1] <= 1.0;
    LineFit {
        center: f0 + p[1] * scale,
        width: p[2].abs() * scale,
        amplitude: p[0],
        offset: p[3],
        center_sigma,
        reduced_chi2,
        iterations,
        converged,
        flagged: !converged || !inside || !(reduced_chi2 <= opts.chi2_threshold) || !center_sigma.is_finite(),
    }
}

/// Fits every row; row fits are independent.
pub fn fit_lines(map: &StarkMap, opts: &FitOptions) -> Result<Vec<LineFit>> {
    map.validate()?;
    Ok(map.response.iter().map(|row| fit_line(&map.probe_freqs, row, opts)).collect())
}

/// Linear law between drive power and photon number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonCalibration {
    /// Line shift per unit power (Hz/W).
    pub slope: f64,
    pub slope_sigma: f64,
    /// Fitted zero-power line center (Hz).
    pub intercept: f64,
    pub chi_qr: f64,
    pub photons_per_watt: f64,
    pub residuals: Vec<f64>,
    pub reduced_chi2: f64,
    pub rows_used: usize,
    pub rows_flagged: usize,
    pub power_range: (f64, f64),
}

impl PhotonCalibration {
    /// Photon number at `power`, and whether that power lies outside the fitted range.
    pub fn photons(&self, power: f64) -> (f64, bool) {
        let extrapolated = power < self.power_range.0 || power > self.power_range.1;
        (self.photons_per_watt * power, extrapolated)
    }

    /// Line shift corresponding to `n` photons.
    pub fn shift_for_photons(&self, n: f64) -> f64 {
        2.0 * self.chi_qr * n
    }
}

/// Weighted straight-line fit of line center against power, skipping flagged rows.
pub fn photons_from_shift(powers: &[f64], fits: &[LineFit], chi_qr: f64) -> Result<PhotonCalibration> {
    if powers.len() != fits.len() {
        return Err(Error::Calibration("powers and fits differ in length".into()));
    }
    if !(chi_qr.is_finite() && chi_qr != 0.0) {
        return Err(Error::Calibration("chi_qr must be finite and non-zero".into()));
    }
    let rows: Vec<(f64, &LineFit)> = powers.iter().copied().zip(fits).filter(|(_, f)| !f.flagged).collect();
    if rows.len() < 3 {
        return Err(Error::Calibration(alloc::format!("{} valid rows, at least 3 are required", rows.len())));
    }
    let weighted = rows.iter().all(|(_, f)| f.center_sigma > 0.0 && f.center_sigma.is_finite());
    let w = |f: &LineFit| if weighted { 1.0 / (f.center_sigma * f.center_sigma) } else { 1.0 };
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (p, f) in &rows {
        let wi = w(f);
        sw += wi;
        sx += wi * p;
        sy += wi * f.center;
        sxx += wi * p * p;
        sxy += wi * p * f.center;
    }
    let det = sw * sxx - sx * sx;
    if !(det > 0.0) {
        return Err(Error::Calibration("valid rows share a single power".into()));
    }
    let slope = (sw * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;
    let residuals: Vec<f64> = rows.iter().map(|(p, f)| f.center - (intercept + slope * p)).collect();
    let chi2: f64 = rows.iter().zip(&residuals).map(|((_, f), r)| w(f) * r * r).sum();
    let dof = (rows.len() - 2) as f64;
    let reduced_chi2 = chi2 / dof;
    let slope_var = sw / det;
    let slope_sigma = if weighted { slope_var.sqrt() } else { (slope_var * reduced_chi2).sqrt() };
    let used: Vec<f64> = rows.iter().map(|(p, _)| *p).collect();
    Ok(PhotonCalibration {
        slope,
        slope_sigma,
        intercept,
        chi_qr,
        photons_per_watt: slope / (2.0 * chi_qr),
        residuals,
        reduced_chi2,
        rows_used: rows.len(),
        rows_flagged: fits.len() - rows.len(),
        power_range: (used[0], used[used.len() - 1]),
    })
}
