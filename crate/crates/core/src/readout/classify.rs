use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::QubitState;

/// Two linear separators in the IQ plane.
///
/// A point is `l` when its projection onto `leak_axis` (measured from
/// `leak_origin`) exceeds `leak_threshold`; otherwise it is `1` when its
/// projection onto `binary_axis` (measured from `origin`) exceeds
/// `binary_threshold`, and `0` otherwise. Points on a boundary take the
/// lower label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub origin: Complex64,
    pub binary_axis: Complex64,
    pub binary_threshold: f64,
    pub leak_origin: Complex64,
    pub leak_axis: Complex64,
    pub leak_threshold: f64,
}

#[inline]
fn project(z: Complex64, origin: Complex64, axis: Complex64) -> f64 {
    ((z - origin) * axis.conj()).re
}

impl Thresholds {
    /// Ideal separators halfway between known pointer means.
    pub fn midpoints(means: &[Complex64; 3]) -> Self {
        let b = means[1] - means[0];
        let l = means[2] - means[1];
        Thresholds {
            origin: means[0],
            binary_axis: b / b.norm(),
            binary_threshold: 0.5 * b.norm(),
            leak_origin: means[1],
            leak_axis: l / l.norm(),
            leak_threshold: 0.5 * l.norm(),
        }
    }

    #[inline]
    pub fn binary(&self, iq: Complex64) -> QubitState {
        if project(iq, self.origin, self.binary_axis) > self.binary_threshold {
            QubitState::Excited
        } else {
            QubitState::Ground
        }
    }

    #[inline]
    pub fn classify(&self, iq: Complex64) -> QubitState {
        if project(iq, self.leak_origin, self.leak_axis) > self.leak_threshold {
            QubitState::Leaked
        } else {
            self.binary(iq)
        }
    }

    /// The same separators after rotating the IQ plane by `phase`.
    pub fn rotated(&self, phase: f64) -> Self {
        let r = Complex64::from_polar(1.0, phase);
        Thresholds {
            origin: self.origin * r,
            binary_axis: self.binary_axis * r,
            leak_origin: self.leak_origin * r,
            leak_axis: self.leak_axis * r,
            ..*self
        }
    }
}

/// Threshold maximizing `#{neg ≤ t} + #{pos > t}`. Among equally good
/// splits the lowest is taken, placed halfway across its gap.
pub fn best_split(neg: &[f64], pos: &[f64]) -> Option<f64> {
    if neg.is_empty() || pos.is_empty() {
        return None;
    }
    let mut all: Vec<(f64, bool)> = neg.iter().map(|&x| (x, false)).chain(pos.iter().map(|&x| (x, true))).collect();
    if all.iter().any(|(x, _)| !x.is_finite()) {
        return None;
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    // threshold below everything
    let mut score = pos.len() as i64;
    let mut best = score;
    let mut best_at = None;
    let mut i = 0;
    while i < all.len() {
        let x = all[i].0;
        while i < all.len() && all[i].0 == x {
            score += if all[i].1 { -1 } else { 1 };
            i += 1;
        }
        if score > best {
            best = score;
            best_at = Some(i);
        }
    }
    Some(match best_at {
        None => all[0].0 - 1.0,
        Some(k) if k == all.len() => all[k - 1].0 + 1.0,
        Some(k) => 0.5 * (all[k - 1].0 + all[k].0),
    })
}

fn mean(points: &[Complex64]) -> Complex64 {
    points.iter().sum::<Complex64>() / points.len() as f64
}

/// Fits both separators on labelled calibration clouds.
pub fn fit_thresholds(zeros: &[Complex64], ones: &[Complex64], leaks: &[Complex64]) -> Result<Thresholds> {
    if zeros.is_empty() || ones.is_empty() || leaks.is_empty() {
        return Err(Error::Statistics("threshold calibration needs shots from every class".into()));
    }
    let (m0, m1, ml) = (mean(zeros), mean(ones), mean(leaks));
    let b = m1 - m0;
    let l = ml - m1;
    if !(b.norm() > 0.0) || !(l.norm() > 0.0) {
        return Err(Error::Statistics("calibration pointer clouds are not separated".into()));
    }
    let (axis_b, axis_l) = (b / b.norm(), l / l.norm());
    let proj = |pts: &[Complex64], o, a| pts.iter().map(|&z| project(z, o, a)).collect::<Vec<_>>();
    let t_b = best_split(&proj(zeros, m0, axis_b), &proj(ones, m0, axis_b))
        .ok_or_else(|| Error::Statistics("non-finite calibration data".into()))?;
    let mut not_leak = proj(ones, m1, axis_l);
    not_leak.extend(proj(zeros, m1, axis_l));
    let t_l = best_split(&not_leak, &proj(leaks, m1, axis_l))
        .ok_or_else(|| Error::Statistics("non-finite calibration data".into()))?;
    Ok(Thresholds {
        origin: m0,
        binary_axis: axis_b,
        binary_threshold: t_b,
        leak_origin: m1,
        leak_axis: axis_l,
        leak_threshold: t_l,
    })
}

/// `|μ1 − μ0| / (√2 σ)` with σ the pooled per-quadrature spread.
pub fn empirical_snr(zeros: &[Complex64], ones: &[Complex64]) -> Result<f64> {
    if zeros.len() < 2 || ones.len() < 2 {
        return Err(Error::Statistics("need at least two shots per cloud".into()));
    }
    let (m0, m1) = (mean(zeros), mean(ones));
    let ss: f64 = zeros.iter().map(|z| (z - m0).norm_sqr()).sum::<f64>() + ones.iter().map(|z| (z - m1).norm_sqr()).sum::<f64>();
    let dof = 2.0 * (zeros.len() + ones.len() - 2) as f64;
    let sigma = (ss / dof).sqrt();
    Ok((m1 - m0).norm() / (2f64.sqrt() * sigma))
}
