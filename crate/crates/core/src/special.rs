//! Scalar special functions.


#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Probability that a Gaussian pointer is assigned to the wrong side of a
/// midpoint threshold, `½·erfc(SNR/2)`.
#[inline]
pub fn assignment_error(snr: f64) -> f64 {
    0.5 * erfc(0.5 * snr)
}

#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
