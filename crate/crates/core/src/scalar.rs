//! Minimal scalar abstraction so closed-form model code can be evaluated
//! either on plain `f64` or on forward-mode dual numbers (for exact
//! gradients of the design rewards).

use core::ops::{Add, Div, Mul, Neg, Sub};

use num_traits::Float;

pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant(v: f64) -> Self;
    fn value(self) -> f64;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn abs(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn atan(self) -> Self;

    fn powi(self, n: i32) -> Self {
        let mut acc = Self::constant(1.0);
        let base = if n < 0 { Self::constant(1.0) / self } else { self };
        for _ in 0..n.unsigned_abs() {
            acc = acc * base;
        }
        acc
    }

    fn scale(self, k: f64) -> Self {
        self * Self::constant(k)
    }
}

impl Scalar for f64 {
    #[inline]
    fn constant(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn sqrt(self) -> Self {
        Float::sqrt(self)
    }
    #[inline]
    fn exp(self) -> Self {
        Float::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        Float::ln(self)
    }
    #[inline]
    fn abs(self) -> Self {
        Float::abs(self)
    }
    #[inline]
    fn sin(self) -> Self {
        Float::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        Float::cos(self)
    }
    #[inline]
    fn atan(self) -> Self {
        Float::atan(self)
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        Float::powi(self, n)
    }
}

/// Forward-mode dual number carrying `N` directional derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual<const N: usize> {
    pub re: f64,
    pub eps: [f64; N],
}

impl<const N: usize> Dual<N> {
    /// The `i`-th independent variable with value `re`.
    pub fn variable(re: f64, i: usize) -> Self {
        let mut eps = [0.0; N];
        eps[i] = 1.0;
        Dual { re, eps }
    }

    fn chain(self, f: f64, df: f64) -> Self {
        let mut eps = self.eps;
        for e in eps.iter_mut() {
            *e *= df;
        }
        Dual { re: f, eps }
    }
}

impl<const N: usize> Add for Dual<N> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut eps = self.eps;
        for (e, oe) in eps.iter_mut().zip(o.eps) {
            *e += oe;
        }
        Dual { re: self.re + o.re, eps }
    }
}

impl<const N: usize> Sub for Dual<N> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl<const N: usize> Neg for Dual<N> {
    type Output = Self;
    fn neg(self) -> Self {
        self.chain(-self.re, -1.0)
    }
}

impl<const N: usize> Mul for Dual<N> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut eps = [0.0; N];
        for (i, e) in eps.iter_mut().enumerate() {
            *e = self.eps[i] * o.re + self.re * o.eps[i];
        }
        Dual { re: self.re * o.re, eps }
    }
}

impl<const N: usize> Div for Dual<N> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.re;
        let mut eps = [0.0; N];
        for (i, e) in eps.iter_mut().enumerate() {
            *e = (self.eps[i] * o.re - self.re * o.eps[i]) * inv * inv;
        }
        Dual { re: self.re * inv, eps }
    }
}

impl<const N: usize> Scalar for Dual<N> {
    fn constant(v: f64) -> Self {
        Dual { re: v, eps: [0.0; N] }
    }
    fn value(self) -> f64 {
        self.re
    }
    fn sqrt(self) -> Self {
        let s = Float::sqrt(self.re);
        self.chain(s, 0.5 / s)
    }
    fn exp(self) -> Self {
        let e = Float::exp(self.re);
        self.chain(e, e)
    }
    fn ln(self) -> Self {
        self.chain(Float::ln(self.re), 1.0 / self.re)
    }
    fn abs(self) -> Self {
        if self.re < 0.0 {
            -self
        } else {
            self
        }
    }
    fn sin(self) -> Self {
        self.chain(Float::sin(self.re), Float::cos(self.re))
    }
    fn cos(self) -> Self {
        self.chain(Float::cos(self.re), -Float::sin(self.re))
    }
    fn atan(self) -> Self {
        self.chain(Float::atan(self.re), 1.0 / (1.0 + self.re * self.re))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f<S: Scalar>(x: S, y: S) -> S {
        (x * y).sqrt() + (x / y).exp() - x.powi(3).ln() + (y - x).abs() + x.sin() * y.cos() + y.atan()
    }

    #[test]
    fn dual_matches_central_differences() {
        let (x, y) = (1.3, 2.1);
        let d = f(Dual::<2>::variable(x, 0), Dual::<2>::variable(y, 1));
        let h = 1e-6;
        let fx = (f(x + h, y) - f(x - h, y)) / (2.0 * h);
        let fy = (f(x, y + h) - f(x, y - h)) / (2.0 * h);
        assert!((d.re - f(x, y)).abs() < 1e-14);
        assert!((d.eps[0] - fx).abs() < 1e-8);
        assert!((d.eps[1] - fy).abs() < 1e-8);
    }
}
