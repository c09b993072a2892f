//! Forward-mode second-order numbers for differentiating closed-form
//! expressions along one coordinate.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic needed to evaluate the benchmark closed forms, implemented for
/// plain `f64` and for [`Dual2`].
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn cst(v: f64) -> Self;
    fn exp(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn re(self) -> f64;
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn re(self) -> f64 {
        self
    }
}

/// `f(t)` truncated after the second-order term: value, `f'` and `f''`
/// with respect to a single seeded variable.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dual2 {
    pub v: f64,
    pub d: f64,
    pub dd: f64,
}

impl Dual2 {
    /// The independent variable itself: `d = 1`, `dd = 0`.
    pub fn var(v: f64) -> Self {
        Dual2 { v, d: 1.0, dd: 0.0 }
    }

    pub fn constant(v: f64) -> Self {
        Dual2 { v, d: 0.0, dd: 0.0 }
    }

    /// Applies a scalar function given its value and first two derivatives
    /// at `self.v`.
    fn chain(self, f: f64, f1: f64, f2: f64) -> Self {
        Dual2 { v: f, d: f1 * self.d, dd: f1 * self.dd + f2 * self.d * self.d }
    }
}

impl Add for Dual2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual2 { v: self.v + o.v, d: self.d + o.d, dd: self.dd + o.dd }
    }
}

impl Sub for Dual2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual2 { v: self.v - o.v, d: self.d - o.d, dd: self.dd - o.dd }
    }
}

impl Mul for Dual2 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Dual2 {
            v: self.v * o.v,
            d: self.d * o.v + self.v * o.d,
            dd: self.dd * o.v + 2.0 * self.d * o.d + self.v * o.dd,
        }
    }
}

impl Div for Dual2 {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let r = 1.0 / o.v;
        self * o.chain(r, -r * r, 2.0 * r * r * r)
    }
}

impl Neg for Dual2 {
    type Output = Self;
    fn neg(self) -> Self {
        Dual2 { v: -self.v, d: -self.d, dd: -self.dd }
    }
}

impl Add<f64> for Dual2 {
    type Output = Self;
    fn add(self, o: f64) -> Self {
        Dual2 { v: self.v + o, ..self }
    }
}

impl Sub<f64> for Dual2 {
    type Output = Self;
    fn sub(self, o: f64) -> Self {
        Dual2 { v: self.v - o, ..self }
    }
}

impl Mul<f64> for Dual2 {
    type Output = Self;
    fn mul(self, o: f64) -> Self {
        Dual2 { v: self.v * o, d: self.d * o, dd: self.dd * o }
    }
}

impl Div<f64> for Dual2 {
    type Output = Self;
    fn div(self, o: f64) -> Self {
        Dual2 { v: self.v / o, d: self.d / o, dd: self.dd / o }
    }
}

impl Scalar for Dual2 {
    fn cst(v: f64) -> Self {
        Dual2::constant(v)
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }
    fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }
    fn re(self) -> f64 {
        self.v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_quotient_rules() {
        let x = Dual2::var(0.7);
        // f = x^2 sin x
        let f = x * x * x.sin();
        let (s, c) = 0.7f64.sin_cos();
        assert!((f.d - (2.0 * 0.7 * s + 0.49 * c)).abs() < 1e-15);
        assert!((f.dd - (2.0 * s + 4.0 * 0.7 * c - 0.49 * s)).abs() < 1e-14);
        // g = 1 / (1 + x)
        let g = Dual2::constant(1.0) / (x + 1.0);
        assert!((g.d + 1.0 / 1.7f64.powi(2)).abs() < 1e-15);
        assert!((g.dd - 2.0 / 1.7f64.powi(3)).abs() < 1e-15);
    }

    #[test]
    fn exp_of_steep_argument() {
        let eps = 1e-5;
        let x = Dual2::var(1e-5);
        let e = (-x / eps).exp();
        let v = (-1.0f64).exp();
        assert_eq!(e.v, v);
        assert!((e.d + v / eps).abs() <= 1e-10 * v / eps);
        assert!((e.dd - v / (eps * eps)).abs() <= 1e-10 * v / (eps * eps));
    }
}
