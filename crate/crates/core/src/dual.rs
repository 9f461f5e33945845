//! Forward-mode dual numbers.
//!
//! `Dual<f64>` carries one directional derivative; nesting `Dual<Dual<f64>>`
//! gives mixed second derivatives, which the Newton Jacobian needs.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic needed to evaluate Hamiltonians on plain or dual numbers.
pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    /// Real part (the value of the underlying function).
    fn value(&self) -> f64;
    /// All components finite.
    fn is_finite(&self) -> bool;
    /// All components exactly zero.
    fn is_zero(&self) -> bool;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn ln(self) -> Self;
    fn exp(self) -> Self;
    fn sqrt(self) -> Self;
    fn powf(self, n: f64) -> Self;
    fn powi(self, n: i32) -> Self;

    fn scale(self, a: f64) -> Self {
        self * Self::from_f64(a)
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn powf(self, n: f64) -> Self {
        f64::powf(self, n)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

/// `re + eps·ε` with `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub eps: T,
}

impl<T: Scalar> Dual<T> {
    pub fn new(re: T, eps: T) -> Self {
        Self { re, eps }
    }

    pub fn constant(re: T) -> Self {
        Self {
            re,
            eps: T::from_f64(0.0),
        }
    }

    pub fn variable(re: T) -> Self {
        Self {
            re,
            eps: T::from_f64(1.0),
        }
    }
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.eps + o.eps)
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.eps - o.eps)
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(self.re * o.re, self.re * o.eps + self.eps * o.re)
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q = self.re / o.re;
        Self::new(q, (self.eps - q * o.eps) / o.re)
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.re, -self.eps)
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    fn from_f64(v: f64) -> Self {
        Self::constant(T::from_f64(v))
    }
    fn value(&self) -> f64 {
        self.re.value()
    }
    fn is_finite(&self) -> bool {
        self.re.is_finite() && self.eps.is_finite()
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.eps.is_zero()
    }
    fn sin(self) -> Self {
        Self::new(self.re.sin(), self.re.cos() * self.eps)
    }
    fn cos(self) -> Self {
        Self::new(self.re.cos(), -(self.re.sin() * self.eps))
    }
    fn ln(self) -> Self {
        Self::new(self.re.ln(), self.eps / self.re)
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        Self::new(e, e * self.eps)
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        Self::new(s, self.eps / s.scale(2.0))
    }
    fn powf(self, n: f64) -> Self {
        // A zero perturbation contributes nothing, even where re^(n-1) blows up.
        let d = if self.eps.is_zero() {
            T::from_f64(0.0)
        } else {
            self.re.powf(n - 1.0).scale(n) * self.eps
        };
        Self::new(self.re.powf(n), d)
    }
    fn powi(self, n: i32) -> Self {
        let d = if n == 0 {
            T::from_f64(0.0)
        } else {
            self.re.powi(n - 1).scale(n as f64)
        };
        Self::new(self.re.powi(n), d * self.eps)
    }
}

/// Gradient of `f` at `x` by `x.len()` forward passes.
pub fn gradient<E>(
    x: &[f64],
    f: impl Fn(&[Dual<f64>]) -> Result<Dual<f64>, E>,
) -> Result<Vec<f64>, E> {
    let mut seeded: Vec<Dual<f64>> = x.iter().map(|&v| Dual::constant(v)).collect();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        seeded[i].eps = 1.0;
        grad.push(f(&seeded)?.eps);
        seeded[i].eps = 0.0;
    }
    Ok(grad)
}

/// Symmetric Hessian of `f` at `x` via nested duals, row-major.
pub fn hessian<E>(
    x: &[f64],
    f: impl Fn(&[Dual<Dual<f64>>]) -> Result<Dual<Dual<f64>>, E>,
) -> Result<Vec<f64>, E> {
    let d = x.len();
    let mut seeded: Vec<Dual<Dual<f64>>> = x
        .iter()
        .map(|&v| Dual::constant(Dual::constant(v)))
        .collect();
    let mut h = vec![0.0; d * d];
    for a in 0..d {
        for b in a..d {
            seeded[a].re.eps = 1.0;
            seeded[b].eps.re = 1.0;
            let v = f(&seeded)?.eps.eps;
            seeded[a].re.eps = 0.0;
            seeded[b].eps.re = 0.0;
            h[a * d + b] = v;
            h[b * d + a] = v;
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_quotient_rules() {
        let x = Dual::variable(2.0);
        let y = x * x * x / (x + Dual::constant(1.0));
        // d/dx x³/(x+1) = (3x²(x+1) − x³)/(x+1)² at 2 → (36 − 8)/9
        assert!((y.re - 8.0 / 3.0).abs() < 1e-15);
        assert!((y.eps - 28.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn elementary_functions() {
        let x = Dual::variable(0.7_f64);
        assert!((x.sin().eps - 0.7_f64.cos()).abs() < 1e-15);
        assert!((x.cos().eps + 0.7_f64.sin()).abs() < 1e-15);
        assert!((x.ln().eps - 1.0 / 0.7).abs() < 1e-15);
        assert!((x.exp().eps - 0.7_f64.exp()).abs() < 1e-15);
        assert!((x.sqrt().eps - 0.5 / 0.7_f64.sqrt()).abs() < 1e-15);
        assert!((x.powf(2.5).eps - 2.5 * 0.7_f64.powf(1.5)).abs() < 1e-15);
        assert!((Dual::variable(-1.5_f64).powi(3).eps - 3.0 * 2.25).abs() < 1e-15);
    }

    #[test]
    fn sqrt_at_zero_is_not_finite() {
        assert!(!Dual::variable(0.0_f64).sqrt().is_finite());
    }

    #[test]
    fn log_power_hessian_vanishes_at_origin() {
        // ln(1+|x|²)^{3/2} ~ |x|³ near 0
        let f = |x: &[Dual<Dual<f64>>]| -> Result<_, ()> {
            let r2 = x[0] * x[0] + x[1] * x[1];
            Ok((Dual::from_f64(1.0) + r2).ln().powf(1.5))
        };
        let h = hessian(&[0.0, 0.0], f).unwrap();
        assert!(h.iter().all(|v| *v == 0.0), "{h:?}");
        // x^{1.5} genuinely has an infinite second derivative at 0
        let g = |x: &[Dual<Dual<f64>>]| -> Result<_, ()> { Ok(x[0].powf(1.5)) };
        let h = hessian(&[0.0], g).unwrap();
        assert!(!h[0].is_finite());
    }

    #[test]
    fn nested_hessian_of_polynomial() {
        // f = x0² x1 + 3 x1³
        let f = |x: &[Dual<Dual<f64>>]| -> Result<_, ()> {
            Ok(x[0] * x[0] * x[1] + x[1].powi(3).scale(3.0))
        };
        let h = hessian(&[1.5, -2.0], f).unwrap();
        let expect = [2.0 * -2.0, 2.0 * 1.5, 2.0 * 1.5, 18.0 * -2.0];
        for (a, b) in h.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-13, "{h:?}");
        }
        let g = gradient(&[1.5, -2.0], |x: &[Dual<f64>]| -> Result<_, ()> {
            Ok(x[0] * x[0] * x[1] + x[1].powi(3).scale(3.0))
        })
        .unwrap();
        assert!((g[0] - 2.0 * 1.5 * -2.0).abs() < 1e-14);
        assert!((g[1] - (2.25 + 36.0)).abs() < 1e-13);
    }
}
