//! Forward-mode dual numbers.
//!
//! [`Jet`] carries a value and its gradient, [`Jet2`] additionally carries the
//! Hessian. Both implement [`Scalar`], so field expressions written once can be
//! evaluated plainly or with exact first and second derivatives.

use nalgebra::{SMatrix, SVector};
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic needed to evaluate scalar field expressions.
pub trait Scalar:
    Copy
    + std::fmt::Debug
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
    fn constant(v: f64) -> Self;
    fn value(&self) -> f64;

    /// Applies a univariate function given its value and first two
    /// derivatives at `self.value()`.
    fn chain(self, f: f64, df: f64, d2f: f64) -> Self;

    fn sqrt(self) -> Self {
        let v = self.value();
        let s = v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * v))
    }

    fn exp(self) -> Self {
        let e = self.value().exp();
        self.chain(e, e, e)
    }

    fn ln(self) -> Self {
        let v = self.value();
        self.chain(v.ln(), 1.0 / v, -1.0 / (v * v))
    }

    fn sin(self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.chain(s, c, -s)
    }

    fn cos(self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.chain(c, -s, -c)
    }

    fn powi(self, n: i32) -> Self {
        let v = self.value();
        let nf = n as f64;
        let d1 = if n == 0 { 0.0 } else { nf * v.powi(n - 1) };
        let d2 = if n == 0 || n == 1 {
            0.0
        } else {
            nf * (nf - 1.0) * v.powi(n - 2)
        };
        self.chain(v.powi(n), d1, d2)
    }

    fn powf(self, p: f64) -> Self {
        let v = self.value();
        self.chain(v.powf(p), p * v.powf(p - 1.0), p * (p - 1.0) * v.powf(p - 2.0))
    }

    fn recip(self) -> Self {
        let v = self.value();
        self.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }

    /// Euclidean norm of the arguments, with a zero derivative at the origin
    /// instead of 0/0.
    fn radius(xs: &[Self]) -> Self {
        let mut r2 = Self::constant(0.0);
        for &x in xs {
            r2 = r2 + x * x;
        }
        if r2.value() == 0.0 {
            Self::constant(0.0)
        } else {
            r2.sqrt()
        }
    }
}

impl Scalar for f64 {
    fn constant(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn chain(self, f: f64, _df: f64, _d2f: f64) -> Self {
        f
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    fn recip(self) -> Self {
        1.0 / self
    }
}

/// Value and gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<const D: usize> {
    pub value: f64,
    pub grad: SVector<f64, D>,
}

impl<const D: usize> Jet<D> {
    pub fn new(value: f64, grad: SVector<f64, D>) -> Self {
        Self { value, grad }
    }

    /// The coordinate function `x^i` evaluated at `value`.
    pub fn variable(i: usize, value: f64) -> Self {
        let mut grad = SVector::zeros();
        grad[i] = 1.0;
        Self { value, grad }
    }

    pub fn variables(x: &SVector<f64, D>) -> [Self; D] {
        std::array::from_fn(|i| Self::variable(i, x[i]))
    }
}

impl<const D: usize> Scalar for Jet<D> {
    fn constant(v: f64) -> Self {
        Self {
            value: v,
            grad: SVector::zeros(),
        }
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn chain(self, f: f64, df: f64, _d2f: f64) -> Self {
        Self {
            value: f,
            grad: self.grad * df,
        }
    }
}

impl<const D: usize> Add for Jet<D> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.value + o.value, self.grad + o.grad)
    }
}

impl<const D: usize> Sub for Jet<D> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.value - o.value, self.grad - o.grad)
    }
}

impl<const D: usize> Mul for Jet<D> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(self.value * o.value, o.grad * self.value + self.grad * o.value)
    }
}

impl<const D: usize> Div for Jet<D> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let v = self.value / o.value;
        Self::new(v, (self.grad - o.grad * v) / o.value)
    }
}

impl<const D: usize> Neg for Jet<D> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.value, -self.grad)
    }
}

impl<const D: usize> Add<f64> for Jet<D> {
    type Output = Self;
    fn add(self, o: f64) -> Self {
        Self::new(self.value + o, self.grad)
    }
}

impl<const D: usize> Sub<f64> for Jet<D> {
    type Output = Self;
    fn sub(self, o: f64) -> Self {
        Self::new(self.value - o, self.grad)
    }
}

impl<const D: usize> Mul<f64> for Jet<D> {
    type Output = Self;
    fn mul(self, o: f64) -> Self {
        Self::new(self.value * o, self.grad * o)
    }
}

impl<const D: usize> Div<f64> for Jet<D> {
    type Output = Self;
    fn div(self, o: f64) -> Self {
        Self::new(self.value / o, self.grad / o)
    }
}

/// Value, gradient and Hessian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2<const D: usize> {
    pub value: f64,
    pub grad: SVector<f64, D>,
    pub hess: SMatrix<f64, D, D>,
}

impl<const D: usize> Jet2<D> {
    pub fn new(value: f64, grad: SVector<f64, D>, hess: SMatrix<f64, D, D>) -> Self {
        Self { value, grad, hess }
    }

    pub fn variable(i: usize, value: f64) -> Self {
        let mut grad = SVector::zeros();
        grad[i] = 1.0;
        Self {
            value,
            grad,
            hess: SMatrix::zeros(),
        }
    }

    pub fn variables(x: &SVector<f64, D>) -> [Self; D] {
        std::array::from_fn(|i| Self::variable(i, x[i]))
    }
}

impl<const D: usize> Scalar for Jet2<D> {
    fn constant(v: f64) -> Self {
        Self {
            value: v,
            grad: SVector::zeros(),
            hess: SMatrix::zeros(),
        }
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn chain(self, f: f64, df: f64, d2f: f64) -> Self {
        Self {
            value: f,
            grad: self.grad * df,
            hess: self.hess * df + self.grad * self.grad.transpose() * d2f,
        }
    }
}

impl<const D: usize> Add for Jet2<D> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.value + o.value, self.grad + o.grad, self.hess + o.hess)
    }
}

impl<const D: usize> Sub for Jet2<D> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.value - o.value, self.grad - o.grad, self.hess - o.hess)
    }
}

impl<const D: usize> Mul for Jet2<D> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let cross = self.grad * o.grad.transpose();
        Self::new(
            self.value * o.value,
            o.grad * self.value + self.grad * o.value,
            o.hess * self.value + self.hess * o.value + cross + cross.transpose(),
        )
    }
}

impl<const D: usize> Div for Jet2<D> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

impl<const D: usize> Neg for Jet2<D> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.value, -self.grad, -self.hess)
    }
}

impl<const D: usize> Add<f64> for Jet2<D> {
    type Output = Self;
    fn add(self, o: f64) -> Self {
        Self::new(self.value + o, self.grad, self.hess)
    }
}

impl<const D: usize> Sub<f64> for Jet2<D> {
    type Output = Self;
    fn sub(self, o: f64) -> Self {
        Self::new(self.value - o, self.grad, self.hess)
    }
}

impl<const D: usize> Mul<f64> for Jet2<D> {
    type Output = Self;
    fn mul(self, o: f64) -> Self {
        Self::new(self.value * o, self.grad * o, self.hess * o)
    }
}

impl<const D: usize> Div<f64> for Jet2<D> {
    type Output = Self;
    fn div(self, o: f64) -> Self {
        Self::new(self.value / o, self.grad / o, self.hess / o)
    }
}
