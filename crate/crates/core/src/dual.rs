//! Vector-mode forward differentiation with dual numbers.
//!
//! A [`Dual`] carries a value and its gradient with respect to a fixed set of
//! seeded directions, so one evaluation of a model step yields a full
//! Jacobian row block. Models that expose a generic-scalar step implement
//! [`StepScalar`] arithmetic over both `f64` and `Dual`.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Div, Mul, Neg, Sub};
use num_traits::Float;

/// Forward-mode dual number with a dynamically sized gradient part.
#[derive(Debug, Clone, PartialEq)]
pub struct Dual {
    /// Value part.
    pub re: f64,
    /// Gradient with respect to the seeded directions.
    pub eps: Vec<f64>,
}

impl Dual {
    /// Constant with a zero gradient of length `dirs`.
    pub fn constant(value: f64, dirs: usize) -> Self {
        Dual {
            re: value,
            eps: vec![0.0; dirs],
        }
    }

    /// Variable seeded along direction `index` out of `dirs`.
    pub fn seeded(value: f64, dirs: usize, index: usize) -> Self {
        let mut eps = vec![0.0; dirs];
        eps[index] = 1.0;
        Dual { re: value, eps }
    }

    pub fn exp(&self) -> Self {
        let e = self.re.exp();
        Dual {
            re: e,
            eps: self.eps.iter().map(|g| g * e).collect(),
        }
    }

    pub fn ln(&self) -> Self {
        Dual {
            re: self.re.ln(),
            eps: self.eps.iter().map(|g| g / self.re).collect(),
        }
    }

    pub fn sqrt(&self) -> Self {
        let r = self.re.sqrt();
        Dual {
            re: r,
            eps: self.eps.iter().map(|g| g / (2.0 * r)).collect(),
        }
    }

    /// Multiply by a plain scalar.
    pub fn scale(&self, c: f64) -> Self {
        Dual {
            re: self.re * c,
            eps: self.eps.iter().map(|g| g * c).collect(),
        }
    }
}

impl Add for &Dual {
    type Output = Dual;
    fn add(self, rhs: &Dual) -> Dual {
        Dual {
            re: self.re + rhs.re,
            eps: self
                .eps
                .iter()
                .zip(&rhs.eps)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &Dual {
    type Output = Dual;
    fn sub(self, rhs: &Dual) -> Dual {
        Dual {
            re: self.re - rhs.re,
            eps: self
                .eps
                .iter()
                .zip(&rhs.eps)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul for &Dual {
    type Output = Dual;
    fn mul(self, rhs: &Dual) -> Dual {
        Dual {
            re: self.re * rhs.re,
            eps: self
                .eps
                .iter()
                .zip(&rhs.eps)
                .map(|(a, b)| a * rhs.re + self.re * b)
                .collect(),
        }
    }
}

impl Div for &Dual {
    type Output = Dual;
    fn div(self, rhs: &Dual) -> Dual {
        let d = rhs.re * rhs.re;
        Dual {
            re: self.re / rhs.re,
            eps: self
                .eps
                .iter()
                .zip(&rhs.eps)
                .map(|(a, b)| (a * rhs.re - self.re * b) / d)
                .collect(),
        }
    }
}

impl Neg for &Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual {
            re: -self.re,
            eps: self.eps.iter().map(|g| -g).collect(),
        }
    }
}

/// Scalar arithmetic shared by plain values and duals, enough to express the
/// built-in step maps once and evaluate them on either type.
pub trait StepScalar: Clone {
    /// Constant promoted to the same gradient shape as `like`.
    fn lift(value: f64, like: &Self) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn scale(&self, c: f64) -> Self;
    fn exp(&self) -> Self;
}

impl StepScalar for f64 {
    fn lift(value: f64, _like: &Self) -> Self {
        value
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn scale(&self, c: f64) -> Self {
        self * c
    }
    fn exp(&self) -> Self {
        Float::exp(*self)
    }
}

impl StepScalar for Dual {
    fn lift(value: f64, like: &Self) -> Self {
        Dual::constant(value, like.eps.len())
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn scale(&self, c: f64) -> Self {
        Dual::scale(self, c)
    }
    fn exp(&self) -> Self {
        Dual::exp(self)
    }
}
