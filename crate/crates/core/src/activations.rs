//! Step and sigmoid activations.

use crate::error::{Error, Result};

/// Slope scale `ε > 0` of the sigmoid `1 / (1 + exp(-x/ε))`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Smoothing(f64);

impl Smoothing {
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon.is_finite() && epsilon > 0.0 {
            Ok(Self(epsilon))
        } else {
            Err(Error::InvalidSmoothing(epsilon))
        }
    }

    #[inline]
    pub fn epsilon(self) -> f64 {
        self.0
    }
}

/// Activation used inside every network of the crate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Heaviside,
    Sigmoid(Smoothing),
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Heaviside => heaviside(x),
            Activation::Sigmoid(s) => sigmoid(x, s),
        }
    }

    pub fn smoothing(self) -> Option<Smoothing> {
        match self {
            Activation::Heaviside => None,
            Activation::Sigmoid(s) => Some(s),
        }
    }
}

/// `1` for positive, `1/2` at zero (either signed zero), `0` for negative input.
#[inline]
pub fn heaviside(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        0.0
    } else {
        0.5
    }
}

/// Logistic sigmoid with slope `1/ε`, evaluated without overflow for every
/// finite input.
#[inline]
pub fn sigmoid(x: f64, s: Smoothing) -> f64 {
    let t = x / s.0;
    if t >= 0.0 {
        1.0 / (1.0 + libm::exp(-t))
    } else {
        let e = libm::exp(t);
        e / (1.0 + e)
    }
}

/// `σ_ε(-|x|)`, the accurately representable tail of the sigmoid.
#[inline]
fn lower_tail(x: f64, s: Smoothing) -> f64 {
    let e = libm::exp(-libm::fabs(x) / s.0);
    e / (1.0 + e)
}

/// Exact derivative `σ_ε(x)(1 - σ_ε(x)) / ε`. Computed from the lower tail so
/// that it is exactly even in `x` and keeps full relative precision far from 0.
#[inline]
pub fn sigmoid_derivative(x: f64, s: Smoothing) -> f64 {
    let q = lower_tail(x, s);
    q * (1.0 - q) / s.0
}

/// Second derivative `σ_ε'(x)(1 - 2σ_ε(x)) / ε`.
#[inline]
pub fn sigmoid_second_derivative(x: f64, s: Smoothing) -> f64 {
    let q = lower_tail(x, s);
    let first = q * (1.0 - q) / s.0;
    // 1 - 2σ(x) is 1 - 2q for x < 0 and 2q - 1 for x >= 0.
    let skew = if x < 0.0 { 1.0 - 2.0 * q } else { 2.0 * q - 1.0 };
    first * skew / s.0
}
