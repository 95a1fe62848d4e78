//! Pointwise nonlinearities used by the random lifts.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::LofiError;

/// `E[relu(G)]` for `G ~ N(0,1)`, i.e. `1/√(2π)`.
pub const RELU_C0: f64 = 0.398_942_280_401_432_7;
/// `E[relu(G) G]`.
pub const RELU_C1: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    /// ReLU with its degree-0 and degree-1 Hermite components removed.
    ReluPerp01,
    /// `sin z + 1 − cos z`: zero at the origin with unit first and second
    /// derivatives, all derivatives bounded.
    SmoothTest,
    Identity,
}

impl Activation {
    pub const ALL: [Activation; 4] =
        [Activation::Relu, Activation::ReluPerp01, Activation::SmoothTest, Activation::Identity];

    pub fn tag(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::ReluPerp01 => "relu_perp01",
            Activation::SmoothTest => "smooth_test",
            Activation::Identity => "identity",
        }
    }

    #[inline]
    pub fn eval(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::ReluPerp01 => z.max(0.0) - RELU_C0 - RELU_C1 * z,
            Activation::SmoothTest => z.sin() + 1.0 - z.cos(),
            Activation::Identity => z,
        }
    }

    /// First derivative; the ReLU kink uses derivative 0 at 0.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => f64::from(u8::from(z > 0.0)),
            Activation::ReluPerp01 => f64::from(u8::from(z > 0.0)) - RELU_C1,
            Activation::SmoothTest => z.cos() + z.sin(),
            Activation::Identity => 1.0,
        }
    }

    /// Second derivative (zero almost everywhere for the ReLU family).
    #[inline]
    pub fn second_derivative(self, z: f64) -> f64 {
        match self {
            Activation::SmoothTest => z.cos() - z.sin(),
            _ => 0.0,
        }
    }

    pub fn apply_in_place(self, values: &mut [f64]) {
        if self != Activation::Identity {
            values.iter_mut().for_each(|v| *v = self.eval(*v));
        }
    }

    /// Normalized Hermite coefficient `c_r = E[σ(G) H_r(G)]`, with
    /// `H_r = He_r / √r!`.
    pub fn hermite_coefficient(self, r: usize) -> f64 {
        match (self, r) {
            (Activation::Relu, 0) => RELU_C0,
            (Activation::Relu, 1) => RELU_C1,
            (Activation::ReluPerp01, 0 | 1) => 0.0,
            (Activation::Identity, 1) => 1.0,
            (Activation::Identity, _) => 0.0,
            (Activation::Relu | Activation::ReluPerp01, _) => {
                // Integrand is smooth on each half-line; the linear part of
                // relu_perp01 only touches orders 0 and 1.
                half_line_expectation(|z| z * hermite_normalized(r, z))
            }
            (Activation::SmoothTest, _) => gauss_hermite_expectation(|z| self.eval(z) * hermite_normalized(r, z)),
        }
    }

    /// `(c_0, c_1, …, c_{max_order})`.
    pub fn hermite_coeffs(self, max_order: usize) -> Vec<f64> {
        (0..=max_order).map(|r| self.hermite_coefficient(r)).collect()
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Activation {
    type Err = LofiError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Activation::ALL
            .into_iter()
            .find(|a| a.tag() == s)
            .ok_or_else(|| LofiError::UnknownTag(s.to_string()))
    }
}

/// Normalized probabilists' Hermite polynomial `He_r(z)/√r!`.
pub fn hermite_normalized(r: usize, z: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    // He_{k+1} = z He_k − k He_{k−1}; track normalized values directly.
    for k in 0..r {
        let next = (z * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// `∫_0^∞ f(z) φ(z) dz` by composite Simpson on `[0, 14]`.
fn half_line_expectation(f: impl Fn(f64) -> f64) -> f64 {
    let m = 20_000;
    let h = 14.0 / m as f64;
    let w = |z: f64| f(z) * (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
    let mut s = w(0.0) + w(14.0);
    for i in 1..m {
        s += w(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// `E[f(G)]` by 100-point Gauss–Hermite (probabilists') quadrature.
fn gauss_hermite_expectation(f: impl Fn(f64) -> f64) -> f64 {
    let (nodes, weights) = gauss_hermite_rule(100);
    nodes.iter().zip(&weights).map(|(x, w)| w * f(*x)).sum()
}

/// Golub–Welsch nodes and weights for the standard normal weight.
pub fn gauss_hermite_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let j = crate::linalg::DenseMatrix::from_fn(n, n, |a, b| if a.abs_diff(b) == 1 { (a.max(b) as f64).sqrt() } else { 0.0 });
    let (nodes, vectors) = crate::linalg::eigen::eigh(&j).expect("symmetric tridiagonal eigensolve");
    let weights: Vec<f64> = vectors.iter().map(|v| v[0].powi(2)).collect();
    (nodes, weights)
}
