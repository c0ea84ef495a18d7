//! Pointwise activation functions with analytic first and second derivatives.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Nonlinearity applied after an affine layer.
///
/// Serialized as `{"kind": "softplus", "beta": 10.0}`, `{"kind": "relu"}`, ...
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    /// `(1/beta) * ln(1 + exp(beta * z))`; approaches ReLU as `beta` grows.
    Softplus { beta: f64 },
    Tanh,
    Sigmoid,
    /// Exact `z * Phi(z)` with the normal CDF, not the tanh approximation.
    Gelu,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

impl Activation {
    pub fn softplus(beta: f64) -> Result<Self> {
        if beta > 0.0 && beta.is_finite() {
            Ok(Activation::Softplus { beta })
        } else {
            Err(Error::InvalidArgument(format!(
                "softplus beta must be positive and finite, got {beta}"
            )))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Softplus { .. } => "softplus",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Gelu => "gelu",
        }
    }

    pub fn is_twice_differentiable(&self) -> bool {
        !matches!(self, Activation::Relu)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match *self {
            Activation::Softplus { beta } => Activation::softplus(beta).map(|_| ()),
            _ => Ok(()),
        }
    }

    pub fn value(&self, z: f64) -> f64 {
        match *self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Softplus { beta } => {
                let bz = beta * z;
                z.max(0.0) + (-bz.abs()).exp().ln_1p() / beta
            }
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => sigmoid(z),
            Activation::Gelu => z * normal_cdf(z),
        }
    }

    /// First derivative. ReLU uses 0 at exactly `z == 0`.
    pub fn derivative(&self, z: f64) -> f64 {
        match *self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Softplus { beta } => sigmoid(beta * z),
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Activation::Gelu => normal_cdf(z) + z * normal_pdf(z),
        }
    }

    /// Second derivative, `None` for ReLU.
    pub fn second_derivative(&self, z: f64) -> Option<f64> {
        Some(match *self {
            Activation::Identity => 0.0,
            Activation::Relu => return None,
            Activation::Softplus { beta } => {
                let s = sigmoid(beta * z);
                beta * s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = z.tanh();
                -2.0 * t * (1.0 - t * t)
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s) * (1.0 - 2.0 * s)
            }
            Activation::Gelu => normal_pdf(z) * (2.0 - z * z),
        })
    }
}

/// `relu`, `tanh`, `softplus` (beta 1) or `softplus:<beta>`, ...
impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let act = match (kind.trim().to_ascii_lowercase().as_str(), arg) {
            ("identity", None) => Activation::Identity,
            ("relu", None) => Activation::Relu,
            ("tanh", None) => Activation::Tanh,
            ("sigmoid", None) => Activation::Sigmoid,
            ("gelu", None) => Activation::Gelu,
            ("softplus", None) => Activation::Softplus { beta: 1.0 },
            ("softplus", Some(b)) => Activation::softplus(
                b.trim()
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("softplus beta `{b}` is not a number")))?,
            )?,
            _ => return Err(Error::InvalidArgument(format!("unknown activation `{s}`"))),
        };
        Ok(act)
    }
}
