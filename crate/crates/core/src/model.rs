//! The differentiable scalar functions that the explainers operate on.

use ndarray::{Array2, ArrayView2};

use crate::error::{check_len, Result};

/// Value, gradient and Hessian of a scalar function at one point.
#[derive(Clone, Debug)]
pub struct SecondOrder {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Array2<f64>,
}

/// Value and first/second derivatives along a single direction `v`.
#[derive(Clone, Copy, Debug)]
pub struct Directional {
    pub value: f64,
    /// `grad f . v`
    pub slope: f64,
    /// `v^T H v`
    pub curvature: f64,
}

/// A function `f: R^d -> R` with exact first and second derivatives.
pub trait ScalarModel: Sync {
    fn input_dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> Result<f64>;

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;

    fn second_order(&self, x: &[f64]) -> Result<SecondOrder>;

    /// Fails when second derivatives are undefined anywhere (e.g. ReLU units).
    fn ensure_twice_differentiable(&self) -> Result<()> {
        Ok(())
    }

    fn directional(&self, x: &[f64], v: &[f64]) -> Result<Directional> {
        check_len(self.input_dim(), v.len())?;
        let so = self.second_order(x)?;
        let slope = so.gradient.iter().zip(v).map(|(g, v)| g * v).sum();
        let hv = so.hessian.dot(&ndarray::aview1(v));
        let curvature = hv.iter().zip(v).map(|(a, b)| a * b).sum();
        Ok(Directional {
            value: so.value,
            slope,
            curvature,
        })
    }

    /// Evaluate `f` on every row of `xs`.
    fn values(&self, xs: ArrayView2<f64>) -> Result<Vec<f64>> {
        xs.rows()
            .into_iter()
            .map(|row| self.value(&row.to_vec()))
            .collect()
    }
}

/// Weighted ensemble `sum_k c_k f_k` of models sharing an input dimension.
pub struct WeightedSum<'a> {
    terms: Vec<(f64, &'a dyn ScalarModel)>,
    dim: usize,
}

impl<'a> WeightedSum<'a> {
    pub fn new(terms: Vec<(f64, &'a dyn ScalarModel)>) -> Result<Self> {
        let dim = terms.first().map(|(_, m)| m.input_dim()).ok_or_else(|| {
            crate::Error::InvalidArgument("ensemble needs at least one member".into())
        })?;
        for (_, m) in &terms {
            check_len(dim, m.input_dim())?;
        }
        Ok(Self { terms, dim })
    }
}

impl ScalarModel for WeightedSum<'_> {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for (c, m) in &self.terms {
            acc += c * m.value(x)?;
        }
        Ok(acc)
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut value = 0.0;
        let mut grad = vec![0.0; self.dim];
        for (c, m) in &self.terms {
            let (v, g) = m.value_and_gradient(x)?;
            value += c * v;
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += c * b);
        }
        Ok((value, grad))
    }

    fn second_order(&self, x: &[f64]) -> Result<SecondOrder> {
        let mut out = SecondOrder {
            value: 0.0,
            gradient: vec![0.0; self.dim],
            hessian: Array2::zeros((self.dim, self.dim)),
        };
        for (c, m) in &self.terms {
            let so = m.second_order(x)?;
            out.value += c * so.value;
            out.gradient
                .iter_mut()
                .zip(&so.gradient)
                .for_each(|(a, b)| *a += c * b);
            out.hessian.scaled_add(*c, &so.hessian);
        }
        Ok(out)
    }

    fn ensure_twice_differentiable(&self) -> Result<()> {
        self.terms
            .iter()
            .try_for_each(|(_, m)| m.ensure_twice_differentiable())
    }
}
