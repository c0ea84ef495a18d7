#![allow(dead_code)]

use ndarray::{array, Array1, Array2};
use pathexplain::model::SecondOrder;
use pathexplain::{Activation, DenseNetwork, Layer, Result, ScalarModel};
use rand::Rng;

/// Random smooth net with widths `d -> 16 -> 16 -> 1`.
pub fn softplus_net(d: usize, seed: u64) -> DenseNetwork {
    let act = Activation::softplus(1.0).unwrap();
    let mut net = DenseNetwork::xavier(&[d, 16, 16, 1], act, Activation::Identity, seed).unwrap();
    // Xavier biases start at zero; nonzero ones exercise more of each unit.
    let mut rng = pathexplain::seed::rng(seed ^ 0x5eed);
    for layer in net.layers_mut() {
        layer.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    }
    net
}

pub fn point(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = pathexplain::seed::rng(seed);
    (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()
}

/// `f(x) = sum_i softplus(x_i)` as a two-layer net.
pub fn separable_net(d: usize) -> DenseNetwork {
    let first = Layer::new(Array2::eye(d), Array1::zeros(d), Activation::softplus(1.0).unwrap()).unwrap();
    let out = Layer::new(Array2::ones((1, d)), Array1::zeros(1), Activation::Identity).unwrap();
    DenseNetwork::new(d, vec![first, out], 0).unwrap()
}

/// `f(x) = x_0 * x_1`.
pub struct Product;

impl ScalarModel for Product {
    fn input_dim(&self) -> usize {
        2
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(x[0] * x[1])
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((x[0] * x[1], vec![x[1], x[0]]))
    }

    fn second_order(&self, x: &[f64]) -> Result<SecondOrder> {
        Ok(SecondOrder {
            value: x[0] * x[1],
            gradient: vec![x[1], x[0]],
            hessian: array![[0.0, 1.0], [1.0, 0.0]],
        })
    }
}

/// `f(x) = sum_{i<j} c_ij x_i x_j + sum_i b_i x_i`, a purely pairwise function.
pub struct Pairwise {
    pub c: Array2<f64>,
    pub b: Vec<f64>,
}

impl Pairwise {
    pub fn random(d: usize, seed: u64) -> Self {
        let mut rng = pathexplain::seed::rng(seed);
        let mut c = Array2::zeros((d, d));
        for i in 0..d {
            for j in (i + 1)..d {
                c[[i, j]] = rng.random_range(-1.0..1.0);
            }
        }
        Self {
            c,
            b: (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
        }
    }

    fn sym(&self) -> Array2<f64> {
        &self.c + &self.c.t()
    }
}

impl ScalarModel for Pairwise {
    fn input_dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let v = ndarray::aview1(x);
        Ok(v.dot(&self.c.dot(&v)) + v.dot(&ndarray::aview1(&self.b)))
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let g = self.sym().dot(&ndarray::aview1(x)) + ndarray::aview1(&self.b);
        Ok((self.value(x)?, g.to_vec()))
    }

    fn second_order(&self, x: &[f64]) -> Result<SecondOrder> {
        let (value, gradient) = self.value_and_gradient(x)?;
        Ok(SecondOrder {
            value,
            gradient,
            hessian: self.sym(),
        })
    }
}
