//! Dense feed-forward networks with exact derivatives.
//!
//! Gradients use reverse accumulation. Hessians are computed forward-over-reverse:
//! the tangent of the whole backward pass is pushed along all `d` input
//! directions at once, which amounts to `d` Hessian-vector products sharing a
//! single forward pass.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{check_len, Error, Result};
use crate::model::{Directional, ScalarModel, SecondOrder};
use crate::seed;

/// Triangles of a computed Hessian must agree to this before symmetrization.
const SYMMETRY_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// `[out x in]`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>, activation: Activation) -> Result<Self> {
        check_len(weights.nrows(), bias.len())?;
        activation.validate()?;
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }
}

/// Layered affine + activation model, reduced to a scalar by `output_index`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkDoc", into = "NetworkDoc")]
pub struct DenseNetwork {
    input_dim: usize,
    layers: Vec<Layer>,
    output_index: usize,
}

struct Tape {
    /// Pre-activations of every layer; the last one holds only the selected output.
    pre: Vec<Array1<f64>>,
    value: f64,
}

impl DenseNetwork {
    pub fn new(input_dim: usize, layers: Vec<Layer>, output_index: usize) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidArgument("input dimension must be positive".into()));
        }
        if layers.is_empty() {
            return Err(Error::InvalidArgument("network needs at least one layer".into()));
        }
        let mut width = input_dim;
        for layer in &layers {
            check_len(width, layer.in_dim())?;
            check_len(layer.out_dim(), layer.bias.len())?;
            layer.activation.validate()?;
            width = layer.out_dim();
        }
        if output_index >= width {
            return Err(Error::InvalidArgument(format!(
                "output index {output_index} out of range for {width} outputs"
            )));
        }
        Ok(Self {
            input_dim,
            layers,
            output_index,
        })
    }

    /// Glorot-uniform weights in `+-sqrt(6 / (fan_in + fan_out))`, zero biases.
    ///
    /// `widths` lists every layer width including input and output, e.g.
    /// `[10, 64, 64, 1]`. Hidden layers use `hidden`, the last uses `output`.
    pub fn xavier(widths: &[usize], hidden: Activation, output: Activation, seed: u64) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "architecture needs >= 2 positive widths, got {widths:?}"
            )));
        }
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for (l, pair) in widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let mut rng = seed::rng_for(seed, seed::STREAM_INIT, l as u64);
            let weights = Array2::from_shape_simple_fn((fan_out, fan_in), || {
                rng.random_range(-limit..limit)
            });
            let act = if l + 2 == widths.len() { output } else { hidden };
            layers.push(Layer::new(weights, Array1::zeros(fan_out), act)?);
        }
        Self::new(widths[0], layers, 0)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn output_index(&self) -> usize {
        self.output_index
    }

    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_dim)
            .chain(self.layers.iter().map(Layer::out_dim))
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Index of the first layer with a ReLU activation.
    pub fn relu_layer(&self) -> Option<usize> {
        self.layers
            .iter()
            .position(|l| l.activation == Activation::Relu)
    }

    /// Copy with every ReLU replaced by `Softplus(beta)`; weights are untouched.
    pub fn softplus_surgery(&self, beta: f64) -> Result<DenseNetwork> {
        let smooth = Activation::softplus(beta)?;
        let mut out = self.clone();
        for layer in &mut out.layers {
            if layer.activation == Activation::Relu {
                layer.activation = smooth;
            }
        }
        Ok(out)
    }

    /// Function-identical twin obtained by permuting the units of hidden layer `layer`.
    pub fn permute_hidden(&self, layer: usize, perm: &[usize]) -> Result<DenseNetwork> {
        if layer + 1 >= self.layers.len() {
            return Err(Error::InvalidArgument(format!("layer {layer} is not hidden")));
        }
        let width = self.layers[layer].out_dim();
        check_len(width, perm.len())?;
        let mut seen = vec![false; width];
        for &p in perm {
            if p >= width || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidArgument("not a permutation".into()));
            }
        }
        let mut out = self.clone();
        out.layers[layer].weights = self.layers[layer].weights.select(Axis(0), perm);
        out.layers[layer].bias = self.layers[layer].bias.select(Axis(0), perm);
        out.layers[layer + 1].weights = self.layers[layer + 1].weights.select(Axis(1), perm);
        Ok(out)
    }

    /// Fold `y -> scale * y + shift` into the selected output of an identity output layer.
    pub fn with_affine_output(&self, scale: f64, shift: f64) -> Result<DenseNetwork> {
        let last = self.layers.len() - 1;
        if self.layers[last].activation != Activation::Identity {
            return Err(Error::InvalidArgument(
                "affine output folding needs an identity output layer".into(),
            ));
        }
        let o = self.output_index;
        let mut out = self.clone();
        let layer = &mut out.layers[last];
        layer.weights.row_mut(o).mapv_inplace(|w| w * scale);
        layer.bias[o] = layer.bias[o] * scale + shift;
        Ok(out)
    }

    fn layer_params(&self, l: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let layer = &self.layers[l];
        if l + 1 == self.layers.len() {
            let o = self.output_index;
            (
                layer.weights.slice(s![o..o + 1, ..]),
                layer.bias.slice(s![o..o + 1]),
            )
        } else {
            (layer.weights.view(), layer.bias.view())
        }
    }

    fn record(&self, x: &[f64]) -> Result<Tape> {
        check_len(self.input_dim, x.len())?;
        let mut a = Array1::from(x.to_vec());
        let mut pre = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let (w, b) = self.layer_params(l);
            let z = w.dot(&a) + b;
            a = z.mapv(|v| layer.activation.value(v));
            pre.push(z);
        }
        Ok(Tape {
            pre,
            value: a[0],
        })
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        Ok(self.record(x)?.value)
    }

    /// Full output vector of the last layer (before output selection).
    pub fn forward_all(&self, x: &[f64]) -> Result<Array1<f64>> {
        check_len(self.input_dim, x.len())?;
        let mut a = Array1::from(x.to_vec());
        for layer in &self.layers {
            let z = layer.weights.dot(&a) + &layer.bias;
            a = z.mapv(|v| layer.activation.value(v));
        }
        Ok(a)
    }

    /// Row-wise evaluation of `f` on a batch `[n x d]`.
    pub fn forward_batch(&self, xs: ArrayView2<f64>) -> Result<Array1<f64>> {
        check_len(self.input_dim, xs.ncols())?;
        let mut a = xs.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let (w, b) = self.layer_params(l);
            let mut z = a.dot(&w.t());
            z += &b;
            z.mapv_inplace(|v| layer.activation.value(v));
            a = z;
        }
        Ok(a.column(0).to_owned())
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.value_and_gradient_impl(x)?.1)
    }

    fn value_and_gradient_impl(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let tape = self.record(x)?;
        let mut g = Array1::from(vec![1.0]);
        for l in (0..self.layers.len()).rev() {
            let act = self.layers[l].activation;
            let delta = &g * &tape.pre[l].mapv(|z| act.derivative(z));
            g = self.layer_params(l).0.t().dot(&delta);
        }
        Ok((tape.value, g.to_vec()))
    }

    fn check_smooth(&self) -> Result<()> {
        match self.relu_layer() {
            Some(layer) => Err(Error::SecondDerivativeUndefined { layer }),
            None => Ok(()),
        }
    }

    /// Forward-over-reverse sweep along the columns of `dirs` (`[d x r]`).
    ///
    /// Returns `(f(x), grad f(x), H(x) * dirs)`.
    fn tangent_sweep(&self, x: &[f64], dirs: ArrayView2<f64>) -> Result<(f64, Array1<f64>, Array2<f64>)> {
        self.check_smooth()?;
        let tape = self.record(x)?;
        let n = self.layers.len();

        // Forward tangents of the pre-activations.
        let mut zdots: Vec<Array2<f64>> = Vec::with_capacity(n);
        let mut adot = dirs.to_owned();
        for l in 0..n {
            let act = self.layers[l].activation;
            let zdot = self.layer_params(l).0.dot(&adot);
            let d1 = tape.pre[l].mapv(|z| act.derivative(z));
            adot = &zdot * &d1.view().insert_axis(Axis(1));
            zdots.push(zdot);
        }

        // Reverse sweep and its tangent.
        let mut g = Array1::from(vec![1.0]);
        let mut gdot = Array2::<f64>::zeros((1, dirs.ncols()));
        for l in (0..n).rev() {
            let act = self.layers[l].activation;
            let z = &tape.pre[l];
            let d1 = z.mapv(|v| act.derivative(v));
            let d2 = z.mapv(|v| act.second_derivative(v).unwrap_or(0.0));
            let delta = &g * &d1;
            let curv = &g * &d2;
            let ddot = &gdot * &d1.view().insert_axis(Axis(1))
                + &zdots[l] * &curv.view().insert_axis(Axis(1));
            let w = self.layer_params(l).0;
            g = w.t().dot(&delta);
            gdot = w.t().dot(&ddot);
        }
        Ok((tape.value, g, gdot))
    }

    pub fn hessian(&self, x: &[f64]) -> Result<Array2<f64>> {
        Ok(self.second_order_impl(x)?.hessian)
    }

    fn second_order_impl(&self, x: &[f64]) -> Result<SecondOrder> {
        let eye = Array2::<f64>::eye(self.input_dim);
        let (value, g, mut h) = self.tangent_sweep(x, eye.view())?;
        symmetrize(&mut h)?;
        Ok(SecondOrder {
            value,
            gradient: g.to_vec(),
            hessian: h,
        })
    }
}

/// Average the two triangles after checking they already agree.
fn symmetrize(h: &mut Array2<f64>) -> Result<()> {
    let d = h.nrows();
    let scale = 1.0 + h.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0_f64;
    for i in 0..d {
        for j in (i + 1)..d {
            worst = worst.max((h[[i, j]] - h[[j, i]]).abs());
        }
    }
    if worst > SYMMETRY_TOL * scale {
        return Err(Error::AsymmetricHessian(worst));
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let m = 0.5 * (h[[i, j]] + h[[j, i]]);
            h[[i, j]] = m;
            h[[j, i]] = m;
        }
    }
    Ok(())
}

impl ScalarModel for DenseNetwork {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.forward(x)
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.value_and_gradient_impl(x)
    }

    fn second_order(&self, x: &[f64]) -> Result<SecondOrder> {
        self.second_order_impl(x)
    }

    fn ensure_twice_differentiable(&self) -> Result<()> {
        self.check_smooth()
    }

    fn directional(&self, x: &[f64], v: &[f64]) -> Result<Directional> {
        check_len(self.input_dim, v.len())?;
        let dir = ndarray::aview1(v).insert_axis(Axis(1));
        let (value, g, hv) = self.tangent_sweep(x, dir)?;
        Ok(Directional {
            value,
            slope: g.iter().zip(v).map(|(a, b)| a * b).sum(),
            curvature: hv.column(0).iter().zip(v).map(|(a, b)| a * b).sum(),
        })
    }

    fn values(&self, xs: ArrayView2<f64>) -> Result<Vec<f64>> {
        Ok(self.forward_batch(xs)?.to_vec())
    }
}

/// On-disk JSON layout: weights are flattened row-major `[out x in]`.
#[derive(Serialize, Deserialize)]
struct NetworkDoc {
    input_dim: usize,
    layers: Vec<LayerDoc>,
    output_index: usize,
}

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl From<DenseNetwork> for NetworkDoc {
    fn from(net: DenseNetwork) -> Self {
        NetworkDoc {
            input_dim: net.input_dim,
            output_index: net.output_index,
            layers: net
                .layers
                .into_iter()
                .map(|l| LayerDoc {
                    weights: l.weights.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                    activation: l.activation,
                })
                .collect(),
        }
    }
}

impl TryFrom<NetworkDoc> for DenseNetwork {
    type Error = Error;

    fn try_from(doc: NetworkDoc) -> Result<Self> {
        let mut width = doc.input_dim;
        let mut layers = Vec::with_capacity(doc.layers.len());
        for (l, ld) in doc.layers.into_iter().enumerate() {
            let out = ld.bias.len();
            if out == 0 || ld.weights.len() != out * width {
                return Err(Error::InvalidArgument(format!(
                    "layer {l}: {} weights do not form a {out}x{width} matrix",
                    ld.weights.len()
                )));
            }
            let weights = Array2::from_shape_vec((out, width), ld.weights)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            layers.push(Layer::new(weights, Array1::from(ld.bias), ld.activation)?);
            width = out;
        }
        DenseNetwork::new(doc.input_dim, layers, doc.output_index)
    }
}

impl DenseNetwork {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
