//! Minibatch training for [`DenseNetwork`].

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::activation::{sigmoid, Activation};
use crate::error::{check_len, Error, Result};
use crate::network::DenseNetwork;
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    SquaredError,
    /// Binary cross-entropy on the network output interpreted as a logit.
    Logistic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Optimizer {
    PlainGradient,
    Momentum { momentum: f64 },
    AdaptiveMoment { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::AdaptiveMoment {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LrSchedule {
    Constant,
    /// Cosine decay from the base rate to zero over all epochs.
    Cosine,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: Loss,
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub schedule: LrSchedule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: Loss::SquaredError,
            optimizer: Optimizer::adam(),
            learning_rate: 1e-3,
            epochs: 100,
            batch_size: 32,
            seed: 0,
            schedule: LrSchedule::Constant,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("epochs and batch size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Loss over the full training set after the last epoch.
    pub final_loss: f64,
    pub epochs: usize,
}

struct OptState {
    first: Vec<(Array2<f64>, Array1<f64>)>,
    second: Vec<(Array2<f64>, Array1<f64>)>,
    step: i32,
}

impl OptState {
    fn new(net: &DenseNetwork) -> Self {
        let zeros: Vec<_> = net
            .layers()
            .iter()
            .map(|l| (Array2::zeros(l.weights.raw_dim()), Array1::zeros(l.bias.len())))
            .collect();
        Self {
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }
}

fn loss_value(loss: Loss, pred: f64, target: f64) -> f64 {
    match loss {
        Loss::SquaredError => (pred - target).powi(2),
        Loss::Logistic => Activation::Softplus { beta: 1.0 }.value(pred) - target * pred,
    }
}

fn loss_slope(loss: Loss, pred: f64, target: f64) -> f64 {
    match loss {
        Loss::SquaredError => 2.0 * (pred - target),
        Loss::Logistic => sigmoid(pred) - target,
    }
}

/// Mean loss of `net` over a dataset.
pub fn evaluate_loss(net: &DenseNetwork, xs: ArrayView2<f64>, ys: ArrayView1<f64>, loss: Loss) -> Result<f64> {
    check_len(xs.nrows(), ys.len())?;
    let preds = net.forward_batch(xs)?;
    Ok(preds
        .iter()
        .zip(ys)
        .map(|(&p, &y)| loss_value(loss, p, y))
        .sum::<f64>()
        / ys.len().max(1) as f64)
}

/// Continue training `net` from its current weights.
///
/// Batch order is drawn from `cfg.seed`; identical inputs give bitwise-identical
/// weights.
pub fn train(
    net: &DenseNetwork,
    xs: ArrayView2<f64>,
    ys: ArrayView1<f64>,
    cfg: &TrainConfig,
) -> Result<(DenseNetwork, TrainReport)> {
    cfg.validate()?;
    check_len(xs.nrows(), ys.len())?;
    check_len(net.input_dim(), xs.ncols())?;
    let n = xs.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let mut net = net.clone();
    let mut state = OptState::new(&net);
    let mut order: Vec<usize> = (0..n).collect();
    let out = net.output_index();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut seed::rng_for(cfg.seed, seed::STREAM_BATCH, epoch as u64));
        let lr = match cfg.schedule {
            LrSchedule::Constant => cfg.learning_rate,
            LrSchedule::Cosine => {
                let progress = epoch as f64 / cfg.epochs as f64;
                0.5 * cfg.learning_rate * (1.0 + (std::f64::consts::PI * progress).cos())
            }
        };
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let bx = xs.select(Axis(0), batch);
            let by = ys.select(Axis(0), batch);
            epoch_loss += step(&mut net, &mut state, bx.view(), by.view(), out, cfg, lr);
        }
        if !epoch_loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
    }

    let final_loss = evaluate_loss(&net, xs, ys, cfg.loss)?;
    if !final_loss.is_finite() {
        return Err(Error::Divergence { epoch: cfg.epochs });
    }
    Ok((
        net,
        TrainReport {
            final_loss,
            epochs: cfg.epochs,
        },
    ))
}

/// Initialize Glorot-uniform weights from `cfg.seed`, then [`train`].
pub fn fit(
    widths: &[usize],
    hidden: Activation,
    output: Activation,
    xs: ArrayView2<f64>,
    ys: ArrayView1<f64>,
    cfg: &TrainConfig,
) -> Result<(DenseNetwork, TrainReport)> {
    let init = DenseNetwork::xavier(widths, hidden, output, cfg.seed)?;
    train(&init, xs, ys, cfg)
}

/// [`fit`] a regression net on standardized targets, then fold the scaling back
/// into the identity output layer so the returned net predicts `ys` directly.
pub fn fit_standardized(
    widths: &[usize],
    hidden: Activation,
    xs: ArrayView2<f64>,
    ys: ArrayView1<f64>,
    cfg: &TrainConfig,
) -> Result<(DenseNetwork, TrainReport)> {
    if cfg.loss != Loss::SquaredError {
        return Err(Error::InvalidArgument("standardized fitting is for squared-error regression".into()));
    }
    let mean = ys.mean().unwrap_or(0.0);
    let std = ys.std(0.0);
    let scale = if std > 0.0 && std.is_finite() { std } else { 1.0 };
    let zs = ys.mapv(|y| (y - mean) / scale);
    let (net, report) = fit(widths, hidden, Activation::Identity, xs, zs.view(), cfg)?;
    let net = net.with_affine_output(scale, mean)?;
    let final_loss = evaluate_loss(&net, xs, ys, cfg.loss)?;
    Ok((net, TrainReport { final_loss, ..report }))
}

/// One optimizer step on a minibatch; returns the summed batch loss.
fn step(
    net: &mut DenseNetwork,
    state: &mut OptState,
    bx: ArrayView2<f64>,
    by: ArrayView1<f64>,
    out: usize,
    cfg: &TrainConfig,
    lr: f64,
) -> f64 {
    let b = bx.nrows() as f64;
    let n_layers = net.layers().len();

    let mut acts: Vec<Array2<f64>> = Vec::with_capacity(n_layers + 1);
    let mut pres: Vec<Array2<f64>> = Vec::with_capacity(n_layers);
    acts.push(bx.to_owned());
    for layer in net.layers() {
        let mut z = acts.last().unwrap().dot(&layer.weights.t());
        z += &layer.bias;
        let a = z.mapv(|v| layer.activation.value(v));
        pres.push(z);
        acts.push(a);
    }

    let final_act = acts.last().unwrap();
    let mut grad_a = Array2::<f64>::zeros(final_act.raw_dim());
    let mut batch_loss = 0.0;
    for (r, &y) in by.iter().enumerate() {
        let p = final_act[[r, out]];
        batch_loss += loss_value(cfg.loss, p, y);
        grad_a[[r, out]] = loss_slope(cfg.loss, p, y) / b;
    }

    state.step += 1;
    for l in (0..n_layers).rev() {
        let act = net.layers()[l].activation;
        let grad_z = grad_a * &pres[l].mapv(|z| act.derivative(z));
        let grad_w = grad_z.t().dot(&acts[l]);
        let grad_b = grad_z.sum_axis(Axis(0));
        if l > 0 {
            grad_a = grad_z.dot(&net.layers()[l].weights);
        } else {
            grad_a = Array2::zeros((0, 0));
        }
        let layer = &mut net.layers_mut()[l];
        apply_update(&mut layer.weights, &grad_w, &mut state.first[l].0, &mut state.second[l].0, cfg.optimizer, lr, state.step);
        apply_update(&mut layer.bias, &grad_b, &mut state.first[l].1, &mut state.second[l].1, cfg.optimizer, lr, state.step);
    }
    batch_loss
}

fn apply_update<D: ndarray::Dimension>(
    param: &mut ndarray::Array<f64, D>,
    grad: &ndarray::Array<f64, D>,
    first: &mut ndarray::Array<f64, D>,
    second: &mut ndarray::Array<f64, D>,
    opt: Optimizer,
    lr: f64,
    step: i32,
) {
    match opt {
        Optimizer::PlainGradient => param.scaled_add(-lr, grad),
        Optimizer::Momentum { momentum } => {
            first.zip_mut_with(grad, |v, &g| *v = momentum * *v + g);
            param.scaled_add(-lr, first);
        }
        Optimizer::AdaptiveMoment { beta1, beta2, eps } => {
            let c1 = 1.0 - beta1.powi(step);
            let c2 = 1.0 - beta2.powi(step);
            ndarray::Zip::from(param)
                .and(grad)
                .and(first)
                .and(second)
                .for_each(|p, &g, m, v| {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                });
        }
    }
}

/// Coefficient of determination of `net` on a dataset.
pub fn r_squared(net: &DenseNetwork, xs: ArrayView2<f64>, ys: ArrayView1<f64>) -> Result<f64> {
    check_len(xs.nrows(), ys.len())?;
    let preds = net.forward_batch(xs)?;
    let mean = ys.mean().unwrap_or(0.0);
    let ss_res: f64 = preds.iter().zip(ys).map(|(p, y)| (y - p).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}
