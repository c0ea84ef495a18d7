//! XOR demonstration, smoothing convergence study and computation-time harness.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use ndarray::{array, Array1};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::median;
use super::table::{num, Table};
use crate::activation::Activation;
use crate::attribution::integrated_gradients;
use crate::error::{Error, Result};
use crate::interaction::{integrated_hessians, integrated_hessians_total, InteractionMatrix};
use crate::network::DenseNetwork;
use crate::quadrature::{QuadratureSpec, RiemannRule};
use crate::rivals::{input_hessian, neural_interaction_detection, sii_exact, sii_monte_carlo, CoalitionGame, NidAggregation};
use crate::seed;
use crate::train::{fit, LrSchedule, TrainConfig};
use crate::AttributionVector;

fn gaussian_point(d: usize, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = seed::rng_for(seed, seed::STREAM_TASK, index);
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XorConfig {
    pub hidden: usize,
    pub trainer: TrainConfig,
    pub surgery_beta: f64,
    pub quad: QuadratureSpec,
    /// Largest tolerated error of the trained ReLU network on the four points.
    pub max_error: f64,
}

impl Default for XorConfig {
    fn default() -> Self {
        Self {
            hidden: 16,
            trainer: TrainConfig {
                learning_rate: 1e-2,
                epochs: 3000,
                batch_size: 4,
                seed: 0,
                schedule: LrSchedule::Constant,
                ..TrainConfig::default()
            },
            surgery_beta: 10.0,
            quad: QuadratureSpec::square(256).expect("256 >= 1"),
            max_error: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct XorReport {
    /// ReLU network as trained.
    pub relu_net: DenseNetwork,
    /// The network explained, after SoftPlus surgery.
    pub net: DenseNetwork,
    /// Largest error of the ReLU network on the truth table.
    pub train_error: f64,
    /// Smoothed outputs at (0,0), (0,1), (1,0), (1,1).
    pub outputs: [f64; 4],
    pub phi_00: AttributionVector,
    pub phi_11: AttributionVector,
    pub gamma_11: InteractionMatrix,
}

impl XorReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(["quantity", "input", "i", "j", "value"]).meta("surgery_beta", self.gamma_11.meta.surgery_beta.unwrap_or(f64::NAN));
        for (name, attr) in [("phi", &self.phi_00), ("phi", &self.phi_11)] {
            let input = format!("({},{})", attr.input[0], attr.input[1]);
            for (i, v) in attr.values.iter().enumerate() {
                t.push(vec![name.into(), input.clone(), i.to_string(), String::new(), num(*v)]);
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                t.push(vec!["gamma".into(), "(1,1)".into(), i.to_string(), j.to_string(), num(self.gamma_11.gamma[[i, j]])]);
            }
        }
        for (p, out) in ["(0,0)", "(0,1)", "(1,0)", "(1,1)"].iter().zip(self.outputs) {
            t.push(vec!["f".into(), (*p).into(), String::new(), String::new(), num(out)]);
        }
        t
    }
}

/// Train a small ReLU network on XOR, smooth it, and explain (0,0) and (1,1)
/// against the zeros baseline.
pub fn xor_demo(cfg: &XorConfig) -> Result<XorReport> {
    let xs = array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
    let ys = array![0.0, 1.0, 1.0, 0.0];
    let (relu_net, _) = fit(&[2, cfg.hidden, 1], Activation::Relu, Activation::Identity, xs.view(), ys.view(), &cfg.trainer)?;
    let preds = relu_net.forward_batch(xs.view())?;
    let train_error = preds.iter().zip(&ys).fold(0.0_f64, |m, (p, y)| m.max((p - y).abs()));
    if train_error.is_nan() || train_error >= cfg.max_error {
        return Err(Error::UnderTrained {
            metric: "max XOR error",
            value: train_error,
            requirement: format!("< {}", cfg.max_error),
        });
    }
    let net = relu_net.softplus_surgery(cfg.surgery_beta)?;
    let outputs: Array1<f64> = net.forward_batch(xs.view())?;
    let zeros = [0.0, 0.0];
    let mut phi_00 = integrated_gradients(&net, &[0.0, 0.0], &zeros, &cfg.quad)?;
    let mut phi_11 = integrated_gradients(&net, &[1.0, 1.0], &zeros, &cfg.quad)?;
    let mut gamma_11 = integrated_hessians(&net, &[1.0, 1.0], &zeros, &cfg.quad)?;
    phi_00.meta.surgery_beta = Some(cfg.surgery_beta);
    phi_11.meta.surgery_beta = Some(cfg.surgery_beta);
    gamma_11.meta.surgery_beta = Some(cfg.surgery_beta);
    Ok(XorReport {
        relu_net,
        net,
        train_error,
        outputs: [outputs[0], outputs[1], outputs[2], outputs[3]],
        phi_00,
        phi_11,
        gamma_11,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub d: usize,
    pub hidden_layers: usize,
    pub width: usize,
    pub betas: Vec<f64>,
    pub ks: Vec<usize>,
    pub n_samples: usize,
    pub rule: RiemannRule,
    pub seed: u64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            d: 100,
            hidden_layers: 5,
            width: 50,
            betas: vec![10.0, 5.0, 2.0, 1.0],
            ks: vec![4, 8, 16, 32, 64, 128, 256],
            n_samples: 10,
            // Right-endpoint error is dominated by an O(1/k) endpoint term that
            // masks the smoothness effect being measured.
            rule: RiemannRule::Midpoint,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub layers: usize,
    pub beta: f64,
    pub k: usize,
    /// Mean over samples of `|sum Gamma - (f(x) - f(0))| / |f(x) - f(0)|`.
    pub mean_error: f64,
    pub median_error: f64,
}

impl ConvergenceRow {
    pub fn table(rows: &[ConvergenceRow]) -> Table {
        let mut t = Table::new(["layers", "beta", "k", "mean_error", "median_error"]);
        for r in rows {
            t.push(vec![r.layers.to_string(), num(r.beta), r.k.to_string(), num(r.mean_error), num(r.median_error)]);
        }
        t
    }
}

/// Relative interaction-completeness error of a fixed random SoftPlus network
/// as the sharpness `beta` and the grid size `k = m` vary.
///
/// Weights are drawn once; only `beta` changes between rows. Totals use the
/// contracted route, which yields exactly the sum of the full matrix.
pub fn convergence_study(cfg: &ConvergenceConfig) -> Result<Vec<ConvergenceRow>> {
    if cfg.n_samples == 0 || cfg.hidden_layers == 0 {
        return Err(Error::InvalidArgument("need at least one sample and one hidden layer".into()));
    }
    let mut widths = vec![cfg.d];
    widths.extend(std::iter::repeat_n(cfg.width, cfg.hidden_layers));
    widths.push(1);
    let template = DenseNetwork::xavier(&widths, Activation::Identity, Activation::Identity, cfg.seed)?;
    let points: Vec<Vec<f64>> = (0..cfg.n_samples).map(|i| gaussian_point(cfg.d, cfg.seed, i as u64)).collect();
    let zeros = vec![0.0; cfg.d];

    let mut rows = Vec::new();
    for &beta in &cfg.betas {
        let act = Activation::softplus(beta)?;
        let mut net = template.clone();
        let last = net.layers().len() - 1;
        for layer in &mut net.layers_mut()[..last] {
            layer.activation = act;
        }
        for &k in &cfg.ks {
            let quad = QuadratureSpec::square(k)?.with_rule(cfg.rule);
            let errors = points
                .iter()
                .map(|x| {
                    let t = integrated_hessians_total(&net, x, &zeros, &quad)?;
                    Ok(t.residual() / (t.input_output - t.reference_output).abs())
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(ConvergenceRow {
                layers: cfg.hidden_layers,
                beta,
                k,
                mean_error: errors.iter().sum::<f64>() / errors.len() as f64,
                median_error: median(&errors),
            });
        }
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimingMethod {
    IntegratedHessians,
    InputHessian,
    SiiMonteCarlo,
    SiiExact,
    Nid,
}

impl TimingMethod {
    pub const ALL: [TimingMethod; 5] = [
        TimingMethod::IntegratedHessians,
        TimingMethod::InputHessian,
        TimingMethod::SiiMonteCarlo,
        TimingMethod::SiiExact,
        TimingMethod::Nid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TimingMethod::IntegratedHessians => "ih",
            TimingMethod::InputHessian => "hessian",
            TimingMethod::SiiMonteCarlo => "sii-mc",
            TimingMethod::SiiExact => "sii",
            TimingMethod::Nid => "nid",
        }
    }
}

impl fmt::Display for TimingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TimingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown timing method `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingConfig {
    pub dims: Vec<usize>,
    pub n_samples: usize,
    pub hidden_layers: usize,
    pub width: usize,
    pub methods: Vec<TimingMethod>,
    pub quad: QuadratureSpec,
    pub sii_samples: usize,
    /// Wall-clock budget per (method, d); a run projected past it is recorded as capped.
    pub time_cap: Duration,
    pub seed: u64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            dims: vec![5, 50, 500],
            n_samples: 1000,
            hidden_layers: 5,
            width: 128,
            methods: TimingMethod::ALL.to_vec(),
            quad: QuadratureSpec::square(16).expect("16 >= 1"),
            sii_samples: 200,
            time_cap: Duration::from_secs(600),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub d: usize,
    pub method: TimingMethod,
    /// Samples actually explained.
    pub samples_done: usize,
    /// Measured seconds for `samples_done` samples.
    pub seconds: f64,
    /// Projected seconds for the full sample count.
    pub projected_seconds: f64,
    /// `"capped"`, `"skipped"` or `"complete"`.
    pub status: String,
}

impl TimingRow {
    pub fn seconds_per_sample(&self) -> f64 {
        self.seconds / self.samples_done.max(1) as f64
    }

    pub fn table(rows: &[TimingRow], hardware: &str) -> Table {
        let mut t = Table::new(["d", "method", "samples_done", "seconds", "projected_seconds", "status"]).meta("hardware", hardware);
        for r in rows {
            t.push(vec![
                r.d.to_string(),
                r.method.name().into(),
                r.samples_done.to_string(),
                num(r.seconds),
                num(r.projected_seconds),
                r.status.clone(),
            ]);
        }
        t
    }
}

/// Short description of the machine running the harness.
pub fn hardware_descriptor() -> String {
    let threads = rayon::current_num_threads();
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|m| m.trim().replace(' ', "_"))
        })
        .unwrap_or_else(|| "unknown".into());
    format!("{}-{};cpu={cpu};threads={threads}", std::env::consts::OS, std::env::consts::ARCH)
}

/// Wall-clock seconds for every method to produce all pairwise interactions on
/// `n_samples` random inputs of a `hidden_layers x width` SoftPlus network.
pub fn timing_harness(cfg: &TimingConfig) -> Result<Vec<TimingRow>> {
    let mut rows = Vec::new();
    for &d in &cfg.dims {
        let mut widths = vec![d];
        widths.extend(std::iter::repeat_n(cfg.width, cfg.hidden_layers));
        widths.push(1);
        let net = DenseNetwork::xavier(&widths, Activation::Softplus { beta: 1.0 }, Activation::Identity, cfg.seed)?;
        let zeros = vec![0.0; d];
        let points: Vec<Vec<f64>> = (0..cfg.n_samples).map(|i| gaussian_point(d, cfg.seed, i as u64)).collect();

        for &method in &cfg.methods {
            if method == TimingMethod::SiiExact && d > crate::rivals::SII_EXACT_MAX_DIM {
                rows.push(TimingRow {
                    d,
                    method,
                    samples_done: 0,
                    seconds: 0.0,
                    projected_seconds: f64::INFINITY,
                    status: "skipped".into(),
                });
                continue;
            }
            if method == TimingMethod::Nid {
                // Global method: one pass over the weights serves every sample.
                let start = Instant::now();
                let ranked = neural_interaction_detection(&net, NidAggregation::Min);
                std::hint::black_box(ranked);
                let s = start.elapsed().as_secs_f64();
                rows.push(TimingRow {
                    d,
                    method,
                    samples_done: cfg.n_samples,
                    seconds: s,
                    projected_seconds: s,
                    status: "complete".into(),
                });
                continue;
            }
            let start = Instant::now();
            let mut done = 0;
            let mut status = "complete";
            for (i, x) in points.iter().enumerate() {
                let im = match method {
                    TimingMethod::IntegratedHessians => integrated_hessians(&net, x, &zeros, &cfg.quad)?,
                    TimingMethod::InputHessian => input_hessian(&net, x)?,
                    TimingMethod::SiiMonteCarlo => {
                        let game = CoalitionGame::new(&net, x, &zeros)?;
                        sii_monte_carlo(&game, cfg.sii_samples, seed::derive(cfg.seed, seed::STREAM_SII, i as u64))?
                    }
                    TimingMethod::SiiExact => sii_exact(&CoalitionGame::new(&net, x, &zeros)?)?,
                    TimingMethod::Nid => unreachable!("handled above"),
                };
                std::hint::black_box(im);
                done += 1;
                let elapsed = start.elapsed();
                let projected = elapsed.as_secs_f64() / done as f64 * cfg.n_samples as f64;
                if done < cfg.n_samples && projected > cfg.time_cap.as_secs_f64() {
                    status = "capped";
                    break;
                }
            }
            let seconds = start.elapsed().as_secs_f64();
            rows.push(TimingRow {
                d,
                method,
                samples_done: done,
                seconds,
                projected_seconds: seconds / done as f64 * cfg.n_samples as f64,
                status: status.into(),
            });
        }
    }
    Ok(rows)
}
