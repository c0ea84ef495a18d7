//! First-order path attributions: Integrated Gradients and Expected Gradients.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::model::ScalarModel;
use crate::parallel::ordered_reduce;
use crate::quadrature::QuadratureSpec;
use crate::seed;

/// Reference distribution for expectation-based explanations.
#[derive(Clone, Debug)]
pub struct Background {
    /// One baseline per row.
    pub data: Array2<f64>,
    /// Rows kept (without replacement) before path sampling; `None` keeps all.
    pub n_baselines: Option<usize>,
    pub seed: u64,
}

/// How many `(baseline, alpha[, beta])` draws an expectation estimate uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSampling {
    pub draws: usize,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub enum BaselinePolicy {
    Single(Vec<f64>),
    Background(Background),
}

impl Background {
    pub fn new(data: Array2<f64>) -> Self {
        Self {
            data,
            n_baselines: None,
            seed: 0,
        }
    }

    /// Row indices of the baselines eligible for path draws.
    pub fn selected_rows(&self) -> Result<Vec<usize>> {
        let rows = self.data.nrows();
        if rows == 0 {
            return Err(Error::EmptyBackground);
        }
        match self.n_baselines {
            None => Ok((0..rows).collect()),
            Some(0) => Err(Error::InvalidArgument("n_baselines must be >= 1".into())),
            Some(n) if n > rows => Err(Error::InvalidArgument(format!(
                "cannot draw {n} baselines without replacement from {rows} rows"
            ))),
            Some(n) => {
                let mut idx: Vec<usize> = (0..rows).collect();
                idx.shuffle(&mut seed::rng_for(self.seed, seed::STREAM_BASELINE_SUBSET, 0));
                idx.truncate(n);
                Ok(idx)
            }
        }
    }
}

impl PathSampling {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.draws == 0 {
            return Err(Error::InvalidArgument("path sample count must be >= 1".into()));
        }
        Ok(())
    }
}

/// Descriptive metadata carried alongside attribution and interaction values.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExplainMeta {
    pub method: String,
    pub baseline: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draws: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub surgery_beta: Option<f64>,
}

/// Per-feature attributions `phi_i` with the outputs needed to check completeness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributionVector {
    pub values: Vec<f64>,
    /// `f(x)`
    pub input_output: f64,
    /// `f(x')`, or its mean over the sampled baselines.
    pub reference_output: f64,
    pub input: Vec<f64>,
    /// The baseline, or the mean of the sampled baselines.
    pub baseline: Vec<f64>,
    pub meta: ExplainMeta,
}

impl AttributionVector {
    pub fn completeness_residual(&self) -> f64 {
        completeness_residual(self)
    }
}

/// `|sum_i phi_i - (f(x) - reference_output)|`
pub fn completeness_residual(attr: &AttributionVector) -> f64 {
    let total: f64 = attr.values.iter().sum();
    (total - (attr.input_output - attr.reference_output)).abs()
}

pub(crate) fn point_on_path(baseline: &[f64], delta: &[f64], t: f64) -> Vec<f64> {
    baseline.iter().zip(delta).map(|(b, d)| b + t * d).collect()
}

pub(crate) fn difference(x: &[f64], baseline: &[f64]) -> Vec<f64> {
    x.iter().zip(baseline).map(|(a, b)| a - b).collect()
}

fn add_into(acc: &mut [f64], v: Vec<f64>) {
    acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
}

/// Riemann-sum Integrated Gradients on the straight path from `baseline` to `x`.
///
/// `phi_i = (x_i - x'_i) / k * sum_l df(x' + t_l (x - x'))/dx_i`. Only first
/// derivatives are used, so ReLU networks are accepted.
pub fn integrated_gradients<M: ScalarModel + ?Sized>(
    model: &M,
    x: &[f64],
    baseline: &[f64],
    quad: &QuadratureSpec,
) -> Result<AttributionVector> {
    quad.validate()?;
    let d = model.input_dim();
    check_len(d, x.len())?;
    check_len(d, baseline.len())?;
    let delta = difference(x, baseline);
    let nodes = quad.line_nodes();
    let inv_k = 1.0 / quad.k as f64;

    let mean_grad = ordered_reduce(
        nodes.len(),
        |l| {
            let (_, g) = model.value_and_gradient(&point_on_path(baseline, &delta, nodes[l]))?;
            Ok(g)
        },
        || vec![0.0; d],
        |acc, g| add_into(acc, g),
    )?;

    Ok(AttributionVector {
        values: mean_grad
            .iter()
            .zip(&delta)
            .map(|(g, dx)| dx * g * inv_k)
            .collect(),
        input_output: model.value(x)?,
        reference_output: model.value(baseline)?,
        input: x.to_vec(),
        baseline: baseline.to_vec(),
        meta: ExplainMeta {
            method: "integrated-gradients".into(),
            baseline: "single".into(),
            k: Some(quad.k),
            ..ExplainMeta::default()
        },
    })
}

/// One Monte-Carlo draw shared by the expectation estimators.
pub(crate) struct Draw {
    pub row: usize,
    pub alpha: f64,
    pub beta: f64,
}

pub(crate) fn draw(sampling: &PathSampling, rows: &[usize], index: usize) -> Draw {
    let mut rng = seed::rng_for(sampling.seed, seed::STREAM_PATH, index as u64);
    let row = rows[rng.random_range(0..rows.len())];
    let alpha = rng.random::<f64>();
    let beta = rng.random::<f64>();
    Draw { row, alpha, beta }
}

/// Expected Gradients: `E_{x' ~ D, alpha ~ U(0,1)} [(x_i - x'_i) df(x' + alpha (x - x'))/dx_i]`.
pub fn expected_gradients<M: ScalarModel + ?Sized>(
    model: &M,
    x: &[f64],
    background: &Background,
    sampling: &PathSampling,
) -> Result<AttributionVector> {
    sampling.validate()?;
    let d = model.input_dim();
    check_len(d, x.len())?;
    check_len(d, background.data.ncols())?;
    let rows = background.selected_rows()?;

    // Accumulator layout: [phi (d) | baseline sum (d) | reference sum]
    let sums = ordered_reduce(
        sampling.draws,
        |r| {
            let dr = draw(sampling, &rows, r);
            let base = background.data.row(dr.row).to_vec();
            let delta = difference(x, &base);
            let (_, g) = model.value_and_gradient(&point_on_path(&base, &delta, dr.alpha))?;
            let mut out = Vec::with_capacity(2 * d + 1);
            out.extend(g.iter().zip(&delta).map(|(g, dx)| g * dx));
            out.extend(base.iter().copied());
            out.push(model.value(&base)?);
            Ok(out)
        },
        || vec![0.0; 2 * d + 1],
        |acc, v| add_into(acc, v),
    )?;

    let n = sampling.draws as f64;
    Ok(AttributionVector {
        values: sums[..d].iter().map(|v| v / n).collect(),
        input_output: model.value(x)?,
        reference_output: sums[2 * d] / n,
        input: x.to_vec(),
        baseline: sums[d..2 * d].iter().map(|v| v / n).collect(),
        meta: ExplainMeta {
            method: "expected-gradients".into(),
            baseline: format!("background({})", rows.len()),
            draws: Some(sampling.draws),
            seed: Some(sampling.seed),
            ..ExplainMeta::default()
        },
    })
}
