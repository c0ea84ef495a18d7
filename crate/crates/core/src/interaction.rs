//! Integrated Hessians and Expected Hessians.
//!
//! Off-diagonal entries integrate `alpha * beta * d2f/dx_i dx_j` over the
//! product path `x' + alpha * beta * (x - x')`. Diagonal entries add the
//! first-order term `(x_i - x'_i) * df/dx_i` integrated over the same grid,
//! so that rows sum to the Integrated Gradients attribution of the feature.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::attribution::{
    difference, draw, point_on_path, AttributionVector, Background, ExplainMeta, PathSampling,
};
use crate::error::{check_len, Error, Result};
use crate::model::{ScalarModel, SecondOrder};
use crate::parallel::ordered_reduce;
use crate::quadrature::QuadratureSpec;

/// `d x d` pairwise interactions with main effects on the diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionMatrix {
    pub gamma: Array2<f64>,
    /// `f(x)`
    pub input_output: f64,
    /// `f(x')`, its mean over sampled baselines, or `f(x)` for pathless methods.
    pub reference_output: f64,
    pub input: Vec<f64>,
    pub baseline: Vec<f64>,
    pub meta: ExplainMeta,
    /// Per-entry Monte-Carlo standard errors, when the method is stochastic.
    pub std_error: Option<Array2<f64>>,
}

impl InteractionMatrix {
    pub fn dim(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn total(&self) -> f64 {
        self.gamma.sum()
    }

    /// `max_{i != j} |gamma_ij - gamma_ji|`
    pub fn symmetry_gap(&self) -> f64 {
        let d = self.dim();
        let mut gap = 0.0_f64;
        for i in 0..d {
            for j in (i + 1)..d {
                gap = gap.max((self.gamma[[i, j]] - self.gamma[[j, i]]).abs());
            }
        }
        gap
    }

    pub fn interaction_completeness_residual(&self) -> f64 {
        interaction_completeness_residual(self)
    }

    /// Off-diagonal pairs `(i, j, gamma_ij)` with `i < j`.
    pub fn pairs(&self) -> Vec<(usize, usize, f64)> {
        let d = self.dim();
        let mut out = Vec::with_capacity(d * d.saturating_sub(1) / 2);
        for i in 0..d {
            for j in (i + 1)..d {
                out.push((i, j, self.gamma[[i, j]]));
            }
        }
        out
    }
}

/// `|sum_ij gamma_ij - (f(x) - reference_output)|`
pub fn interaction_completeness_residual(im: &InteractionMatrix) -> f64 {
    (im.total() - (im.input_output - im.reference_output)).abs()
}

/// `|gamma_ii - (phi_i - sum_{j != i} gamma_ij)|` for matching explanations.
pub fn main_effect_residual(im: &InteractionMatrix, attr: &AttributionVector, i: usize) -> Result<f64> {
    let d = im.dim();
    check_len(d, attr.values.len())?;
    if i >= d {
        return Err(Error::InvalidArgument(format!("feature {i} out of range for {d} features")));
    }
    if im.baseline != attr.baseline || im.input != attr.input {
        return Err(Error::BaselineMismatch);
    }
    let cross: f64 = (0..d).filter(|&j| j != i).map(|j| im.gamma[[i, j]]).sum();
    Ok((im.gamma[[i, i]] - (attr.values[i] - cross)).abs())
}

/// Add one weighted path sample to an interaction accumulator.
///
/// `hess_weight` scales `delta_i delta_j H_ij`, `grad_weight` scales the
/// diagonal first-order term `delta_i g_i`.
fn accumulate(acc: &mut Array2<f64>, so: &SecondOrder, delta: &[f64], hess_weight: f64, grad_weight: f64) {
    let d = delta.len();
    for i in 0..d {
        let wi = hess_weight * delta[i];
        for j in 0..d {
            acc[[i, j]] += wi * delta[j] * so.hessian[[i, j]];
        }
        acc[[i, i]] += grad_weight * delta[i] * so.gradient[i];
    }
}

/// Integrated Hessians on a `k x m` product grid.
///
/// Each distinct path position `t = (l/k)(p/m)` is evaluated once and weighted
/// by its multiplicity.
pub fn integrated_hessians<M: ScalarModel + ?Sized>(
    model: &M,
    x: &[f64],
    baseline: &[f64],
    quad: &QuadratureSpec,
) -> Result<InteractionMatrix> {
    quad.check_budget()?;
    model.ensure_twice_differentiable()?;
    let d = model.input_dim();
    check_len(d, x.len())?;
    check_len(d, baseline.len())?;
    let delta = difference(x, baseline);
    let nodes = quad.product_nodes();

    let gamma = ordered_reduce(
        nodes.len(),
        |n| {
            let node = nodes[n];
            let so = model.second_order(&point_on_path(baseline, &delta, node.t))?;
            let mut part = Array2::zeros((d, d));
            accumulate(&mut part, &so, &delta, node.weight * node.t, node.weight);
            Ok(part)
        },
        || Array2::zeros((d, d)),
        |acc, part| *acc += &part,
    )?;

    Ok(InteractionMatrix {
        gamma,
        input_output: model.value(x)?,
        reference_output: model.value(baseline)?,
        input: x.to_vec(),
        baseline: baseline.to_vec(),
        meta: ExplainMeta {
            method: "integrated-hessians".into(),
            baseline: "single".into(),
            k: Some(quad.k),
            m: Some(quad.m),
            ..ExplainMeta::default()
        },
        std_error: None,
    })
}

/// Sum of all Integrated Hessians entries without forming the matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InteractionTotal {
    pub total: f64,
    pub input_output: f64,
    pub reference_output: f64,
}

impl InteractionTotal {
    pub fn residual(&self) -> f64 {
        (self.total - (self.input_output - self.reference_output)).abs()
    }
}

/// `sum_ij gamma_ij` on the same grid as [`integrated_hessians`].
///
/// Contracting the matrix against the all-ones vector reduces every node to one
/// directional derivative pair `(grad f . delta, delta^T H delta)`, which costs
/// a single Hessian-vector product instead of `d`.
pub fn integrated_hessians_total<M: ScalarModel + ?Sized>(
    model: &M,
    x: &[f64],
    baseline: &[f64],
    quad: &QuadratureSpec,
) -> Result<InteractionTotal> {
    quad.check_budget()?;
    model.ensure_twice_differentiable()?;
    let d = model.input_dim();
    check_len(d, x.len())?;
    check_len(d, baseline.len())?;
    let delta = difference(x, baseline);
    let nodes = quad.product_nodes();

    let total = ordered_reduce(
        nodes.len(),
        |n| {
            let node = nodes[n];
            let dir = model.directional(&point_on_path(baseline, &delta, node.t), &delta)?;
            Ok(node.weight * (node.t * dir.curvature + dir.slope))
        },
        || 0.0,
        |acc, v| *acc += v,
    )?;

    Ok(InteractionTotal {
        total,
        input_output: model.value(x)?,
        reference_output: model.value(baseline)?,
    })
}

/// Expected Hessians: Monte-Carlo over `x' ~ D` and independent `alpha, beta ~ U(0,1)`.
pub fn expected_hessians<M: ScalarModel + ?Sized>(
    model: &M,
    x: &[f64],
    background: &Background,
    sampling: &PathSampling,
) -> Result<InteractionMatrix> {
    sampling.validate()?;
    model.ensure_twice_differentiable()?;
    let d = model.input_dim();
    check_len(d, x.len())?;
    check_len(d, background.data.ncols())?;
    let rows = background.selected_rows()?;

    struct Acc {
        gamma: Array2<f64>,
        baseline: Vec<f64>,
        reference: f64,
    }
    let zero = || Acc {
        gamma: Array2::zeros((d, d)),
        baseline: vec![0.0; d],
        reference: 0.0,
    };

    let acc = ordered_reduce(
        sampling.draws,
        |r| {
            let dr = draw(sampling, &rows, r);
            let base = background.data.row(dr.row).to_vec();
            let delta = difference(x, &base);
            let t = dr.alpha * dr.beta;
            let so = model.second_order(&point_on_path(&base, &delta, t))?;
            let mut part = zero();
            accumulate(&mut part.gamma, &so, &delta, t, 1.0);
            part.reference = model.value(&base)?;
            part.baseline = base;
            Ok(part)
        },
        zero,
        |acc, part| {
            acc.gamma += &part.gamma;
            acc.baseline.iter_mut().zip(&part.baseline).for_each(|(a, b)| *a += b);
            acc.reference += part.reference;
        },
    )?;

    let n = sampling.draws as f64;
    Ok(InteractionMatrix {
        gamma: acc.gamma / n,
        input_output: model.value(x)?,
        reference_output: acc.reference / n,
        input: x.to_vec(),
        baseline: acc.baseline.iter().map(|v| v / n).collect(),
        meta: ExplainMeta {
            method: "expected-hessians".into(),
            baseline: format!("background({})", rows.len()),
            draws: Some(sampling.draws),
            seed: Some(sampling.seed),
            ..ExplainMeta::default()
        },
        std_error: None,
    })
}

/// JSON document mirroring [`InteractionMatrix`].
#[derive(Serialize, Deserialize)]
pub struct InteractionDoc {
    pub gamma: Vec<Vec<f64>>,
    pub input_output: f64,
    pub reference_output: f64,
    pub input: Vec<f64>,
    pub baseline: Vec<f64>,
    pub meta: ExplainMeta,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<Vec<Vec<f64>>>,
}

fn rows_of(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

impl From<&InteractionMatrix> for InteractionDoc {
    fn from(im: &InteractionMatrix) -> Self {
        Self {
            gamma: rows_of(&im.gamma),
            input_output: im.input_output,
            reference_output: im.reference_output,
            input: im.input.clone(),
            baseline: im.baseline.clone(),
            meta: im.meta.clone(),
            std_error: im.std_error.as_ref().map(rows_of),
        }
    }
}
