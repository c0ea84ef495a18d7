//! Rank correlation between detected and true interactions, and randomization sanity checks.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::tasks::{all_pairs, rank_corr_task, split_indices, RankCorrVariant, SyntheticTask};
use super::{median, spearman};
use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::interaction::integrated_hessians;
use crate::network::DenseNetwork;
use crate::parallel::ordered_map;
use crate::quadrature::QuadratureSpec;
use crate::rivals::{
    input_hessian, neural_interaction_detection, sii_exact, sii_monte_carlo, CoalitionGame, NidAggregation,
};
use crate::seed;
use crate::train::{fit_standardized, r_squared, LrSchedule, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankCorrMethod {
    IntegratedHessians,
    InputHessian,
    SiiExact,
    SiiMonteCarlo,
    Nid,
    /// The generating terms themselves; scores 1 by construction.
    Truth,
}

impl RankCorrMethod {
    pub const ALL: [RankCorrMethod; 6] = [
        RankCorrMethod::IntegratedHessians,
        RankCorrMethod::InputHessian,
        RankCorrMethod::SiiExact,
        RankCorrMethod::SiiMonteCarlo,
        RankCorrMethod::Nid,
        RankCorrMethod::Truth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RankCorrMethod::IntegratedHessians => "ih",
            RankCorrMethod::InputHessian => "hessian",
            RankCorrMethod::SiiExact => "sii",
            RankCorrMethod::SiiMonteCarlo => "sii-mc",
            RankCorrMethod::Nid => "nid",
            RankCorrMethod::Truth => "truth",
        }
    }
}

impl fmt::Display for RankCorrMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RankCorrMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown rank-correlation method `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankCorrConfig {
    pub n_samples: usize,
    pub hidden: Vec<usize>,
    pub trainer: TrainConfig,
    /// Validation R^2 the trained network must exceed.
    pub min_r2: f64,
    pub quad: QuadratureSpec,
    pub sii_samples: usize,
    /// Mean is markedly more stable across training seeds than min on dense, unregularized nets.
    pub nid_aggregation: NidAggregation,
    /// Validation rows explained per method.
    pub n_explain: usize,
    pub seed: u64,
}

impl Default for RankCorrConfig {
    fn default() -> Self {
        Self {
            n_samples: 10_000,
            hidden: vec![64, 64],
            trainer: TrainConfig {
                learning_rate: 3e-3,
                epochs: 150,
                batch_size: 64,
                schedule: LrSchedule::Cosine,
                ..TrainConfig::default()
            },
            min_r2: 0.99,
            quad: QuadratureSpec::square(16).expect("16 >= 1"),
            sii_samples: 200,
            nid_aggregation: NidAggregation::Mean,
            n_explain: 1000,
            seed: 0,
        }
    }
}

/// A rank-correlation task with a network trained past the R^2 requirement.
pub struct RankCorrModel {
    pub variant: RankCorrVariant,
    pub task: SyntheticTask,
    pub net: DenseNetwork,
    pub train_rows: Vec<usize>,
    pub validation_r2: f64,
    /// Validation rows whose interactions are scored.
    pub explain_rows: Vec<usize>,
    pub cfg: RankCorrConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankCorrResult {
    pub variant: RankCorrVariant,
    pub method: RankCorrMethod,
    pub global: f64,
    /// `None` for global-only methods.
    pub local: Option<f64>,
}

fn widths(d: usize, hidden: &[usize]) -> Vec<usize> {
    let mut w = vec![d];
    w.extend(hidden);
    w.push(1);
    w
}

/// Generate the variant's data and train the two-hidden-layer Tanh network once.
pub fn prepare_rank_corr(variant: RankCorrVariant, cfg: &RankCorrConfig) -> Result<RankCorrModel> {
    let task = rank_corr_task(variant, cfg.n_samples, seed::derive(cfg.seed, seed::STREAM_TASK, 0));
    let (train_rows, val_rows) = split_indices(task.n_samples(), 0.8, seed::derive(cfg.seed, seed::STREAM_SPLIT, 0));
    let xs = task.xs.select(Axis(0), &train_rows);
    let ys = task.ys.select(Axis(0), &train_rows);
    let trainer = TrainConfig {
        seed: seed::derive(cfg.seed, seed::STREAM_INIT, 0),
        ..cfg.trainer.clone()
    };
    let (net, _) = fit_standardized(&widths(task.d, &cfg.hidden), Activation::Tanh, xs.view(), ys.view(), &trainer)?;
    let xv = task.xs.select(Axis(0), &val_rows);
    let yv = task.ys.select(Axis(0), &val_rows);
    let validation_r2 = r_squared(&net, xv.view(), yv.view())?;
    if validation_r2.is_nan() || validation_r2 <= cfg.min_r2 {
        return Err(Error::UnderTrained {
            metric: "validation R^2",
            value: validation_r2,
            requirement: format!("> {}", cfg.min_r2),
        });
    }
    let explain_rows = val_rows.into_iter().take(cfg.n_explain).collect();
    Ok(RankCorrModel {
        variant,
        task,
        net,
        train_rows,
        validation_r2,
        explain_rows,
        cfg: cfg.clone(),
    })
}

/// Off-diagonal entries of per-sample matrices as `[rows x C(d, 2)]`.
fn pair_columns(mats: &[Array2<f64>], d: usize) -> Array2<f64> {
    let pairs = all_pairs(d);
    let mut out = Array2::zeros((mats.len(), pairs.len()));
    for (r, m) in mats.iter().enumerate() {
        for (p, &(i, j)) in pairs.iter().enumerate() {
            out[[r, p]] = m[[i, j]];
        }
    }
    out
}

/// Mean magnitude of every column.
fn global_strengths(cols: &Array2<f64>) -> Vec<f64> {
    cols.axis_iter(Axis(1))
        .map(|c| c.mapv(f64::abs).mean().unwrap_or(0.0))
        .collect()
}

/// `(global, local)` scores of a `[rows x C(d, 2)]` estimate against the task truth.
///
/// Global strengths are mean magnitudes over the explained rows for both the
/// estimate and the truth.
fn score(task: &SyntheticTask, rows: &[usize], estimate: &Array2<f64>) -> (f64, f64) {
    let truth = task.true_local(rows);
    let global = spearman(&global_strengths(estimate), &global_strengths(&truth));
    let local = spearman(
        &estimate.iter().copied().collect::<Vec<_>>(),
        &truth.iter().copied().collect::<Vec<_>>(),
    );
    (global, local)
}

/// Integrated Hessians of `net` on `rows`, zero baseline, as pair columns.
fn ih_columns(net: &DenseNetwork, task: &SyntheticTask, rows: &[usize], quad: &QuadratureSpec) -> Result<Array2<f64>> {
    let zeros = vec![0.0; task.d];
    let mats = ordered_map(rows.len(), |r| {
        Ok(integrated_hessians(net, &task.xs.row(rows[r]).to_vec(), &zeros, quad)?.gamma)
    })?;
    Ok(pair_columns(&mats, task.d))
}

/// Score one method on a prepared model.
pub fn rank_correlation(model: &RankCorrModel, method: RankCorrMethod) -> Result<RankCorrResult> {
    let task = &model.task;
    let rows = &model.explain_rows;
    let d = task.d;
    let zeros = vec![0.0; d];
    let x = |r: usize| task.xs.row(rows[r]).to_vec();
    let local_matrices = |f: &(dyn Fn(usize) -> Result<Array2<f64>> + Sync)| -> Result<Array2<f64>> {
        Ok(pair_columns(&ordered_map(rows.len(), f)?, d))
    };

    let estimate = match method {
        RankCorrMethod::IntegratedHessians => ih_columns(&model.net, task, rows, &model.cfg.quad)?,
        RankCorrMethod::InputHessian => local_matrices(&|r| Ok(input_hessian(&model.net, &x(r))?.gamma))?,
        RankCorrMethod::SiiExact => local_matrices(&|r| {
            Ok(sii_exact(&CoalitionGame::new(&model.net, &x(r), &zeros)?)?.gamma)
        })?,
        RankCorrMethod::SiiMonteCarlo => local_matrices(&|r| {
            let game = CoalitionGame::new(&model.net, &x(r), &zeros)?;
            let s = seed::derive(model.cfg.seed, seed::STREAM_SII, r as u64);
            Ok(sii_monte_carlo(&game, model.cfg.sii_samples, s)?.gamma)
        })?,
        RankCorrMethod::Truth => task.true_local(rows),
        RankCorrMethod::Nid => {
            let ranked = neural_interaction_detection(&model.net, model.cfg.nid_aggregation);
            let mut strengths = vec![0.0; d * (d - 1) / 2];
            for p in ranked {
                strengths[super::pair_index(d, p.i, p.j)] = p.strength;
            }
            let global = spearman(&strengths, &global_strengths(&task.true_local(rows)));
            return Ok(RankCorrResult {
                variant: model.variant,
                method,
                global,
                local: None,
            });
        }
    };
    let (global, local) = score(task, rows, &estimate);
    Ok(RankCorrResult {
        variant: model.variant,
        method,
        global,
        local: Some(local),
    })
}

/// Prepare the variant and score one method.
pub fn rank_correlation_benchmark(
    variant: RankCorrVariant,
    method: RankCorrMethod,
    cfg: &RankCorrConfig,
) -> Result<RankCorrResult> {
    rank_correlation(&prepare_rank_corr(variant, cfg)?, method)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SanityResult {
    pub seeds: Vec<u64>,
    /// Reference vs. an untrained, freshly initialized network, per seed.
    pub rho_random_weights: Vec<f64>,
    /// Reference vs. a network trained on shuffled labels, per seed.
    pub rho_random_labels: Vec<f64>,
}

impl SanityResult {
    pub fn median_abs_random_weights(&self) -> f64 {
        median(&self.rho_random_weights.iter().map(|r| r.abs()).collect::<Vec<_>>())
    }

    pub fn median_abs_random_labels(&self) -> f64 {
        median(&self.rho_random_labels.iter().map(|r| r.abs()).collect::<Vec<_>>())
    }
}

/// Spearman correlation between the reference Integrated Hessians and those of
/// randomized networks, pooled over explained samples and pairs.
pub fn sanity_checks(model: &RankCorrModel, seeds: &[u64]) -> Result<SanityResult> {
    let task = &model.task;
    let rows = &model.explain_rows;
    let quad = &model.cfg.quad;
    let flat = |a: Array2<f64>| a.iter().copied().collect::<Vec<f64>>();
    let reference = flat(ih_columns(&model.net, task, rows, quad)?);
    let w = widths(task.d, &model.cfg.hidden);
    let xs = task.xs.select(Axis(0), &model.train_rows);
    let ys = task.ys.select(Axis(0), &model.train_rows);

    let mut rho_random_weights = Vec::with_capacity(seeds.len());
    let mut rho_random_labels = Vec::with_capacity(seeds.len());
    for &s in seeds {
        let fresh = DenseNetwork::xavier(&w, Activation::Tanh, Activation::Identity, seed::derive(s, seed::STREAM_INIT, 1))?;
        rho_random_weights.push(spearman(&reference, &flat(ih_columns(&fresh, task, rows, quad)?)));

        let mut shuffled = ys.to_vec();
        shuffled.shuffle(&mut seed::rng_for(s, seed::STREAM_SHUFFLE, 0));
        let trainer = TrainConfig {
            seed: seed::derive(s, seed::STREAM_INIT, 2),
            ..model.cfg.trainer.clone()
        };
        let (noise_net, _) = fit_standardized(&w, Activation::Tanh, xs.view(), Array1::from(shuffled).view(), &trainer)?;
        rho_random_labels.push(spearman(&reference, &flat(ih_columns(&noise_net, task, rows, quad)?)));
    }
    Ok(SanityResult {
        seeds: seeds.to_vec(),
        rho_random_weights,
        rho_random_labels,
    })
}
