//! Remove-and-Retrain for interactions: ablate label terms, retrain, measure error.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::table::{num, Table};
use super::tasks::{all_pairs, SyntheticTask};
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
use crate::train::{evaluate_loss, fit_standardized, r_squared, Loss, TrainConfig};

/// Order in which pairs are ablated: one list for all samples, or one per sample.
#[derive(Clone, Debug, PartialEq)]
pub enum Ranking {
    Global(Vec<(usize, usize)>),
    PerSample(Vec<Vec<(usize, usize)>>),
}

impl Ranking {
    fn for_sample(&self, s: usize) -> &[(usize, usize)] {
        match self {
            Ranking::Global(r) => r,
            Ranking::PerSample(rs) => &rs[s],
        }
    }
}

/// Multiplier applied to an ablated term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Noise {
    /// Independent `N(0, 1)` per (sample, term), keyed by `seed`.
    Gaussian { seed: u64 },
    /// Fixed multiplier; `Constant(1.0)` leaves labels unchanged.
    Constant(f64),
}

/// Labels with the top `n_ablate` ranked pairs of every sample multiplied by noise.
///
/// Ranked pairs that are valid feature pairs but absent from the label are
/// no-ops. A pair with an out-of-range or repeated feature is an error.
pub fn ablate_interactions(
    task: &SyntheticTask,
    ranking: &Ranking,
    n_ablate: usize,
    noise: Noise,
) -> Result<Array1<f64>> {
    let n = task.n_samples();
    if let Ranking::PerSample(rs) = ranking {
        if rs.len() != n {
            return Err(Error::Shape {
                expected: n,
                got: rs.len(),
            });
        }
    }
    let n_terms = task.terms.len();
    let mut ys = Array1::zeros(n);
    for s in 0..n {
        let ranked = ranking.for_sample(s);
        if n_ablate > ranked.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot ablate {n_ablate} pairs from a ranking of {}",
                ranked.len()
            )));
        }
        let mut mult = vec![1.0; n_terms];
        let eps: Vec<f64> = match noise {
            Noise::Gaussian { seed } => {
                let mut rng = seed::rng_for(seed, seed::STREAM_NOISE, s as u64);
                (0..n_terms).map(|_| rng.sample(StandardNormal)).collect()
            }
            Noise::Constant(c) => vec![c; n_terms],
        };
        for &(a, b) in &ranked[..n_ablate] {
            if a == b || a >= task.d || b >= task.d {
                return Err(Error::UnknownPair(a, b));
            }
            if let Some(t) = task.term_for(a, b) {
                mult[t] = eps[t];
            }
        }
        let row = task.xs.row(s).to_vec();
        ys[s] = task
            .terms
            .iter()
            .zip(&mult)
            .fold(0.0, |acc, (term, m)| acc + term.eval(&row) * m);
    }
    Ok(ys)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoarMethod {
    IntegratedHessians,
    InputHessian,
    Nid,
    SiiMonteCarlo,
    SiiExact,
    Random,
}

impl RoarMethod {
    pub const ALL: [RoarMethod; 6] = [
        RoarMethod::IntegratedHessians,
        RoarMethod::InputHessian,
        RoarMethod::Nid,
        RoarMethod::SiiMonteCarlo,
        RoarMethod::SiiExact,
        RoarMethod::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RoarMethod::IntegratedHessians => "ih",
            RoarMethod::InputHessian => "hessian",
            RoarMethod::Nid => "nid",
            RoarMethod::SiiMonteCarlo => "sii-mc",
            RoarMethod::SiiExact => "sii",
            RoarMethod::Random => "random",
        }
    }
}

impl fmt::Display for RoarMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RoarMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown ROAR method `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoarConfig {
    /// Hidden widths of the ReLU regression network.
    pub hidden: Vec<usize>,
    pub trainer: TrainConfig,
    pub retrains: usize,
    /// SoftPlus sharpness used before second-order explanations.
    pub surgery_beta: f64,
    pub quad: QuadratureSpec,
    pub sii_samples: usize,
    /// Mean is markedly more stable across training seeds than min on dense, unregularized nets.
    pub nid_aggregation: NidAggregation,
    /// Ablation counts to evaluate; `None` means every count from 0 to the number of label terms.
    pub steps: Option<Vec<usize>>,
    pub noise_seed: u64,
    pub seed: u64,
}

impl Default for RoarConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64, 64],
            trainer: TrainConfig {
                learning_rate: 3e-3,
                epochs: 40,
                batch_size: 64,
                schedule: crate::train::LrSchedule::Cosine,
                ..TrainConfig::default()
            },
            retrains: 5,
            surgery_beta: 10.0,
            quad: QuadratureSpec::square(16).expect("16 >= 1"),
            sii_samples: 200,
            nid_aggregation: NidAggregation::Mean,
            steps: None,
            noise_seed: 0,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoarPoint {
    pub n_ablated: usize,
    /// Held-out mean squared error, averaged over retrains.
    pub mean_error: f64,
    /// Sample standard deviation over retrains.
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoarCurve {
    pub method: String,
    pub points: Vec<RoarPoint>,
}

impl RoarCurve {
    /// Trapezoidal area under mean error against ablation count.
    pub fn auc(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| 0.5 * (w[0].mean_error + w[1].mean_error) * (w[1].n_ablated - w[0].n_ablated) as f64)
            .sum()
    }

    pub fn table(curves: &[RoarCurve]) -> Table {
        let mut t = Table::new(["method", "n_ablated", "mean_error", "std_error"]);
        for c in curves {
            for p in &c.points {
                t.push(vec![
                    c.method.clone(),
                    p.n_ablated.to_string(),
                    num(p.mean_error),
                    num(p.std_error),
                ]);
            }
        }
        t
    }
}

/// A task with its trained reference network and the shared unablated step.
///
/// Retrain `r` always uses the same derived seed, so every method and every
/// ablation count is compared under common initializations and batch orders.
pub struct RoarStudy {
    pub task: SyntheticTask,
    pub cfg: RoarConfig,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    /// Retrain 0 on the unablated labels.
    pub reference: DenseNetwork,
    /// Held-out R^2 of the reference network.
    pub reference_r2: f64,
    /// Step 0, shared by every curve.
    pub unablated: RoarPoint,
}

impl RoarStudy {
    pub fn prepare(task: SyntheticTask, cfg: RoarConfig) -> Result<Self> {
        if cfg.retrains == 0 {
            return Err(Error::InvalidArgument("need at least one retrain".into()));
        }
        let (train_rows, test_rows) = task.split(seed::derive(cfg.seed, seed::STREAM_SPLIT, 0));
        let (unablated, mut nets) = retrain(&task, &cfg, &train_rows, &test_rows, &task.ys, 0)?;
        let reference = nets.swap_remove(0);
        let xs_test = task.xs.select(Axis(0), &test_rows);
        let ys_test = task.ys.select(Axis(0), &test_rows);
        let reference_r2 = r_squared(&reference, xs_test.view(), ys_test.view())?;
        Ok(Self {
            task,
            cfg,
            train_rows,
            test_rows,
            reference,
            reference_r2,
            unablated,
        })
    }

    fn per_sample_ranking<F>(&self, score: F) -> Result<Ranking>
    where
        F: Fn(usize) -> Result<Array2<f64>> + Sync,
    {
        let pairs = all_pairs(self.task.d);
        let rankings = ordered_map(self.task.n_samples(), |s| {
            let m = score(s)?;
            let mut ranked = pairs.clone();
            // Stable sort keeps lexicographic order among ties.
            ranked.sort_by(|a, b| m[[b.0, b.1]].abs().total_cmp(&m[[a.0, a.1]].abs()));
            Ok(ranked)
        })?;
        Ok(Ranking::PerSample(rankings))
    }

    /// Pair ordering produced by `method` on the reference network.
    pub fn ranking(&self, method: RoarMethod) -> Result<Ranking> {
        let d = self.task.d;
        let zeros = vec![0.0; d];
        let row = |s: usize| self.task.xs.row(s).to_vec();
        match method {
            RoarMethod::IntegratedHessians => {
                let smooth = self.reference.softplus_surgery(self.cfg.surgery_beta)?;
                self.per_sample_ranking(|s| Ok(integrated_hessians(&smooth, &row(s), &zeros, &self.cfg.quad)?.gamma))
            }
            RoarMethod::InputHessian => {
                let smooth = self.reference.softplus_surgery(self.cfg.surgery_beta)?;
                self.per_sample_ranking(|s| Ok(input_hessian(&smooth, &row(s))?.gamma))
            }
            RoarMethod::SiiMonteCarlo => self.per_sample_ranking(|s| {
                let game = CoalitionGame::new(&self.reference, &row(s), &zeros)?;
                let sample_seed = seed::derive(self.cfg.seed, seed::STREAM_SII, s as u64);
                Ok(sii_monte_carlo(&game, self.cfg.sii_samples, sample_seed)?.gamma)
            }),
            RoarMethod::SiiExact => self.per_sample_ranking(|s| {
                let game = CoalitionGame::new(&self.reference, &row(s), &zeros)?;
                Ok(sii_exact(&game)?.gamma)
            }),
            RoarMethod::Nid => Ok(Ranking::Global(
                neural_interaction_detection(&self.reference, self.cfg.nid_aggregation)
                    .into_iter()
                    .map(|p| (p.i, p.j))
                    .collect(),
            )),
            RoarMethod::Random => {
                let pairs = all_pairs(d);
                Ok(Ranking::PerSample(
                    (0..self.task.n_samples())
                        .map(|s| {
                            let mut p = pairs.clone();
                            p.shuffle(&mut seed::rng_for(self.cfg.seed, seed::STREAM_SHUFFLE, s as u64));
                            p
                        })
                        .collect(),
                ))
            }
        }
    }

    fn steps(&self) -> Vec<usize> {
        match &self.cfg.steps {
            Some(s) => {
                let mut s = s.clone();
                s.sort_unstable();
                s.dedup();
                s
            }
            None => (0..=self.task.terms.len()).collect(),
        }
    }

    /// Error curve for an explicit ranking.
    pub fn curve_for(&self, label: &str, ranking: &Ranking) -> Result<RoarCurve> {
        let mut points = Vec::new();
        for n in self.steps() {
            if n == 0 {
                points.push(self.unablated);
                continue;
            }
            let labels = ablate_interactions(&self.task, ranking, n, Noise::Gaussian { seed: self.cfg.noise_seed })?;
            points.push(retrain(&self.task, &self.cfg, &self.train_rows, &self.test_rows, &labels, n)?.0);
        }
        Ok(RoarCurve {
            method: label.into(),
            points,
        })
    }

    pub fn curve(&self, method: RoarMethod) -> Result<RoarCurve> {
        self.curve_for(method.name(), &self.ranking(method)?)
    }
}

/// Fit `cfg.retrains` networks on `labels` and score them on the held-out rows.
fn retrain(
    task: &SyntheticTask,
    cfg: &RoarConfig,
    train_rows: &[usize],
    test_rows: &[usize],
    labels: &Array1<f64>,
    n_ablated: usize,
) -> Result<(RoarPoint, Vec<DenseNetwork>)> {
    let xs_train = task.xs.select(Axis(0), train_rows);
    let ys_train = labels.select(Axis(0), train_rows);
    let xs_test = task.xs.select(Axis(0), test_rows);
    let ys_test = labels.select(Axis(0), test_rows);
    let mut widths = vec![task.d];
    widths.extend(&cfg.hidden);
    widths.push(1);
    let runs = ordered_map(cfg.retrains, |r| {
        let trainer = TrainConfig {
            seed: seed::derive(cfg.seed, seed::STREAM_RETRAIN, r as u64),
            ..cfg.trainer.clone()
        };
        let (net, _) = fit_standardized(&widths, Activation::Relu, xs_train.view(), ys_train.view(), &trainer)?;
        let err = evaluate_loss(&net, xs_test.view(), ys_test.view(), Loss::SquaredError)?;
        Ok((net, err))
    })?;
    let errors: Vec<f64> = runs.iter().map(|(_, e)| *e).collect();
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let std = if errors.len() > 1 {
        (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let point = RoarPoint {
        n_ablated,
        mean_error: mean,
        std_error: std,
    };
    Ok((point, runs.into_iter().map(|(net, _)| net).collect()))
}

/// Train the reference network on `task`, rank with `method`, and ablate.
pub fn remove_and_retrain(task: SyntheticTask, method: RoarMethod, cfg: RoarConfig) -> Result<RoarCurve> {
    RoarStudy::prepare(task, cfg)?.curve(method)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchlab::tasks::{gen_interaction_task, InteractionKind, TaskConfig};

    fn small_task(n: usize) -> SyntheticTask {
        gen_interaction_task(&TaskConfig {
            d: 4,
            n_pairs: 3,
            kind: InteractionKind::Multiply,
            n_samples: n,
            seed: 5,
        })
        .unwrap()
    }

    #[test]
    fn zero_ablation_and_unit_noise_leave_labels() {
        let task = small_task(50);
        let all = Ranking::Global(all_pairs(4));
        let gauss = Noise::Gaussian { seed: 1 };
        assert_eq!(ablate_interactions(&task, &all, 0, gauss).unwrap(), task.ys);
        assert_eq!(ablate_interactions(&task, &all, 6, Noise::Constant(1.0)).unwrap(), task.ys);
    }

    #[test]
    fn absent_pairs_are_noops_and_bad_pairs_fail() {
        let task = small_task(20);
        let absent: Vec<(usize, usize)> = all_pairs(4)
            .into_iter()
            .filter(|&(i, j)| task.term_for(i, j).is_none())
            .collect();
        let r = Ranking::Global(absent.clone());
        let ys = ablate_interactions(&task, &r, absent.len(), Noise::Gaussian { seed: 2 }).unwrap();
        assert_eq!(ys, task.ys);
        let bad = Ranking::Global(vec![(0, 9)]);
        assert!(matches!(
            ablate_interactions(&task, &bad, 1, Noise::Constant(0.0)),
            Err(Error::UnknownPair(0, 9))
        ));
        let diag = Ranking::Global(vec![(2, 2)]);
        assert!(ablate_interactions(&task, &diag, 1, Noise::Constant(0.0)).is_err());
    }

    #[test]
    fn ablating_everything_is_ranking_independent() {
        let task = small_task(30);
        let noise = Noise::Gaussian { seed: 3 };
        let forward = Ranking::Global(all_pairs(4));
        let mut rev = all_pairs(4);
        rev.reverse();
        let backward = Ranking::Global(rev);
        assert_eq!(
            ablate_interactions(&task, &forward, 6, noise).unwrap(),
            ablate_interactions(&task, &backward, 6, noise).unwrap()
        );
    }

    #[test]
    fn per_sample_rankings_must_cover_every_sample() {
        let task = small_task(10);
        let r = Ranking::PerSample(vec![all_pairs(4); 9]);
        assert!(matches!(ablate_interactions(&task, &r, 1, Noise::Constant(0.0)), Err(Error::Shape { .. })));
    }

    #[test]
    fn auc_is_trapezoidal() {
        let c = RoarCurve {
            method: "x".into(),
            points: vec![
                RoarPoint { n_ablated: 0, mean_error: 1.0, std_error: 0.0 },
                RoarPoint { n_ablated: 2, mean_error: 3.0, std_error: 0.0 },
                RoarPoint { n_ablated: 3, mean_error: 3.0, std_error: 0.0 },
            ],
        };
        assert_eq!(c.auc(), 4.0 + 3.0);
    }

    #[test]
    fn method_names_round_trip() {
        for m in RoarMethod::ALL {
            assert_eq!(m.name().parse::<RoarMethod>().unwrap(), m);
        }
    }
}
