//! Synthetic regression tasks whose labels are sums of known pairwise terms.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InteractionKind {
    /// `tanh(a + b)`
    TanhSum,
    /// `cos(a + b)`
    CosSum,
    Multiply,
    Maximum,
    Minimum,
}

impl InteractionKind {
    pub const ALL: [InteractionKind; 5] = [
        InteractionKind::TanhSum,
        InteractionKind::CosSum,
        InteractionKind::Multiply,
        InteractionKind::Maximum,
        InteractionKind::Minimum,
    ];

    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            InteractionKind::TanhSum => (a + b).tanh(),
            InteractionKind::CosSum => (a + b).cos(),
            InteractionKind::Multiply => a * b,
            InteractionKind::Maximum => a.max(b),
            InteractionKind::Minimum => a.min(b),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InteractionKind::TanhSum => "tanhsum",
            InteractionKind::CosSum => "cossum",
            InteractionKind::Multiply => "multiply",
            InteractionKind::Maximum => "maximum",
            InteractionKind::Minimum => "minimum",
        }
    }
}

impl fmt::Display for InteractionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InteractionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown interaction kind `{s}`")))
    }
}

/// One additive label term `coefficient * g(x_i, x_j)`, with `i < j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskTerm {
    pub i: usize,
    pub j: usize,
    pub coefficient: f64,
    pub kind: InteractionKind,
}

impl TaskTerm {
    pub fn eval(&self, row: &[f64]) -> f64 {
        self.coefficient * self.kind.apply(row[self.i], row[self.j])
    }
}

/// Features, labels and the ground-truth terms that generated the labels.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticTask {
    pub name: String,
    pub d: usize,
    pub terms: Vec<TaskTerm>,
    pub xs: Array2<f64>,
    pub ys: Array1<f64>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub d: usize,
    pub n_pairs: usize,
    pub kind: InteractionKind,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            d: 10,
            n_pairs: 20,
            kind: InteractionKind::TanhSum,
            n_samples: 10_000,
            seed: 0,
        }
    }
}

/// Lexicographic index of the pair `i < j` among all `C(d, 2)` pairs.
pub fn pair_index(d: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < d);
    i * (2 * d - i - 1) / 2 + (j - i - 1)
}

/// All pairs `i < j` in lexicographic order.
pub fn all_pairs(d: usize) -> Vec<(usize, usize)> {
    (0..d).flat_map(|i| ((i + 1)..d).map(move |j| (i, j))).collect()
}

fn gaussian_features(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut xs = Array2::zeros((n, d));
    for (r, mut row) in xs.axis_iter_mut(Axis(0)).enumerate() {
        let mut rng = seed::rng_for(seed, seed::STREAM_TASK, r as u64);
        row.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
    }
    xs
}

impl SyntheticTask {
    fn build(name: String, d: usize, terms: Vec<TaskTerm>, xs: Array2<f64>, seed: u64) -> Self {
        let mut task = Self {
            name,
            d,
            terms,
            ys: Array1::zeros(xs.nrows()),
            xs,
            seed,
        };
        task.ys = task.labels(task.xs.view());
        task
    }

    pub fn n_samples(&self) -> usize {
        self.xs.nrows()
    }

    /// `[n x terms]` matrix of `coefficient * g(x_i, x_j)`.
    pub fn term_values(&self, xs: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((xs.nrows(), self.terms.len()));
        for (r, row) in xs.rows().into_iter().enumerate() {
            let row = row.to_vec();
            for (t, term) in self.terms.iter().enumerate() {
                out[[r, t]] = term.eval(&row);
            }
        }
        out
    }

    /// Labels re-derived from features; summation runs over terms in order.
    pub fn labels(&self, xs: ArrayView2<f64>) -> Array1<f64> {
        self.term_values(xs)
            .rows()
            .into_iter()
            .map(|r| r.iter().fold(0.0, |acc, v| acc + v))
            .collect()
    }

    /// Term index for the feature pair, in either order.
    pub fn term_for(&self, a: usize, b: usize) -> Option<usize> {
        let (i, j) = (a.min(b), a.max(b));
        self.terms.iter().position(|t| t.i == i && t.j == j)
    }

    /// Per-sample true contribution of every feature pair, `[n x C(d, 2)]`;
    /// pairs absent from the label contribute 0.
    pub fn true_local(&self, rows: &[usize]) -> Array2<f64> {
        let mut out = Array2::zeros((rows.len(), self.d * (self.d - 1) / 2));
        for (r, &s) in rows.iter().enumerate() {
            let row = self.xs.row(s).to_vec();
            for term in &self.terms {
                out[[r, pair_index(self.d, term.i, term.j)]] += term.eval(&row);
            }
        }
        out
    }

    /// `|coefficient|` of every feature pair in lexicographic order.
    pub fn true_global(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.d * (self.d - 1) / 2];
        for term in &self.terms {
            out[pair_index(self.d, term.i, term.j)] += term.coefficient.abs();
        }
        out
    }

    /// Seeded 80/20 split into `(train, test)` row indices.
    pub fn split(&self, seed: u64) -> (Vec<usize>, Vec<usize>) {
        split_indices(self.n_samples(), 0.8, seed)
    }

    pub fn manifest(&self) -> TaskManifest {
        TaskManifest {
            name: self.name.clone(),
            d: self.d,
            n_samples: self.n_samples(),
            seed: self.seed,
            terms: self.terms.clone(),
        }
    }
}

/// Shuffle `0..n` and cut it at `fraction`.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng_for(seed, seed::STREAM_SPLIT, 0));
    let cut = ((n as f64) * fraction).round() as usize;
    let test = idx.split_off(cut.min(n));
    (idx, test)
}

/// JSON description of a task; features and labels live in the CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskManifest {
    pub name: String,
    pub d: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub terms: Vec<TaskTerm>,
}

/// `sum_t alpha_t g(x_{i_t}, x_{j_t})` over `n_pairs` distinct random pairs.
///
/// Coefficients are uniform on `(0, 1)` and normalized to sum to one.
pub fn gen_interaction_task(cfg: &TaskConfig) -> Result<SyntheticTask> {
    if cfg.d < 2 {
        return Err(Error::InvalidArgument("need at least two features".into()));
    }
    let available = cfg.d * (cfg.d - 1) / 2;
    if cfg.n_pairs == 0 || cfg.n_pairs > available {
        return Err(Error::InvalidArgument(format!(
            "cannot draw {} distinct pairs from {available}",
            cfg.n_pairs
        )));
    }
    let mut rng = seed::rng_for(cfg.seed, seed::STREAM_TASK_TERMS, 0);
    let mut pairs = all_pairs(cfg.d);
    pairs.shuffle(&mut rng);
    pairs.truncate(cfg.n_pairs);
    let raw: Vec<f64> = (0..cfg.n_pairs).map(|_| rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    let terms = pairs
        .into_iter()
        .zip(raw)
        .map(|((i, j), a)| TaskTerm {
            i,
            j,
            coefficient: a / total,
            kind: cfg.kind,
        })
        .collect();
    let xs = gaussian_features(cfg.n_samples, cfg.d, cfg.seed);
    Ok(SyntheticTask::build(
        format!("{}-d{}-p{}", cfg.kind, cfg.d, cfg.n_pairs),
        cfg.d,
        terms,
        xs,
        cfg.seed,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankCorrVariant {
    Multiplicative,
    MinMax,
}

impl RankCorrVariant {
    pub fn name(self) -> &'static str {
        match self {
            RankCorrVariant::Multiplicative => "multiplicative",
            RankCorrVariant::MinMax => "minmax",
        }
    }
}

impl FromStr for RankCorrVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multiplicative" => Ok(RankCorrVariant::Multiplicative),
            "minmax" => Ok(RankCorrVariant::MinMax),
            _ => Err(Error::InvalidArgument(format!("unknown variant `{s}`"))),
        }
    }
}

/// Coefficients of the five-feature rank-correlation labels, in lexicographic pair order.
const RANK_CORR_COEFFICIENTS: [f64; 10] = [10.0, -9.0, 8.0, -7.0, 6.0, -5.0, 4.0, -3.0, 2.0, -1.0];

/// Min/max labels: the sign pattern and the function of each pair.
const MINMAX_TERMS: [(f64, InteractionKind); 10] = [
    (10.0, InteractionKind::Maximum),
    (-9.0, InteractionKind::Minimum),
    (8.0, InteractionKind::Minimum),
    (-7.0, InteractionKind::Maximum),
    (6.0, InteractionKind::Maximum),
    (-5.0, InteractionKind::Minimum),
    (4.0, InteractionKind::Minimum),
    (-3.0, InteractionKind::Maximum),
    (2.0, InteractionKind::Maximum),
    (1.0, InteractionKind::Maximum),
];

/// Five standard-normal features with all ten pairwise terms, coefficients 10 down to 1.
pub fn rank_corr_task(variant: RankCorrVariant, n_samples: usize, seed: u64) -> SyntheticTask {
    let d = 5;
    let terms = all_pairs(d)
        .into_iter()
        .enumerate()
        .map(|(p, (i, j))| {
            let (coefficient, kind) = match variant {
                RankCorrVariant::Multiplicative => (RANK_CORR_COEFFICIENTS[p], InteractionKind::Multiply),
                RankCorrVariant::MinMax => MINMAX_TERMS[p],
            };
            TaskTerm {
                i,
                j,
                coefficient,
                kind,
            }
        })
        .collect();
    let xs = gaussian_features(n_samples, d, seed);
    SyntheticTask::build(variant.name().into(), d, terms, xs, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_features_force_the_single_pair() {
        let task = gen_interaction_task(&TaskConfig {
            d: 2,
            n_pairs: 1,
            n_samples: 5,
            ..TaskConfig::default()
        })
        .unwrap();
        assert_eq!(task.terms.len(), 1);
        assert_eq!((task.terms[0].i, task.terms[0].j), (0, 1));
        assert_abs_diff_eq!(task.terms[0].coefficient, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn default_task_invariants() {
        let task = gen_interaction_task(&TaskConfig {
            n_samples: 50,
            ..TaskConfig::default()
        })
        .unwrap();
        let total: f64 = task.terms.iter().map(|t| t.coefficient).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let mut pairs: Vec<_> = task.terms.iter().map(|t| (t.i, t.j)).collect();
        pairs.sort();
        pairs.dedup();
        assert_eq!(pairs.len(), 20);
        assert!(task.terms.iter().all(|t| t.i < t.j && t.j < 10 && t.coefficient > 0.0));
    }

    #[test]
    fn too_many_pairs_rejected() {
        let cfg = TaskConfig {
            d: 4,
            n_pairs: 7,
            ..TaskConfig::default()
        };
        assert!(gen_interaction_task(&cfg).is_err());
    }

    #[test]
    fn identical_seeds_identical_tasks() {
        let cfg = TaskConfig {
            n_samples: 100,
            seed: 42,
            ..TaskConfig::default()
        };
        assert_eq!(gen_interaction_task(&cfg).unwrap(), gen_interaction_task(&cfg).unwrap());
        let other = TaskConfig { seed: 43, ..cfg.clone() };
        assert_ne!(gen_interaction_task(&other).unwrap().xs, gen_interaction_task(&cfg).unwrap().xs);
    }

    #[test]
    fn pair_index_is_lexicographic() {
        let d = 6;
        for (p, (i, j)) in all_pairs(d).into_iter().enumerate() {
            assert_eq!(pair_index(d, i, j), p);
        }
    }

    #[test]
    fn multiplicative_labels_match_polynomial() {
        let task = rank_corr_task(RankCorrVariant::Multiplicative, 20, 3);
        for (r, x) in task.xs.rows().into_iter().enumerate() {
            let y = 10.0 * x[0] * x[1] - 9.0 * x[0] * x[2] + 8.0 * x[0] * x[3] - 7.0 * x[0] * x[4]
                + 6.0 * x[1] * x[2] - 5.0 * x[1] * x[3] + 4.0 * x[1] * x[4] - 3.0 * x[2] * x[3]
                + 2.0 * x[2] * x[4] - x[3] * x[4];
            assert_abs_diff_eq!(task.ys[r], y, epsilon = 1e-12);
        }
    }

    #[test]
    fn minmax_labels_match_printed_ends() {
        let task = rank_corr_task(RankCorrVariant::MinMax, 20, 3);
        assert_eq!(task.terms[0], TaskTerm { i: 0, j: 1, coefficient: 10.0, kind: InteractionKind::Maximum });
        assert_eq!(task.terms[1], TaskTerm { i: 0, j: 2, coefficient: -9.0, kind: InteractionKind::Minimum });
        assert_eq!(task.terms[2], TaskTerm { i: 0, j: 3, coefficient: 8.0, kind: InteractionKind::Minimum });
        assert_eq!(task.terms[9], TaskTerm { i: 3, j: 4, coefficient: 1.0, kind: InteractionKind::Maximum });
    }

    #[test]
    fn split_partitions_rows() {
        let (train, test) = split_indices(101, 0.8, 9);
        assert_eq!(train.len(), 81);
        let mut all: Vec<_> = train.iter().chain(&test).copied().collect();
        all.sort();
        assert_eq!(all, (0..101).collect::<Vec<_>>());
    }
}
