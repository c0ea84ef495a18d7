//! Interaction methods that Integrated Hessians is compared against.
//!
//! * [`input_hessian`]: raw second derivatives at the input, no path.
//! * [`sii_exact`] and [`sii_monte_carlo`]: the Shapley Interaction Index of the
//!   coalition game in which absent players take their baseline values.
//! * [`neural_interaction_detection`]: a global ranking read off the weights.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::attribution::ExplainMeta;
use crate::error::{check_len, Error, Result};
use crate::interaction::InteractionMatrix;
use crate::model::ScalarModel;
use crate::network::DenseNetwork;
use crate::parallel::{ordered_map, ordered_reduce};
use crate::seed;

/// Largest player count [`sii_exact`] will enumerate.
pub const SII_EXACT_MAX_DIM: usize = 20;

/// Subsets evaluated per batch during exact enumeration.
const ENUM_BLOCK: usize = 4096;

/// Raw Hessian of `f` at `x`; `reference_output` is `f(x)` since there is no path.
pub fn input_hessian<M: ScalarModel + ?Sized>(model: &M, x: &[f64]) -> Result<InteractionMatrix> {
    model.ensure_twice_differentiable()?;
    let so = model.second_order(x)?;
    Ok(InteractionMatrix {
        gamma: so.hessian,
        input_output: so.value,
        reference_output: so.value,
        input: x.to_vec(),
        baseline: x.to_vec(),
        meta: ExplainMeta {
            method: "input-hessian".into(),
            baseline: "none".into(),
            ..ExplainMeta::default()
        },
        std_error: None,
    })
}

/// Cooperative game over the input features of a model.
///
/// `v(S) = f(z)` with `z_i = x_i` for `i` in `S` and `z_i = x'_i` otherwise.
pub struct CoalitionGame<'a, M: ScalarModel + ?Sized> {
    model: &'a M,
    x: Vec<f64>,
    baseline: Vec<f64>,
}

impl<'a, M: ScalarModel + ?Sized> CoalitionGame<'a, M> {
    pub fn new(model: &'a M, x: &[f64], baseline: &[f64]) -> Result<Self> {
        check_len(model.input_dim(), x.len())?;
        check_len(model.input_dim(), baseline.len())?;
        Ok(Self {
            model,
            x: x.to_vec(),
            baseline: baseline.to_vec(),
        })
    }

    pub fn players(&self) -> usize {
        self.x.len()
    }

    pub fn input(&self) -> &[f64] {
        &self.x
    }

    pub fn baseline(&self) -> &[f64] {
        &self.baseline
    }

    /// `v(S)` for the coalition listed in `members`.
    pub fn value(&self, members: &[usize]) -> Result<f64> {
        let mut z = self.baseline.clone();
        for &i in members {
            if i >= z.len() {
                return Err(Error::InvalidArgument(format!("player {i} out of range")));
            }
            z[i] = self.x[i];
        }
        self.model.value(&z)
    }

    fn write_mask(&self, mask: u64, mut row: ndarray::ArrayViewMut1<f64>) {
        for (i, slot) in row.iter_mut().enumerate() {
            *slot = if mask >> i & 1 == 1 { self.x[i] } else { self.baseline[i] };
        }
    }

    /// `v` for every subset, indexed by bitmask.
    fn all_values(&self) -> Result<Vec<f64>> {
        let d = self.players();
        let total = 1usize << d;
        let blocks = total.div_ceil(ENUM_BLOCK);
        let parts = ordered_map(blocks, |b| {
            let start = b * ENUM_BLOCK;
            let end = (start + ENUM_BLOCK).min(total);
            let mut zs = Array2::zeros((end - start, d));
            for (r, row) in zs.axis_iter_mut(Axis(0)).enumerate() {
                self.write_mask((start + r) as u64, row);
            }
            self.model.values(zs.view())
        })?;
        Ok(parts.concat())
    }
}

/// `1 / ((d - 1) * C(d - 2, s))`, the SII weight of a coalition of size `s`.
fn pair_weights(d: usize) -> Vec<f64> {
    let n = d - 2;
    let mut binom = 1.0;
    let mut out = Vec::with_capacity(n + 1);
    for s in 0..=n {
        out.push(1.0 / ((d - 1) as f64 * binom));
        binom = binom * (n - s) as f64 / (s + 1) as f64;
    }
    out
}

/// `1 / (d * C(d - 1, s))`, the Shapley weight of a coalition of size `s`.
fn shapley_weights(d: usize) -> Vec<f64> {
    let n = d - 1;
    let mut binom = 1.0;
    let mut out = Vec::with_capacity(n + 1);
    for s in 0..=n {
        out.push(1.0 / (d as f64 * binom));
        binom = binom * (n - s) as f64 / (s + 1) as f64;
    }
    out
}

fn sii_meta(method: &str, game_dim: usize) -> ExplainMeta {
    ExplainMeta {
        method: method.into(),
        baseline: format!("coalition({game_dim})"),
        ..ExplainMeta::default()
    }
}

/// Exact Shapley Interaction Index by enumerating all `2^d` coalitions.
///
/// Off-diagonal entries hold the pairwise index; the diagonal holds the plain
/// Shapley value of each player.
pub fn sii_exact<M: ScalarModel + ?Sized>(game: &CoalitionGame<'_, M>) -> Result<InteractionMatrix> {
    let d = game.players();
    if d > SII_EXACT_MAX_DIM {
        return Err(Error::IntractableDimension { d });
    }
    let v = game.all_values()?;
    let full = (1usize << d) - 1;
    let mut gamma = Array2::zeros((d, d));

    let sw = shapley_weights(d);
    let shapley = ordered_map(d, |i| {
        let bit = 1usize << i;
        let mut acc = 0.0;
        for s in (0..=full).filter(|s| s & bit == 0) {
            acc += sw[s.count_ones() as usize] * (v[s | bit] - v[s]);
        }
        Ok(acc)
    })?;
    for (i, phi) in shapley.into_iter().enumerate() {
        gamma[[i, i]] = phi;
    }

    if d >= 2 {
        let pw = pair_weights(d);
        let pairs: Vec<(usize, usize)> = (0..d)
            .flat_map(|i| ((i + 1)..d).map(move |j| (i, j)))
            .collect();
        let values = ordered_map(pairs.len(), |p| {
            let (i, j) = pairs[p];
            let (bi, bj) = (1usize << i, 1usize << j);
            let mut acc = 0.0;
            for s in (0..=full).filter(|s| s & (bi | bj) == 0) {
                let second = v[s | bi | bj] - v[s | bi] - v[s | bj] + v[s];
                acc += pw[s.count_ones() as usize] * second;
            }
            Ok(acc)
        })?;
        for (&(i, j), g) in pairs.iter().zip(values) {
            gamma[[i, j]] = g;
            gamma[[j, i]] = g;
        }
    }

    Ok(InteractionMatrix {
        gamma,
        input_output: v[full],
        reference_output: v[0],
        input: game.input().to_vec(),
        baseline: game.baseline().to_vec(),
        meta: sii_meta("sii-exact", d),
        std_error: None,
    })
}

/// Running sums for the Monte-Carlo estimator.
struct Moments {
    sum: Array2<f64>,
    sum_sq: Array2<f64>,
}

/// Permutation-sampling estimate of the Shapley Interaction Index.
///
/// Each draw samples a permutation `pi`; for the pair `i < j` it uses the
/// coalition `S` of players preceding `i` with `j` removed. Dropping `j` from a
/// uniform permutation of `N` leaves a uniform permutation of `N \ {j}`, so `S`
/// follows exactly the SII weights and the estimator is unbiased. The prefix
/// values `v(pre_k)` are shared by every pair and give a Shapley estimate for
/// the diagonal.
pub fn sii_monte_carlo<M: ScalarModel + ?Sized>(
    game: &CoalitionGame<'_, M>,
    n_samples: usize,
    seed: u64,
) -> Result<InteractionMatrix> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("sample count must be >= 1".into()));
    }
    let d = game.players();
    let n_pairs = d * d.saturating_sub(1) / 2;

    let moments = ordered_reduce(
        n_samples,
        |r| {
            let mut order: Vec<usize> = (0..d).collect();
            order.shuffle(&mut seed::rng_for(seed, seed::STREAM_SII, r as u64));
            let mut position = vec![0; d];
            for (p, &player) in order.iter().enumerate() {
                position[player] = p;
            }

            // Rows 0..=d are the prefixes; then two rows per pair.
            let mut zs = Array2::zeros((d + 1 + 2 * n_pairs, d));
            let mut current = game.baseline().to_vec();
            zs.row_mut(0).assign(&ndarray::aview1(&current));
            for (p, &player) in order.iter().enumerate() {
                current[player] = game.input()[player];
                zs.row_mut(p + 1).assign(&ndarray::aview1(&current));
            }
            // Two rows per pair: the coalitions S = pre(i) \ {j} that are not prefixes.
            let mut row = d + 1;
            for i in 0..d {
                for j in (i + 1)..d {
                    let mut z = zs.row(position[i]).to_owned();
                    if position[j] < position[i] {
                        z[j] = game.baseline()[j];
                    } else {
                        z[j] = game.input()[j];
                    }
                    zs.row_mut(row).assign(&z);
                    z[i] = game.input()[i];
                    zs.row_mut(row + 1).assign(&z);
                    row += 2;
                }
            }
            let v = game.model.values(zs.view())?;

            let mut part = Moments {
                sum: Array2::zeros((d, d)),
                sum_sq: Array2::zeros((d, d)),
            };
            for (p, &player) in order.iter().enumerate() {
                let marginal = v[p + 1] - v[p];
                part.sum[[player, player]] = marginal;
                part.sum_sq[[player, player]] = marginal * marginal;
            }
            let mut row = d + 1;
            for i in 0..d {
                for j in (i + 1)..d {
                    let p = position[i];
                    let (s, s_i, s_j, s_ij) = if position[j] < position[i] {
                        (v[row], v[row + 1], v[p], v[p + 1])
                    } else {
                        (v[p], v[p + 1], v[row], v[row + 1])
                    };
                    let diff = s_ij - s_i - s_j + s;
                    part.sum[[i, j]] = diff;
                    part.sum_sq[[i, j]] = diff * diff;
                    row += 2;
                }
            }
            Ok(part)
        },
        || Moments {
            sum: Array2::zeros((d, d)),
            sum_sq: Array2::zeros((d, d)),
        },
        |acc, part| {
            acc.sum += &part.sum;
            acc.sum_sq += &part.sum_sq;
        },
    )?;

    let n = n_samples as f64;
    let mean = &moments.sum / n;
    let var = (&moments.sum_sq / n - &mean * &mean).mapv(|v| v.max(0.0));
    let scale = if n_samples > 1 { 1.0 / (n - 1.0) } else { 0.0 };
    let mut std_error = var.mapv(|v| (v * scale).sqrt());
    let mut gamma = mean;
    for i in 0..d {
        for j in (i + 1)..d {
            gamma[[j, i]] = gamma[[i, j]];
            std_error[[j, i]] = std_error[[i, j]];
        }
    }

    Ok(InteractionMatrix {
        gamma,
        input_output: game.model.value(game.input())?,
        reference_output: game.model.value(game.baseline())?,
        input: game.input().to_vec(),
        baseline: game.baseline().to_vec(),
        meta: ExplainMeta {
            draws: Some(n_samples),
            seed: Some(seed),
            ..sii_meta("sii-monte-carlo", d)
        },
        std_error: Some(std_error),
    })
}

/// How first-layer weights of two features are combined per hidden unit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NidAggregation {
    #[default]
    Min,
    Mean,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedPair {
    pub i: usize,
    pub j: usize,
    pub strength: f64,
}

/// Neural Interaction Detection: global pair strengths from absolute weights.
///
/// `strength(i, j) = sum_h agg(|W1_hi|, |W1_hj|) * z_h`, where `z_h` is the
/// product of absolute weight matrices from unit `h` down to the selected
/// output. Pairs are returned strongest first, ties in index order.
pub fn neural_interaction_detection(net: &DenseNetwork, aggregation: NidAggregation) -> Vec<RankedPair> {
    let layers = net.layers();
    let last = layers.len() - 1;
    let out = net.output_index();

    let mut first = layers[0].weights.mapv(f64::abs);
    let influence = if last == 0 {
        first = first.select(Axis(0), &[out]);
        ndarray::arr1(&[1.0])
    } else {
        let mut z = layers[last].weights.row(out).mapv(f64::abs);
        for layer in layers[1..last].iter().rev() {
            z = z.dot(&layer.weights.mapv(f64::abs));
        }
        z
    };

    let d = net.input_dim();
    let mut pairs = Vec::with_capacity(d * d.saturating_sub(1) / 2);
    for i in 0..d {
        for j in (i + 1)..d {
            let strength = first
                .rows()
                .into_iter()
                .zip(&influence)
                .map(|(w, z)| {
                    let (a, b) = (w[i], w[j]);
                    let agg = match aggregation {
                        NidAggregation::Min => a.min(b),
                        NidAggregation::Mean => 0.5 * (a + b),
                    };
                    agg * z
                })
                .sum();
            pairs.push(RankedPair { i, j, strength });
        }
    }
    pairs.sort_by(|a, b| b.strength.total_cmp(&a.strength));
    pairs
}

/// Symmetric matrix form of a NID ranking with a zero diagonal.
pub fn nid_matrix(pairs: &[RankedPair], d: usize) -> Array2<f64> {
    let mut m = Array2::zeros((d, d));
    for p in pairs {
        m[[p.i, p.j]] = p.strength;
        m[[p.j, p.i]] = p.strength;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::Activation;
    use crate::network::Layer;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array1};

    /// `f(x) = x1 * x2` is not a dense network, so a tiny analytic model stands in.
    struct Product;

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
        fn second_order(&self, x: &[f64]) -> Result<crate::model::SecondOrder> {
            Ok(crate::model::SecondOrder {
                value: x[0] * x[1],
                gradient: vec![x[1], x[0]],
                hessian: array![[0.0, 1.0], [1.0, 0.0]],
            })
        }
    }

    fn linear(w: &[f64]) -> DenseNetwork {
        let wm = Array2::from_shape_vec((1, w.len()), w.to_vec()).unwrap();
        DenseNetwork::new(w.len(), vec![Layer::new(wm, Array1::zeros(1), Activation::Identity).unwrap()], 0).unwrap()
    }

    fn smooth_net(d: usize, seed: u64) -> DenseNetwork {
        DenseNetwork::xavier(&[d, 8, 8, 1], Activation::Tanh, Activation::Identity, seed).unwrap()
    }

    #[test]
    fn input_hessian_of_linear_net_is_zero() {
        let im = input_hessian(&linear(&[1.0, -2.0, 0.5]), &[0.3, 0.1, -1.0]).unwrap();
        assert!(im.gamma.iter().all(|&v| v == 0.0));
        assert_eq!(im.reference_output, im.input_output);
    }

    #[test]
    fn input_hessian_of_product() {
        let im = input_hessian(&Product, &[3.0, -7.0]).unwrap();
        assert_eq!(im.gamma[[0, 1]], 1.0);
    }

    #[test]
    fn input_hessian_rejects_relu() {
        let net = DenseNetwork::xavier(&[2, 4, 1], Activation::Relu, Activation::Identity, 1).unwrap();
        assert!(matches!(input_hessian(&net, &[0.1, 0.2]), Err(Error::SecondDerivativeUndefined { .. })));
    }

    #[test]
    fn additive_game_has_no_interactions() {
        let c = [0.5, -1.0, 2.0, 0.25];
        let net = linear(&c);
        let game = CoalitionGame::new(&net, &[1.0; 4], &[0.0; 4]).unwrap();
        let exact = sii_exact(&game).unwrap();
        let mc = sii_monte_carlo(&game, 17, 3).unwrap();
        for (i, &ci) in c.iter().enumerate() {
            assert_abs_diff_eq!(exact.gamma[[i, i]], ci, epsilon = 1e-12);
            assert_abs_diff_eq!(mc.gamma[[i, i]], ci, epsilon = 1e-12);
            for j in 0..4 {
                if i != j {
                    assert_abs_diff_eq!(exact.gamma[[i, j]], 0.0, epsilon = 1e-12);
                    assert_abs_diff_eq!(mc.gamma[[i, j]], 0.0, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn two_player_product_game() {
        let game = CoalitionGame::new(&Product, &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        let exact = sii_exact(&game).unwrap();
        assert_eq!(exact.gamma[[0, 1]], 1.0);
        assert_eq!(exact.gamma[[0, 0]], 0.5);
        let mc = sii_monte_carlo(&game, 5, 11).unwrap();
        assert_eq!(mc.gamma[[0, 1]], 1.0);
        assert_eq!(mc.std_error.unwrap()[[0, 1]], 0.0);
    }

    #[test]
    fn shapley_diagonal_is_efficient() {
        let net = smooth_net(5, 4);
        let game = CoalitionGame::new(&net, &[0.5, -1.0, 1.5, 0.2, -0.3], &[0.0; 5]).unwrap();
        let exact = sii_exact(&game).unwrap();
        let diag: f64 = exact.gamma.diag().sum();
        assert_abs_diff_eq!(diag, exact.input_output - exact.reference_output, epsilon = 1e-12);
        assert!(exact.symmetry_gap() == 0.0);
    }

    #[test]
    fn enumeration_matches_subset_definition() {
        let net = smooth_net(4, 9);
        let x = [0.7, -0.4, 1.1, 0.3];
        let game = CoalitionGame::new(&net, &x, &[0.0; 4]).unwrap();
        let exact = sii_exact(&game).unwrap();
        // (i, j) = (0, 1): coalitions over players {2, 3} with weights 1/3, 1/6, 1/6, 1/3.
        let v = |s: &[usize]| game.value(s).unwrap();
        let delta = |s: &[usize]| {
            let with = |extra: &[usize]| {
                let mut all = s.to_vec();
                all.extend_from_slice(extra);
                v(&all)
            };
            with(&[0, 1]) - with(&[0]) - with(&[1]) + v(s)
        };
        let expected = delta(&[]) / 3.0 + delta(&[2]) / 6.0 + delta(&[3]) / 6.0 + delta(&[2, 3]) / 3.0;
        assert_abs_diff_eq!(exact.gamma[[0, 1]], expected, epsilon = 1e-12);
    }

    #[test]
    fn sii_exact_caps_dimension() {
        let net = linear(&[1.0; 21]);
        let game = CoalitionGame::new(&net, &[1.0; 21], &[0.0; 21]).unwrap();
        assert!(matches!(sii_exact(&game), Err(Error::IntractableDimension { d: 21 })));
    }

    #[test]
    fn monte_carlo_is_deterministic_per_seed() {
        let net = smooth_net(5, 2);
        let game = CoalitionGame::new(&net, &[1.0, 0.5, -0.5, 2.0, 0.1], &[0.0; 5]).unwrap();
        let a = sii_monte_carlo(&game, 40, 7).unwrap();
        let b = sii_monte_carlo(&game, 40, 7).unwrap();
        let c = sii_monte_carlo(&game, 40, 8).unwrap();
        assert_eq!(a.gamma, b.gamma);
        assert_ne!(a.gamma, c.gamma);
    }

    #[test]
    fn nid_zero_column_kills_pairs() {
        let w1 = array![[1.0, 0.0, 2.0], [0.5, 0.0, -1.0]];
        let net = DenseNetwork::new(
            3,
            vec![
                Layer::new(w1, Array1::zeros(2), Activation::Relu).unwrap(),
                Layer::new(array![[1.0, -3.0]], Array1::zeros(1), Activation::Identity).unwrap(),
            ],
            0,
        )
        .unwrap();
        let ranked = neural_interaction_detection(&net, NidAggregation::Min);
        for p in &ranked {
            if p.i == 1 || p.j == 1 {
                assert_eq!(p.strength, 0.0);
            }
        }
        // min(1, 2) * 1 + min(0.5, 1) * 3
        assert_eq!((ranked[0].i, ranked[0].j, ranked[0].strength), (0, 2, 2.5));
    }

    #[test]
    fn nid_single_unit() {
        let net = DenseNetwork::new(
            2,
            vec![
                Layer::new(array![[1.0, 1.0]], Array1::zeros(1), Activation::Relu).unwrap(),
                Layer::new(array![[1.0]], Array1::zeros(1), Activation::Identity).unwrap(),
            ],
            0,
        )
        .unwrap();
        let ranked = neural_interaction_detection(&net, NidAggregation::Min);
        assert_eq!(ranked, vec![RankedPair { i: 0, j: 1, strength: 1.0 }]);
        let mean = neural_interaction_detection(&net, NidAggregation::Mean);
        assert_eq!(mean[0].strength, 1.0);
    }

    #[test]
    fn nid_matrix_is_symmetric() {
        let net = smooth_net(4, 5);
        let m = nid_matrix(&neural_interaction_detection(&net, NidAggregation::Min), 4);
        assert_eq!(m, m.t());
        assert!(m.diag().iter().all(|&v| v == 0.0));
    }
}
