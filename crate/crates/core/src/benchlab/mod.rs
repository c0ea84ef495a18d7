//! Synthetic benchmarks and evaluation protocols for interaction methods.

mod rankcorr;
mod roar;
mod studies;
mod table;
mod tasks;

pub use rankcorr::{
    prepare_rank_corr, rank_correlation, rank_correlation_benchmark, sanity_checks, RankCorrConfig,
    RankCorrMethod, RankCorrModel, RankCorrResult, SanityResult,
};
pub use roar::{
    ablate_interactions, remove_and_retrain, Noise, Ranking, RoarConfig, RoarCurve, RoarMethod, RoarPoint,
    RoarStudy,
};
pub use studies::{
    convergence_study, hardware_descriptor, timing_harness, xor_demo, ConvergenceConfig, ConvergenceRow, TimingConfig,
    TimingMethod, TimingRow, XorConfig, XorReport,
};
pub use table::Table;
pub use tasks::{
    all_pairs, gen_interaction_task, pair_index, rank_corr_task, split_indices, InteractionKind,
    RankCorrVariant, SyntheticTask, TaskConfig, TaskManifest, TaskTerm,
};

/// Ranks with ties replaced by their average (1-based).
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && v[order[end]] == v[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &o in &order[start..end] {
            ranks[o] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Spearman rank correlation with average ranks for ties.
///
/// NaN when either input is constant or the lengths differ.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() || a.len() < 2 {
        return f64::NAN;
    }
    pearson(&average_ranks(a), &average_ranks(b))
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
