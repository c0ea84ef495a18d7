//! Benchmark protocol properties that need no trained network.

use pathexplain::benchlab::{
    ablate_interactions, all_pairs, convergence_study, gen_interaction_task, rank_corr_task, ConvergenceConfig, Noise,
    RankCorrVariant, Ranking, TaskConfig,
};

#[test]
fn ablating_one_term_injects_its_second_moment_twice() {
    let task = gen_interaction_task(&TaskConfig { n_samples: 10_000, seed: 3, ..TaskConfig::default() }).unwrap();
    let big = task
        .terms
        .iter()
        .max_by(|a, b| a.coefficient.abs().total_cmp(&b.coefficient.abs()))
        .unwrap();
    let mut ranking = vec![(big.i, big.j)];
    ranking.extend(all_pairs(task.d).into_iter().filter(|&p| p != (big.i, big.j)));
    let ablated = ablate_interactions(&task, &Ranking::Global(ranking), 1, Noise::Gaussian { seed: 9 }).unwrap();

    // y' - y = a g (eps - 1), so E[(y' - y)^2] = a^2 E[g^2] E[(eps - 1)^2] = 2 a^2 E[g^2].
    let n = task.n_samples() as f64;
    let observed = (&ablated - &task.ys).mapv(|v| v * v).sum() / n;
    let second_moment = task.xs.rows().into_iter().map(|r| big.eval(&r.to_vec()).powi(2)).sum::<f64>() / n;
    let expected = 2.0 * second_moment;
    assert!((observed - expected).abs() < 0.1 * expected, "{observed} vs {expected}");
}

#[test]
fn ablation_is_deterministic_per_noise_seed() {
    let task = gen_interaction_task(&TaskConfig { n_samples: 500, ..TaskConfig::default() }).unwrap();
    let ranking = Ranking::Global(all_pairs(task.d));
    let run = |seed| ablate_interactions(&task, &ranking, 10, Noise::Gaussian { seed }).unwrap();
    assert_eq!(run(1), run(1));
    assert_ne!(run(1), run(2));
}

#[test]
fn labels_are_rederivable_from_terms() {
    for kind in ["tanhsum", "cossum", "multiply", "maximum", "minimum"] {
        let cfg = TaskConfig { kind: kind.parse().unwrap(), n_samples: 200, ..TaskConfig::default() };
        let task = gen_interaction_task(&cfg).unwrap();
        assert_eq!(task.labels(task.xs.view()), task.ys);
        assert_eq!(gen_interaction_task(&cfg).unwrap(), task);
    }
    for variant in [RankCorrVariant::Multiplicative, RankCorrVariant::MinMax] {
        let task = rank_corr_task(variant, 100, 4);
        assert_eq!(task.labels(task.xs.view()), task.ys);
    }
}

#[test]
fn convergence_error_shrinks_with_k() {
    let cfg = ConvergenceConfig {
        d: 20,
        hidden_layers: 3,
        width: 20,
        betas: vec![1.0, 10.0],
        ks: vec![4, 8, 16, 32, 64, 128],
        ..ConvergenceConfig::default()
    };
    let rows = convergence_study(&cfg).unwrap();
    for beta in [1.0, 10.0] {
        let medians: Vec<f64> = rows.iter().filter(|r| r.beta == beta).map(|r| r.median_error).collect();
        assert!(medians.windows(2).all(|w| w[1] <= w[0]), "beta {beta}: {medians:?}");
    }
}
