use latent_split::decomposition::{embed_content, embed_style, fit_split, select_k, split, SelectionStrategy};
use latent_split::linalg::{orthonormality_error, svd};
use latent_split::metrics::silhouette;
use latent_split::synth::{generate, SynthConfig};
use latent_split::{Error, FeatureMatrix};
use latent_split_oracles::TestRng;
use proptest::prelude::*;

fn random(rows: usize, cols: usize, seed: u64) -> FeatureMatrix {
    FeatureMatrix::new(TestRng::new(seed).normal_matrix(rows, cols)).unwrap()
}

fn strategy() -> impl Strategy<Value = SelectionStrategy> {
    prop_oneof![
        Just(SelectionStrategy::TopK),
        Just(SelectionStrategy::LastK),
        any::<u64>().prop_map(|seed| SelectionStrategy::RandomK { seed }),
        any::<u64>().prop_map(|seed| SelectionStrategy::TopHalfRandomHalf { seed }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn style_and_content_partition_directions(
        seed in any::<u64>(), rows in 2usize..20, cols in 2usize..20, k_frac in 0.0f64..1.0, strat in strategy()
    ) {
        let f = svd(&random(rows, cols, seed)).unwrap();
        let r = f.rank_bound();
        let k = 1 + ((r - 1) as f64 * k_frac) as usize;
        prop_assume!(k < r);
        let s = split(&f, k, strat, "g").unwrap();
        prop_assert_eq!(s.style_indices.len(), k);
        let mut all: Vec<usize> = s.style_indices.iter().chain(&s.content_indices).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..r).collect::<Vec<_>>());
        let mut both = s.style_basis.columns().to_owned();
        both.append(ndarray::Axis(1), s.content_basis.columns().view()).unwrap();
        prop_assert!(orthonormality_error(both.view()) < 1e-8);
        prop_assert_eq!(split(&f, k, strat, "g").unwrap(), s);
    }

    #[test]
    fn top_k_style_sets_are_nested(seed in any::<u64>(), k in 1usize..9) {
        let f = svd(&random(30, 10, seed)).unwrap();
        let small = split(&f, k, SelectionStrategy::TopK, "g").unwrap();
        let large = split(&f, k + 1, SelectionStrategy::TopK, "g").unwrap();
        prop_assert!(small.style_indices.iter().all(|i| large.style_indices.contains(i)));
        prop_assert!(large.content_indices.iter().all(|i| small.content_indices.contains(i)));
    }

    #[test]
    fn full_rank_split_preserves_squared_norms(seed in any::<u64>(), k in 1usize..8, strat in strategy()) {
        let x = random(20, 8, seed);
        let s = fit_split(&x, k, strat, "g").unwrap();
        let style = embed_style(&x, &s).unwrap();
        let content = embed_content(&x, &s).unwrap();
        for i in 0..20 {
            let row = x.as_array().row(i);
            let total = row.dot(&row);
            let parts = style.as_array().row(i).dot(&style.as_array().row(i))
                + content.as_array().row(i).dot(&content.as_array().row(i));
            prop_assert!((total - parts).abs() <= 1e-10 * total.max(1.0));
        }
    }
}

#[test]
fn k_must_leave_content_directions() {
    let f = svd(&random(10, 6, 1)).unwrap();
    assert!(matches!(split(&f, 0, SelectionStrategy::TopK, "g"), Err(Error::KOutOfRange { .. })));
    assert!(matches!(split(&f, 6, SelectionStrategy::TopK, "g"), Err(Error::KOutOfRange { k: 6, available: 6 })));
    // wide genre: only N directions exist
    let f = svd(&random(4, 10, 1)).unwrap();
    let s = split(&f, 3, SelectionStrategy::LastK, "g").unwrap();
    assert_eq!(s.style_indices, [1, 2, 3]);
    assert_eq!(s.available_directions(), 4);
}

#[test]
fn embeddings_reject_wrong_width() {
    let s = fit_split(&random(10, 6, 1), 2, SelectionStrategy::TopK, "g").unwrap();
    assert!(matches!(embed_style(&random(3, 5, 2), &s), Err(Error::DimensionMismatch(_))));
}

#[test]
fn strategy_serializes_with_variant_tag() {
    let json = serde_json::to_string(&SelectionStrategy::RandomK { seed: 7 }).unwrap();
    assert_eq!(json, r#"{"variant":"random_k","seed":7}"#);
    let back: SelectionStrategy = serde_json::from_str(&json).unwrap();
    assert_eq!(back, SelectionStrategy::RandomK { seed: 7 });
    assert!(SelectionStrategy::parse("bogus", 0).is_err());
}

#[test]
fn flat_gap_picks_smallest_candidate() {
    let x = random(30, 12, 3);
    let games: Vec<String> = (0..30).map(|i| format!("g{}", i % 3)).collect();
    let sweep = select_k(&x, &games, &[8, 2, 4], |_, _| Ok(0.25)).unwrap();
    assert_eq!(sweep.chosen_k, 2);
    assert!(sweep.gap_diff.iter().all(|d| *d == 0.0));
}

#[test]
fn select_k_errors() {
    let x = random(30, 12, 3);
    let one_game = vec!["g"; 30];
    assert!(matches!(select_k(&x, &one_game, &[2], |_, _| Ok(0.0)), Err(Error::TooFewGames(1))));
    let games: Vec<String> = (0..30).map(|i| format!("g{}", i % 3)).collect();
    assert!(matches!(select_k(&x, &games, &[12], |_, _| Ok(0.0)), Err(Error::KOutOfRange { .. })));
    assert!(matches!(select_k(&x, &games[..5], &[2], |_, _| Ok(0.0)), Err(Error::LengthMismatch { .. })));
}

#[test]
fn select_k_finds_planted_dimension() {
    let config = SynthConfig { samples_per_game: 60, ..SynthConfig::standard(11) };
    let (ds, _) = generate(&config).unwrap();
    let sweep = select_k(ds.features(), &ds.game_ids(), &[1, 2, 4, 8, 16], |m, labels| {
        Ok(silhouette(m.view(), labels)?.mean_score)
    })
    .unwrap();
    assert_eq!(sweep.chosen_k, 4, "{sweep:?}");
}

#[test]
fn select_k_ignores_row_order() {
    let config = SynthConfig { samples_per_game: 20, ..SynthConfig::standard(5) };
    let (ds, _) = generate(&config).unwrap();
    let order: Vec<usize> = (0..ds.n_rows()).map(|i| (i * 7) % ds.n_rows()).collect();
    let games = ds.game_ids();
    let shuffled_games: Vec<&str> = order.iter().map(|&i| games[i]).collect();
    let score = |m: &FeatureMatrix, l: &[usize]| Ok(silhouette(m.view(), l)?.mean_score);
    let a = select_k(ds.features(), &games, &[1, 2, 4, 8], score).unwrap();
    let b = select_k(&ds.features().select_rows(&order), &shuffled_games, &[1, 2, 4, 8], score).unwrap();
    assert_eq!(a.chosen_k, b.chosen_k);
    for (p, q) in a.gap_diff.iter().zip(&b.gap_diff) {
        assert!((p - q).abs() < 1e-9);
    }
}

#[test]
fn top_k_dominates_other_strategies_on_planted_data() {
    let (ds, _) = generate(&SynthConfig { samples_per_game: 60, ..SynthConfig::standard(0) }).unwrap();
    let (labels, _) = latent_split::dataset::cluster_ids(&ds.game_ids());
    let score = |strategy| {
        let split = fit_split(ds.features(), 4, strategy, "genre00").unwrap();
        silhouette(embed_style(ds.features(), &split).unwrap().view(), &labels).unwrap().mean_score
    };
    let top = score(SelectionStrategy::TopK);
    for seed in 0..6 {
        let floor = score(SelectionStrategy::RandomK { seed }).max(score(SelectionStrategy::LastK));
        let half = score(SelectionStrategy::TopHalfRandomHalf { seed });
        assert!(top >= half, "seed {seed}: top {top} < half {half}");
        assert!(top - floor >= 0.1, "seed {seed}: top {top} vs {floor}");
        assert!(half - floor >= 0.1, "seed {seed}: half {half} vs {floor}");
    }
}
