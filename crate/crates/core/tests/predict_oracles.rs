//! Prediction engine against exhaustive brute-force oracles, plus weight
//! and window properties.

use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fontsense_core::predict::{
    extend_attributes, extension_weights, nearest_seed_neighbors, predict_similar, FontRecord,
    PredictionConfig, Provenance, WeightingMode, ATTRIBUTE_DIM, EMBEDDING_DIM, PRIORITY_COUNT,
};

fn random_font(name: String, rng: &mut ChaCha8Rng, with_embedding: bool) -> FontRecord {
    FontRecord::new(
        name,
        (0..ATTRIBUTE_DIM).map(|_| rng.gen_range(0.0..=100.0)).collect(),
        with_embedding.then(|| (0..EMBEDDING_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect()),
        Provenance::Seed,
    )
    .unwrap()
}

fn random_config(rng: &mut ChaCha8Rng) -> PredictionConfig {
    let mut indices: Vec<usize> = (0..ATTRIBUTE_DIM).collect();
    use rand::seq::SliceRandom;
    indices.shuffle(rng);
    indices.truncate(PRIORITY_COUNT);
    PredictionConfig {
        priority: indices,
        weights: (0..PRIORITY_COUNT).map(|_| rng.gen_range(0.1..4.0)).collect(),
        intervals: (0..PRIORITY_COUNT).map(|_| rng.gen_range(5.0..=100.0)).collect(),
        top_n: rng.gen_range(1..30),
        widen_factor: rng.gen_range(1.1..2.5),
        min_candidates: rng.gen_range(0..25),
    }
}

/// Literal restatement of the query contract: filter every font through the
/// (possibly widened) windows, rank by weighted distance then name, truncate.
fn predict_oracle(query_name: &str, dataset: &[FontRecord], config: &PredictionConfig) -> Vec<(String, f64)> {
    let query = dataset.iter().find(|f| f.name == query_name).unwrap();
    let mut half_widths = config.intervals.clone();
    let loop_result: Vec<&FontRecord>;
    loop {
        let hits: Vec<&FontRecord> = dataset
            .iter()
            .filter(|f| f.name != query_name)
            .filter(|f| {
                config
                    .priority
                    .iter()
                    .zip(&half_widths)
                    .all(|(&p, &hw)| (f.attributes[p] - query.attributes[p]).abs() <= hw)
            })
            .collect();
        if hits.len() >= config.min_candidates || half_widths.iter().all(|&hw| hw >= 100.0) {
            loop_result = hits;
            break;
        }
        for hw in &mut half_widths {
            *hw = (*hw * config.widen_factor).min(100.0);
        }
    }
    let mut scored: Vec<(String, f64)> = loop_result
        .into_iter()
        .map(|f| {
            let d = config
                .priority
                .iter()
                .zip(&config.weights)
                .map(|(&p, &w)| w * (query.attributes[p] - f.attributes[p]).powi(2))
                .sum::<f64>()
                .sqrt();
            (f.name.clone(), d)
        })
        .collect();
    scored.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    scored.truncate(config.top_n);
    scored
}

#[test]
fn predict_similar_matches_the_exhaustive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0eac1e);
    for trial in 0..60 {
        let n = rng.gen_range(2..=120);
        let dataset: Vec<FontRecord> =
            (0..n).map(|i| random_font(format!("font-{i:03}"), &mut rng, false)).collect();
        let config = random_config(&mut rng);
        let query = format!("font-{:03}", rng.gen_range(0..n));
        let got = predict_similar(&query, &dataset, &config).unwrap();
        let expected = predict_oracle(&query, &dataset, &config);
        assert_eq!(got.len(), expected.len(), "trial {trial}");
        for (g, (name, dist)) in got.iter().zip(&expected) {
            assert_eq!(&g.name, name, "trial {trial}");
            assert!((g.distance - dist).abs() < 1e-12, "trial {trial}");
        }
    }
}

#[test]
fn shrinking_a_window_never_adds_candidates() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x51312);
    for _ in 0..40 {
        let n = rng.gen_range(5..=80);
        let dataset: Vec<FontRecord> =
            (0..n).map(|i| random_font(format!("font-{i:03}"), &mut rng, false)).collect();
        // Disable widening so the raw window filter is observable.
        let mut config = random_config(&mut rng);
        config.min_candidates = 0;
        config.top_n = n;
        let query = format!("font-{:03}", rng.gen_range(0..n));

        let wide = predict_similar(&query, &dataset, &config).unwrap();
        let mut narrow_config = config.clone();
        for hw in &mut narrow_config.intervals {
            *hw = (*hw * 0.5).max(1.0);
        }
        let narrow = predict_similar(&query, &dataset, &narrow_config).unwrap();

        let wide_names: Vec<&str> = wide.iter().map(|r| r.name.as_str()).collect();
        for r in &narrow {
            assert!(wide_names.contains(&r.name.as_str()), "candidate appeared from nowhere");
        }
    }
}

#[test]
fn rescaling_all_weights_preserves_the_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5ca1e);
    for _ in 0..25 {
        let n = rng.gen_range(3..=60);
        let dataset: Vec<FontRecord> =
            (0..n).map(|i| random_font(format!("font-{i:03}"), &mut rng, false)).collect();
        let config = random_config(&mut rng);
        let query = format!("font-{:03}", rng.gen_range(0..n));
        let base = predict_similar(&query, &dataset, &config).unwrap();

        let factor = rng.gen_range(0.01..50.0);
        let mut scaled_config = config.clone();
        for w in &mut scaled_config.weights {
            *w *= factor;
        }
        let scaled = predict_similar(&query, &dataset, &scaled_config).unwrap();
        let base_names: Vec<&str> = base.iter().map(|r| r.name.as_str()).collect();
        let scaled_names: Vec<&str> = scaled.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(base_names, scaled_names);
    }
}

#[test]
fn knn_matches_a_full_sort() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x42);
    for _ in 0..20 {
        let n = rng.gen_range(2..=50);
        let seed: Vec<FontRecord> =
            (0..n).map(|i| random_font(format!("seed-{i:03}"), &mut rng, true)).collect();
        let query: Vec<f64> = (0..EMBEDDING_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let k = rng.gen_range(1..=n);
        let got = nearest_seed_neighbors(&query, &seed, k).unwrap();

        // Exhaustive oracle: compute every distance by direct summation and
        // sort the whole list.
        let mut all: Vec<(usize, f64)> = seed
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let emb = f.embedding.as_ref().unwrap();
                let mut sum = 0.0;
                for d in 0..EMBEDDING_DIM {
                    sum += (query[d] - emb[d]) * (query[d] - emb[d]);
                }
                (i, sum.sqrt())
            })
            .collect();
        all.sort_by(|a, b| {
            a.1.partial_cmp(&b.1).unwrap().then_with(|| seed[a.0].name.cmp(&seed[b.0].name))
        });
        for (g, (i, d)) in got.iter().zip(&all) {
            assert_eq!(g.index, *i);
            assert!((g.distance - d).abs() < 1e-12);
        }
    }
}

#[test]
fn a_new_font_matching_a_seed_embedding_copies_its_attributes_at_k2() {
    // Distance 0 to the matched seed gives it weight 1 under the default
    // mode with k = 2; the other neighbor's weight is 0.
    let mut rng = ChaCha8Rng::seed_from_u64(0x1D);
    let seed: Vec<FontRecord> =
        (0..5).map(|i| random_font(format!("seed-{i}"), &mut rng, true)).collect();
    let twin = fontsense_core::predict::EmbeddingOnlyFont {
        name: "twin".into(),
        embedding: seed[2].embedding.clone().unwrap(),
    };
    let config = fontsense_core::predict::ExtensionConfig { k: 2, mode: WeightingMode::InverseDistance };
    let out = fontsense_core::predict::extend_dataset(&seed, &[twin], &config).unwrap();
    let extended = out.last().unwrap();
    assert_eq!(extended.provenance, Provenance::Extended);
    for (a, b) in extended.attributes.iter().zip(&seed[2].attributes) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn extended_attributes_stay_inside_neighbor_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xB0);
    for _ in 0..200 {
        let k = rng.gen_range(2..=8);
        let neighbors: Vec<FontRecord> =
            (0..k).map(|i| random_font(format!("n{i}"), &mut rng, false)).collect();
        let distances: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..10.0)).collect();
        let weights = extension_weights(&distances, WeightingMode::InverseDistance).unwrap();
        let refs: Vec<&FontRecord> = neighbors.iter().collect();
        let out = extend_attributes(&refs, &weights).unwrap();
        for a in 0..ATTRIBUTE_DIM {
            let min = neighbors.iter().map(|f| f.attributes[a]).fold(f64::INFINITY, f64::min);
            let max = neighbors.iter().map(|f| f.attributes[a]).fold(f64::NEG_INFINITY, f64::max);
            assert!(out[a] >= min - 1e-9 && out[a] <= max + 1e-9);
        }
    }
}

proptest! {
    #[test]
    fn default_weights_sum_to_one_and_decrease_with_distance(
        distances in proptest::collection::vec(0.0f64..1000.0, 2..10)
    ) {
        let sorted = {
            let mut d = distances.clone();
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            d
        };
        let weights = extension_weights(&sorted, WeightingMode::InverseDistance).unwrap();
        let sum: f64 = weights.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        for pair in weights.windows(2) {
            prop_assert!(pair[0] >= pair[1] - 1e-12, "weights rose with distance: {pair:?}");
        }
        let constant = extension_weights(&sorted, WeightingMode::Constant).unwrap();
        let k = sorted.len() as f64;
        for w in &constant {
            prop_assert!((w - 1.0 / (k - 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn weighted_average_matches_direct_summation(
        seed_val in 0u64..1000,
        k in 2usize..6,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed_val);
        let neighbors: Vec<FontRecord> =
            (0..k).map(|i| random_font(format!("n{i}"), &mut rng, false)).collect();
        let mut weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        let refs: Vec<&FontRecord> = neighbors.iter().collect();
        let out = extend_attributes(&refs, &weights).unwrap();
        for a in 0..ATTRIBUTE_DIM {
            let mut direct = 0.0;
            for (f, w) in neighbors.iter().zip(&weights) {
                direct += w * f.attributes[a];
            }
            prop_assert!((out[a] - direct.clamp(0.0, 100.0)).abs() < 1e-9);
        }
    }
}
