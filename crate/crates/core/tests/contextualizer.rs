use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sctf_core::contextualizer::{
    add_positional_encoding, attention_weights, contextualize_multisegment_mode,
    contextualize_paths_mode, feed_forward, pool, self_attention, ContextConfig, FeatureSequence,
    FeedForward, Pooling, SequenceMode,
};
use sctf_core::scattering::{PathDescriptor, ScatteringMatrix};

fn matrix_strategy() -> impl Strategy<Value = Array2<f64>> {
    (1usize..8, 1usize..10).prop_flat_map(|(n, d)| {
        prop::collection::vec(-3.0f64..3.0, n * d)
            .prop_map(move |v| Array2::from_shape_vec((n, d), v).unwrap())
    })
}

fn seq(rows: Array2<f64>) -> FeatureSequence {
    FeatureSequence::new(rows, SequenceMode::MultiSegment).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn softmax_rows_are_distributions(x in matrix_strategy()) {
        let w = attention_weights(&x).unwrap();
        for row in w.rows() {
            prop_assert!((row.sum() - 1.0).abs() <= 1e-9);
            prop_assert!(row.iter().all(|&v| v > 0.0 && v <= 1.0));
        }
    }

    #[test]
    fn outputs_stay_in_convex_envelope(x in matrix_strategy()) {
        let out = self_attention(&seq(x.clone())).unwrap();
        for c in 0..x.ncols() {
            let col = x.column(c);
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for &v in out.rows().column(c) {
                prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
            }
        }
    }

    #[test]
    fn single_row_identity(row in prop::collection::vec(-5.0f64..5.0, 1..16)) {
        let x = seq(Array2::from_shape_vec((1, row.len()), row).unwrap());
        prop_assert_eq!(self_attention(&x).unwrap(), x);
    }

    #[test]
    fn permutation_equivariant_without_positions(x in matrix_strategy(), seed in any::<u64>()) {
        let n = x.nrows();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let permuted = x.select(ndarray::Axis(0), &perm);
        let out = self_attention(&seq(x)).unwrap();
        let out_perm = self_attention(&seq(permuted)).unwrap();
        for (i, &p) in perm.iter().enumerate() {
            for c in 0..out.d_model() {
                prop_assert!((out_perm.rows()[[i, c]] - out.rows()[[p, c]]).abs() <= 1e-12);
            }
        }
    }
}

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(0.0..1.0))
}

#[test]
fn paths_mode_is_the_composition() {
    let values = random_matrix(8, 16, 5);
    let paths = (0..8)
        .map(|i| PathDescriptor {
            order: 1,
            scales: vec![i],
        })
        .collect();
    let sm = ScatteringMatrix::new(values.clone(), paths, 31.25).unwrap();
    let cfg = ContextConfig::default();
    let e = contextualize_paths_mode(&sm, &cfg).unwrap();

    let x = FeatureSequence::new(values, SequenceMode::PathsAsSequence).unwrap();
    let step = add_positional_encoding(&x);
    let step = self_attention(&step).unwrap();
    let step = feed_forward(&step, &FeedForward::Identity).unwrap();
    assert_eq!(e.values, pool(&step, Pooling::MeanOverRows));
    assert_eq!(e.dim(), 16);
}

#[test]
fn segment_order_matters() {
    let tokens: Vec<Vec<f64>> = (0..5)
        .map(|s| random_matrix(1, 12, 100 + s).row(0).to_vec())
        .collect();
    let mut reversed = tokens.clone();
    reversed.reverse();
    let cfg = ContextConfig::default();
    let forward = contextualize_multisegment_mode(&tokens, &cfg).unwrap();
    let backward = contextualize_multisegment_mode(&reversed, &cfg).unwrap();
    let diff: f64 = forward
        .values
        .iter()
        .zip(&backward.values)
        .map(|(a, b)| (a - b).abs())
        .sum();
    assert!(diff > 1e-6, "order-insensitive embedding (diff {diff})");

    // Without positions the block is order-blind under mean pooling.
    let no_pe = ContextConfig {
        positional_encoding: false,
        ..Default::default()
    };
    let f = contextualize_multisegment_mode(&tokens, &no_pe).unwrap();
    let b = contextualize_multisegment_mode(&reversed, &no_pe).unwrap();
    for (x, y) in f.values.iter().zip(&b.values) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn identical_segments_pool_to_either_row() {
    let token = vec![0.3; 6];
    let cfg = ContextConfig::default();
    let e = contextualize_multisegment_mode(&[token.clone(), token.clone()], &cfg).unwrap();
    let x = seq(Array2::from_shape_vec((2, 6), [token.clone(), token].concat()).unwrap());
    let attended = self_attention(&add_positional_encoding(&x)).unwrap();
    let rows = attended.rows();
    for c in 0..6 {
        let mean = (rows[[0, c]] + rows[[1, c]]) / 2.0;
        assert!((e.values[c] - mean).abs() < 1e-15);
    }
}

#[test]
fn end_to_end_is_bitwise_deterministic() {
    let tokens: Vec<Vec<f64>> = (0..6)
        .map(|s| random_matrix(1, 180, s).row(0).to_vec())
        .collect();
    let cfg = ContextConfig {
        ffn: FeedForward::RandomProjection {
            target_dim: 64,
            seed: 2024,
        },
        ..Default::default()
    };
    let a = contextualize_multisegment_mode(&tokens, &cfg).unwrap();
    let b = contextualize_multisegment_mode(&tokens, &cfg).unwrap();
    assert_eq!(a.dim(), 64);
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.values), bits(&b.values));
}
