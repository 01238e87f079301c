//! Property tests for the tensor kernel invariants.

use proptest::prelude::*;
use sqa_core::{SeededRng, Tensor};

fn small_dim() -> impl Strategy<Value = usize> {
    1usize..8
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matmul_is_associative_within_tolerance(
        m in small_dim(), k in small_dim(), p in small_dim(), q in small_dim(), seed in 0u64..1000
    ) {
        let mut rng = SeededRng::new(seed);
        let a: Tensor = Tensor::seeded_uniform(vec![m, k], &mut rng, 1).unwrap();
        let b: Tensor = Tensor::seeded_uniform(vec![k, p], &mut rng, 1).unwrap();
        let c: Tensor = Tensor::seeded_uniform(vec![p, q], &mut rng, 1).unwrap();
        let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
        let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
        for (x, y) in left.data().iter().zip(right.data()) {
            let rel = (x - y).abs() / x.abs().max(y.abs()).max(1.0);
            prop_assert!(rel < 1e-9, "rel {rel}");
        }
    }

    #[test]
    fn softmax_rows_sum_to_one(rows in small_dim(), cols in small_dim(), seed in 0u64..1000) {
        let mut rng = SeededRng::new(seed);
        let x: Tensor = Tensor::seeded_uniform(vec![rows, cols], &mut rng, 1).unwrap();
        let s = x.softmax_rows().unwrap();
        for i in 0..rows {
            let sum: f64 = s.row(i).iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12, "row {i} sums to {sum}");
            prop_assert!(s.row(i).iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn softmax_invariant_under_row_shift(cols in small_dim(), shift in -50.0f64..50.0, seed in 0u64..1000) {
        let mut rng = SeededRng::new(seed);
        let x: Tensor = Tensor::seeded_uniform(vec![1, cols], &mut rng, 1).unwrap();
        let shifted: Tensor = Tensor::from_vec(
            vec![1, cols],
            x.data().iter().map(|v| v + shift).collect(),
        ).unwrap();
        let a = x.softmax_rows().unwrap();
        let b = shifted.softmax_rows().unwrap();
        for (p, q) in a.data().iter().zip(b.data()) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn split_merge_heads_mutually_inverse(
        n in small_dim(), h in 1usize..5, d in 1usize..5, seed in 0u64..1000
    ) {
        let mut rng = SeededRng::new(seed);
        let x: Tensor = Tensor::seeded_uniform(vec![n, h * d], &mut rng, 1).unwrap();
        let round = x.split_heads(h, d).unwrap().merge_heads().unwrap();
        prop_assert_eq!(round, x); // bit-exact
    }
}
