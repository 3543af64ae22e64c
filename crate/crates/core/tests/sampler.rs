use std::collections::HashMap;

use blocksolve::rng::{stream_rng, Stream};
use blocksolve::sampler::sample_subset;
use proptest::prelude::*;

#[test]
fn pairs_of_four_are_uniform() {
    let mut rng = stream_rng(11, Stream::Sampling);
    let draws = 60_000;
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
    for _ in 0..draws {
        *counts.entry(sample_subset(&mut rng, 4, 2).unwrap().indices).or_default() += 1;
    }
    assert_eq!(counts.len(), 6);
    for (subset, c) in counts {
        let freq = c as f64 / draws as f64;
        assert!((freq - 1.0 / 6.0).abs() < 0.01, "{subset:?} drawn with frequency {freq}");
    }
}

#[test]
fn same_seed_same_sequence() {
    let mut a = stream_rng(5, Stream::Sampling);
    let mut b = stream_rng(5, Stream::Sampling);
    for _ in 0..100 {
        assert_eq!(sample_subset(&mut a, 9, 3).unwrap(), sample_subset(&mut b, 9, 3).unwrap());
    }
}

#[test]
fn out_of_range_sizes_fail() {
    let mut rng = stream_rng(0, Stream::Sampling);
    for (total, n) in [(3, 0), (3, 4), (0, 1)] {
        let err = sample_subset(&mut rng, total, n).unwrap_err();
        assert!(err.to_string().contains("uniform subset sampling"));
    }
}

proptest! {
    #[test]
    fn subsets_are_sorted_distinct_and_in_range(seed in any::<u64>(), total in 1usize..30, frac in 0.0f64..1.0) {
        let n = 1 + ((total - 1) as f64 * frac) as usize;
        let mut rng = stream_rng(seed, Stream::Sampling);
        let s = sample_subset(&mut rng, total, n).unwrap();
        prop_assert_eq!(s.len(), n);
        prop_assert!(s.indices.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(s.indices.iter().all(|&i| i < total));
    }
}
