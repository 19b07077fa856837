use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shiftcheck::sampler::{DiscreteLaplace, SamplerError, DEFAULT_GRANULARITY};

/// Unnormalized two-sided geometric weights, summed by brute force.
fn oracle_pmf(k: i64, granularity: f64, width: f64, support: i64) -> f64 {
    let a = (-granularity / width).exp();
    let z: f64 = (-support..=support).map(|j| a.powi(j.abs() as i32)).sum();
    a.powi(k.abs() as i32) / z
}

#[test]
fn pmf_matches_brute_force_oracle() {
    let (g, w) = (0.01, 1.0);
    let d = DiscreteLaplace::new(g);
    let support = 10_000;
    let total: f64 = (-support..=support).map(|k| d.pmf(k, w)).sum();
    assert!((total - 1.0).abs() < 1e-9, "mass {total}");
    for k in [-500, -3, 0, 1, 250, 9_999] {
        let (got, want) = (d.pmf(k, w), oracle_pmf(k, g, w, support));
        assert!((got - want).abs() <= 1e-12 * want.max(1e-300) + 1e-15, "k={k}: {got} vs {want}");
    }
}

#[test]
fn consecutive_ratio_is_alpha() {
    let d = DiscreteLaplace::new(0.01);
    for w in [0.5, 1.0, 4.0] {
        let a = (-0.01f64 / w).exp();
        for k in [0i64, 1, 17, 400] {
            let r = d.pmf(k + 1, w) / d.pmf(k, w);
            assert!((r - a).abs() < 1e-12, "width {w}, k {k}");
            assert!((d.pmf(-k, w) - d.pmf(k, w)).abs() < 1e-300 + 1e-12 * d.pmf(k, w));
        }
    }
}

#[test]
fn empirical_frequencies_follow_pmf() {
    let d = DiscreteLaplace::new(0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 200_000;
    let mut counts = std::collections::BTreeMap::new();
    for _ in 0..n {
        *counts.entry(d.sample_steps(1.0, &mut rng).unwrap()).or_insert(0usize) += 1;
    }
    for k in -3..=3 {
        let freq = counts.get(&k).copied().unwrap_or(0) as f64 / n as f64;
        let p = d.pmf(k, 1.0);
        // five standard deviations
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        assert!((freq - p).abs() < 5.0 * sd, "k={k}: {freq} vs {p}");
    }
}

#[test]
fn invalid_parameters_are_rejected() {
    let d = DiscreteLaplace::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(d.sample(0.0, 0.0, &mut rng), Err(SamplerError::InvalidWidth(0.0)));
    assert_eq!(d.sample(0.0, -1.0, &mut rng), Err(SamplerError::InvalidWidth(-1.0)));
    assert!(matches!(d.sample(f64::NAN, 1.0, &mut rng), Err(SamplerError::NonFiniteCenter(_))));
}

proptest! {
    #[test]
    fn samples_stay_on_the_grid(seed in any::<u64>(), steps in -1000i64..1000, width in 0.1f64..8.0) {
        let d = DiscreteLaplace::default();
        let center = steps as f64 * DEFAULT_GRANULARITY;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = d.sample(center, width, &mut rng).unwrap();
        let k = (x - center) / DEFAULT_GRANULARITY;
        prop_assert_eq!(k, k.round());
    }

    #[test]
    fn pmf_is_symmetric_and_decreasing(k in 0i64..10_000, width in 0.1f64..8.0) {
        let d = DiscreteLaplace::new(0.01);
        prop_assert_eq!(d.pmf(k, width), d.pmf(-k, width));
        prop_assert!(d.pmf(k + 1, width) < d.pmf(k, width));
    }
}
