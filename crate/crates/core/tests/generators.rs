use proptest::prelude::*;
use shiftcheck::generators::*;
use shiftcheck::sampler::DEFAULT_GRANULARITY;

fn relations() -> impl Strategy<Value = Relation> {
    prop_oneof![
        (0.25f64..2.0).prop_map(Relation::L1),
        (0.25f64..2.0).prop_map(Relation::CoordinateWise),
        (0usize..3).prop_map(Relation::DatabaseDistance),
    ]
}

fn on_grid(x: f64) -> bool {
    let k = x / DEFAULT_GRANULARITY;
    k == k.round()
}

#[test]
fn multiset_distance_oracle() {
    assert_eq!(multiset_distance(&[], &[]), 0);
    assert_eq!(multiset_distance(&[1.0, 2.0], &[2.0, 1.0]), 0);
    assert_eq!(multiset_distance(&[1.0, 1.0], &[1.0]), 1);
    assert_eq!(multiset_distance(&[1.0, 2.0], &[1.0, 3.0]), 2);
}

#[test]
fn relation_oracle() {
    assert!(related(&[0.0, 0.0], &[0.5, -0.5], Relation::L1(1.0)));
    assert!(!related(&[0.0, 0.0], &[0.75, -0.5], Relation::L1(1.0)));
    assert!(related(&[0.0, 0.0], &[0.75, -0.5], Relation::CoordinateWise(1.0)));
    assert!(!related(&[0.0], &[1.0], Relation::CoordinateWise(1.0)));
    assert!(!related(&[0.0], &[0.0, 0.0], Relation::L1(1.0)));
    assert!(related(&[0.0], &[0.0, 0.0], Relation::DatabaseDistance(1)));
}

proptest! {
    #[test]
    fn generated_pairs_are_related(rel in relations(), size in 0usize..8, seed in any::<u64>()) {
        let cfg = GenConfig::default();
        let pair = generate(rel, size, seed, &cfg);
        prop_assert!(verify(&pair), "{:?}", pair);
        prop_assert_eq!(pair.x1.len(), size);
        prop_assert!(pair.x1.iter().all(|&x| cfg.low <= x && x < cfg.high));
        prop_assert!(pair.x1.iter().chain(&pair.x2).all(|&x| on_grid(x)));
    }

    #[test]
    fn generation_is_deterministic(rel in relations(), size in 0usize..8, seed in any::<u64>()) {
        let cfg = GenConfig::with_range(0.0, 1.0);
        prop_assert_eq!(generate(rel, size, seed, &cfg).x2, generate(rel, size, seed, &cfg).x2);
    }

    #[test]
    fn ramp_is_monotone_and_bounded(start in 0usize..5, extra in 0usize..5, every in 1usize..20, i in 0usize..200) {
        let r = SizeRamp { start, max: start + extra, every };
        prop_assert!(r.size_at(i) <= r.size_at(i + 1));
        prop_assert!(start <= r.size_at(i) && r.size_at(i) <= start + extra);
    }
}
