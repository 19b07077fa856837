mod common;

use proptest::prelude::*;
use shiftcheck::benchmarks::{find, noisy_sum, noisy_sum_buggy, rnm, sv};
use shiftcheck::bucketing::{bucket_runs, Bucket};
use shiftcheck::harness::*;
use shiftcheck::symbolic::{explore, EngineConfig, EngineKind};

#[test]
fn identical_inputs_pass_at_zero_epsilon() {
    let Some(cfg) = common::harness(100) else { return };
    for xs in [vec![0.5, -1.0, 0.25], vec![1.0]] {
        for prog in [rnm(&xs).unwrap(), sv(&xs).unwrap(), noisy_sum(&xs).unwrap()] {
            let r = expect_dp(&prog, &prog, 0.0, &cfg, 3).unwrap();
            assert_eq!(r.outcome, Outcome::Pass);
            for b in &r.buckets {
                assert!(b.witness.iter().all(WitnessCheck::ok));
            }
        }
    }
}

#[test]
fn noisy_sum_cost_is_the_input_distance() {
    let Some(cfg) = common::harness(50) else { return };
    let (p1, p2) = (noisy_sum(&[0.0]).unwrap(), noisy_sum(&[1.0]).unwrap());
    let r = expect_dp(&p1, &p2, 1.0, &cfg, 1).unwrap();
    assert_eq!(r.outcome, Outcome::Pass);
    let w = &r.buckets[0].witness[0];
    assert!(w.ok());
    assert_eq!(w.cost, 1.0);
    // the same distance costs twice as much at width 0.5
    let (q1, q2) = (noisy_sum_buggy(&[0.0]).unwrap(), noisy_sum_buggy(&[1.0]).unwrap());
    assert!(matches!(expect_dp(&q1, &q2, 1.0, &cfg, 1).unwrap().outcome, Outcome::Reject { .. }));
    assert_eq!(expect_dp(&q1, &q2, 2.0, &cfg, 1).unwrap().outcome, Outcome::Pass);
}

#[test]
fn campaign_stops_at_first_rejection() {
    let Some(harness) = common::harness(100) else { return };
    let bench = find("nsBuggy").unwrap();
    let cfg = CampaignConfig {
        ntests: 10,
        mode: CampaignMode::Reject,
        jobs: 2,
        harness,
        ..CampaignConfig::default()
    };
    let r = run_campaign(&bench, bench.epsilon, &cfg).unwrap();
    assert_eq!(r.exit_code(), 1);
    let first = r.aggregate.first_failure_iteration.unwrap();
    assert_eq!(r.pairs.last().unwrap().iteration, first);
    assert_eq!(r.seeds.pairs.len(), r.pairs.len());
    let json = serde_json::to_value(&r).unwrap();
    assert_eq!(json["benchmark"], "nsBuggy");
    assert!(json["pairs"][0]["bucket_verdicts"].is_array());
}

#[test]
fn campaigns_are_reproducible() {
    let Some(harness) = common::harness(50) else { return };
    let bench = find("rnm").unwrap();
    let cfg = CampaignConfig {
        ntests: 4,
        harness,
        ..CampaignConfig::default()
    };
    let a = run_campaign(&bench, bench.epsilon, &cfg).unwrap();
    let b = run_campaign(&bench, bench.epsilon, &CampaignConfig { jobs: 1, ..cfg }).unwrap();
    assert_eq!(a.seeds.pairs, b.seeds.pairs);
    for (p, q) in a.pairs.iter().zip(&b.pairs) {
        assert_eq!(p.x1, q.x1);
        let (ka, kb): (Vec<_>, Vec<_>) = (
            p.bucket_verdicts.iter().map(|b| (&b.key, &b.verdict)).collect(),
            q.bucket_verdicts.iter().map(|b| (&b.key, &b.verdict)).collect(),
        );
        assert_eq!(ka, kb);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Dropping traces from a satisfiable bucket keeps it satisfiable.
    #[test]
    fn satisfiable_buckets_stay_satisfiable_on_subsets(seed in any::<u64>(), mask in any::<u64>()) {
        let Some(cfg) = common::harness(40) else { return Ok(()) };
        let pair = campaign_pair(&find("rnm").unwrap(), seed, 0);
        let (p1, p2) = (rnm(&pair.x1).unwrap(), rnm(&pair.x2).unwrap());
        let runs = instrumented_runs(&p1, cfg.ntraces, seed, &cfg.run).unwrap();
        let ex = explore(&p2, EngineKind::Streamline, &EngineConfig::default()).unwrap();
        for b in bucket_runs(&runs) {
            let f = bucket_formula(&b, &ex, 2.0, "full").unwrap();
            if !matches!(solve_formula(&f, &cfg.solver).unwrap(), BucketVerdict::Sat { .. }) {
                continue;
            }
            let runs: Vec<_> = b.runs.iter().enumerate().filter(|(i, _)| mask >> (i % 64) & 1 == 1).map(|(_, r)| r.clone()).collect();
            if runs.is_empty() {
                continue;
            }
            let sub = Bucket { key: b.key.clone(), runs };
            let g = bucket_formula(&sub, &ex, 2.0, "subset").unwrap();
            let verdict = solve_formula(&g, &cfg.solver).unwrap();
            prop_assert!(matches!(verdict, BucketVerdict::Sat { .. }), "{:?}", verdict);
        }
    }
}

#[test]
fn extreme_range_factor() {
    let f = ln_range_factor(f64::MIN, f64::MAX, 2f64.powi(-52));
    assert!(f.is_finite());
    assert!(746.0 < f && f < 747.0, "{f}");
}

#[test]
fn sample_bound_examples() {
    let m = rdp_sample_bound(1e-5, 0.0, 1, 1, f64::MIN, f64::MAX, 2f64.powi(-52)).unwrap();
    assert!(m > 100_000);
    // m grows linearly with n k
    let one = rdp_sample_bound(0.01, 0.0, 1, 1, -10.0, 10.0, 2f64.powi(-20)).unwrap();
    let four = rdp_sample_bound(0.01, 0.0, 2, 2, -10.0, 10.0, 2f64.powi(-20)).unwrap();
    assert!(four.abs_diff(4 * one) <= 4);
    assert!(rdp_sample_bound(0.0, 0.0, 1, 1, 0.0, 1.0, 1.0).is_err());
    assert!(rdp_sample_bound(0.1, 0.0, 1, 1, 1.0, 1.0, 1.0).is_err());
    assert!(rdp_sample_bound(0.1, 0.0, 0, 1, 0.0, 1.0, 1.0).is_err());
    assert!(rdp_sample_bound(0.1, -1.0, 1, 1, 0.0, 1.0, 1.0).is_err());
}

#[test]
fn failure_bound_examples() {
    let ln2 = std::f64::consts::LN_2;
    assert!((failure_prob_bound(10.0, ln2 / 2.0, ln2 / 2.0) - 2f64.powi(-10)).abs() < 1e-15);
    assert_eq!(failure_prob_bound(3.0, 0.0, 0.0), 1.0);
    for (d, t, a) in [(1.0, 0.5, 0.1), (4.0, 0.01, 0.2), (7.5, 1.0, 0.0)] {
        let once = failure_prob_bound(d, t, a);
        let twice = failure_prob_bound(2.0 * d, t, a);
        assert!((twice - once * once).abs() <= 1e-12 * once * once);
    }
}
