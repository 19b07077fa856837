use num_rational::BigRational;
use num_traits::FromPrimitive;
use proptest::prelude::*;
use shiftcheck::benchmarks::{catalog, rnm};
use shiftcheck::interp::{instrumented_run, instrumented_run_with_noise, replay_exact, run_rng, RunConfig};
use shiftcheck::value::Value;

#[test]
fn rnm_with_injected_noise() {
    let prog = rnm(&[1.0, 2.0, 10.0]).unwrap();
    let out = instrumented_run_with_noise(&prog, vec![0.8, -1.2, -0.9]).unwrap();
    assert_eq!(out.output.unwrap().strip(), Value::Int(2));
    let samples: Vec<f64> = out.trace.iter().map(|t| t.sample).collect();
    let want = [1.8, 0.8, 9.1];
    for (s, w) in samples.iter().zip(want) {
        assert!((s - w).abs() < 1e-12, "{samples:?}");
    }
    let centers: Vec<f64> = out.trace.iter().map(|t| t.center).collect();
    assert_eq!(centers, vec![1.0, 2.0, 10.0]);
}

#[test]
fn same_seed_same_trace() {
    let prog = rnm(&[0.5, -0.25, 1.0]).unwrap();
    let cfg = RunConfig::default();
    let a = instrumented_run(&prog, &mut run_rng(11, 3), &cfg).unwrap();
    let b = instrumented_run(&prog, &mut run_rng(11, 3), &cfg).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.output, b.output);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Exact replay of a recorded trace reproduces the output and centers.
    #[test]
    fn replay_reproduces_runs(bench_idx in 0usize..24, seed in any::<u64>(), xs in prop::collection::vec(-2.0f64..2.0, 2..4)) {
        let benches = catalog();
        let b = &benches[bench_idx % benches.len()];
        let xs: Vec<f64> = xs.iter().map(|x| (x * 64.0).round() / 64.0).collect();
        let prog = b.program(&xs).unwrap();
        let out = instrumented_run(&prog, &mut run_rng(seed, 0), &RunConfig::default()).unwrap();
        let (v, draws) = replay_exact(&prog, out.exact_samples(), 1_000_000).unwrap();
        prop_assert_eq!(draws.len(), out.trace.len());
        for (d, t) in draws.iter().zip(&out.trace) {
            prop_assert_eq!(&d.center, &BigRational::from_f64(t.center).unwrap());
        }
        if let Some(o) = &out.output {
            let approx = v.map_scalar(&|r: &BigRational| num_traits::ToPrimitive::to_f64(r).unwrap());
            prop_assert_eq!(approx, o.strip());
        }
    }
}
