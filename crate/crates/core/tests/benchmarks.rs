use std::collections::BTreeSet;

use shiftcheck::benchmarks::*;
use shiftcheck::dsl::Expr;
use shiftcheck::interp::instrumented_run_with_noise;
use shiftcheck::value::Value;

/// Output and centers of a run where every draw returns its center.
fn noiseless(prog: &Expr) -> (Value, Vec<f64>) {
    let out = instrumented_run_with_noise(prog, vec![0.0; 256]).unwrap();
    let centers = out.trace.iter().map(|t| t.center).collect();
    (out.output.expect("no abort").strip(), centers)
}

fn reals(xs: &[f64]) -> Value {
    Value::List(xs.iter().map(|&x| Value::real(x)).collect())
}

fn flags(bs: &[bool]) -> Value {
    Value::List(bs.iter().map(|&b| Value::Bool(b)).collect())
}

#[test]
fn pure_helpers() {
    assert_eq!(prefix_sums(&[1.0, 2.0, 3.0]), vec![1.0, 3.0, 6.0]);
    assert_eq!(prefix_sums(&[]), Vec::<f64>::new());
    assert_eq!(clipped_sum(&[5.0, -5.0, 0.5], 1.0), 0.5);
    assert_eq!(count_points(&[0.1, 0.3], 0.0, 0.25), 1);
    assert_eq!(count_points(&[0.25], 0.0, 0.25), 0);
    assert_eq!(split_node(0.0, 1.0), ((0.0, 0.5), (0.5, 1.0)));
    assert_eq!(split_node(0.5, 0.75), ((0.5, 0.625), (0.625, 0.75)));
}

#[test]
fn prefix_sum_without_noise() {
    assert_eq!(noiseless(&ps(&[1.0, 2.0, 3.0]).unwrap()).0, reals(&[1.0, 3.0, 6.0]));
    let (v, centers) = noiseless(&ps_buggy(&[1.0, 2.0, 3.0]).unwrap());
    assert_eq!(v, reals(&[1.0, 3.0, 6.0]));
    assert_eq!(centers.len(), 2);
}

#[test]
fn smart_sum_without_noise() {
    // blocks of two: releases x0, x0+x1, (x0+x1)+x2, (x0+x1)+(x2+x3)
    let xs = [1.0, 2.0, 3.0, 4.0];
    let (v, centers) = noiseless(&smart_sum(&xs).unwrap());
    assert_eq!(v, reals(&[1.0, 3.0, 6.0, 10.0]));
    assert_eq!(centers, vec![1.0, 3.0, 6.0, 10.0]);
    // the un-reset block sum counts x2 twice in the last release
    assert_eq!(noiseless(&smart_sum_buggy(&xs).unwrap()).0, reals(&[1.0, 3.0, 6.0, 13.0]));
}

#[test]
fn report_noisy_max_without_noise() {
    assert_eq!(noiseless(&rnm(&[1.0, 3.0, 2.0]).unwrap()).0, Value::Int(1));
    assert_eq!(noiseless(&rnm(&[4.0]).unwrap()).0, Value::Int(0));
    let (v, _) = noiseless(&rnm_gap(&[1.0, 3.0, 2.0]).unwrap());
    assert_eq!(v, Value::pair(Value::Int(1), Value::real(1.0)));
    let (v, _) = noiseless(&rnm_gap(&[0.5, -1.0, 0.25, 0.0]).unwrap());
    assert_eq!(v, Value::pair(Value::Int(0), Value::real(0.25)));
    assert!(matches!(rnm_gap(&[1.0]), Err(BenchError::TooFewInputs(_))));
    assert!(matches!(rnm(&[]), Err(BenchError::EmptyInput(_))));
}

#[test]
fn sparse_vector_without_noise() {
    assert_eq!(noiseless(&sv(&[-5.0, -6.0, -7.0]).unwrap()).0, flags(&[false, false, false]));
    // stops after the first above-threshold answer
    let (v, centers) = noiseless(&sv(&[-1.0, 3.0, 5.0]).unwrap());
    assert_eq!(v, flags(&[false, true]));
    assert_eq!(centers, vec![0.0, -1.0, 3.0, 5.0]);
    assert_eq!(noiseless(&sv6(&[-1.0, 3.0, 5.0]).unwrap()).0, flags(&[false, true, true]));
    let gap = noiseless(&sv_gap(&[-1.0, 3.0]).unwrap()).0;
    let nothing = Value::Opt(None);
    let just = |x: f64| Value::Opt(Some(Box::new(Value::real(x))));
    assert_eq!(gap, Value::List(vec![nothing.clone(), just(3.0)]));
    assert_eq!(noiseless(&sv3(&[-1.0, 2.0]).unwrap()).0, Value::List(vec![nothing, just(2.0)]));
}

#[test]
fn aggregates_without_noise() {
    let (_, centers) = noiseless(&noisy_count(&[-1.0, -0.5]).unwrap());
    assert_eq!(centers, vec![0.0]);
    let (_, centers) = noiseless(&noisy_count(&[-1.0, 0.0, 1.5]).unwrap());
    assert_eq!(centers, vec![2.0]);
    let (v, _) = noiseless(&noisy_mean(&[5.0, -5.0, 0.5]).unwrap());
    assert_eq!(v, Value::pair(Value::real(0.5), Value::real(3.0)));
    let (v, _) = noiseless(&noisy_mean_buggy(&[5.0, -5.0, 1.5]).unwrap());
    assert_eq!(v, Value::pair(Value::real(1.5), Value::real(3.0)));
    assert_eq!(noiseless(&noisy_sum(&[0.25, 0.5]).unwrap()).0, Value::real(0.75));
}

#[test]
fn priv_tree_without_noise() {
    // no points: the root is a leaf
    let (v, centers) = noiseless(&priv_tree(&[]).unwrap());
    assert_eq!(centers, vec![PT_THRESHOLD - PT_DELTA]);
    let Value::Map(m) = v else { panic!("expected a map") };
    assert_eq!(m.len(), 1);
    // biased counts max(count - depth, 0) in breadth-first order:
    // [0,1) 3, [0,.5) 2, [.5,1) 0, [0,.25) 1, [.25,.5) 0
    let (v, centers) = noiseless(&priv_tree(&[0.1, 0.1, 0.1]).unwrap());
    assert_eq!(centers, vec![3.0, 2.0, 0.0, 1.0, 0.0]);
    let Value::Map(m) = v else { panic!("expected a map") };
    assert_eq!(m.len(), 5);
    // raw counts never shrink with depth; negative noise stops the recursion
    let mut noise = vec![0.0, 0.0, 0.0];
    noise.extend([-10.0; 8]);
    let out = instrumented_run_with_noise(&priv_tree_buggy(&[0.1, 0.1, 0.1]).unwrap(), noise).unwrap();
    let centers: Vec<f64> = out.trace.iter().map(|t| t.center).collect();
    assert_eq!(centers, vec![3.0, 3.0, 0.0, 3.0, 0.0]);
}

#[test]
fn catalog_is_consistent() {
    let all = catalog();
    assert_eq!(all.len(), 24);
    let names: BTreeSet<_> = all.iter().map(|b| b.name).collect();
    assert_eq!(names.len(), all.len());
    for b in &all {
        let buggy = b.name.ends_with("Buggy") || ["sv3", "sv4", "sv5", "sv6"].contains(&b.name);
        assert_eq!(b.expected == Verdict::Reject, buggy, "{}", b.name);
        assert!(b.epsilon > 0.0);
        assert!(find(b.name).is_some());
        let n = b.sizes.size_at(0).max(2);
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / (2 * n) as f64).collect();
        b.program(&xs).unwrap_or_else(|e| panic!("{}: {e}", b.name));
    }
}
