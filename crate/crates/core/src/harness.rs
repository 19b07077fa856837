//! Test driver: instrumented runs, bucketing, coupling formulas, solving,
//! and campaigns over many input pairs.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::benchmarks::{BenchError, Benchmark};
use crate::bucketing::{bucket_runs, match_bucket_to_paths, path_compatible, Bucket, BucketKey};
use crate::constraints::{build_bucket_formula, emit_smtlib, output_obligation, CouplingFormula};
use crate::dsl::Expr;
use crate::generators::{generate, SimilarPair};
use crate::interp::{instrumented_run, replay_exact, run_rng, EvalError, RunConfig, RunOutcome};
use crate::symbolic::{explore, EngineConfig, EngineKind, Exploration, PathResult, SymbolicError, UnrollPolicy};
use crate::solver::{SolverConfig, SolverError, SolverVerdict};
use crate::value::exact_rational;

/// A failure, attributed to the pipeline stage that raised it.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("building the program: {0}")]
    Build(#[from] BenchError),
    #[error("instrumented run {run}: {source}")]
    Instrumented { run: usize, source: EvalError },
    #[error("symbolic execution: {0}")]
    Symbolic(#[from] SymbolicError),
    #[error("solver: {0}")]
    Solver(#[from] SolverError),
    #[error("writing SMT dump: {0}")]
    Dump(std::io::Error),
}

/// Parameters of one `expect_dp` call.
#[derive(Clone, Debug)]
pub struct HarnessConfig {
    pub ntraces: usize,
    pub engine: EngineKind,
    pub engine_config: EngineConfig,
    pub run: RunConfig,
    pub solver: SolverConfig,
    /// Rerun a pair with ten times the traces when a bucket is inconclusive.
    pub escalate: bool,
    /// Directory receiving one `.smt2` file per solved bucket.
    pub dump_smt: Option<PathBuf>,
    /// Replay at most this many traces per satisfiable bucket.
    pub witness_replays: usize,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            ntraces: 500,
            engine: EngineKind::Streamline,
            engine_config: EngineConfig::default(),
            run: RunConfig::default(),
            solver: SolverConfig::from_env(),
            escalate: false,
            dump_smt: None,
            witness_replays: 1,
        }
    }
}

/// Verdict on one bucket.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum BucketVerdict {
    /// Coupling found; shifts as exact decimals or fractions.
    Sat { shifts: Vec<String> },
    Unsat,
    NoMatchingPath,
    Unknown { reason: String },
    Timeout,
}

impl BucketVerdict {
    pub fn is_rejection(&self) -> bool {
        matches!(self, BucketVerdict::Unsat | BucketVerdict::NoMatchingPath)
    }

    pub fn is_inconclusive(&self) -> bool {
        matches!(self, BucketVerdict::Unknown { .. } | BucketVerdict::Timeout)
    }
}

/// Concrete replay of a coupling on one trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessCheck {
    pub output_equal: bool,
    /// Exact total coupling cost, rounded for reporting.
    pub cost: f64,
    pub within_epsilon: bool,
}

impl WitnessCheck {
    pub fn ok(&self) -> bool {
        self.output_equal && self.within_epsilon
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BucketRecord {
    pub key: BucketKey,
    pub traces: usize,
    pub candidate_paths: usize,
    #[serde(flatten)]
    pub verdict: BucketVerdict,
    pub witness: Vec<WitnessCheck>,
    #[serde(skip)]
    pub model: Option<Vec<BigRational>>,
}

/// Outcome of one input pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Reject { bucket: String },
    Unknown,
}

#[derive(Clone, Debug, Serialize)]
pub struct PairRecord {
    pub iteration: usize,
    pub seed: u64,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub ntraces: usize,
    pub buckets_count: usize,
    pub bucket_verdicts: Vec<BucketRecord>,
    pub outcome: Outcome,
    pub explored_paths: usize,
    pub truncated_paths: usize,
    pub aborted_runs: usize,
    pub elapsed_ms: u128,
}

/// Result of [`expect_dp`].
#[derive(Clone, Debug)]
pub struct PairResult {
    pub outcome: Outcome,
    pub buckets: Vec<BucketRecord>,
    pub exploration_paths: usize,
    pub truncated: usize,
    pub aborted_runs: usize,
    pub ntraces: usize,
}

fn outcome_of(buckets: &[BucketRecord]) -> Outcome {
    if let Some(b) = buckets.iter().find(|b| b.verdict.is_rejection()) {
        return Outcome::Reject {
            bucket: b.key.to_string(),
        };
    }
    if buckets.iter().any(|b| b.verdict.is_inconclusive()) {
        Outcome::Unknown
    } else {
        Outcome::Pass
    }
}

/// Runs `prog` `n` times with per-run streams derived from `seed`.
pub fn instrumented_runs(
    prog: &Expr,
    n: usize,
    seed: u64,
    cfg: &RunConfig,
) -> Result<Vec<RunOutcome>, HarnessError> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = run_rng(seed, i as u64);
            instrumented_run(prog, &mut rng, cfg)
                .map_err(|source| HarnessError::Instrumented { run: i, source })
        })
        .collect()
}

/// Checks that `prog1` on the first input and `prog2` on the second can be
/// coupled within `epsilon` for every bucket of observed outputs.
pub fn expect_dp(
    prog1: &Expr,
    prog2: &Expr,
    epsilon: f64,
    cfg: &HarnessConfig,
    seed: u64,
) -> Result<PairResult, HarnessError> {
    let mut result = expect_dp_once(prog1, prog2, epsilon, cfg, seed, cfg.ntraces)?;
    if cfg.escalate && result.outcome == Outcome::Unknown {
        result = expect_dp_once(prog1, prog2, epsilon, cfg, seed, cfg.ntraces * 10)?;
    }
    Ok(result)
}

fn expect_dp_once(
    prog1: &Expr,
    prog2: &Expr,
    epsilon: f64,
    cfg: &HarnessConfig,
    seed: u64,
    ntraces: usize,
) -> Result<PairResult, HarnessError> {
    let runs = instrumented_runs(prog1, ntraces, seed, &cfg.run)?;
    let aborted_runs = runs.iter().filter(|r| r.output.is_none()).count();
    let engine_cfg = EngineConfig {
        unroll: UnrollPolicy::from_runs(&runs).or_else(|| cfg.engine_config.unroll.clone()),
        ..cfg.engine_config.clone()
    };
    let ex = explore(prog2, cfg.engine, &engine_cfg)?;
    let buckets = bucket_runs(&runs);
    let records = buckets
        .par_iter()
        .enumerate()
        .map(|(bi, b)| check_bucket(prog1, prog2, b, &ex, epsilon, cfg, &format!("s{seed}_b{bi}")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PairResult {
        outcome: outcome_of(&records),
        buckets: records,
        exploration_paths: ex.paths.len(),
        truncated: ex.truncated,
        aborted_runs,
        ntraces,
    })
}

/// Builds the coupling formula of a bucket, or `None` when no path matches.
pub fn bucket_formula(
    bucket: &Bucket,
    ex: &Exploration,
    epsilon: f64,
    label: &str,
) -> Option<CouplingFormula> {
    let matched = match_bucket_to_paths(bucket, &ex.paths).ok()?;
    Some(build_bucket_formula(label, bucket, &ex.paths, &matched, epsilon))
}

/// Solves a formula; trivially unsatisfiable formulas skip the solver.
pub fn solve_formula(f: &CouplingFormula, solver: &SolverConfig) -> Result<BucketVerdict, SolverError> {
    Ok(solve_with_model(f, solver)?.0)
}

fn solve_with_model(
    f: &CouplingFormula,
    solver: &SolverConfig,
) -> Result<(BucketVerdict, Option<Vec<BigRational>>), SolverError> {
    if f.unsat_by_construction() {
        return Ok((BucketVerdict::Unsat, None));
    }
    Ok(match solver.solve(&emit_smtlib(f))? {
        SolverVerdict::Unsat => (BucketVerdict::Unsat, None),
        SolverVerdict::Timeout => (BucketVerdict::Timeout, None),
        SolverVerdict::Unknown(reason) => (BucketVerdict::Unknown { reason }, None),
        SolverVerdict::Sat(model) => {
            let shifts: Vec<BigRational> = (0..f.shift_count)
                .map(|j| model.get(&format!("shift_{j}")).cloned().unwrap_or_else(BigRational::zero))
                .collect();
            match f.check_model(&shifts) {
                Ok(()) => (
                    BucketVerdict::Sat {
                        shifts: shifts.iter().map(|s| s.to_string()).collect(),
                    },
                    Some(shifts),
                ),
                Err(t) => (
                    BucketVerdict::Unknown {
                        reason: format!("solver model does not explain trace {t}"),
                    },
                    None,
                ),
            }
        }
    })
}

fn check_bucket(
    prog1: &Expr,
    prog2: &Expr,
    bucket: &Bucket,
    ex: &Exploration,
    epsilon: f64,
    cfg: &HarnessConfig,
    label: &str,
) -> Result<BucketRecord, HarnessError> {
    let matched = match match_bucket_to_paths(bucket, &ex.paths) {
        Ok(m) => m,
        Err(_) => {
            return Ok(BucketRecord {
                key: bucket.key.clone(),
                traces: bucket.runs.len(),
                candidate_paths: 0,
                verdict: BucketVerdict::NoMatchingPath,
                witness: vec![],
                model: None,
            })
        }
    };
    let formula = build_bucket_formula(
        format!("{label} {}", bucket.key),
        bucket,
        &ex.paths,
        &matched,
        epsilon,
    );
    if let Some(dir) = &cfg.dump_smt {
        std::fs::create_dir_all(dir).map_err(HarnessError::Dump)?;
        std::fs::write(dir.join(format!("{label}.smt2")), emit_smtlib(&formula)).map_err(HarnessError::Dump)?;
    }
    let (verdict, model) = solve_with_model(&formula, &cfg.solver)?;
    let witness = match &model {
        Some(shifts) => bucket
            .runs
            .iter()
            .take(cfg.witness_replays)
            .map(|run| replay_witness(prog1, prog2, run, shifts, epsilon, cfg.run.fuel))
            .collect(),
        None => vec![],
    };
    Ok(BucketRecord {
        key: bucket.key.clone(),
        traces: bucket.runs.len(),
        candidate_paths: matched.len(),
        verdict,
        witness,
        model,
    })
}

/// Replays a trace on both programs with the dual samples shifted by the
/// model, comparing outputs and summing the exact coupling cost.
pub fn replay_witness(
    prog1: &Expr,
    prog2: &Expr,
    run: &RunOutcome,
    shifts: &[BigRational],
    epsilon: f64,
    fuel: u64,
) -> WitnessCheck {
    let failed = WitnessCheck {
        output_equal: false,
        cost: f64::INFINITY,
        within_epsilon: false,
    };
    let first = run.exact_samples();
    let dual: Vec<BigRational> = first
        .iter()
        .enumerate()
        .map(|(j, s)| s + shifts.get(j).cloned().unwrap_or_else(BigRational::zero))
        .collect();
    let (Ok((v1, d1)), Ok((v2, d2))) = (
        replay_exact(prog1, first, fuel),
        replay_exact(prog2, dual, fuel),
    ) else {
        return failed;
    };
    if d1.len() != d2.len() {
        return failed;
    }
    let mut cost = BigRational::zero();
    for (j, (a, b)) in d1.iter().zip(&d2).enumerate() {
        if a.width != b.width {
            return failed;
        }
        let Some(w) = exact_rational(a.width) else { return failed };
        let s = shifts.get(j).cloned().unwrap_or_else(BigRational::zero);
        cost += (&a.center + s - &b.center).abs() / w;
    }
    let eps = exact_rational(epsilon).expect("finite epsilon");
    WitnessCheck {
        output_equal: v1 == v2,
        cost: cost.to_f64().unwrap_or(f64::INFINITY),
        within_epsilon: cost <= eps,
    }
}

/// Indices of non-truncated paths that explain a concrete run of the same
/// program: equal widths, satisfied path condition, matching centers and
/// matching output.
pub fn paths_explaining(run: &RunOutcome, paths: &[PathResult]) -> Vec<usize> {
    let Some(out) = &run.output else { return vec![] };
    let samples = run.exact_samples();
    paths
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            path_compatible(p, run)
                && p.conditions.iter().all(|c| c.holds(&samples) == Some(true))
                && p.samples.iter().zip(&run.trace).all(|(s, t)| {
                    center_matches(s, t.center, &samples)
                })
                && p.output
                    .as_ref()
                    .is_some_and(|o| output_obligation(o, out, &samples).eval(&samples) == Some(true))
        })
        .map(|(i, _)| i)
        .collect()
}

fn center_matches(site: &crate::symbolic::SampleSite, center: f64, samples: &[BigRational]) -> bool {
    use crate::value::Scalarish;
    let Some(want) = exact_rational(center) else { return false };
    match site.center.eval(samples) {
        Some(Scalarish::Real(r)) => r == want,
        Some(Scalarish::Int(i)) => BigRational::from_integer(i.into()) == want,
        _ => false,
    }
}

// ---------------------------------------------------------------------------
// Campaigns

/// Whether a campaign stops at the first rejection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CampaignMode {
    /// Run every pair.
    Accept,
    /// Stop after the first rejected pair.
    Reject,
}

#[derive(Clone, Debug)]
pub struct CampaignConfig {
    pub ntests: usize,
    pub master_seed: u64,
    pub mode: CampaignMode,
    /// Pairs checked concurrently.
    pub jobs: usize,
    pub harness: HarnessConfig,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            ntests: 100,
            master_seed: 7,
            mode: CampaignMode::Accept,
            jobs: 4,
            harness: HarnessConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Aggregate {
    pub tests_run: usize,
    pub rejections: usize,
    pub unknowns: usize,
    pub first_failure_iteration: Option<usize>,
    pub wall_time_ms: u128,
}

/// Machine-readable campaign report.
#[derive(Clone, Debug, Serialize)]
pub struct TestReport {
    pub benchmark: String,
    pub epsilon: f64,
    pub relation: String,
    pub engine: EngineKind,
    pub ntraces: usize,
    pub seeds: Seeds,
    pub mode: CampaignMode,
    pub pairs: Vec<PairRecord>,
    pub aggregate: Aggregate,
}

#[derive(Clone, Debug, Serialize)]
pub struct Seeds {
    pub master: u64,
    pub pairs: Vec<u64>,
}

impl TestReport {
    /// Overall exit status: 0 all pass, 1 a rejection, 2 unknowns only.
    pub fn exit_code(&self) -> i32 {
        if self.aggregate.rejections > 0 {
            1
        } else if self.aggregate.unknowns > 0 {
            2
        } else {
            0
        }
    }

    pub fn timings(&self) -> BTreeMap<usize, u128> {
        self.pairs.iter().map(|p| (p.iteration, p.elapsed_ms)).collect()
    }
}

/// Seed of the `i`-th pair of a campaign.
pub fn pair_seed(master: u64, i: usize) -> u64 {
    run_rng(master, i as u64).next_u64()
}

/// The input pair used at iteration `i`.
pub fn campaign_pair(bench: &Benchmark, master: u64, i: usize) -> SimilarPair {
    let seed = pair_seed(master, i);
    generate(bench.relation, bench.sizes.size_at(i), seed, &bench.inputs)
}

/// Checks one input pair of a benchmark.
pub fn check_pair(
    bench: &Benchmark,
    pair: &SimilarPair,
    epsilon: f64,
    cfg: &HarnessConfig,
) -> Result<PairResult, HarnessError> {
    let p1 = bench.program(&pair.x1)?;
    let p2 = bench.program(&pair.x2)?;
    expect_dp(&p1, &p2, epsilon, cfg, pair.seed)
}

/// Tests a benchmark on `ntests` generated pairs.
pub fn run_campaign(
    bench: &Benchmark,
    epsilon: f64,
    cfg: &CampaignConfig,
) -> Result<TestReport, HarnessError> {
    let start = Instant::now();
    let jobs = cfg.jobs.max(1);
    let mut pairs: Vec<PairRecord> = Vec::new();
    let mut i = 0;
    while i < cfg.ntests {
        let chunk: Vec<usize> = (i..(i + jobs).min(cfg.ntests)).collect();
        let results = chunk
            .par_iter()
            .map(|&it| {
                let t = Instant::now();
                let pair = campaign_pair(bench, cfg.master_seed, it);
                let r = check_pair(bench, &pair, epsilon, &cfg.harness)?;
                Ok(PairRecord {
                    iteration: it,
                    seed: pair.seed,
                    x1: pair.x1,
                    x2: pair.x2,
                    ntraces: r.ntraces,
                    buckets_count: r.buckets.len(),
                    outcome: r.outcome,
                    bucket_verdicts: r.buckets,
                    explored_paths: r.exploration_paths,
                    truncated_paths: r.truncated,
                    aborted_runs: r.aborted_runs,
                    elapsed_ms: t.elapsed().as_millis(),
                })
            })
            .collect::<Result<Vec<_>, HarnessError>>()?;
        let mut stop = false;
        for rec in results {
            if stop {
                break;
            }
            stop = cfg.mode == CampaignMode::Reject && matches!(rec.outcome, Outcome::Reject { .. });
            pairs.push(rec);
        }
        if stop {
            break;
        }
        i += jobs;
    }
    let rejections = pairs.iter().filter(|p| matches!(p.outcome, Outcome::Reject { .. })).count();
    let unknowns = pairs.iter().filter(|p| p.outcome == Outcome::Unknown).count();
    let first_failure_iteration = pairs
        .iter()
        .find(|p| matches!(p.outcome, Outcome::Reject { .. }))
        .map(|p| p.iteration);
    Ok(TestReport {
        benchmark: bench.name.to_string(),
        epsilon,
        relation: bench.relation.to_string(),
        engine: cfg.harness.engine,
        ntraces: cfg.harness.ntraces,
        seeds: Seeds {
            master: cfg.master_seed,
            pairs: pairs.iter().map(|p| p.seed).collect(),
        },
        mode: cfg.mode,
        aggregate: Aggregate {
            tests_run: pairs.len(),
            rejections,
            unknowns,
            first_failure_iteration,
            wall_time_ms: start.elapsed().as_millis(),
        },
        pairs,
    })
}

// ---------------------------------------------------------------------------
// Sample-complexity bounds

#[derive(Clone, Debug, Error, PartialEq)]
pub enum DomainError {
    #[error("{0}")]
    Invalid(&'static str),
}

/// `ln((c2 - c1) / omega)`, finite even when `c2 - c1` overflows.
pub fn ln_range_factor(c1: f64, c2: f64, omega: f64) -> f64 {
    let diff = c2 - c1;
    let ln_diff = if diff.is_finite() {
        diff.ln()
    } else {
        (c2 / 2.0 - c1 / 2.0).ln() + std::f64::consts::LN_2
    };
    ln_diff - omega.ln()
}

/// Smallest number of samples `m` with
/// `m >= (theta + n k ln 2 + n k ln((c2 - c1) / omega)) / delta`.
pub fn rdp_sample_bound(
    delta: f64,
    theta: f64,
    n: u64,
    k: u64,
    c1: f64,
    c2: f64,
    omega: f64,
) -> Result<u64, DomainError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(DomainError::Invalid("delta must lie in (0, 1)"));
    }
    if !(c2 > c1) {
        return Err(DomainError::Invalid("c2 must exceed c1"));
    }
    if !(omega > 0.0) {
        return Err(DomainError::Invalid("omega must be positive"));
    }
    if n == 0 || k == 0 {
        return Err(DomainError::Invalid("n and k must be at least 1"));
    }
    if !(theta >= 0.0) {
        return Err(DomainError::Invalid("theta must be non-negative"));
    }
    let nk = (n as f64) * (k as f64);
    let m = (theta + nk * std::f64::consts::LN_2 + nk * ln_range_factor(c1, c2, omega)) / delta;
    Ok(m.ceil() as u64)
}

/// Failure probability bound `exp(-d (theta + alpha))`.
pub fn failure_prob_bound(d: f64, theta: f64, alpha: f64) -> f64 {
    (-d * (theta + alpha)).exp()
}

/// Default solver timeout for campaigns.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(20);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_bound() {
        let m = rdp_sample_bound(0.5, 0.0, 1, 1, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(m, (std::f64::consts::LN_2 / 0.5).ceil() as u64);
    }

    #[test]
    fn bound_rejects_bad_delta() {
        assert!(rdp_sample_bound(1.0, 0.0, 1, 1, 0.0, 1.0, 1.0).is_err());
    }
}
