use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use shiftcheck::benchmarks::{catalog, find, Benchmark, Verdict};
use shiftcheck::harness::{
    bucket_formula, campaign_pair, failure_prob_bound, instrumented_runs, rdp_sample_bound,
    run_campaign, CampaignConfig, CampaignMode, HarnessConfig, HarnessError, TestReport,
};
use shiftcheck::bucketing::bucket_runs;
use shiftcheck::constraints::emit_smtlib;
use shiftcheck::solver::{SolverConfig, SolverError};
use shiftcheck::symbolic::{explore, EngineConfig, EngineKind, UnrollPolicy};

const EXIT_REJECT: u8 = 1;
const EXIT_UNKNOWN: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_SOLVER_MISSING: u8 = 69;
const EXIT_SOFTWARE: u8 = 70;

/// Test differential-privacy claims of catalog programs by coupling sampled
/// traces against symbolic executions on neighbouring inputs.
///
/// Exit status: 0 all pairs pass, 1 a rejection was found, 2 inconclusive
/// solver answers, 64 usage error, 69 solver not found.
#[derive(Parser, Debug)]
#[command(name = "shiftcheck", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
struct Common {
    /// Catalog entry (see `list`).
    #[arg(long)]
    bench: String,
    /// Privacy parameter to test [default: the catalog value].
    #[arg(long)]
    eps: Option<f64>,
    /// Instrumented runs per input pair.
    #[arg(long, default_value_t = 500)]
    ntraces: usize,
    /// Master seed.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Symbolic back end.
    #[arg(long, default_value = "streamline")]
    engine: EngineKind,
    /// Solver executable [default: $SHIFTCHECK_SOLVER, else z3 on PATH].
    #[arg(long)]
    solver: Option<PathBuf>,
    /// Per-query solver timeout in seconds.
    #[arg(long, default_value_t = 20.0)]
    timeout: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a campaign over generated input pairs and write a JSON report.
    Test {
        #[command(flatten)]
        common: Common,
        /// Number of input pairs.
        #[arg(long, default_value_t = 100)]
        ntests: usize,
        /// Report path [default: standard output].
        #[arg(long)]
        report: Option<PathBuf>,
        /// Also write every bucket formula to this directory.
        #[arg(long)]
        dump_smt: Option<PathBuf>,
        /// Pairs checked concurrently.
        #[arg(long, default_value_t = 4)]
        jobs: usize,
        /// Stop at the first rejection [default: when the catalog expects one].
        #[arg(long)]
        stop_on_reject: Option<bool>,
        /// Retry inconclusive pairs with ten times the traces.
        #[arg(long)]
        escalate: bool,
    },
    /// List the catalog.
    List,
    /// Sample-complexity and failure-probability bounds.
    Bound {
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        #[arg(long, default_value_t = 1)]
        n: u64,
        #[arg(long, default_value_t = 1)]
        k: u64,
        #[arg(long, allow_hyphen_values = true)]
        c1: f64,
        #[arg(long, allow_hyphen_values = true)]
        c2: f64,
        /// Sampling granularity.
        #[arg(long, default_value_t = shiftcheck::sampler::DEFAULT_GRANULARITY)]
        omega: f64,
        /// Multiplier for the failure bound.
        #[arg(long, default_value_t = 1.0)]
        d: f64,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
    },
    /// Write one SMT-LIB file per bucket of a single input pair.
    EmitSmt {
        #[command(flatten)]
        common: Common,
        /// Campaign iteration whose pair is used.
        #[arg(long, default_value_t = 0)]
        iteration: usize,
        /// Output directory.
        #[arg(long)]
        dump_smt: PathBuf,
    },
}

fn harness_config(c: &Common) -> Result<HarnessConfig, u8> {
    let solver = match &c.solver {
        Some(p) => SolverConfig::z3(p),
        None => SolverConfig::from_env(),
    };
    if !(c.timeout > 0.0) || !c.timeout.is_finite() {
        eprintln!("error: --timeout must be a positive number of seconds");
        return Err(EXIT_USAGE);
    }
    Ok(HarnessConfig {
        ntraces: c.ntraces,
        engine: c.engine,
        solver: solver.with_timeout(Duration::from_secs_f64(c.timeout)),
        ..HarnessConfig::default()
    })
}

fn lookup(name: &str) -> Result<Benchmark, u8> {
    find(name).ok_or_else(|| {
        eprintln!("error: unknown benchmark {name:?}; run `shiftcheck list`");
        EXIT_USAGE
    })
}

fn require_solver(cfg: &HarnessConfig) -> Result<(), u8> {
    if cfg.solver.resolve().is_none() {
        eprintln!("error: solver {:?} not found", cfg.solver.program);
        return Err(EXIT_SOLVER_MISSING);
    }
    Ok(())
}

fn harness_failure(e: HarnessError) -> u8 {
    eprintln!("error: {e}");
    match e {
        HarnessError::Solver(SolverError::SolverMissing(_)) => EXIT_SOLVER_MISSING,
        _ => EXIT_SOFTWARE,
    }
}

fn summarize(r: &TestReport) {
    eprintln!(
        "{} at eps {}: {} pairs, {} rejected, {} unknown, {} ms",
        r.benchmark,
        r.epsilon,
        r.aggregate.tests_run,
        r.aggregate.rejections,
        r.aggregate.unknowns,
        r.aggregate.wall_time_ms
    );
    if let Some(i) = r.aggregate.first_failure_iteration {
        if let Some(p) = r.pairs.iter().find(|p| p.iteration == i) {
            eprintln!("first rejection at pair {i}: x1 = {:?}, x2 = {:?}", p.x1, p.x2);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_test(
    common: Common,
    ntests: usize,
    report: Option<PathBuf>,
    dump_smt: Option<PathBuf>,
    jobs: usize,
    stop_on_reject: Option<bool>,
    escalate: bool,
) -> Result<u8, u8> {
    let bench = lookup(&common.bench)?;
    let mut harness = harness_config(&common)?;
    harness.dump_smt = dump_smt;
    harness.escalate = escalate;
    require_solver(&harness)?;
    let stop = stop_on_reject.unwrap_or(bench.expected == Verdict::Reject);
    let cfg = CampaignConfig {
        ntests,
        master_seed: common.seed,
        mode: if stop { CampaignMode::Reject } else { CampaignMode::Accept },
        jobs,
        harness,
    };
    let eps = common.eps.unwrap_or(bench.epsilon);
    let r = run_campaign(&bench, eps, &cfg).map_err(harness_failure)?;
    let json = serde_json::to_string_pretty(&r).expect("report serializes");
    match report {
        Some(p) => std::fs::write(&p, json).map_err(|e| {
            eprintln!("error: writing {}: {e}", p.display());
            EXIT_SOFTWARE
        })?,
        None => println!("{json}"),
    }
    summarize(&r);
    Ok(match r.exit_code() {
        0 => 0,
        1 => EXIT_REJECT,
        _ => EXIT_UNKNOWN,
    })
}

fn cmd_list() -> Result<u8, u8> {
    for b in catalog() {
        let expected = match b.expected {
            Verdict::Accept => "accept",
            Verdict::Reject => "reject",
        };
        println!(
            "{:<12} eps {:<5} {:<7} {:<26} {}",
            b.name,
            b.epsilon,
            expected,
            b.relation.to_string(),
            b.notes
        );
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_bound(delta: f64, theta: f64, n: u64, k: u64, c1: f64, c2: f64, omega: f64, d: f64, alpha: f64) -> Result<u8, u8> {
    let m = rdp_sample_bound(delta, theta, n, k, c1, c2, omega).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_USAGE
    })?;
    if !(d >= 1.0) || !(alpha >= 0.0) || !(theta >= 0.0) {
        eprintln!("error: need d >= 1 and theta, alpha >= 0");
        return Err(EXIT_USAGE);
    }
    println!("m = {m}");
    println!("failure probability <= {:e}", failure_prob_bound(d, theta, alpha));
    Ok(0)
}

fn cmd_emit_smt(common: Common, iteration: usize, dir: PathBuf) -> Result<u8, u8> {
    let bench = lookup(&common.bench)?;
    let cfg = harness_config(&common)?;
    let eps = common.eps.unwrap_or(bench.epsilon);
    let pair = campaign_pair(&bench, common.seed, iteration);
    let build = |xs: &[f64]| {
        bench.program(xs).map_err(|e| {
            eprintln!("error: {e}");
            EXIT_SOFTWARE
        })
    };
    let (p1, p2) = (build(&pair.x1)?, build(&pair.x2)?);
    let runs = instrumented_runs(&p1, cfg.ntraces, pair.seed, &cfg.run).map_err(harness_failure)?;
    let engine_cfg = EngineConfig {
        unroll: UnrollPolicy::from_runs(&runs),
        ..EngineConfig::default()
    };
    let ex = explore(&p2, cfg.engine, &engine_cfg).map_err(|e| harness_failure(e.into()))?;
    std::fs::create_dir_all(&dir).map_err(|e| {
        eprintln!("error: creating {}: {e}", dir.display());
        EXIT_SOFTWARE
    })?;
    let mut written = 0;
    for (i, b) in bucket_runs(&runs).iter().enumerate() {
        let label = format!("bucket_{i}");
        match bucket_formula(b, &ex, eps, &format!("{label} {}", b.key)) {
            Some(f) => {
                let path = dir.join(format!("{label}.smt2"));
                std::fs::write(&path, emit_smtlib(&f)).map_err(|e| {
                    eprintln!("error: writing {}: {e}", path.display());
                    EXIT_SOFTWARE
                })?;
                written += 1;
            }
            None => eprintln!("{label} ({}): no symbolic path matches", b.key),
        }
    }
    eprintln!(
        "x1 = {:?}, x2 = {:?}: wrote {written} formulas to {}",
        pair.x1,
        pair.x2,
        dir.display()
    );
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Test {
            common,
            ntests,
            report,
            dump_smt,
            jobs,
            stop_on_reject,
            escalate,
        } => cmd_test(common, ntests, report, dump_smt, jobs, stop_on_reject, escalate),
        Command::List => cmd_list(),
        Command::Bound {
            delta,
            theta,
            n,
            k,
            c1,
            c2,
            omega,
            d,
            alpha,
        } => cmd_bound(delta, theta, n, k, c1, c2, omega, d, alpha),
        Command::EmitSmt {
            common,
            iteration,
            dump_smt,
        } => cmd_emit_smt(common, iteration, dump_smt),
    };
    ExitCode::from(result.unwrap_or_else(|code| code))
}
