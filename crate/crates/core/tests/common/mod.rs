#![allow(dead_code)]

use shiftcheck::harness::HarnessConfig;
use shiftcheck::solver::SolverConfig;

/// Harness settings with a located solver, or `None` when no solver is installed.
pub fn harness(ntraces: usize) -> Option<HarnessConfig> {
    let cfg = HarnessConfig {
        ntraces,
        ..HarnessConfig::default()
    };
    if cfg.solver.resolve().is_none() {
        eprintln!("skipping: solver {:?} not found", cfg.solver.program);
        return None;
    }
    Some(cfg)
}

pub fn solver() -> Option<SolverConfig> {
    harness(1).map(|h| h.solver)
}
