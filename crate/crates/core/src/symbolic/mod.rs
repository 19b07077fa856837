//! Symbolic execution of programs over sample variables.

mod engine;
mod term;
mod value;

pub use engine::{
    explore, streamline, symbolic_run, term_to_expr, value_to_expr, EngineConfig, EngineKind,
    Exploration, Mode, PathEnd, PathResult, Residual, SampleSite, SymbolicError, UnrollPolicy,
    DEFAULT_PATH_BUDGET, DEFAULT_SYMBOLIC_FUEL,
};
pub use term::{
    smt_rational, smt_real, t_and, t_binary, t_bool, t_conj, t_int, t_ite, t_not, t_or, t_real,
    t_sample, t_unary, Sort, Term, TermRef,
};
pub use value::{merge_values, try_merge, union_of, SymValue};
