//! Catalog of benchmark programs: correct mechanisms and buggy variants.
//!
//! Every builder takes the concrete input list and returns a closed
//! distribution expression. List traversals over noised values are DSL
//! loops; traversals whose control flow depends only on the input are
//! unrolled while building the program.

use serde::Serialize;
use thiserror::Error;

use crate::dsl::{Expr, Type, TypeError};
use crate::generators::{GenConfig, Relation, SizeRamp};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum BenchError {
    #[error("{0} received empty input")]
    EmptyInput(&'static str),
    #[error("{0} received fewer than two inputs")]
    TooFewInputs(&'static str),
    #[error("{0}: clip bound must be non-negative")]
    NegativeClipBound(&'static str),
    #[error(transparent)]
    Type(#[from] TypeError),
}

type R<T> = Result<T, TypeError>;

/// What the harness is expected to conclude about an entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
}

pub type Builder = fn(&[f64]) -> Result<Expr, BenchError>;

/// One catalog entry.
#[derive(Clone, Debug)]
pub struct Benchmark {
    pub name: &'static str,
    pub build: Builder,
    pub relation: Relation,
    pub epsilon: f64,
    pub expected: Verdict,
    /// Input sizes over the course of a campaign.
    pub sizes: SizeRamp,
    pub inputs: GenConfig,
    pub notes: &'static str,
}

impl Benchmark {
    pub fn program(&self, input: &[f64]) -> Result<Expr, BenchError> {
        (self.build)(input)
    }
}

// ---------------------------------------------------------------------------
// DSL helpers

fn list_elem(xs: &Expr) -> R<Type> {
    match xs.ty() {
        Type::List(t) => Ok((**t).clone()),
        other => Err(TypeError::TypeMismatch {
            node: "fold",
            expected: "List".into(),
            found: other.clone(),
        }),
    }
}

/// Monadic left fold over a list, stopping early once `cont(acc)` is false.
fn fold_while(
    xs: Expr,
    init: Expr,
    cont: impl FnOnce(Expr) -> R<Expr>,
    step: impl FnOnce(Expr, Expr) -> R<Expr>,
) -> R<Expr> {
    list_elem(&xs)?;
    let state = Expr::pair(xs, init)?;
    let state_ty = state.ty().clone();
    let lp = Expr::loop_with(
        state,
        |s| Expr::and(Expr::not(Expr::is_nil(Expr::fst(s.clone())?)?)?, cont(Expr::snd(s)?)?),
        |s| {
            Expr::case_option_with(
                Expr::uncons(Expr::fst(s.clone())?)?,
                Expr::abort(state_ty, "uncons of empty list"),
                "ht",
                |ht| {
                    Expr::bind_with("acc", step(Expr::snd(s)?, Expr::fst(ht.clone())?)?, |a| {
                        Expr::ret(Expr::pair(Expr::snd(ht)?, a)?)
                    })
                },
            )
        },
        None,
    )?;
    Expr::bind_with("st", lp, |st| Expr::ret(Expr::snd(st)?))
}

fn fold_m(xs: Expr, init: Expr, step: impl FnOnce(Expr, Expr) -> R<Expr>) -> R<Expr> {
    fold_while(xs, init, |_| Ok(Expr::bool(true)), step)
}

/// `mapM (\x. lap x width)`.
fn map_lap(xs: Expr, width: f64) -> R<Expr> {
    fold_m(xs, Expr::nil(Type::Real), |acc, x| {
        Expr::bind_with("y", Expr::laplace(x, width)?, |y| Expr::ret(Expr::snoc(acc, y)?))
    })
}

fn gt(a: Expr, b: Expr) -> R<Expr> {
    Expr::lt(b, a)
}

fn ge(a: Expr, b: Expr) -> R<Expr> {
    Expr::le(b, a)
}

fn tuple(items: Vec<Expr>) -> R<Expr> {
    let mut it = items.into_iter().rev();
    let last = it.next().expect("non-empty tuple");
    it.try_fold(last, |acc, e| Expr::pair(e, acc))
}

/// Component `i` of an `n`-tuple built by [`tuple`].
fn proj(t: &Expr, i: usize, n: usize) -> R<Expr> {
    let mut e = t.clone();
    for _ in 0..i {
        e = Expr::snd(e)?;
    }
    if i + 1 < n {
        Expr::fst(e)
    } else {
        Ok(e)
    }
}

fn real_sum(xs: &[f64]) -> R<Expr> {
    xs.iter()
        .try_fold(Expr::real(0.0), |acc, &x| Expr::add(acc, Expr::real(x)))
}

// ---------------------------------------------------------------------------
// ReportNoisyMax

fn rnm_aux(xs: Expr, first: Expr) -> R<Expr> {
    let init = tuple(vec![Expr::int(0), Expr::int(0), first])?;
    let folded = fold_m(xs, init, |acc, x| {
        let this_idx = Expr::add(proj(&acc, 0, 3)?, Expr::int(1))?;
        Expr::if_(
            gt(x.clone(), proj(&acc, 2, 3)?)?,
            Expr::ret(tuple(vec![this_idx.clone(), this_idx.clone(), x])?)?,
            Expr::ret(tuple(vec![this_idx, proj(&acc, 1, 3)?, proj(&acc, 2, 3)?])?)?,
        )
    })?;
    Expr::bind_with("r", folded, |r| Expr::ret(proj(&r, 1, 3)?))
}

/// Index of the largest noised input.
pub fn rnm(xs: &[f64]) -> Result<Expr, BenchError> {
    let (&x, rest) = xs.split_first().ok_or(BenchError::EmptyInput("rnm"))?;
    Ok(Expr::bind_with("xNoised", Expr::laplace(Expr::real(x), 1.0)?, |xn| {
        Expr::bind_with("xsNoised", map_lap(Expr::real_list(rest), 1.0)?, |xsn| rnm_aux(xsn, xn))
    })?)
}

/// Passes the un-noised first element as the initial maximum.
pub fn rnm_buggy(xs: &[f64]) -> Result<Expr, BenchError> {
    let (&x, rest) = xs.split_first().ok_or(BenchError::EmptyInput("rnm"))?;
    Ok(Expr::bind_with("xNoised", Expr::laplace(Expr::real(x), 1.0)?, |_| {
        Expr::bind_with("xsNoised", map_lap(Expr::real_list(rest), 1.0)?, |xsn| {
            rnm_aux(xsn, Expr::real(x))
        })
    })?)
}

fn rnm_gap_aux(xs: Expr, max_idx: i64, curr_max: Expr, runner_up: Expr) -> R<Expr> {
    let init = tuple(vec![Expr::int(1), Expr::int(max_idx), curr_max, runner_up])?;
    let folded = fold_m(xs, init, |acc, x| {
        let this_idx = Expr::add(proj(&acc, 0, 4)?, Expr::int(1))?;
        let max_idx = proj(&acc, 1, 4)?;
        let curr = proj(&acc, 2, 4)?;
        let runner = proj(&acc, 3, 4)?;
        Expr::if_(
            gt(x.clone(), curr.clone())?,
            Expr::ret(tuple(vec![this_idx.clone(), this_idx.clone(), x.clone(), curr.clone()])?)?,
            Expr::if_(
                gt(x.clone(), runner.clone())?,
                Expr::ret(tuple(vec![this_idx.clone(), max_idx.clone(), curr.clone(), x])?)?,
                Expr::ret(tuple(vec![this_idx, max_idx, curr, runner])?)?,
            )?,
        )
    })?;
    Expr::bind_with("r", folded, |r| {
        Expr::ret(Expr::pair(
            proj(&r, 1, 4)?,
            Expr::sub(proj(&r, 2, 4)?, proj(&r, 3, 4)?)?,
        )?)
    })
}

fn rnm_gap_with(xs: &[f64], width: f64) -> Result<Expr, BenchError> {
    if xs.len() < 2 {
        return Err(if xs.is_empty() {
            BenchError::EmptyInput("rnmGap")
        } else {
            BenchError::TooFewInputs("rnmGap")
        });
    }
    let (x, y, rest) = (xs[0], xs[1], &xs[2..]);
    Ok(Expr::bind_with("x'", Expr::laplace(Expr::real(x), width)?, |xn| {
        Expr::bind_with("y'", Expr::laplace(Expr::real(y), width)?, |yn| {
            Expr::bind_with("xs'", map_lap(Expr::real_list(rest), width)?, |xsn| {
                Expr::if_(
                    gt(xn.clone(), yn.clone())?,
                    rnm_gap_aux(xsn.clone(), 0, xn.clone(), yn.clone())?,
                    rnm_gap_aux(xsn, 1, yn, xn)?,
                )
            })
        })
    })?)
}

/// Index of the largest noised input and its gap to the runner-up.
pub fn rnm_gap(xs: &[f64]) -> Result<Expr, BenchError> {
    rnm_gap_with(xs, 1.0)
}

/// Width halved.
pub fn rnm_gap_buggy(xs: &[f64]) -> Result<Expr, BenchError> {
    rnm_gap_with(xs, 0.5)
}

// ---------------------------------------------------------------------------
// SparseVector family

/// What an above-threshold query contributes to the output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SvOutput {
    /// `True` / `False`.
    Flag,
    /// `just` the noised query / `nothing`.
    NoisyValue,
    /// `just (x - thresh)` / `nothing`.
    Gap,
}

/// Parameters of one SparseVector variant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvParams {
    /// Public threshold.
    pub threshold: f64,
    /// Maximum number of above-threshold answers.
    pub count: i64,
    pub threshold_width: f64,
    /// `None` leaves the queries un-noised.
    pub query_width: Option<f64>,
    /// Stop after `count` above-threshold answers.
    pub cutoff: bool,
    /// Draw a fresh threshold after each above-threshold answer.
    pub resample_threshold: bool,
    pub output: SvOutput,
}

impl SvParams {
    fn out_type(&self) -> Type {
        match self.output {
            SvOutput::Flag => Type::Bool,
            SvOutput::NoisyValue | SvOutput::Gap => Type::option(Type::Real),
        }
    }
}

const SV_THRESHOLD: f64 = 0.0;
const SV_COUNT: i64 = 1;

/// SparseVector with explicit parameters.
pub fn sparse_vector(xs: &[f64], p: SvParams) -> Result<Expr, BenchError> {
    let out_ty = p.out_type();
    let queries = match p.query_width {
        Some(w) => map_lap(Expr::real_list(xs), w)?,
        None => Expr::ret(Expr::real_list(xs))?,
    };
    Ok(Expr::bind_with(
        "thresh'",
        Expr::laplace(Expr::real(p.threshold), p.threshold_width)?,
        |t0| {
            Expr::bind_with("xs'", queries, |xsn| {
                // state: (remaining count, current threshold, results)
                let init = tuple(vec![Expr::int(p.count), t0, Expr::nil(out_ty.clone())])?;
                let folded = fold_while(
                    xsn,
                    init,
                    |acc| {
                        if p.cutoff {
                            Expr::lt(Expr::int(0), proj(&acc, 0, 3)?)
                        } else {
                            Ok(Expr::bool(true))
                        }
                    },
                    |acc, x| {
                        let n = proj(&acc, 0, 3)?;
                        let thresh = proj(&acc, 1, 3)?;
                        let results = proj(&acc, 2, 3)?;
                        let (above, below) = match p.output {
                            SvOutput::Flag => (Expr::bool(true), Expr::bool(false)),
                            SvOutput::NoisyValue => {
                                (Expr::just(x.clone())?, Expr::nothing(Type::Real))
                            }
                            SvOutput::Gap => (
                                Expr::just(Expr::sub(x.clone(), thresh.clone())?)?,
                                Expr::nothing(Type::Real),
                            ),
                        };
                        let n_dec = Expr::sub(n.clone(), Expr::int(1))?;
                        let hit = if p.resample_threshold {
                            Expr::bind_with(
                                "thresh''",
                                Expr::laplace(Expr::real(p.threshold), p.threshold_width)?,
                                |t| Expr::ret(tuple(vec![n_dec, t, Expr::snoc(results.clone(), above)?])?),
                            )?
                        } else {
                            Expr::ret(tuple(vec![n_dec, thresh.clone(), Expr::snoc(results.clone(), above)?])?)?
                        };
                        let miss = Expr::ret(tuple(vec![n, thresh.clone(), Expr::snoc(results, below)?])?)?;
                        Expr::if_(gt(x, thresh)?, hit, miss)
                    },
                )?;
                Expr::bind_with("r", folded, |r| Expr::ret(proj(&r, 2, 3)?))
            })
        },
    )?)
}

/// SparseVector as proposed in the literature's Algorithm 1.
pub fn sv_params() -> SvParams {
    SvParams {
        threshold: SV_THRESHOLD,
        count: SV_COUNT,
        threshold_width: 2.0,
        query_width: Some(4.0 * SV_COUNT as f64),
        cutoff: true,
        resample_threshold: false,
        output: SvOutput::Flag,
    }
}

pub fn sv(xs: &[f64]) -> Result<Expr, BenchError> {
    sparse_vector(xs, sv_params())
}

/// Algorithm 2: the threshold is redrawn after each above-threshold answer.
pub fn sv2(xs: &[f64]) -> Result<Expr, BenchError> {
    let c = SV_COUNT as f64;
    sparse_vector(
        xs,
        SvParams {
            threshold_width: 2.0 * c,
            query_width: Some(4.0 * c),
            resample_threshold: true,
            ..sv_params()
        },
    )
}

/// Algorithm 3: releases the noised query value.
pub fn sv3(xs: &[f64]) -> Result<Expr, BenchError> {
    let c = SV_COUNT as f64;
    sparse_vector(
        xs,
        SvParams {
            threshold_width: 2.0,
            query_width: Some(2.0 * c),
            output: SvOutput::NoisyValue,
            ..sv_params()
        },
    )
}

/// Algorithm 4: budget split 1/4 for the threshold, 3/4 for the queries,
/// without scaling the query noise by the count.
pub fn sv4(xs: &[f64]) -> Result<Expr, BenchError> {
    sparse_vector(
        xs,
        SvParams {
            threshold_width: 4.0,
            query_width: Some(4.0 / 3.0),
            ..sv_params()
        },
    )
}

/// Algorithm 5: no query noise and no cutoff.
pub fn sv5(xs: &[f64]) -> Result<Expr, BenchError> {
    sparse_vector(
        xs,
        SvParams {
            threshold_width: 2.0,
            query_width: None,
            cutoff: false,
            ..sv_params()
        },
    )
}

/// Algorithm 6: query noise independent of the count and no cutoff.
pub fn sv6(xs: &[f64]) -> Result<Expr, BenchError> {
    sparse_vector(
        xs,
        SvParams {
            threshold_width: 2.0,
            query_width: Some(2.0),
            cutoff: false,
            ..sv_params()
        },
    )
}

/// SparseVector releasing the gap between each above-threshold query and
/// the noised threshold.
pub fn sv_gap(xs: &[f64]) -> Result<Expr, BenchError> {
    sparse_vector(
        xs,
        SvParams {
            output: SvOutput::Gap,
            ..sv_params()
        },
    )
}

/// Gap variant with the Algorithm 6 noise and no cutoff.
pub fn sv_gap_buggy(xs: &[f64]) -> Result<Expr, BenchError> {
    sparse_vector(
        xs,
        SvParams {
            query_width: Some(2.0),
            cutoff: false,
            output: SvOutput::Gap,
            ..sv_params()
        },
    )
}

// ---------------------------------------------------------------------------
// PrefixSum and SmartSum

/// Running sums of a list of reals (pure).
pub fn prefix_sums(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .scan(0.0, |s, &x| {
            *s += x;
            Some(*s)
        })
        .collect()
}

fn prefix_sum_of(noised: Expr) -> R<Expr> {
    let folded = fold_m(
        noised,
        Expr::pair(Expr::real(0.0), Expr::nil(Type::Real))?,
        |acc, x| {
            Expr::let_with("s", Expr::add(Expr::fst(acc.clone())?, x)?, |s| {
                Expr::ret(Expr::pair(s.clone(), Expr::snoc(Expr::snd(acc)?, s)?)?)
            })
        },
    )?;
    Expr::bind_with("r", folded, |r| Expr::ret(Expr::snd(r)?))
}

/// Noises every element, then releases the prefix sums.
pub fn ps(xs: &[f64]) -> Result<Expr, BenchError> {
    Ok(Expr::bind_with("xs'", map_lap(Expr::real_list(xs), 1.0)?, prefix_sum_of)?)
}

/// Leaves the last element un-noised.
pub fn ps_buggy(xs: &[f64]) -> Result<Expr, BenchError> {
    let Some((&last, init)) = xs.split_last() else {
        return Ok(Expr::ret(Expr::nil(Type::Real))?);
    };
    Ok(Expr::bind_with("xs'", map_lap(Expr::real_list(init), 1.0)?, |xsn| {
        prefix_sum_of(Expr::snoc(xsn, Expr::real(last))?)
    })?)
}

fn smart_sum_aux(
    xs: &[f64],
    next: Expr,
    n: Expr,
    i: u64,
    sum: Expr,
    results: Expr,
    reset_sum: bool,
) -> R<Expr> {
    let Some((&x, rest)) = xs.split_first() else {
        return Expr::ret(results);
    };
    let sum2 = Expr::add(sum, Expr::real(x))?;
    if (i + 1) % 2 == 0 {
        Expr::bind_with("n'", Expr::laplace(Expr::add(n, sum2.clone())?, 1.0)?, |n2| {
            let carried = if reset_sum { Expr::real(0.0) } else { sum2 };
            let results = Expr::snoc(results, n2.clone())?;
            smart_sum_aux(rest, n2.clone(), n2, i + 1, carried, results, reset_sum)
        })
    } else {
        Expr::bind_with("next'", Expr::laplace(Expr::add(next, Expr::real(x))?, 1.0)?, |nx| {
            let results = Expr::snoc(results, nx.clone())?;
            smart_sum_aux(rest, nx, n, i + 1, sum2, results, reset_sum)
        })
    }
}

fn smart_sum_with(xs: &[f64], reset_sum: bool) -> Result<Expr, BenchError> {
    Ok(smart_sum_aux(
        xs,
        Expr::real(0.0),
        Expr::real(0.0),
        0,
        Expr::real(0.0),
        Expr::nil(Type::Real),
        reset_sum,
    )?)
}

/// Binary-mechanism style running sums.
pub fn smart_sum(xs: &[f64]) -> Result<Expr, BenchError> {
    smart_sum_with(xs, true)
}

/// Keeps the block sum instead of resetting it after a block release.
pub fn smart_sum_buggy(xs: &[f64]) -> Result<Expr, BenchError> {
    smart_sum_with(xs, false)
}

// ---------------------------------------------------------------------------
// PrivTree over the unit interval

pub const PT_DELTA: f64 = 1.0;
pub const PT_THRESHOLD: f64 = 1.0;
pub const PT_LAMBDA: f64 = 1.0;

/// Number of points in `[lo, hi)`.
pub fn count_points(points: &[f64], lo: f64, hi: f64) -> usize {
    points.iter().filter(|&&p| lo <= p && p < hi).count()
}

/// Halves of an interval.
pub fn split_node(lo: f64, hi: f64) -> ((f64, f64), (f64, f64)) {
    let mid = lo + (hi - lo) / 2.0;
    ((lo, mid), (mid, hi))
}

fn node_type() -> Type {
    Type::pair(Type::Real, Type::Real)
}

/// `countPoints points node` as a DSL expression over the node bounds.
fn count_points_expr(points: &[f64], lo: &Expr, hi: &Expr) -> R<Expr> {
    points.iter().try_fold(Expr::real(0.0), |acc, &p| {
        let inside = Expr::and(Expr::le(lo.clone(), Expr::real(p))?, Expr::lt(Expr::real(p), hi.clone())?)?;
        Expr::add(acc, Expr::if_(inside, Expr::real(1.0), Expr::real(0.0))?)
    })
}

fn priv_tree_with(points: &[f64], biased: bool) -> Result<Expr, BenchError> {
    // queue entries: ((lo, hi), depth); state: (queue, (leafCount, tree))
    let entry_ty = Type::pair(node_type(), Type::Real);
    let root = Expr::pair(Expr::pair(Expr::real(0.0), Expr::real(1.0))?, Expr::real(0.0))?;
    let init = Expr::pair(
        Expr::list(entry_ty.clone(), vec![root])?,
        Expr::pair(Expr::int(1), Expr::map_empty(node_type(), Type::Unit))?,
    )?;
    let state_ty = init.ty().clone();
    let lp = Expr::loop_with(
        init,
        |s| Expr::not(Expr::is_nil(Expr::fst(s)?)?),
        |s| {
            let leaves = Expr::fst(Expr::snd(s.clone())?)?;
            let tree = Expr::snd(Expr::snd(s.clone())?)?;
            Expr::case_option_with(
                Expr::uncons(Expr::fst(s)?)?,
                Expr::abort(state_ty, "empty queue"),
                "q",
                |q| {
                    let this = Expr::fst(q.clone())?;
                    let more = Expr::snd(q)?;
                    let node = Expr::fst(this.clone())?;
                    let depth = Expr::snd(this)?;
                    let lo = Expr::fst(node.clone())?;
                    let hi = Expr::snd(node.clone())?;
                    let count = count_points_expr(points, &lo, &hi)?;
                    let center = if biased {
                        let b = Expr::sub(count, Expr::mul(depth.clone(), Expr::real(PT_DELTA))?)?;
                        let floor = Expr::real(PT_THRESHOLD - PT_DELTA);
                        Expr::let_with("biasedCount", b, |b| Expr::if_(gt(b.clone(), floor.clone())?, b, floor))?
                    } else {
                        count
                    };
                    Expr::bind_with("noisedBiasedCount1", Expr::laplace(center, PT_LAMBDA)?, |noisy| {
                        let updated = Expr::map_insert(tree, node.clone(), Expr::unit())?;
                        let mid = Expr::add(lo.clone(), Expr::div(Expr::sub(hi.clone(), lo.clone())?, Expr::real(2.0))?)?;
                        let d1 = Expr::add(depth, Expr::real(1.0))?;
                        let left = Expr::pair(Expr::pair(lo, mid.clone())?, d1.clone())?;
                        let right = Expr::pair(Expr::pair(mid, hi)?, d1)?;
                        let queue = Expr::snoc(Expr::snoc(more.clone(), left)?, right)?;
                        Expr::if_(
                            gt(noisy, Expr::real(PT_THRESHOLD))?,
                            Expr::ret(Expr::pair(
                                queue,
                                Expr::pair(Expr::add(leaves.clone(), Expr::int(1))?, updated.clone())?,
                            )?)?,
                            Expr::ret(Expr::pair(more, Expr::pair(leaves, updated)?)?)?,
                        )
                    })
                },
            )
        },
        Some(Box::new(|s| Expr::snd(s))),
    )?;
    Ok(Expr::bind_with("st", lp, |st| Expr::ret(Expr::snd(Expr::snd(st)?)?))?)
}

/// One-dimensional PrivTree with depth-biased counts.
pub fn priv_tree(points: &[f64]) -> Result<Expr, BenchError> {
    priv_tree_with(points, true)
}

/// Naive noisy quadtree: raw counts and no depth bound.
pub fn priv_tree_buggy(points: &[f64]) -> Result<Expr, BenchError> {
    priv_tree_with(points, false)
}

// ---------------------------------------------------------------------------
// Simple aggregates

pub const COUNT_THRESHOLD: f64 = 0.0;
pub const CLIP_BOUND: f64 = 1.0;

pub fn noisy_sum(xs: &[f64]) -> Result<Expr, BenchError> {
    Ok(Expr::laplace(real_sum(xs)?, 1.0)?)
}

/// Width halved.
pub fn noisy_sum_buggy(xs: &[f64]) -> Result<Expr, BenchError> {
    Ok(Expr::laplace(real_sum(xs)?, 0.5)?)
}

fn count_at_least(xs: &[f64], threshold: f64) -> R<Expr> {
    let c = xs.iter().try_fold(Expr::int(0), |acc, &x| {
        Expr::add(
            acc,
            Expr::if_(ge(Expr::real(x), Expr::real(threshold))?, Expr::int(1), Expr::int(0))?,
        )
    })?;
    Expr::to_real(c)
}

pub fn noisy_count(xs: &[f64]) -> Result<Expr, BenchError> {
    Ok(Expr::laplace(count_at_least(xs, COUNT_THRESHOLD)?, 1.0)?)
}

/// Width halved.
pub fn noisy_count_buggy(xs: &[f64]) -> Result<Expr, BenchError> {
    Ok(Expr::laplace(count_at_least(xs, COUNT_THRESHOLD)?, 0.5)?)
}

/// Sum with each element clipped to `[-clip, clip]` (pure).
pub fn clipped_sum(xs: &[f64], clip: f64) -> f64 {
    xs.iter().map(|&x| x.clamp(-clip, clip)).sum()
}

fn clipped_sum_expr(xs: &[f64], clip: f64) -> R<Expr> {
    fold_m(Expr::real_list(xs), Expr::real(0.0), |acc, x| {
        Expr::if_(
            ge(x.clone(), Expr::real(clip))?,
            Expr::ret(Expr::add(acc.clone(), Expr::real(clip))?)?,
            Expr::if_(
                Expr::lt(x.clone(), Expr::real(-clip))?,
                Expr::ret(Expr::sub(acc.clone(), Expr::real(clip))?)?,
                Expr::ret(Expr::add(acc, x)?)?,
            )?,
        )
    })
}

fn noisy_mean_of(xs: &[f64], sum: Expr) -> R<Expr> {
    Expr::bind_with("s", sum, |s| {
        Expr::bind_with("noisedS", Expr::laplace(s, 1.0)?, |ns| {
            let count = Expr::to_real(Expr::length(Expr::real_list(xs))?)?;
            Expr::bind_with("noisedC", Expr::laplace(count, 1.0)?, |nc| Expr::ret(Expr::pair(ns, nc)?))
        })
    })
}

/// Noised clipped sum and noised count.
pub fn noisy_mean(xs: &[f64]) -> Result<Expr, BenchError> {
    if CLIP_BOUND < 0.0 {
        return Err(BenchError::NegativeClipBound("noisyMean"));
    }
    Ok(noisy_mean_of(xs, clipped_sum_expr(xs, CLIP_BOUND)?)?)
}

/// Sums without clipping.
pub fn noisy_mean_buggy(xs: &[f64]) -> Result<Expr, BenchError> {
    let plain = fold_m(Expr::real_list(xs), Expr::real(0.0), |acc, x| Expr::ret(Expr::add(acc, x)?))?;
    Ok(noisy_mean_of(xs, plain)?)
}

// ---------------------------------------------------------------------------
// Catalog

fn entry(
    name: &'static str,
    build: Builder,
    relation: Relation,
    epsilon: f64,
    expected: Verdict,
    sizes: SizeRamp,
    notes: &'static str,
) -> Benchmark {
    Benchmark {
        name,
        build,
        relation,
        epsilon,
        expected,
        sizes,
        inputs: GenConfig::default(),
        notes,
    }
}

const PT_EPSILON: f64 = 2.58;

/// Every benchmark, correct entries first within each family.
pub fn catalog() -> Vec<Benchmark> {
    use Relation::*;
    use Verdict::*;
    let cw = CoordinateWise(1.0);
    let l1 = L1(1.0);
    let db = DatabaseDistance(1);
    let ramp = |start, max, every| SizeRamp { start, max, every };
    let unit = GenConfig::with_range(0.0, 1.0);
    let mut pt = entry(
        "pt",
        priv_tree,
        db,
        PT_EPSILON,
        Accept,
        ramp(0, 2, 10),
        "one-dimensional PrivTree, all constants 1",
    );
    pt.inputs = unit;
    let mut pt_bug = entry(
        "ptBuggy",
        priv_tree_buggy,
        db,
        PT_EPSILON,
        Reject,
        ramp(1, 2, 10),
        "wrong variable: raw count instead of the depth-biased count",
    );
    pt_bug.inputs = unit;
    vec![
        entry("nc", noisy_count, db, 1.0, Accept, ramp(0, 6, 20), "threshold 0"),
        entry("ncBuggy", noisy_count_buggy, db, 1.0, Reject, ramp(0, 6, 20), "wrong width: 0.5"),
        entry("nm", noisy_mean, db, CLIP_BOUND + 1.0, Accept, ramp(0, 6, 20), "clip bound 1"),
        entry("nmBuggy", noisy_mean_buggy, db, CLIP_BOUND + 1.0, Reject, ramp(0, 6, 20), "missing clipping"),
        entry("ns", noisy_sum, l1, 1.0, Accept, ramp(1, 6, 20), ""),
        entry("nsBuggy", noisy_sum_buggy, l1, 1.0, Reject, ramp(1, 6, 20), "wrong width: 0.5"),
        entry("ps", ps, l1, 1.0, Accept, ramp(1, 5, 25), ""),
        entry("psBuggy", ps_buggy, l1, 1.0, Reject, ramp(1, 5, 25), "off by one: last element un-noised"),
        pt,
        pt_bug,
        entry("rnm", rnm, cw, 2.0, Accept, ramp(1, 5, 25), ""),
        entry("rnmBuggy", rnm_buggy, cw, 2.0, Reject, ramp(2, 5, 10), "wrong variable: un-noised first element"),
        entry("rnmGap", rnm_gap, cw, 4.0, Accept, ramp(3, 6, 10), "rejected at 2.0"),
        entry("rnmGapBuggy", rnm_gap_buggy, cw, 4.0, Reject, ramp(2, 5, 10), "wrong width: 0.5"),
        entry("ss", smart_sum, l1, 1.0, Accept, ramp(1, 5, 25), ""),
        entry("ssBuggy", smart_sum_buggy, l1, 1.0, Reject, ramp(3, 6, 10), "wrong variable: block sum not reset"),
        entry("sv", sv, cw, 1.0, Accept, ramp(1, 5, 25), "Algorithm 1, count 1"),
        entry("sv2", sv2, cw, 1.0, Accept, ramp(1, 5, 25), "Algorithm 2, count 1"),
        entry("sv3", sv3, cw, 1.0, Reject, ramp(1, 5, 10), "Algorithm 3: releases noised values"),
        entry("sv4", sv4, cw, 1.0, Reject, ramp(1, 5, 10), "Algorithm 4: query noise not scaled"),
        entry("sv5", sv5, cw, 1.0, Reject, ramp(2, 6, 10), "Algorithm 5: no query noise"),
        entry("sv6", sv6, cw, 1.0, Reject, ramp(2, 8, 6), "Algorithm 6: no cutoff"),
        entry("svGap", sv_gap, cw, 1.0, Accept, ramp(1, 5, 25), "count 1"),
        entry("svGapBuggy", sv_gap_buggy, cw, 1.0, Reject, ramp(2, 8, 6), "Algorithm 6 noise, no cutoff"),
    ]
}

/// Looks up a catalog entry by name.
pub fn find(name: &str) -> Option<Benchmark> {
    catalog().into_iter().find(|b| b.name == name)
}
