//! Symbolic evaluation with three branching strategies.
//!
//! * [`Mode::Fork`] splits on every symbolic conditional and records the
//!   residual straight-line program of each path (streamlining).
//! * [`Mode::StraightLine`] runs programs that must not branch symbolically.
//! * [`Mode::Merge`] explores both sides of a conditional and merges the
//!   resulting states when their sampling signatures agree.

use std::sync::Arc;

use thiserror::Error;

use super::term::{
    t_binary, t_bool, t_conj, t_ite, t_not, t_or, t_sample, t_unary, Sort, Term, TermRef,
};
use super::value::{merge_values, union_of, SymValue};
use crate::dsl::{BinaryOp, Expr, ExprKind, Type, TypeError, Var};
use crate::interp::RunOutcome;
use crate::value::Value;

/// Default limit on explored paths.
pub const DEFAULT_PATH_BUDGET: usize = 1 << 16;

/// Default limit on loop iterations along one symbolic path.
pub const DEFAULT_SYMBOLIC_FUEL: u64 = 100_000;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum SymbolicError {
    #[error("symbolic exploration exceeded the budget of {0} paths")]
    BudgetExceeded(usize),
    #[error("program branches on a symbolic condition")]
    NotStraightLine,
    #[error("symbolic loop fuel of {0} iterations exhausted")]
    FuelExhausted(u64),
    #[error("division by zero during constant folding")]
    DivisionByZero,
    #[error("unbound variable {0}")]
    UnboundVariable(Var),
    #[error("unsupported in symbolic execution: {0}")]
    Unsupported(String),
    #[error("symbolic evaluation stuck: {0}")]
    Stuck(String),
    #[error("path is infeasible")]
    Infeasible,
    #[error(transparent)]
    Type(#[from] TypeError),
}

/// How symbolic conditionals are handled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Fork,
    StraightLine,
    Merge,
}

/// Loop cutoff derived from first-run observations.
///
/// A symbolic loop is cut once its metric is not below (in the value prefix
/// order) any metric observed at the end of a concrete run. For integer
/// metrics this is `metric > observed maximum`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct UnrollPolicy {
    observed: Vec<Value>,
}

impl UnrollPolicy {
    pub fn new(observed: Vec<Value>) -> Self {
        let mut observed: Vec<Value> = observed.iter().map(Value::strip).collect();
        observed.sort();
        observed.dedup();
        UnrollPolicy { observed }
    }

    /// Integer metric bounded by `max`.
    pub fn from_max(max: i64) -> Self {
        UnrollPolicy::new(vec![Value::Int(max)])
    }

    /// Policy from the final loop metrics of concrete runs, if any were recorded.
    pub fn from_runs(runs: &[RunOutcome]) -> Option<Self> {
        let obs: Vec<Value> = runs
            .iter()
            .flat_map(|r| r.loop_metrics.iter().cloned())
            .collect();
        (!obs.is_empty()).then(|| UnrollPolicy::new(obs))
    }

    pub fn observed(&self) -> &[Value] {
        &self.observed
    }

    pub fn should_cut(&self, metric: &Value) -> bool {
        !self.observed.iter().any(|o| metric.prefix_le(o))
    }
}

#[derive(Clone, Debug)]
pub struct EngineConfig {
    pub budget: usize,
    pub fuel: u64,
    pub unroll: Option<UnrollPolicy>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            budget: DEFAULT_PATH_BUDGET,
            fuel: DEFAULT_SYMBOLIC_FUEL,
            unroll: None,
        }
    }
}

/// A Laplace call on a symbolic path.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSite {
    pub center: TermRef,
    pub width: f64,
}

/// How a path ended.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PathEnd {
    Return,
    Abort(String),
    /// Truncated by the loop cutoff.
    Cutoff,
}

/// One explored path.
#[derive(Clone, Debug)]
pub struct PathResult {
    /// `None` unless the path returned.
    pub output: Option<SymValue>,
    pub conditions: Vec<TermRef>,
    pub path_condition: TermRef,
    pub samples: Vec<SampleSite>,
    pub end: PathEnd,
}

/// All paths of a program.
#[derive(Clone, Debug, Default)]
pub struct Exploration {
    /// Paths that returned a value.
    pub paths: Vec<PathResult>,
    pub truncated: usize,
    pub aborted: usize,
}

/// A straight-line program produced by streamlining.
#[derive(Clone, Debug)]
pub struct Residual {
    pub program: Expr,
    pub end: PathEnd,
}

#[derive(Clone, Debug)]
enum Event {
    Sample,
    Assert(TermRef),
}

#[derive(Clone, Debug, Default)]
struct State {
    samples: Vec<SampleSite>,
    pc: Vec<TermRef>,
    events: Vec<Event>,
    iterations: u64,
}

impl State {
    fn assume(&mut self, c: TermRef) {
        self.pc.push(c.clone());
        self.events.push(Event::Assert(c));
    }
}

struct Branch {
    st: State,
    out: Result<SymValue, PathEnd>,
}

#[derive(Clone, Default)]
struct Env(Option<Arc<EnvNode>>);

struct EnvNode {
    id: u32,
    val: SymValue,
    next: Env,
}

impl Env {
    fn bind(&self, v: &Var, val: SymValue) -> Env {
        Env(Some(Arc::new(EnvNode {
            id: v.id(),
            val,
            next: self.clone(),
        })))
    }

    fn get(&self, v: &Var) -> Option<&SymValue> {
        let mut cur = &self.0;
        while let Some(n) = cur {
            if n.id == v.id() {
                return Some(&n.val);
            }
            cur = &n.next.0;
        }
        None
    }
}

struct Engine<'c> {
    mode: Mode,
    cfg: &'c EngineConfig,
    live_paths: usize,
}

type R<T> = Result<T, SymbolicError>;

fn scalar(v: SymValue) -> R<TermRef> {
    match v {
        SymValue::Scalar(t) => Ok(t),
        other => Err(SymbolicError::Stuck(format!("expected a scalar, got {other}"))),
    }
}

fn lift1(v: SymValue, f: &mut dyn FnMut(SymValue) -> R<SymValue>) -> R<SymValue> {
    match v {
        SymValue::Union(ms) => {
            let mut out = Vec::with_capacity(ms.len());
            for (g, m) in ms {
                out.push((g, f(m)?));
            }
            Ok(union_of(out))
        }
        v => f(v),
    }
}

fn lift2(
    a: SymValue,
    b: SymValue,
    f: &mut dyn FnMut(SymValue, SymValue) -> R<SymValue>,
) -> R<SymValue> {
    lift1(a, &mut |x| lift1(b.clone(), &mut |y| f(x.clone(), y)))
}

fn stuck(what: &str, v: &SymValue) -> SymbolicError {
    SymbolicError::Stuck(format!("expected a {what}, got {v}"))
}

fn concrete_key(v: &SymValue) -> R<Value> {
    v.to_concrete()
        .ok_or_else(|| SymbolicError::Unsupported(format!("symbolic map key {v}")))
}

impl Engine<'_> {
    fn pure(&self, e: &Expr, env: &Env) -> R<SymValue> {
        use ExprKind as K;
        Ok(match e.kind() {
            K::Lit(l) => SymValue::from_literal(l),
            K::Var(v) => env
                .get(v)
                .cloned()
                .ok_or_else(|| SymbolicError::UnboundVariable(v.clone()))?,
            K::Unary(op, a) => {
                let op = *op;
                lift1(self.pure(a, env)?, &mut |x| {
                    Ok(SymValue::Scalar(t_unary(op, scalar(x)?)))
                })?
            }
            K::Binary(op, a, b) => {
                let op = *op;
                lift2(self.pure(a, env)?, self.pure(b, env)?, &mut |x, y| {
                    let (x, y) = (scalar(x)?, scalar(y)?);
                    if op == BinaryOp::Div
                        && x.sort() == Sort::Int
                        && !(x.is_const() && y.is_const())
                    {
                        return Err(SymbolicError::Unsupported(
                            "integer division of symbolic terms".into(),
                        ));
                    }
                    t_binary(op, x, y)
                        .map(SymValue::Scalar)
                        .map_err(|_| SymbolicError::DivisionByZero)
                })?
            }
            K::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let c = scalar(self.pure(cond, env)?)?;
                match c.as_bool() {
                    Some(true) => self.pure(then_branch, env)?,
                    Some(false) => self.pure(else_branch, env)?,
                    None => merge_values(
                        &c,
                        self.pure(then_branch, env)?,
                        self.pure(else_branch, env)?,
                    ),
                }
            }
            K::Let { var, value, body } => {
                let v = self.pure(value, env)?;
                self.pure(body, &env.bind(var, v))?
            }
            K::Pair(a, b) => SymValue::pair(self.pure(a, env)?, self.pure(b, env)?),
            K::Fst(p) => lift1(self.pure(p, env)?, &mut |v| match v {
                SymValue::Pair(a, _) => Ok(*a),
                other => Err(stuck("pair", &other)),
            })?,
            K::Snd(p) => lift1(self.pure(p, env)?, &mut |v| match v {
                SymValue::Pair(_, b) => Ok(*b),
                other => Err(stuck("pair", &other)),
            })?,
            K::Nil => SymValue::List(Vec::new()),
            K::Cons(h, t) => {
                let h = self.pure(h, env)?;
                lift1(self.pure(t, env)?, &mut |v| match v {
                    SymValue::List(mut xs) => {
                        xs.insert(0, h.clone());
                        Ok(SymValue::List(xs))
                    }
                    other => Err(stuck("list", &other)),
                })?
            }
            K::Snoc(l, x) => {
                let x = self.pure(x, env)?;
                lift1(self.pure(l, env)?, &mut |v| match v {
                    SymValue::List(mut xs) => {
                        xs.push(x.clone());
                        Ok(SymValue::List(xs))
                    }
                    other => Err(stuck("list", &other)),
                })?
            }
            K::Uncons(l) => lift1(self.pure(l, env)?, &mut |v| match v {
                SymValue::List(xs) if xs.is_empty() => Ok(SymValue::Opt(None)),
                SymValue::List(mut xs) => {
                    let h = xs.remove(0);
                    Ok(SymValue::Opt(Some(Box::new(SymValue::pair(
                        h,
                        SymValue::List(xs),
                    )))))
                }
                other => Err(stuck("list", &other)),
            })?,
            K::IsNil(l) => lift1(self.pure(l, env)?, &mut |v| match v {
                SymValue::List(xs) => Ok(SymValue::Scalar(t_bool(xs.is_empty()))),
                other => Err(stuck("list", &other)),
            })?,
            K::Length(l) => lift1(self.pure(l, env)?, &mut |v| match v {
                SymValue::List(xs) => Ok(SymValue::Scalar(super::term::t_int(xs.len() as i64))),
                other => Err(stuck("list", &other)),
            })?,
            K::MapEmpty => SymValue::Map(Default::default()),
            K::MapInsert { map, key, value } => {
                let k = self.pure(key, env)?;
                let val = self.pure(value, env)?;
                lift2(self.pure(map, env)?, k, &mut |m, k| match m {
                    SymValue::Map(mut m) => {
                        m.insert(concrete_key(&k)?, val.clone());
                        Ok(SymValue::Map(m))
                    }
                    other => Err(stuck("map", &other)),
                })?
            }
            K::MapLookup { map, key } => {
                lift2(self.pure(map, env)?, self.pure(key, env)?, &mut |m, k| match m {
                    SymValue::Map(m) => Ok(SymValue::Opt(
                        m.get(&concrete_key(&k)?).cloned().map(Box::new),
                    )),
                    other => Err(stuck("map", &other)),
                })?
            }
            K::MapSize(m) => lift1(self.pure(m, env)?, &mut |m| match m {
                SymValue::Map(m) => Ok(SymValue::Scalar(super::term::t_int(m.len() as i64))),
                other => Err(stuck("map", &other)),
            })?,
            K::Nothing => SymValue::Opt(None),
            K::Just(x) => SymValue::Opt(Some(Box::new(self.pure(x, env)?))),
            K::CaseOption {
                scrutinee,
                on_nothing,
                var,
                on_just,
            } => lift1(self.pure(scrutinee, env)?, &mut |v| match v {
                SymValue::Opt(None) => self.pure(on_nothing, env),
                SymValue::Opt(Some(x)) => self.pure(on_just, &env.bind(var, *x)),
                other => Err(stuck("option", &other)),
            })?,
            _ => {
                return Err(SymbolicError::Stuck(format!(
                    "distribution expression in pure position: {e}"
                )))
            }
        })
    }

    fn fork_budget(&mut self, extra: usize) -> R<()> {
        self.live_paths += extra;
        if self.live_paths > self.cfg.budget {
            return Err(SymbolicError::BudgetExceeded(self.cfg.budget));
        }
        Ok(())
    }

    /// Explores both sides of a symbolic condition according to the mode.
    fn branch(
        &mut self,
        c: TermRef,
        st: State,
        on_true: &mut dyn FnMut(&mut Self, State) -> R<Vec<Branch>>,
        on_false: &mut dyn FnMut(&mut Self, State) -> R<Vec<Branch>>,
    ) -> R<Vec<Branch>> {
        match c.as_bool() {
            Some(true) => return on_true(self, st),
            Some(false) => return on_false(self, st),
            None => {}
        }
        if self.mode == Mode::StraightLine {
            return Err(SymbolicError::NotStraightLine);
        }
        self.fork_budget(1)?;
        let base = st.pc.len();
        let mut st_t = st.clone();
        st_t.assume(c.clone());
        let mut st_e = st;
        st_e.assume(t_not(c.clone()));
        let mut bt = on_true(self, st_t)?;
        let be = on_false(self, st_e)?;
        if self.mode == Mode::Fork {
            bt.extend(be);
            return Ok(bt);
        }
        let mut out = Vec::new();
        let mut pending: Vec<Option<Branch>> = be.into_iter().map(Some).collect();
        for t in bt {
            let partner = pending.iter().position(|e| {
                e.as_ref()
                    .is_some_and(|e| e.out.is_ok() && t.out.is_ok() && same_signature(&t.st, &e.st))
            });
            match partner {
                Some(i) => {
                    let e = pending[i].take().expect("partner present");
                    out.push(merge_branches(&c, base, t, e));
                    self.live_paths -= 1;
                }
                None => out.push(t),
            }
        }
        out.extend(pending.into_iter().flatten());
        Ok(out)
    }

    fn dist(&mut self, e: &Expr, env: &Env, mut st: State) -> R<Vec<Branch>> {
        use ExprKind as K;
        match e.kind() {
            K::Return(x) => Ok(vec![Branch {
                out: Ok(self.pure(x, env)?),
                st,
            }]),
            K::Laplace { center, width } => {
                let c = scalar(self.pure(center, env)?)?;
                let j = st.samples.len();
                st.samples.push(SampleSite {
                    center: c,
                    width: *width,
                });
                st.events.push(Event::Sample);
                Ok(vec![Branch {
                    out: Ok(SymValue::Scalar(t_sample(j))),
                    st,
                }])
            }
            K::Bind { dist, var, body } => {
                let first = self.dist(dist, env, st)?;
                let mut out = Vec::new();
                for b in first {
                    match b.out {
                        Ok(v) => out.extend(self.dist(body, &env.bind(var, v), b.st)?),
                        Err(end) => out.push(Branch { st: b.st, out: Err(end) }),
                    }
                }
                Ok(out)
            }
            K::Sequence(a, b) => {
                let first = self.dist(a, env, st)?;
                let mut out = Vec::new();
                for br in first {
                    match br.out {
                        Ok(_) => out.extend(self.dist(b, env, br.st)?),
                        Err(end) => out.push(Branch { st: br.st, out: Err(end) }),
                    }
                }
                Ok(out)
            }
            K::Assert(c) => {
                let c = scalar(self.pure(c, env)?)?;
                match c.as_bool() {
                    Some(true) => {}
                    Some(false) => {
                        self.live_paths = self.live_paths.saturating_sub(1);
                        return Ok(Vec::new());
                    }
                    None => st.assume(c),
                }
                Ok(vec![Branch {
                    out: Ok(SymValue::Unit),
                    st,
                }])
            }
            K::Abort(msg) => Ok(vec![Branch {
                out: Err(PathEnd::Abort(msg.clone())),
                st,
            }]),
            K::Let { var, value, body } => {
                let v = self.pure(value, env)?;
                self.dist(body, &env.bind(var, v), st)
            }
            K::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let c = scalar(self.pure(cond, env)?)?;
                self.branch(
                    c,
                    st,
                    &mut |s, st| s.dist(then_branch, env, st),
                    &mut |s, st| s.dist(else_branch, env, st),
                )
            }
            K::CaseOption {
                scrutinee,
                on_nothing,
                var,
                on_just,
            } => {
                let v = self.pure(scrutinee, env)?;
                self.case_dist(v, env, st, on_nothing, var, on_just)
            }
            K::Loop {
                init,
                var,
                cond,
                body,
                metric,
            } => {
                let s0 = self.pure(init, env)?;
                let lp = LoopParts {
                    var,
                    cond,
                    body,
                    metric: metric.as_ref(),
                };
                self.run_loop(&lp, env, s0, st)
            }
            _ => Err(SymbolicError::Stuck(format!(
                "pure expression in distribution position: {e}"
            ))),
        }
    }

    fn case_dist(
        &mut self,
        v: SymValue,
        env: &Env,
        st: State,
        on_nothing: &Expr,
        var: &Var,
        on_just: &Expr,
    ) -> R<Vec<Branch>> {
        match v {
            SymValue::Opt(None) => self.dist(on_nothing, env, st),
            SymValue::Opt(Some(x)) => self.dist(on_just, &env.bind(var, *x), st),
            SymValue::Union(ms) => {
                if self.mode == Mode::StraightLine {
                    return Err(SymbolicError::NotStraightLine);
                }
                self.fork_budget(ms.len().saturating_sub(1))?;
                let mut out = Vec::new();
                for (g, m) in ms {
                    let mut st_m = st.clone();
                    st_m.assume(g);
                    out.extend(self.case_dist(m, env, st_m, on_nothing, var, on_just)?);
                }
                Ok(out)
            }
            other => Err(stuck("option", &other)),
        }
    }

    fn run_loop(&mut self, lp: &LoopParts, env: &Env, mut state: SymValue, mut st: State) -> R<Vec<Branch>> {
        loop {
            let inner = env.bind(lp.var, state.clone());
            if let (Some(m), Some(policy)) = (lp.metric, &self.cfg.unroll) {
                let mv = self.pure(m, &inner)?;
                if let Some(vals) = mv.possible_values(256) {
                    if vals.iter().all(|v| policy.should_cut(v)) {
                        return Ok(vec![Branch {
                            st,
                            out: Err(PathEnd::Cutoff),
                        }]);
                    }
                }
            }
            let c = scalar(self.pure(lp.cond, &inner)?)?;
            match c.as_bool() {
                Some(false) => return Ok(vec![Branch { st, out: Ok(state) }]),
                Some(true) => {
                    let mut brs = self.step(lp, &inner, st)?;
                    if brs.len() == 1 && brs[0].out.is_ok() {
                        let b = brs.pop().expect("one branch");
                        st = b.st;
                        state = b.out.expect("checked ok");
                        continue;
                    }
                    return self.continue_all(lp, env, brs);
                }
                None => {
                    let exit_state = state.clone();
                    return self.branch(
                        c,
                        st,
                        &mut |s, st| {
                            let brs = s.step(lp, &inner, st)?;
                            s.continue_all(lp, env, brs)
                        },
                        &mut |_, st| {
                            Ok(vec![Branch {
                                st,
                                out: Ok(exit_state.clone()),
                            }])
                        },
                    );
                }
            }
        }
    }

    fn step(&mut self, lp: &LoopParts, inner: &Env, mut st: State) -> R<Vec<Branch>> {
        st.iterations += 1;
        if st.iterations > self.cfg.fuel {
            return Err(SymbolicError::FuelExhausted(self.cfg.fuel));
        }
        self.dist(lp.body, inner, st)
    }

    fn continue_all(&mut self, lp: &LoopParts, env: &Env, brs: Vec<Branch>) -> R<Vec<Branch>> {
        let mut out = Vec::new();
        for b in brs {
            match b.out {
                Ok(v) => out.extend(self.run_loop(lp, env, v, b.st)?),
                Err(end) => out.push(Branch { st: b.st, out: Err(end) }),
            }
        }
        Ok(out)
    }
}

struct LoopParts<'a> {
    var: &'a Var,
    cond: &'a Expr,
    body: &'a Expr,
    metric: Option<&'a Expr>,
}

fn same_signature(a: &State, b: &State) -> bool {
    a.samples.len() == b.samples.len()
        && a.samples.iter().zip(&b.samples).all(|(x, y)| x.width == y.width)
}

fn merge_branches(c: &TermRef, base: usize, t: Branch, e: Branch) -> Branch {
    let samples = t
        .st
        .samples
        .iter()
        .zip(&e.st.samples)
        .map(|(x, y)| SampleSite {
            center: t_ite(c.clone(), x.center.clone(), y.center.clone()),
            width: x.width,
        })
        .collect();
    let mut pc = t.st.pc[..base].to_vec();
    let guard = t_or(
        t_conj(t.st.pc[base..].iter().cloned()),
        t_conj(e.st.pc[base..].iter().cloned()),
    );
    if guard.as_bool() != Some(true) {
        pc.push(guard.clone());
    }
    let value = merge_values(
        c,
        t.out.expect("merged branches returned"),
        e.out.expect("merged branches returned"),
    );
    Branch {
        st: State {
            samples,
            pc,
            events: Vec::new(),
            iterations: t.st.iterations.max(e.st.iterations),
        },
        out: Ok(value),
    }
}

fn run_engine(prog: &Expr, mode: Mode, cfg: &EngineConfig) -> R<Vec<Branch>> {
    if prog.ty().dist_payload().is_none() {
        return Err(SymbolicError::Stuck(format!(
            "program must have a distribution type, found {}",
            prog.ty()
        )));
    }
    let mut engine = Engine {
        mode,
        cfg,
        live_paths: 1,
    };
    with_big_stack(|| engine.dist(prog, &Env::default(), State::default()))
}

/// Deep programs recurse deeply; run exploration on a generous stack.
fn with_big_stack<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .stack_size(256 << 20)
            .spawn_scoped(s, f)
            .expect("spawn exploration thread")
            .join()
            .expect("exploration thread panicked")
    })
}

fn to_path(b: Branch) -> PathResult {
    let (output, end) = match b.out {
        Ok(v) => (Some(v), PathEnd::Return),
        Err(end) => (None, end),
    };
    PathResult {
        output,
        path_condition: t_conj(b.st.pc.iter().cloned()),
        conditions: b.st.pc,
        samples: b.st.samples,
        end,
    }
}

/// Splits a program into straight-line programs, one per symbolic path.
pub fn streamline(prog: &Expr, cfg: &EngineConfig) -> Result<Vec<Residual>, SymbolicError> {
    let out_ty = prog
        .ty()
        .dist_payload()
        .cloned()
        .ok_or_else(|| SymbolicError::Stuck("program must be a distribution".into()))?;
    let branches = run_engine(prog, Mode::Fork, cfg)?;
    branches
        .into_iter()
        .map(|b| residual(b, &out_ty))
        .collect()
}

fn residual(b: Branch, out_ty: &Type) -> Result<Residual, SymbolicError> {
    let vars: Vec<Var> = (0..b.st.samples.len())
        .map(|_| Var::fresh("lap", Type::Real))
        .collect();
    let (mut body, end) = match &b.out {
        Ok(v) => (Expr::ret(value_to_expr(v, out_ty, &vars)?)?, PathEnd::Return),
        Err(PathEnd::Abort(m)) => (Expr::abort(out_ty.clone(), m.clone()), PathEnd::Abort(m.clone())),
        Err(PathEnd::Cutoff) => (Expr::abort(out_ty.clone(), "loop cutoff"), PathEnd::Cutoff),
        Err(PathEnd::Return) => unreachable!("returns carry a value"),
    };
    let mut j = b.st.samples.len();
    for ev in b.st.events.iter().rev() {
        body = match ev {
            Event::Sample => {
                j -= 1;
                let site = &b.st.samples[j];
                let center = term_to_expr(&site.center, &vars)?;
                Expr::bind(Expr::laplace(center, site.width)?, &vars[j], body)?
            }
            Event::Assert(c) => Expr::seq(Expr::assert(term_to_expr(c, &vars)?)?, body)?,
        };
    }
    Ok(Residual { program: body, end })
}

/// Rebuilds an expression from a term; `Sample(j)` becomes `vars[j]`.
pub fn term_to_expr(t: &Term, vars: &[Var]) -> Result<Expr, SymbolicError> {
    Ok(match t {
        Term::Bool(b) => Expr::bool(*b),
        Term::Int(i) => Expr::int(*i),
        Term::Real(x) => Expr::real(x.0),
        Term::Sample(j) => Expr::var(
            vars.get(*j)
                .ok_or_else(|| SymbolicError::Stuck(format!("sample {j} out of range")))?,
        ),
        Term::Unary(op, a) => Expr::unary(*op, term_to_expr(a, vars)?)?,
        Term::Binary(op, a, b) => Expr::binary(*op, term_to_expr(a, vars)?, term_to_expr(b, vars)?)?,
        Term::Ite(c, a, b) => Expr::if_(
            term_to_expr(c, vars)?,
            term_to_expr(a, vars)?,
            term_to_expr(b, vars)?,
        )?,
    })
}

/// Rebuilds a pure expression denoting a symbolic value of type `ty`.
pub fn value_to_expr(v: &SymValue, ty: &Type, vars: &[Var]) -> Result<Expr, SymbolicError> {
    Ok(match (v, ty) {
        (SymValue::Unit, Type::Unit) => Expr::unit(),
        (SymValue::Scalar(t), _) => term_to_expr(t, vars)?,
        (SymValue::Pair(a, b), Type::Pair(ta, tb)) => {
            Expr::pair(value_to_expr(a, ta, vars)?, value_to_expr(b, tb, vars)?)?
        }
        (SymValue::List(xs), Type::List(te)) => {
            let items = xs
                .iter()
                .map(|x| value_to_expr(x, te, vars))
                .collect::<Result<Vec<_>, _>>()?;
            Expr::list((**te).clone(), items)?
        }
        (SymValue::Map(m), Type::Map(tk, tv)) => {
            let mut acc = Expr::map_empty((**tk).clone(), (**tv).clone());
            for (k, x) in m {
                acc = Expr::map_insert(
                    acc,
                    value_to_expr(&SymValue::from_value(k), tk, vars)?,
                    value_to_expr(x, tv, vars)?,
                )?;
            }
            acc
        }
        (SymValue::Opt(None), Type::Option(t)) => Expr::nothing((**t).clone()),
        (SymValue::Opt(Some(x)), Type::Option(t)) => Expr::just(value_to_expr(x, t, vars)?)?,
        (SymValue::Union(_), _) => {
            return Err(SymbolicError::Unsupported(
                "shape-changing value in a straight-line program".into(),
            ))
        }
        (v, t) => return Err(SymbolicError::Stuck(format!("value {v} does not have type {t}"))),
    })
}

/// Symbolically runs a straight-line program.
pub fn symbolic_run(prog: &Expr) -> Result<PathResult, SymbolicError> {
    let cfg = EngineConfig::default();
    let mut branches = run_engine(prog, Mode::StraightLine, &cfg)?;
    match branches.len() {
        0 => Err(SymbolicError::Infeasible),
        1 => Ok(to_path(branches.pop().expect("one branch"))),
        _ => Err(SymbolicError::NotStraightLine),
    }
}

/// Which symbolic back end to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    /// Streamline into straight-line programs, then run each symbolically.
    Streamline,
    /// State-merging exploration.
    Merged,
}

impl std::str::FromStr for EngineKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "streamline" => Ok(EngineKind::Streamline),
            "merged" => Ok(EngineKind::Merged),
            other => Err(format!("unknown engine {other:?} (expected streamline or merged)")),
        }
    }
}

/// Enumerates the paths of a program with the chosen engine.
pub fn explore(prog: &Expr, kind: EngineKind, cfg: &EngineConfig) -> Result<Exploration, SymbolicError> {
    let mut ex = Exploration::default();
    match kind {
        EngineKind::Streamline => {
            for r in streamline(prog, cfg)? {
                let p = match symbolic_run(&r.program) {
                    Ok(p) => p,
                    Err(SymbolicError::Infeasible) => continue,
                    Err(e) => return Err(e),
                };
                match r.end {
                    PathEnd::Return => ex.paths.push(p),
                    PathEnd::Cutoff => ex.truncated += 1,
                    PathEnd::Abort(_) => ex.aborted += 1,
                }
            }
        }
        EngineKind::Merged => {
            for b in run_engine(prog, Mode::Merge, cfg)? {
                let p = to_path(b);
                match p.end {
                    PathEnd::Return => ex.paths.push(p),
                    PathEnd::Cutoff => ex.truncated += 1,
                    PathEnd::Abort(_) => ex.aborted += 1,
                }
            }
        }
    }
    Ok(ex)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noisy_max_pair() -> Expr {
        // max of two noisy reals, returning the index
        Expr::bind_with("a", Expr::laplace(Expr::real(1.0), 1.0).unwrap(), |a| {
            Expr::bind_with("b", Expr::laplace(Expr::real(2.0), 1.0)?, |b| {
                Expr::if_(
                    Expr::lt(a, b)?,
                    Expr::ret(Expr::int(1))?,
                    Expr::ret(Expr::int(0))?,
                )
            })
        })
        .unwrap()
    }

    #[test]
    fn streamline_splits_on_symbolic_if() {
        let rs = streamline(&noisy_max_pair(), &EngineConfig::default()).unwrap();
        assert_eq!(rs.len(), 2);
        for r in &rs {
            crate::dsl::typecheck(&r.program).unwrap();
            let p = symbolic_run(&r.program).unwrap();
            assert_eq!(p.samples.len(), 2);
            assert_eq!(p.conditions.len(), 1);
        }
    }

    #[test]
    fn straight_line_rejects_branching() {
        assert_eq!(
            symbolic_run(&noisy_max_pair()).unwrap_err(),
            SymbolicError::NotStraightLine
        );
    }

    #[test]
    fn merged_engine_merges_same_signature() {
        let ex = explore(&noisy_max_pair(), EngineKind::Merged, &EngineConfig::default()).unwrap();
        assert_eq!(ex.paths.len(), 1);
        let out = ex.paths[0].output.as_ref().unwrap();
        assert!(matches!(out, SymValue::Scalar(t) if matches!(**t, Term::Ite(..))));
    }

    #[test]
    fn budget_is_enforced() {
        let cfg = EngineConfig {
            budget: 1,
            ..EngineConfig::default()
        };
        assert_eq!(
            streamline(&noisy_max_pair(), &cfg).unwrap_err(),
            SymbolicError::BudgetExceeded(1)
        );
    }

    #[test]
    fn metric_cutoff_truncates() {
        // Count up while a fresh sample is below zero.
        let init = Expr::pair(Expr::int(0), Expr::bool(true)).unwrap();
        let prog = Expr::loop_with(
            init,
            |s| Expr::snd(s),
            |s| {
                Expr::bind_with("x", Expr::laplace(Expr::real(0.0), 1.0)?, |x| {
                    Expr::ret(Expr::pair(
                        Expr::add(Expr::fst(s)?, Expr::int(1))?,
                        Expr::lt(x, Expr::real(0.0))?,
                    )?)
                })
            },
            Some(Box::new(Expr::fst)),
        )
        .unwrap();
        let cfg = EngineConfig {
            unroll: Some(UnrollPolicy::from_max(3)),
            ..EngineConfig::default()
        };
        let ex = explore(&prog, EngineKind::Streamline, &cfg).unwrap();
        assert_eq!(ex.paths.len(), 3);
        assert_eq!(ex.truncated, 1);
    }
}
