//! Concrete and instrumented interpretation.
//!
//! The interpreter is generic over the numeric backend and the source of
//! Laplace samples, so the same code runs seeded sampling (`f64`), noise
//! injection, and exact replay of recorded samples (`BigRational`).

use std::sync::Arc;

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{BinaryOp, Expr, ExprKind, Literal, UnaryOp, Var};
use crate::sampler::{DiscreteLaplace, SamplerError};
use crate::value::{apply_binary, apply_unary, Provenance, Scalar, Scalarish, Value};

/// Default cap on loop iterations per run.
pub const DEFAULT_FUEL: u64 = 1_000_000;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("abort: {0}")]
    AbortEncountered(String),
    #[error("assertion failed")]
    AssertionFailed,
    #[error("loop fuel of {0} iterations exhausted")]
    FuelExhausted(u64),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("division by zero")]
    DivisionByZero,
    #[error("unbound variable {0}")]
    UnboundVariable(Var),
    #[error("loop metric decreased from {before} to {after}")]
    MetricNotMonotone { before: String, after: String },
    #[error("replay needs sample #{0} but the trace is shorter")]
    TraceExhausted(usize),
    #[error("evaluation stuck: {0}")]
    Stuck(String),
}

/// One Laplace draw observed during a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub sample: f64,
    pub center: f64,
    pub width: f64,
}

pub type Trace = Vec<TraceEntry>;

/// Everything recorded by one instrumented execution.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    /// `None` when the run aborted.
    pub output: Option<Value>,
    pub trace: Trace,
    pub aborted: Option<String>,
    /// Final metric value of every metered loop executed, in order.
    pub loop_metrics: Vec<Value>,
}

impl RunOutcome {
    /// Samples of the trace as exact rationals.
    pub fn exact_samples(&self) -> Vec<BigRational> {
        self.trace
            .iter()
            .map(|t| BigRational::from_f64(t.sample))
            .collect()
    }
}

/// Supplies a value for each Laplace call.
pub trait SampleSource<R: Scalar> {
    fn draw(&mut self, center: &R, width: f64, call: usize) -> Result<R, EvalError>;
}

/// Seeded discretized Laplace sampling.
pub struct RngSource<'a, G: Rng> {
    pub sampler: DiscreteLaplace,
    pub rng: &'a mut G,
}

impl<G: Rng> SampleSource<f64> for RngSource<'_, G> {
    fn draw(&mut self, center: &f64, width: f64, _call: usize) -> Result<f64, EvalError> {
        Ok(self.sampler.sample(*center, width, self.rng)?)
    }
}

/// Adds fixed noise to each center: call `j` returns `center + noise[j]`.
pub struct InjectedNoise(pub Vec<f64>);

impl SampleSource<f64> for InjectedNoise {
    fn draw(&mut self, center: &f64, width: f64, call: usize) -> Result<f64, EvalError> {
        check_draw(center.to_f64(), width)?;
        let n = self.0.get(call).ok_or(EvalError::TraceExhausted(call))?;
        Ok(center + n)
    }
}

/// Returns recorded samples verbatim, regardless of center.
pub struct FixedSamples<R>(pub Vec<R>);

impl<R: Scalar> SampleSource<R> for FixedSamples<R> {
    fn draw(&mut self, center: &R, width: f64, call: usize) -> Result<R, EvalError> {
        if !(width.is_finite() && width > 0.0) {
            return Err(SamplerError::InvalidWidth(width).into());
        }
        if !center.is_finite() {
            return Err(SamplerError::NonFiniteCenter(center.to_f64()).into());
        }
        self.0
            .get(call)
            .cloned()
            .ok_or(EvalError::TraceExhausted(call))
    }
}

fn check_draw(center: f64, width: f64) -> Result<(), EvalError> {
    if !(width.is_finite() && width > 0.0) {
        return Err(SamplerError::InvalidWidth(width).into());
    }
    if !center.is_finite() {
        return Err(SamplerError::NonFiniteCenter(center).into());
    }
    Ok(())
}

/// A recorded draw in the interpreter's numeric backend.
#[derive(Clone, Debug)]
pub struct Draw<R> {
    pub center: R,
    pub sample: R,
    pub width: f64,
}

/// Tree-walking evaluator.
pub struct Interpreter<R: Scalar, S: SampleSource<R>> {
    source: S,
    track_provenance: bool,
    fuel: u64,
    draws: Vec<Draw<R>>,
    loop_metrics: Vec<Value<R>>,
    env: Vec<(u32, Value<R>)>,
}

impl<R: Scalar, S: SampleSource<R>> Interpreter<R, S> {
    pub fn new(source: S) -> Self {
        Interpreter {
            source,
            track_provenance: false,
            fuel: DEFAULT_FUEL,
            draws: Vec::new(),
            loop_metrics: Vec::new(),
            env: Vec::new(),
        }
    }

    pub fn with_provenance(mut self, on: bool) -> Self {
        self.track_provenance = on;
        self
    }

    pub fn with_fuel(mut self, fuel: u64) -> Self {
        self.fuel = fuel;
        self
    }

    pub fn draws(&self) -> &[Draw<R>] {
        &self.draws
    }

    pub fn loop_metrics(&self) -> &[Value<R>] {
        &self.loop_metrics
    }

    /// Evaluates a closed expression. Distribution-typed expressions are run.
    pub fn run(&mut self, e: &Expr) -> Result<Value<R>, EvalError> {
        self.env.clear();
        self.eval(e)
    }

    fn lookup(&self, v: &Var) -> Result<Value<R>, EvalError> {
        self.env
            .iter()
            .rev()
            .find(|(id, _)| *id == v.id())
            .map(|(_, x)| x.clone())
            .ok_or_else(|| EvalError::UnboundVariable(v.clone()))
    }

    fn scoped(&mut self, v: &Var, val: Value<R>, body: &Expr) -> Result<Value<R>, EvalError> {
        self.env.push((v.id(), val));
        let r = self.eval(body);
        self.env.pop();
        r
    }

    fn eval_bool(&mut self, e: &Expr) -> Result<bool, EvalError> {
        self.eval(e)?
            .as_bool()
            .ok_or_else(|| EvalError::Stuck(format!("expected a boolean from {e}")))
    }

    fn eval(&mut self, e: &Expr) -> Result<Value<R>, EvalError> {
        use ExprKind as K;
        match e.kind() {
            K::Lit(l) => Ok(self.literal(l)),
            K::Var(v) => self.lookup(v),
            K::Unary(op, a) => {
                let x = self.eval(a)?;
                self.unary(*op, x)
            }
            K::Binary(op, a, b) => {
                // Short-circuit booleans.
                if matches!(op, BinaryOp::And | BinaryOp::Or) {
                    let l = self.eval_bool(a)?;
                    if (*op == BinaryOp::And && !l) || (*op == BinaryOp::Or && l) {
                        return Ok(Value::Bool(l));
                    }
                    return Ok(Value::Bool(self.eval_bool(b)?));
                }
                let x = self.eval(a)?;
                let y = self.eval(b)?;
                self.binary(*op, x, y)
            }
            K::If {
                cond,
                then_branch,
                else_branch,
            } => {
                if self.eval_bool(cond)? {
                    self.eval(then_branch)
                } else {
                    self.eval(else_branch)
                }
            }
            K::Let { var, value, body } => {
                let v = self.eval(value)?;
                self.scoped(var, v, body)
            }
            K::Pair(a, b) => {
                let x = self.eval(a)?;
                let y = self.eval(b)?;
                Ok(Value::pair(x, y))
            }
            K::Fst(p) => match self.eval(p)? {
                Value::Pair(a, _) => Ok(*a),
                other => Err(stuck("pair", &other)),
            },
            K::Snd(p) => match self.eval(p)? {
                Value::Pair(_, b) => Ok(*b),
                other => Err(stuck("pair", &other)),
            },
            K::Nil => Ok(Value::List(Vec::new())),
            K::Cons(h, t) => {
                let h = self.eval(h)?;
                match self.eval(t)? {
                    Value::List(mut xs) => {
                        xs.insert(0, h);
                        Ok(Value::List(xs))
                    }
                    other => Err(stuck("list", &other)),
                }
            }
            K::Snoc(l, x) => {
                let l = self.eval(l)?;
                let x = self.eval(x)?;
                match l {
                    Value::List(mut xs) => {
                        xs.push(x);
                        Ok(Value::List(xs))
                    }
                    other => Err(stuck("list", &other)),
                }
            }
            K::Uncons(l) => match self.eval(l)? {
                Value::List(xs) if xs.is_empty() => Ok(Value::Opt(None)),
                Value::List(mut xs) => {
                    let h = xs.remove(0);
                    Ok(Value::Opt(Some(Box::new(Value::pair(h, Value::List(xs))))))
                }
                other => Err(stuck("list", &other)),
            },
            K::IsNil(l) => match self.eval(l)? {
                Value::List(xs) => Ok(Value::Bool(xs.is_empty())),
                other => Err(stuck("list", &other)),
            },
            K::Length(l) => match self.eval(l)? {
                Value::List(xs) => Ok(Value::Int(xs.len() as i64)),
                other => Err(stuck("list", &other)),
            },
            K::MapEmpty => Ok(Value::Map(Default::default())),
            K::MapInsert { map, key, value } => {
                let m = self.eval(map)?;
                let k = self.eval(key)?;
                let v = self.eval(value)?;
                match m {
                    Value::Map(mut m) => {
                        m.insert(k, v);
                        Ok(Value::Map(m))
                    }
                    other => Err(stuck("map", &other)),
                }
            }
            K::MapLookup { map, key } => {
                let m = self.eval(map)?;
                let k = self.eval(key)?;
                match m {
                    Value::Map(m) => Ok(Value::Opt(m.get(&k).cloned().map(Box::new))),
                    other => Err(stuck("map", &other)),
                }
            }
            K::MapSize(m) => match self.eval(m)? {
                Value::Map(m) => Ok(Value::Int(m.len() as i64)),
                other => Err(stuck("map", &other)),
            },
            K::Nothing => Ok(Value::Opt(None)),
            K::Just(x) => Ok(Value::Opt(Some(Box::new(self.eval(x)?)))),
            K::CaseOption {
                scrutinee,
                on_nothing,
                var,
                on_just,
            } => match self.eval(scrutinee)? {
                Value::Opt(None) => self.eval(on_nothing),
                Value::Opt(Some(v)) => self.scoped(var, *v, on_just),
                other => Err(stuck("option", &other)),
            },
            K::Laplace { center, width } => {
                let c = self.eval(center)?;
                let (cv, cprov) = match c {
                    Value::Real(x, p) => (x, p),
                    other => return Err(stuck("real", &other)),
                };
                let call = self.draws.len();
                let s = self.source.draw(&cv, *width, call)?;
                let prov = self.track_provenance.then(|| {
                    Arc::new(Provenance::Lap {
                        center: cprov.unwrap_or_else(|| Arc::new(Provenance::Const(cv.to_f64()))),
                        width: *width,
                        call,
                    })
                });
                self.draws.push(Draw {
                    center: cv,
                    sample: s.clone(),
                    width: *width,
                });
                Ok(Value::Real(s, prov))
            }
            K::Return(x) => self.eval(x),
            K::Bind { dist, var, body } => {
                let v = self.eval(dist)?;
                self.scoped(var, v, body)
            }
            K::Assert(c) => {
                if self.eval_bool(c)? {
                    Ok(Value::Unit)
                } else {
                    Err(EvalError::AssertionFailed)
                }
            }
            K::Sequence(a, b) => {
                self.eval(a)?;
                self.eval(b)
            }
            K::Abort(msg) => Err(EvalError::AbortEncountered(msg.clone())),
            K::Loop {
                init,
                var,
                cond,
                body,
                metric,
            } => {
                let mut state = self.eval(init)?;
                let mut last_metric: Option<Value<R>> = None;
                let mut iterations = 0u64;
                loop {
                    if let Some(m) = metric {
                        let mv = self.scoped(var, state.clone(), m)?;
                        if let Some(prev) = &last_metric {
                            if !prev.prefix_le(&mv) {
                                return Err(EvalError::MetricNotMonotone {
                                    before: prev.to_string(),
                                    after: mv.to_string(),
                                });
                            }
                        }
                        last_metric = Some(mv);
                    }
                    self.env.push((var.id(), state));
                    let go = self.eval_bool(cond);
                    let go = match go {
                        Ok(g) => g,
                        Err(err) => {
                            self.env.pop();
                            return Err(err);
                        }
                    };
                    if !go {
                        state = self.env.pop().expect("loop state").1;
                        break;
                    }
                    iterations += 1;
                    if iterations > self.fuel {
                        self.env.pop();
                        return Err(EvalError::FuelExhausted(self.fuel));
                    }
                    let next = self.eval(body);
                    self.env.pop();
                    state = next?;
                }
                if let Some(m) = last_metric {
                    self.loop_metrics.push(m.strip());
                }
                Ok(state)
            }
        }
    }

    fn literal(&self, l: &Literal) -> Value<R> {
        Value::from_literal(l)
    }

    fn unary(&self, op: UnaryOp, x: Value<R>) -> Result<Value<R>, EvalError> {
        let prov = x.provenance().cloned();
        let s = to_scalarish(&x)?;
        let out = apply_unary(op, &s).ok_or_else(|| EvalError::Stuck(format!("{op:?} on {x}")))?;
        Ok(from_scalarish(out, || {
            prov.map(|p| Arc::new(Provenance::Unary(op, p)))
        }))
    }

    fn binary(&self, op: BinaryOp, x: Value<R>, y: Value<R>) -> Result<Value<R>, EvalError> {
        let (sx, sy) = (to_scalarish(&x)?, to_scalarish(&y)?);
        let out = apply_binary(op, &sx, &sy)
            .map_err(|_| EvalError::DivisionByZero)?
            .ok_or_else(|| EvalError::Stuck(format!("{op:?} on {x} and {y}")))?;
        let track = self.track_provenance;
        Ok(from_scalarish(out, || {
            if !track || (x.provenance().is_none() && y.provenance().is_none()) {
                return None;
            }
            Some(Arc::new(Provenance::Binary(op, leaf(&x), leaf(&y))))
        }))
    }
}

fn leaf<R: Scalar>(v: &Value<R>) -> Arc<Provenance> {
    match v {
        Value::Real(x, p) => p
            .clone()
            .unwrap_or_else(|| Arc::new(Provenance::Const(x.to_f64()))),
        _ => Arc::new(Provenance::Const(f64::NAN)),
    }
}

fn stuck<R: Scalar>(expected: &str, got: &Value<R>) -> EvalError {
    EvalError::Stuck(format!("expected a {expected}, got {got}"))
}

fn to_scalarish<R: Scalar>(v: &Value<R>) -> Result<Scalarish<R>, EvalError> {
    match v {
        Value::Bool(b) => Ok(Scalarish::Bool(*b)),
        Value::Int(i) => Ok(Scalarish::Int(*i)),
        Value::Real(x, _) => Ok(Scalarish::Real(x.clone())),
        other => Err(stuck("scalar", other)),
    }
}

fn from_scalarish<R: Scalar>(
    s: Scalarish<R>,
    prov: impl FnOnce() -> Option<Arc<Provenance>>,
) -> Value<R> {
    match s {
        Scalarish::Bool(b) => Value::Bool(b),
        Scalarish::Int(i) => Value::Int(i),
        Scalarish::Real(x) => Value::Real(x, prov()),
    }
}

/// Deterministic RNG for run `index` under `seed`.
pub fn run_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs a program once with seeded sampling, without instrumentation.
pub fn eval<G: Rng>(prog: &Expr, rng: &mut G, sampler: DiscreteLaplace) -> Result<Value, EvalError> {
    Interpreter::new(RngSource { sampler, rng })
        .run(prog)
        .map(|v| v.strip())
}

/// Configuration for instrumented runs.
#[derive(Clone, Copy, Debug)]
pub struct RunConfig {
    pub sampler: DiscreteLaplace,
    pub fuel: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            sampler: DiscreteLaplace::default(),
            fuel: DEFAULT_FUEL,
        }
    }
}

/// Runs a program once, recording every Laplace draw and output provenance.
///
/// Aborts are reported in the outcome; other evaluation errors are returned.
pub fn instrumented_run<G: Rng>(
    prog: &Expr,
    rng: &mut G,
    config: &RunConfig,
) -> Result<RunOutcome, EvalError> {
    let source = RngSource {
        sampler: config.sampler,
        rng,
    };
    let mut it = Interpreter::new(source)
        .with_provenance(true)
        .with_fuel(config.fuel);
    instrumented_with(&mut it, prog)
}

/// Instrumented run with injected noise, `sample_j = center_j + noise[j]`.
pub fn instrumented_run_with_noise(prog: &Expr, noise: Vec<f64>) -> Result<RunOutcome, EvalError> {
    let mut it = Interpreter::new(InjectedNoise(noise)).with_provenance(true);
    instrumented_with(&mut it, prog)
}

fn instrumented_with<S: SampleSource<f64>>(
    it: &mut Interpreter<f64, S>,
    prog: &Expr,
) -> Result<RunOutcome, EvalError> {
    let result = it.run(prog);
    let trace = it
        .draws()
        .iter()
        .map(|d| TraceEntry {
            sample: d.sample,
            center: d.center,
            width: d.width,
        })
        .collect();
    let loop_metrics = it.loop_metrics().to_vec();
    match result {
        Ok(v) => Ok(RunOutcome {
            output: Some(v),
            trace,
            aborted: None,
            loop_metrics,
        }),
        Err(EvalError::AbortEncountered(msg)) => Ok(RunOutcome {
            output: None,
            trace,
            aborted: Some(msg),
            loop_metrics,
        }),
        Err(e) => Err(e),
    }
}

/// Replays a program exactly with the given samples.
///
/// Returns the output and the exact centers observed.
pub fn replay_exact(
    prog: &Expr,
    samples: Vec<BigRational>,
    fuel: u64,
) -> Result<(Value<BigRational>, Vec<Draw<BigRational>>), EvalError> {
    let n = samples.len();
    let mut it = Interpreter::new(FixedSamples(samples)).with_fuel(fuel);
    let v = it.run(prog)?;
    if it.draws().len() != n {
        return Err(EvalError::Stuck(format!(
            "replay consumed {} of {} samples",
            it.draws().len(),
            n
        )));
    }
    Ok((v, it.draws().to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::Type;

    #[test]
    fn loop_counts_to_ten() {
        let e = Expr::loop_with(
            Expr::int(0),
            |s| Expr::lt(s, Expr::int(10)),
            |s| Expr::ret(Expr::add(s, Expr::int(1))?),
            None,
        )
        .unwrap();
        let v = Interpreter::<f64, _>::new(InjectedNoise(vec![])).run(&e).unwrap();
        assert_eq!(v, Value::Int(10));
    }

    #[test]
    fn fuel_is_enforced() {
        let e = Expr::loop_with(
            Expr::int(0),
            |_| Ok(Expr::bool(true)),
            |s| Expr::ret(s),
            None,
        )
        .unwrap();
        let err = Interpreter::<f64, _>::new(InjectedNoise(vec![]))
            .with_fuel(100)
            .run(&e)
            .unwrap_err();
        assert_eq!(err, EvalError::FuelExhausted(100));
    }

    #[test]
    fn decreasing_metric_is_reported() {
        let e = Expr::loop_with(
            Expr::int(5),
            |s| Expr::lt(Expr::int(0), s),
            |s| Expr::ret(Expr::sub(s, Expr::int(1))?),
            Some(Box::new(Ok)),
        )
        .unwrap();
        let err = Interpreter::<f64, _>::new(InjectedNoise(vec![])).run(&e).unwrap_err();
        assert!(matches!(err, EvalError::MetricNotMonotone { .. }));
    }

    #[test]
    fn abort_is_captured_in_outcome() {
        let e = Expr::abort(Type::Real, "boom");
        let out = instrumented_run_with_noise(&e, vec![]).unwrap();
        assert_eq!(out.aborted.as_deref(), Some("boom"));
        assert!(out.output.is_none());
    }
}
