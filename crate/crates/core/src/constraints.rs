//! Coupling constraints between first runs and symbolic dual paths.
//!
//! For a bucket of traces the formula asks for one shift per Laplace call
//! such that every trace, with each sample moved by its shift, follows some
//! matched path of the dual program, produces the same output, and pays a
//! total coupling cost of at most epsilon.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::bucketing::{path_compatible, Bucket};
use crate::interp::{RunOutcome, TraceEntry};
use crate::symbolic::{smt_rational, smt_real, PathResult, SymValue, Term, TermRef};
use crate::value::{exact_rational, Scalarish, Value};

/// The shift applied to the j-th Laplace call.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ShiftVar(pub usize);

impl ShiftVar {
    pub fn name(&self) -> String {
        format!("shift_{}", self.0)
    }
}

/// `lap[trace][index] = sample + shift`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleEquation {
    pub trace: usize,
    pub index: usize,
    pub sample: f64,
    pub shift: ShiftVar,
}

/// `|c1 + shift - c2| / width`, with `c2` a term over the dual samples.
#[derive(Clone, Debug, PartialEq)]
pub struct CostTerm {
    pub c1: f64,
    pub shift: ShiftVar,
    pub c2: TermRef,
    pub width: f64,
}

impl CostTerm {
    /// Exact cost given shifts and the dual sample values.
    pub fn eval(&self, shifts: &[BigRational], dual: &[BigRational]) -> Option<BigRational> {
        let c1 = exact_rational(self.c1)?;
        let c2 = match self.c2.eval(dual)? {
            Scalarish::Real(r) => r,
            Scalarish::Int(i) => BigRational::from_integer(i.into()),
            Scalarish::Bool(_) => return None,
        };
        let w = exact_rational(self.width)?;
        Some((c1 + shifts.get(self.shift.0)? - c2).abs() / w)
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum CouplingError {
    #[error("first run used width {first} but the dual path uses {second}")]
    WidthMismatch { first: f64, second: f64 },
}

/// Couples one recorded draw with the matching draw of a dual path.
pub fn couple_sample(
    trace: usize,
    index: usize,
    entry: &TraceEntry,
    dual_center: &TermRef,
    dual_width: f64,
) -> Result<(SampleEquation, CostTerm), CouplingError> {
    if entry.width != dual_width {
        return Err(CouplingError::WidthMismatch {
            first: entry.width,
            second: dual_width,
        });
    }
    let shift = ShiftVar(index);
    Ok((
        SampleEquation {
            trace,
            index,
            sample: entry.sample,
            shift,
        },
        CostTerm {
            c1: entry.center,
            shift,
            c2: dual_center.clone(),
            width: entry.width,
        },
    ))
}

/// Boolean obligation over the dual samples of one trace.
#[derive(Clone, Debug, PartialEq)]
pub enum Obligation {
    True,
    False,
    /// A boolean term must hold.
    Holds(TermRef),
    /// A numeric term must equal an exact constant.
    EqNum(TermRef, BigRational),
    And(Vec<Obligation>),
    Or(Vec<Obligation>),
}

impl Obligation {
    fn and(items: Vec<Obligation>) -> Obligation {
        let mut out = Vec::new();
        for o in items {
            match o {
                Obligation::True => {}
                Obligation::False => return Obligation::False,
                Obligation::And(xs) => out.extend(xs),
                o => out.push(o),
            }
        }
        match out.len() {
            0 => Obligation::True,
            1 => out.pop().expect("one item"),
            _ => Obligation::And(out),
        }
    }

    fn or(items: Vec<Obligation>) -> Obligation {
        let mut out = Vec::new();
        for o in items {
            match o {
                Obligation::False => {}
                Obligation::True => return Obligation::True,
                o => out.push(o),
            }
        }
        match out.len() {
            0 => Obligation::False,
            1 => out.pop().expect("one item"),
            _ => Obligation::Or(out),
        }
    }

    fn holds_term(t: &TermRef) -> Obligation {
        match t.as_bool() {
            Some(true) => Obligation::True,
            Some(false) => Obligation::False,
            None => Obligation::Holds(t.clone()),
        }
    }

    /// Exact evaluation under a dual sample assignment.
    pub fn eval(&self, dual: &[BigRational]) -> Option<bool> {
        Some(match self {
            Obligation::True => true,
            Obligation::False => false,
            Obligation::Holds(t) => t.holds(dual)?,
            Obligation::EqNum(t, r) => match t.eval(dual)? {
                Scalarish::Real(x) => &x == r,
                Scalarish::Int(i) => &BigRational::from_integer(i.into()) == r,
                Scalarish::Bool(_) => return None,
            },
            Obligation::And(xs) => {
                for x in xs {
                    if !x.eval(dual)? {
                        return Some(false);
                    }
                }
                true
            }
            Obligation::Or(xs) => {
                for x in xs {
                    if x.eval(dual)? {
                        return Some(true);
                    }
                }
                false
            }
        })
    }

    fn write_smt(&self, out: &mut String, name: &dyn Fn(usize) -> String) {
        match self {
            Obligation::True => out.push_str("true"),
            Obligation::False => out.push_str("false"),
            Obligation::Holds(t) => t.write_smt(out, name),
            Obligation::EqNum(t, r) => {
                out.push_str("(= ");
                t.write_smt(out, name);
                out.push(' ');
                out.push_str(&smt_rational(r));
                out.push(')');
            }
            Obligation::And(xs) | Obligation::Or(xs) => {
                out.push_str(if matches!(self, Obligation::And(_)) {
                    "(and"
                } else {
                    "(or"
                });
                for x in xs {
                    out.push(' ');
                    x.write_smt(out, name);
                }
                out.push(')');
            }
        }
    }
}

/// Output-equality obligation: the dual output must equal the first-run
/// output, whose sampled reals are evaluated exactly from provenance.
pub fn output_obligation(sym: &SymValue, val: &Value, samples: &[BigRational]) -> Obligation {
    match (sym, val) {
        (SymValue::Union(ms), v) => Obligation::or(
            ms.iter()
                .map(|(g, m)| {
                    Obligation::and(vec![
                        Obligation::holds_term(g),
                        output_obligation(m, v, samples),
                    ])
                })
                .collect(),
        ),
        (SymValue::Unit, Value::Unit) => Obligation::True,
        (SymValue::Scalar(t), v) => scalar_obligation(t, v, samples),
        (SymValue::Pair(a, b), Value::Pair(x, y)) => Obligation::and(vec![
            output_obligation(a, x, samples),
            output_obligation(b, y, samples),
        ]),
        (SymValue::List(xs), Value::List(ys)) if xs.len() == ys.len() => Obligation::and(
            xs.iter()
                .zip(ys)
                .map(|(x, y)| output_obligation(x, y, samples))
                .collect(),
        ),
        (SymValue::Map(m1), Value::Map(m2))
            if m1.len() == m2.len() && m1.keys().zip(m2.keys()).all(|(a, b)| a == b) =>
        {
            Obligation::and(
                m1.values()
                    .zip(m2.values())
                    .map(|(x, y)| output_obligation(x, y, samples))
                    .collect(),
            )
        }
        (SymValue::Opt(None), Value::Opt(None)) => Obligation::True,
        (SymValue::Opt(Some(a)), Value::Opt(Some(b))) => output_obligation(a, b, samples),
        _ => Obligation::False,
    }
}

fn scalar_obligation(t: &TermRef, v: &Value, samples: &[BigRational]) -> Obligation {
    match v {
        Value::Bool(b) => match t.as_bool() {
            Some(x) => bool_ob(x == *b),
            None if matches!(t.sort(), crate::symbolic::Sort::Bool) => {
                let target = if *b {
                    t.clone()
                } else {
                    crate::symbolic::t_not(t.clone())
                };
                Obligation::Holds(target)
            }
            None => Obligation::False,
        },
        Value::Int(i) => numeric_ob(t, BigRational::from_integer((*i).into())),
        Value::Real(x, prov) => {
            let rhs = match prov {
                Some(p) => p.eval_exact(samples),
                None => exact_rational(*x),
            };
            match rhs {
                Some(r) => numeric_ob(t, r),
                None => Obligation::False,
            }
        }
        _ => Obligation::False,
    }
}

fn bool_ob(b: bool) -> Obligation {
    if b {
        Obligation::True
    } else {
        Obligation::False
    }
}

fn numeric_ob(t: &TermRef, rhs: BigRational) -> Obligation {
    match &**t {
        Term::Int(i) => bool_ob(BigRational::from_integer((*i).into()) == rhs),
        Term::Real(x) => bool_ob(exact_rational(x.0) == Some(rhs)),
        Term::Bool(_) => Obligation::False,
        _ => Obligation::EqNum(t.clone(), rhs),
    }
}

/// One way a trace can be explained: path, output equality, cost.
#[derive(Clone, Debug)]
pub struct Alternative {
    /// Index into [`CouplingFormula::paths`].
    pub path: usize,
    pub output: Obligation,
    pub costs: Vec<CostTerm>,
}

/// Constraints contributed by one trace.
#[derive(Clone, Debug)]
pub struct TraceBlock {
    pub equations: Vec<SampleEquation>,
    pub alternatives: Vec<Alternative>,
}

/// The conditions of a matched path, over formal samples.
#[derive(Clone, Debug)]
pub struct PathDef {
    pub arity: usize,
    pub conditions: Vec<TermRef>,
}

/// Coupling formula for one bucket.
#[derive(Clone, Debug)]
pub struct CouplingFormula {
    pub label: String,
    pub epsilon: f64,
    pub shift_count: usize,
    pub paths: Vec<PathDef>,
    pub traces: Vec<TraceBlock>,
}

impl CouplingFormula {
    /// A trace with no viable alternative makes the formula unsatisfiable.
    pub fn unsat_by_construction(&self) -> bool {
        self.traces.iter().any(|t| t.alternatives.is_empty())
    }

    pub fn is_nonlinear(&self) -> bool {
        let cond = self
            .paths
            .iter()
            .any(|p| p.conditions.iter().any(|c| c.is_nonlinear()));
        let rest = self.traces.iter().any(|t| {
            t.alternatives.iter().any(|a| {
                obligation_nonlinear(&a.output) || a.costs.iter().any(|c| c.c2.is_nonlinear())
            })
        });
        cond || rest
    }

    /// Checks an assignment of shifts exactly, independently of any solver.
    ///
    /// Returns the index of the first trace not explained, if any.
    pub fn check_model(&self, shifts: &[BigRational]) -> Result<(), usize> {
        let eps = exact_rational(self.epsilon).expect("finite epsilon");
        for (ti, block) in self.traces.iter().enumerate() {
            let dual: Vec<BigRational> = block
                .equations
                .iter()
                .map(|e| {
                    exact_rational(e.sample).expect("finite sample")
                        + shifts.get(e.shift.0).cloned().unwrap_or_else(BigRational::zero)
                })
                .collect();
            let ok = block.alternatives.iter().any(|alt| {
                let def = &self.paths[alt.path];
                let pc = def.conditions.iter().all(|c| c.holds(&dual) == Some(true));
                if !pc || alt.output.eval(&dual) != Some(true) {
                    return false;
                }
                let mut total = BigRational::zero();
                for c in &alt.costs {
                    match c.eval(shifts, &dual) {
                        Some(x) => total += x,
                        None => return false,
                    }
                }
                total <= eps
            });
            if !ok {
                return Err(ti);
            }
        }
        Ok(())
    }
}

fn obligation_nonlinear(o: &Obligation) -> bool {
    match o {
        Obligation::Holds(t) | Obligation::EqNum(t, _) => t.is_nonlinear(),
        Obligation::And(xs) | Obligation::Or(xs) => xs.iter().any(obligation_nonlinear),
        _ => false,
    }
}

/// Builds the formula for a bucket against its matched paths.
///
/// `paths` are all explored paths; `matched` selects the candidates.
pub fn build_bucket_formula(
    label: impl Into<String>,
    bucket: &Bucket,
    paths: &[PathResult],
    matched: &[usize],
    epsilon: f64,
) -> CouplingFormula {
    let defs: Vec<PathDef> = matched
        .iter()
        .map(|&i| PathDef {
            arity: paths[i].samples.len(),
            conditions: paths[i].conditions.clone(),
        })
        .collect();
    let shift_count = bucket.runs.iter().map(|r| r.trace.len()).max().unwrap_or(0);
    let traces = bucket
        .runs
        .iter()
        .enumerate()
        .map(|(ti, run)| trace_block(ti, run, paths, matched))
        .collect();
    CouplingFormula {
        label: label.into(),
        epsilon,
        shift_count,
        paths: defs,
        traces,
    }
}

fn trace_block(ti: usize, run: &RunOutcome, paths: &[PathResult], matched: &[usize]) -> TraceBlock {
    let samples = run.exact_samples();
    let equations = run
        .trace
        .iter()
        .enumerate()
        .map(|(j, e)| SampleEquation {
            trace: ti,
            index: j,
            sample: e.sample,
            shift: ShiftVar(j),
        })
        .collect();
    let mut alternatives = Vec::new();
    let Some(out) = &run.output else {
        return TraceBlock {
            equations,
            alternatives,
        };
    };
    for (pi, &i) in matched.iter().enumerate() {
        let p = &paths[i];
        if !path_compatible(p, run) {
            continue;
        }
        let Some(sym) = &p.output else { continue };
        let output = output_obligation(sym, out, &samples);
        if output == Obligation::False {
            continue;
        }
        let costs = run
            .trace
            .iter()
            .zip(&p.samples)
            .enumerate()
            .map(|(j, (e, s))| {
                couple_sample(ti, j, e, &s.center, s.width)
                    .expect("compatible paths have equal widths")
                    .1
            })
            .collect();
        alternatives.push(Alternative {
            path: pi,
            output,
            costs,
        });
    }
    TraceBlock {
        equations,
        alternatives,
    }
}

fn lap_name(t: usize) -> impl Fn(usize) -> String {
    move |j| format!("lap_{t}_{j}")
}

/// Renders the formula as an SMT-LIB 2 script ending in `check-sat` and a
/// `get-value` query for the shifts.
pub fn emit_smtlib(f: &CouplingFormula) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "; bucket {}", f.label.replace('\n', " "));
    let _ = writeln!(
        s,
        "; traces {}, candidate paths {}, shifts {}",
        f.traces.len(),
        f.paths.len(),
        f.shift_count
    );
    s.push_str("(set-option :produce-models true)\n");
    let logic = if f.is_nonlinear() { "QF_NRA" } else { "QF_LRA" };
    let _ = writeln!(s, "(set-logic {logic})");
    for j in 0..f.shift_count {
        let _ = writeln!(s, "(declare-fun {} () Real)", ShiftVar(j).name());
    }
    for (ti, block) in f.traces.iter().enumerate() {
        for e in &block.equations {
            let _ = writeln!(
                s,
                "(define-fun lap_{ti}_{} () Real (+ {} {}))",
                e.index,
                smt_real(e.sample),
                e.shift.name()
            );
        }
    }
    let formal = |j: usize| format!("s_{j}");
    for (pi, def) in f.paths.iter().enumerate() {
        let params: Vec<String> = (0..def.arity).map(|j| format!("(s_{j} Real)")).collect();
        let mut body = String::new();
        Obligation::and(def.conditions.iter().map(Obligation::holds_term).collect())
            .write_smt(&mut body, &formal);
        let _ = writeln!(s, "(define-fun path_{pi} ({}) Bool {body})", params.join(" "));
    }

    // Absolute values are linearized with auxiliary reals, shared when the
    // same argument occurs for several traces.
    let mut abs_ids: BTreeMap<String, usize> = BTreeMap::new();
    let mut within_ids: BTreeMap<String, usize> = BTreeMap::new();
    let mut defs = String::new();
    let mut asserts = String::new();
    for (ti, block) in f.traces.iter().enumerate() {
        let name = lap_name(ti);
        let mut alts = Vec::new();
        for alt in &block.alternatives {
            let mut sum_terms = Vec::new();
            for c in &alt.costs {
                let arg = cost_argument(c, &name);
                let next = abs_ids.len();
                let id = *abs_ids.entry(arg.clone()).or_insert_with(|| {
                    let _ = writeln!(defs, "(declare-fun abs_{next} () Real)");
                    let _ = writeln!(defs, "(assert (>= abs_{next} {arg}))");
                    let _ = writeln!(defs, "(assert (>= abs_{next} (- {arg})))");
                    next
                });
                if c.width == 1.0 {
                    sum_terms.push(format!("abs_{id}"));
                } else {
                    sum_terms.push(format!("(/ abs_{id} {})", smt_real(c.width)));
                }
            }
            let sum = match sum_terms.len() {
                0 => "0.0".to_string(),
                1 => sum_terms.pop().expect("one term"),
                _ => format!("(+ {})", sum_terms.join(" ")),
            };
            let next = within_ids.len();
            let wid = *within_ids.entry(sum.clone()).or_insert_with(|| {
                let _ = writeln!(
                    defs,
                    "(define-fun within_{next} () Bool (<= {sum} {}))",
                    smt_real(f.epsilon)
                );
                next
            });
            let call = if f.paths[alt.path].arity == 0 {
                format!("path_{}", alt.path)
            } else {
                let args: Vec<String> = (0..f.paths[alt.path].arity).map(&name).collect();
                format!("(path_{} {})", alt.path, args.join(" "))
            };
            let mut out = String::new();
            alt.output.write_smt(&mut out, &name);
            alts.push(format!("(and {call} {out} within_{wid})"));
        }
        match alts.len() {
            0 => asserts.push_str("(assert false)\n"),
            1 => {
                let _ = writeln!(asserts, "(assert {})", alts[0]);
            }
            _ => {
                let _ = writeln!(asserts, "(assert (or {}))", alts.join(" "));
            }
        }
    }
    s.push_str(&defs);
    s.push_str(&asserts);
    s.push_str("(check-sat)\n");
    if f.shift_count > 0 {
        let names: Vec<String> = (0..f.shift_count).map(|j| ShiftVar(j).name()).collect();
        let _ = writeln!(s, "(get-value ({}))", names.join(" "));
    }
    s
}

fn cost_argument(c: &CostTerm, name: &dyn Fn(usize) -> String) -> String {
    let shift = c.shift.name();
    let c1 = exact_rational(c.c1).expect("finite center");
    if let Some(k) = c.c2.as_const() {
        let c2 = match k {
            Scalarish::Real(x) => exact_rational(x).expect("finite center"),
            Scalarish::Int(i) => BigRational::from_integer(i.into()),
            Scalarish::Bool(_) => BigRational::zero(),
        };
        let d = c1 - c2;
        if d.is_zero() {
            return shift;
        }
        return format!("(+ {shift} {})", smt_rational(&d));
    }
    format!(
        "(- (+ {shift} {}) {})",
        smt_rational(&c1),
        c.c2.to_smt(name)
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::{t_real, t_sample};

    #[test]
    fn cost_of_simple_coupling() {
        let entry = TraceEntry {
            sample: 1.8,
            center: 1.0,
            width: 1.0,
        };
        let (eq, cost) = couple_sample(0, 0, &entry, &t_real(2.0), 1.0).unwrap();
        assert_eq!(eq.sample, 1.8);
        for s in [-3.0, 0.0, 1.0, 2.5] {
            let shift = vec![exact_rational(s).unwrap()];
            let got = cost.eval(&shift, &[]).unwrap();
            assert_eq!(got, exact_rational((s - 1.0f64).abs()).unwrap());
        }
    }

    #[test]
    fn width_mismatch_is_an_error() {
        let entry = TraceEntry {
            sample: 0.0,
            center: 0.0,
            width: 1.0,
        };
        assert_eq!(
            couple_sample(0, 0, &entry, &t_sample(0), 2.0).unwrap_err(),
            CouplingError::WidthMismatch {
                first: 1.0,
                second: 2.0
            }
        );
    }
}
