//! Grouping instrumented runs by output and matching buckets to paths.
//!
//! Runs whose outputs contain no sampled reals are grouped by exact value.
//! Outputs with sampled reals are grouped by the shape of their provenance,
//! with Laplace calls renumbered in order of first use.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use ordered_float::OrderedFloat;
use serde::Serialize;
use thiserror::Error;

use crate::dsl::{BinaryOp, UnaryOp};
use crate::interp::RunOutcome;
use crate::symbolic::{PathResult, SymValue, Term};
use crate::value::{Provenance, Value};

/// Canonical, hashable form of an output.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum KeyValue {
    Unit,
    Bool(bool),
    Int(i64),
    Real(OrderedFloat<f64>),
    Sampled(Shape),
    Pair(Box<KeyValue>, Box<KeyValue>),
    List(Vec<KeyValue>),
    Map(Vec<(KeyValue, KeyValue)>),
    Opt(Option<Box<KeyValue>>),
}

/// Provenance with call indices renumbered.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Shape {
    Const(OrderedFloat<f64>),
    Lap {
        center: Box<Shape>,
        width: OrderedFloat<f64>,
        id: usize,
    },
    Unary(UnaryOp, Box<Shape>),
    Binary(BinaryOp, Box<Shape>, Box<Shape>),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum BucketKey {
    ExactValue(KeyValue),
    ProvenanceShape(KeyValue),
}

impl fmt::Display for BucketKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BucketKey::ExactValue(k) => write!(f, "{k}"),
            BucketKey::ProvenanceShape(k) => write!(f, "shape {k}"),
        }
    }
}

impl fmt::Display for KeyValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeyValue::Unit => write!(f, "()"),
            KeyValue::Bool(b) => write!(f, "{b}"),
            KeyValue::Int(i) => write!(f, "{i}"),
            KeyValue::Real(x) => write!(f, "{}", x.0),
            KeyValue::Sampled(s) => write!(f, "{s}"),
            KeyValue::Pair(a, b) => write!(f, "({a}, {b})"),
            KeyValue::List(xs) => {
                write!(f, "[")?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "]")
            }
            KeyValue::Map(m) => {
                write!(f, "{{")?;
                for (i, (k, v)) in m.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{k}: {v}")?;
                }
                write!(f, "}}")
            }
            KeyValue::Opt(None) => write!(f, "nothing"),
            KeyValue::Opt(Some(v)) => write!(f, "just {v}"),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Const(c) => write!(f, "{}", c.0),
            Shape::Lap { center, width, id } => write!(f, "lap#{id}({center}, {})", width.0),
            Shape::Unary(op, a) => write!(f, "({} {a})", op.symbol()),
            Shape::Binary(op, a, b) => write!(f, "({} {a} {b})", op.symbol()),
        }
    }
}

struct Renumber(BTreeMap<usize, usize>);

impl Renumber {
    fn id(&mut self, call: usize) -> usize {
        let next = self.0.len();
        *self.0.entry(call).or_insert(next)
    }

    fn shape(&mut self, p: &Provenance) -> Shape {
        match p {
            Provenance::Const(c) => Shape::Const(OrderedFloat(*c)),
            Provenance::Lap {
                center,
                width,
                call,
            } => {
                let center = Box::new(self.shape(center));
                Shape::Lap {
                    center,
                    width: OrderedFloat(*width),
                    id: self.id(*call),
                }
            }
            Provenance::Unary(op, a) => Shape::Unary(*op, Box::new(self.shape(a))),
            Provenance::Binary(op, a, b) => {
                let a = self.shape(a);
                Shape::Binary(*op, Box::new(a), Box::new(self.shape(b)))
            }
        }
    }

    fn key(&mut self, v: &Value) -> KeyValue {
        match v {
            Value::Unit => KeyValue::Unit,
            Value::Bool(b) => KeyValue::Bool(*b),
            Value::Int(i) => KeyValue::Int(*i),
            Value::Real(x, None) => KeyValue::Real(OrderedFloat(*x)),
            Value::Real(_, Some(p)) => KeyValue::Sampled(self.shape(p)),
            Value::Pair(a, b) => {
                let a = self.key(a);
                KeyValue::Pair(Box::new(a), Box::new(self.key(b)))
            }
            Value::List(xs) => KeyValue::List(xs.iter().map(|x| self.key(x)).collect()),
            Value::Map(m) => KeyValue::Map(
                m.iter()
                    .map(|(k, v)| {
                        let k = self.key(k);
                        (k, self.key(v))
                    })
                    .collect(),
            ),
            Value::Opt(o) => KeyValue::Opt(o.as_ref().map(|v| Box::new(self.key(v)))),
        }
    }
}

/// The bucket key of an output value.
pub fn bucket_key(output: &Value) -> BucketKey {
    let key = Renumber(BTreeMap::new()).key(output);
    if output.has_provenance() {
        BucketKey::ProvenanceShape(key)
    } else {
        BucketKey::ExactValue(key)
    }
}

/// Runs sharing one bucket key.
#[derive(Clone, Debug)]
pub struct Bucket {
    pub key: BucketKey,
    pub runs: Vec<RunOutcome>,
}

/// Groups completed runs by bucket key, ordered by key. Aborted runs are dropped.
pub fn bucket_runs(runs: &[RunOutcome]) -> Vec<Bucket> {
    let mut map: BTreeMap<BucketKey, Vec<RunOutcome>> = BTreeMap::new();
    for r in runs {
        if let Some(out) = &r.output {
            map.entry(bucket_key(out)).or_default().push(r.clone());
        }
    }
    map.into_iter()
        .map(|(key, runs)| Bucket { key, runs })
        .collect()
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum MatchError {
    #[error("no symbolic path can produce bucket {0}")]
    NoMatchingPath(String),
}

fn term_samples(t: &Term, out: &mut BTreeSet<usize>) {
    match t {
        Term::Sample(j) => {
            out.insert(*j);
        }
        Term::Unary(_, a) => term_samples(a, out),
        Term::Binary(_, a, b) => {
            term_samples(a, out);
            term_samples(b, out);
        }
        Term::Ite(c, a, b) => {
            term_samples(c, out);
            term_samples(a, out);
            term_samples(b, out);
        }
        _ => {}
    }
}

fn prov_calls(p: &Provenance, out: &mut BTreeSet<usize>) {
    match p {
        Provenance::Const(_) => {}
        Provenance::Lap { call, .. } => {
            out.insert(*call);
        }
        Provenance::Unary(_, a) => prov_calls(a, out),
        Provenance::Binary(_, a, b) => {
            prov_calls(a, out);
            prov_calls(b, out);
        }
    }
}

/// Cheap structural test: can this symbolic output equal the concrete one?
///
/// Sampled reals must mention the same Laplace calls as the path term, so
/// call `j` of the run lines up with sample `j` of the path. Anything
/// involving `ite` or unions is kept for the solver to decide.
pub fn could_match(sym: &SymValue, val: &Value) -> bool {
    match (sym, val) {
        (SymValue::Union(ms), v) => ms.iter().any(|(_, m)| could_match(m, v)),
        (SymValue::Unit, Value::Unit) => true,
        (SymValue::Scalar(t), v) => scalar_could_match(t, v),
        (SymValue::Pair(a, b), Value::Pair(x, y)) => could_match(a, x) && could_match(b, y),
        (SymValue::List(xs), Value::List(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| could_match(x, y))
        }
        (SymValue::Map(m1), Value::Map(m2)) => {
            m1.len() == m2.len()
                && m1.iter().zip(m2).all(|((k1, a), (k2, b))| k1 == k2 && could_match(a, b))
        }
        (SymValue::Opt(None), Value::Opt(None)) => true,
        (SymValue::Opt(Some(a)), Value::Opt(Some(b))) => could_match(a, b),
        _ => false,
    }
}

fn has_ite(t: &Term) -> bool {
    match t {
        Term::Ite(..) => true,
        Term::Unary(_, a) => has_ite(a),
        Term::Binary(_, a, b) => has_ite(a) || has_ite(b),
        _ => false,
    }
}

fn scalar_could_match(t: &Term, v: &Value) -> bool {
    if has_ite(t) {
        return true;
    }
    match (t, v) {
        (Term::Bool(a), Value::Bool(b)) => a == b,
        (Term::Int(a), Value::Int(b)) => a == b,
        (Term::Real(a), Value::Real(b, None)) => a.0 == *b,
        // Decided exactly once the run's samples are known.
        (Term::Real(_), Value::Real(_, Some(_))) => true,
        (t, Value::Real(_, Some(p))) => {
            let mut a = BTreeSet::new();
            let mut b = BTreeSet::new();
            term_samples(t, &mut a);
            prov_calls(p, &mut b);
            a == b
        }
        (t, Value::Real(_, None)) => t.sort() == crate::symbolic::Sort::Real,
        (t, Value::Int(_)) => t.sort() == crate::symbolic::Sort::Int,
        (t, Value::Bool(_)) => t.sort() == crate::symbolic::Sort::Bool,
        _ => false,
    }
}

/// Paths that may produce some run of the bucket: same number of samples,
/// same widths, and a structurally compatible output.
pub fn match_bucket_to_paths(bucket: &Bucket, paths: &[PathResult]) -> Result<Vec<usize>, MatchError> {
    let mut matched = BTreeSet::new();
    for run in &bucket.runs {
        let Some(out) = &run.output else { continue };
        for (i, p) in paths.iter().enumerate() {
            if matched.contains(&i) {
                continue;
            }
            if path_compatible(p, run) && p.output.as_ref().is_some_and(|s| could_match(s, out)) {
                matched.insert(i);
            }
        }
    }
    if matched.is_empty() {
        return Err(MatchError::NoMatchingPath(bucket.key.to_string()));
    }
    Ok(matched.into_iter().collect())
}

/// Same arity and widths as the run's trace.
pub fn path_compatible(p: &PathResult, run: &RunOutcome) -> bool {
    p.samples.len() == run.trace.len()
        && p.samples
            .iter()
            .zip(&run.trace)
            .all(|(s, t)| s.width == t.width)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn lap(call: usize, center: f64) -> Arc<Provenance> {
        Arc::new(Provenance::Lap {
            center: Arc::new(Provenance::Const(center)),
            width: 1.0,
            call,
        })
    }

    #[test]
    fn renumbering_in_first_use_order() {
        let a: Value = Value::List(vec![Value::Real(0.3, Some(lap(4, 1.0))), Value::Real(0.1, Some(lap(2, 2.0)))]);
        let b: Value = Value::List(vec![Value::Real(9.0, Some(lap(7, 1.0))), Value::Real(3.0, Some(lap(1, 2.0)))]);
        assert_eq!(bucket_key(&a), bucket_key(&b));
    }

    #[test]
    fn exact_values_bucket_by_value() {
        assert_ne!(bucket_key(&Value::<f64>::Int(1)), bucket_key(&Value::Int(2)));
        assert!(matches!(bucket_key(&Value::<f64>::Int(1)), BucketKey::ExactValue(_)));
    }
}
