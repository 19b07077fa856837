//! Symbolic values and state merging.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use super::term::{t_and, t_bool, t_int, t_ite, t_not, t_or, t_real, Term, TermRef};
use crate::dsl::Literal;
use crate::value::{apply_binary, apply_unary, Scalarish, Value};

/// A value whose scalars are terms.
///
/// `Union` holds guarded alternatives of incompatible shape; within the
/// enclosing path the guards are mutually exclusive and exhaustive.
#[derive(Clone, Debug, PartialEq)]
pub enum SymValue {
    Unit,
    Scalar(TermRef),
    Pair(Box<SymValue>, Box<SymValue>),
    List(Vec<SymValue>),
    Map(BTreeMap<Value, SymValue>),
    Opt(Option<Box<SymValue>>),
    Union(Vec<(TermRef, SymValue)>),
}

impl SymValue {
    pub fn pair(a: SymValue, b: SymValue) -> SymValue {
        SymValue::Pair(Box::new(a), Box::new(b))
    }

    pub fn from_literal(l: &Literal) -> SymValue {
        match l {
            Literal::Unit => SymValue::Unit,
            Literal::Bool(b) => SymValue::Scalar(t_bool(*b)),
            Literal::Int(i) => SymValue::Scalar(t_int(*i)),
            Literal::Real(x) => SymValue::Scalar(t_real(*x)),
        }
    }

    /// Lifts a concrete value.
    pub fn from_value(v: &Value) -> SymValue {
        match v {
            Value::Unit => SymValue::Unit,
            Value::Bool(b) => SymValue::Scalar(t_bool(*b)),
            Value::Int(i) => SymValue::Scalar(t_int(*i)),
            Value::Real(x, _) => SymValue::Scalar(t_real(*x)),
            Value::Pair(a, b) => SymValue::pair(SymValue::from_value(a), SymValue::from_value(b)),
            Value::List(xs) => SymValue::List(xs.iter().map(SymValue::from_value).collect()),
            Value::Map(m) => SymValue::Map(
                m.iter()
                    .map(|(k, v)| (k.strip(), SymValue::from_value(v)))
                    .collect(),
            ),
            Value::Opt(o) => SymValue::Opt(o.as_ref().map(|v| Box::new(SymValue::from_value(v)))),
        }
    }

    pub fn as_term(&self) -> Option<&TermRef> {
        match self {
            SymValue::Scalar(t) => Some(t),
            _ => None,
        }
    }

    /// The concrete value, when no scalar is symbolic.
    pub fn to_concrete(&self) -> Option<Value> {
        Some(match self {
            SymValue::Unit => Value::Unit,
            SymValue::Scalar(t) => match &**t {
                Term::Bool(b) => Value::Bool(*b),
                Term::Int(i) => Value::Int(*i),
                Term::Real(x) => Value::Real(x.0, None),
                _ => return None,
            },
            SymValue::Pair(a, b) => Value::pair(a.to_concrete()?, b.to_concrete()?),
            SymValue::List(xs) => {
                Value::List(xs.iter().map(SymValue::to_concrete).collect::<Option<_>>()?)
            }
            SymValue::Map(m) => Value::Map(
                m.iter()
                    .map(|(k, v)| Some((k.clone(), v.to_concrete()?)))
                    .collect::<Option<_>>()?,
            ),
            SymValue::Opt(o) => match o {
                None => Value::Opt(None),
                Some(v) => Value::Opt(Some(Box::new(v.to_concrete()?))),
            },
            SymValue::Union(_) => return None,
        })
    }

    /// Concrete values the symbolic value may take, when finitely enumerable
    /// from unions, `ite` and operators over constants. Branch conditions are
    /// ignored, so the result may over-approximate. Sorted and deduplicated.
    pub fn possible_values(&self, limit: usize) -> Option<Vec<Value>> {
        Enumerator { limit, memo: HashMap::new() }.value(self)
    }

    /// Whether any scalar mentions a sample.
    pub fn is_symbolic(&self) -> bool {
        self.to_concrete().is_none()
    }
}

struct Enumerator {
    limit: usize,
    memo: HashMap<*const Term, Option<Vec<Value>>>,
}

impl Enumerator {
    fn finish(&self, mut out: Vec<Value>) -> Option<Vec<Value>> {
        out.sort();
        out.dedup();
        (out.len() <= self.limit).then_some(out)
    }

    fn product(&self, parts: Vec<Vec<Value>>, build: impl Fn(Vec<Value>) -> Value) -> Option<Vec<Value>> {
        let mut acc: Vec<Vec<Value>> = vec![Vec::new()];
        for part in parts {
            if acc.len().saturating_mul(part.len()) > self.limit {
                return None;
            }
            acc = acc
                .iter()
                .flat_map(|prefix| {
                    part.iter().map(move |v| {
                        let mut p = prefix.clone();
                        p.push(v.clone());
                        p
                    })
                })
                .collect();
        }
        self.finish(acc.into_iter().map(build).collect())
    }

    fn value(&mut self, v: &SymValue) -> Option<Vec<Value>> {
        match v {
            SymValue::Unit => Some(vec![Value::Unit]),
            SymValue::Scalar(t) => self.term(t),
            SymValue::Union(ms) => {
                let mut all = Vec::new();
                for (_, m) in ms {
                    all.extend(self.value(m)?);
                }
                self.finish(all)
            }
            SymValue::Pair(a, b) => {
                let parts = vec![self.value(a)?, self.value(b)?];
                self.product(parts, |mut p| {
                    let b = p.pop().expect("two parts");
                    Value::pair(p.pop().expect("two parts"), b)
                })
            }
            SymValue::List(xs) => {
                let parts = xs.iter().map(|x| self.value(x)).collect::<Option<Vec<_>>>()?;
                self.product(parts, Value::List)
            }
            SymValue::Map(m) => {
                let keys: Vec<Value> = m.keys().cloned().collect();
                let parts = m.values().map(|x| self.value(x)).collect::<Option<Vec<_>>>()?;
                self.product(parts, |vs| Value::Map(keys.iter().cloned().zip(vs).collect()))
            }
            SymValue::Opt(None) => Some(vec![Value::Opt(None)]),
            SymValue::Opt(Some(x)) => {
                let xs = self.value(x)?;
                Some(xs.into_iter().map(|v| Value::Opt(Some(Box::new(v)))).collect())
            }
        }
    }

    fn term(&mut self, t: &TermRef) -> Option<Vec<Value>> {
        let key = Arc::as_ptr(t);
        if let Some(hit) = self.memo.get(&key) {
            return hit.clone();
        }
        let out = self.term_uncached(t);
        self.memo.insert(key, out.clone());
        out
    }

    fn term_uncached(&mut self, t: &TermRef) -> Option<Vec<Value>> {
        match &**t {
            Term::Ite(_, a, b) => {
                let mut out = self.term(a)?;
                out.extend(self.term(b)?);
                self.finish(out)
            }
            Term::Unary(op, a) => {
                let xs = self.term(a)?;
                let out = xs
                    .iter()
                    .map(|x| apply_unary(*op, &to_scalar(x)?).map(from_scalar))
                    .collect::<Option<Vec<_>>>()?;
                self.finish(out)
            }
            Term::Binary(op, a, b) => {
                let (xs, ys) = (self.term(a)?, self.term(b)?);
                if xs.len().saturating_mul(ys.len()) > self.limit {
                    return None;
                }
                let mut out = Vec::new();
                for x in &xs {
                    for y in &ys {
                        let r = apply_binary(*op, &to_scalar(x)?, &to_scalar(y)?).ok()??;
                        out.push(from_scalar(r));
                    }
                }
                self.finish(out)
            }
            _ => SymValue::Scalar(t.clone()).to_concrete().map(|v| vec![v]),
        }
    }
}

fn to_scalar(v: &Value) -> Option<Scalarish<f64>> {
    match v {
        Value::Bool(b) => Some(Scalarish::Bool(*b)),
        Value::Int(i) => Some(Scalarish::Int(*i)),
        Value::Real(x, _) => Some(Scalarish::Real(*x)),
        _ => None,
    }
}

fn from_scalar(s: Scalarish<f64>) -> Value {
    match s {
        Scalarish::Bool(b) => Value::Bool(b),
        Scalarish::Int(i) => Value::Int(i),
        Scalarish::Real(x) => Value::real(x),
    }
}

/// Merges two values of the same shape under `c`; `None` if shapes differ.
pub fn try_merge(c: &TermRef, a: &SymValue, b: &SymValue) -> Option<SymValue> {
    use SymValue as S;
    Some(match (a, b) {
        (S::Unit, S::Unit) => S::Unit,
        (S::Scalar(x), S::Scalar(y)) => {
            if x.sort() != y.sort() {
                return None;
            }
            S::Scalar(t_ite(c.clone(), x.clone(), y.clone()))
        }
        (S::Pair(a1, b1), S::Pair(a2, b2)) => S::pair(try_merge(c, a1, a2)?, try_merge(c, b1, b2)?),
        (S::List(xs), S::List(ys)) if xs.len() == ys.len() => S::List(
            xs.iter()
                .zip(ys)
                .map(|(x, y)| try_merge(c, x, y))
                .collect::<Option<_>>()?,
        ),
        (S::Map(m1), S::Map(m2)) if m1.len() == m2.len() && m1.keys().eq(m2.keys()) => S::Map(
            m1.iter()
                .zip(m2.values())
                .map(|((k, x), y)| Some((k.clone(), try_merge(c, x, y)?)))
                .collect::<Option<_>>()?,
        ),
        (S::Opt(None), S::Opt(None)) => S::Opt(None),
        (S::Opt(Some(x)), S::Opt(Some(y))) => S::Opt(Some(Box::new(try_merge(c, x, y)?))),
        _ => return None,
    })
}

/// `if c then a else b`, merging structurally when possible.
pub fn merge_values(c: &TermRef, a: SymValue, b: SymValue) -> SymValue {
    if let Some(k) = c.as_bool() {
        return if k { a } else { b };
    }
    if let Some(m) = try_merge(c, &a, &b) {
        return m;
    }
    union_of(vec![(c.clone(), a), (t_not(c.clone()), b)])
}

/// Normalizes guarded alternatives: flattens nested unions, drops
/// infeasible guards and merges same-shaped members.
pub fn union_of(members: Vec<(TermRef, SymValue)>) -> SymValue {
    let mut flat: Vec<(TermRef, SymValue)> = Vec::new();
    for (g, v) in members {
        if g.as_bool() == Some(false) {
            continue;
        }
        match v {
            SymValue::Union(inner) => {
                for (h, w) in inner {
                    let gh = t_and(g.clone(), h);
                    if gh.as_bool() != Some(false) {
                        flat.push((gh, w));
                    }
                }
            }
            v => flat.push((g, v)),
        }
    }
    let mut acc: Vec<(TermRef, SymValue)> = Vec::new();
    'outer: for (g, v) in flat {
        for slot in acc.iter_mut() {
            if let Some(m) = try_merge(&slot.0, &slot.1, &v) {
                slot.0 = t_or(slot.0.clone(), g);
                slot.1 = m;
                continue 'outer;
            }
        }
        acc.push((g, v));
    }
    if acc.len() == 1 {
        return acc.pop().expect("one member").1;
    }
    SymValue::Union(acc)
}

impl fmt::Display for SymValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymValue::Unit => write!(f, "()"),
            SymValue::Scalar(t) => write!(f, "{t}"),
            SymValue::Pair(a, b) => write!(f, "({a}, {b})"),
            SymValue::List(xs) => {
                write!(f, "[")?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "]")
            }
            SymValue::Map(m) => {
                write!(f, "{{")?;
                for (i, (k, v)) in m.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{k}: {v}")?;
                }
                write!(f, "}}")
            }
            SymValue::Opt(None) => write!(f, "nothing"),
            SymValue::Opt(Some(v)) => write!(f, "just {v}"),
            SymValue::Union(ms) => {
                write!(f, "union[")?;
                for (i, (g, v)) in ms.iter().enumerate() {
                    if i > 0 {
                        write!(f, " | ")?;
                    }
                    write!(f, "{g} => {v}")?;
                }
                write!(f, "]")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::BinaryOp;
    use crate::symbolic::term::{t_binary, t_sample};

    #[test]
    fn lists_of_different_length_become_union() {
        let c = t_binary(BinaryOp::Lt, t_sample(0), t_real(0.0)).unwrap();
        let a = SymValue::List(vec![SymValue::Unit]);
        let b = SymValue::List(vec![]);
        match merge_values(&c, a, b) {
            SymValue::Union(ms) => assert_eq!(ms.len(), 2),
            other => panic!("expected a union, got {other}"),
        }
    }

    #[test]
    fn same_shape_merges_with_ite() {
        let c = t_binary(BinaryOp::Lt, t_sample(0), t_real(0.0)).unwrap();
        let v = merge_values(
            &c,
            SymValue::Scalar(t_int(1)),
            SymValue::Scalar(t_int(2)),
        );
        assert_eq!(v.possible_values(8).unwrap(), vec![Value::Int(1), Value::Int(2)]);
    }
}
