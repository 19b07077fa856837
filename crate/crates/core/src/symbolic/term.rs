//! Symbolic scalar terms over sample variables.

use std::fmt;
use std::sync::Arc;

use num_rational::BigRational;
use ordered_float::OrderedFloat;

use crate::dsl::{BinaryOp, UnaryOp};
use crate::value::{apply_binary, apply_unary, f64_to_decimal, DivByZero, Scalar, Scalarish};

pub type TermRef = Arc<Term>;

/// A scalar term. `Sample(j)` is the j-th Laplace draw of the path.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Bool(bool),
    Int(i64),
    Real(OrderedFloat<f64>),
    Sample(usize),
    Unary(UnaryOp, TermRef),
    Binary(BinaryOp, TermRef, TermRef),
    Ite(TermRef, TermRef, TermRef),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sort {
    Bool,
    Int,
    Real,
}

impl Term {
    pub fn sort(&self) -> Sort {
        match self {
            Term::Bool(_) => Sort::Bool,
            Term::Int(_) => Sort::Int,
            Term::Real(_) | Term::Sample(_) => Sort::Real,
            Term::Unary(UnaryOp::Not, _) => Sort::Bool,
            Term::Unary(UnaryOp::IntToReal, _) => Sort::Real,
            Term::Unary(UnaryOp::Neg, a) => a.sort(),
            Term::Binary(op, a, _) if op.is_arithmetic() => a.sort(),
            Term::Binary(..) => Sort::Bool,
            Term::Ite(_, a, _) => a.sort(),
        }
    }

    pub fn as_const(&self) -> Option<Scalarish<f64>> {
        match self {
            Term::Bool(b) => Some(Scalarish::Bool(*b)),
            Term::Int(i) => Some(Scalarish::Int(*i)),
            Term::Real(x) => Some(Scalarish::Real(x.0)),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Term::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn is_const(&self) -> bool {
        self.as_const().is_some()
    }

    /// Largest sample index mentioned, if any.
    pub fn max_sample(&self) -> Option<usize> {
        match self {
            Term::Sample(j) => Some(*j),
            Term::Unary(_, a) => a.max_sample(),
            Term::Binary(_, a, b) => a.max_sample().max(b.max_sample()),
            Term::Ite(c, a, b) => c.max_sample().max(a.max_sample()).max(b.max_sample()),
            _ => None,
        }
    }

    /// True if the term multiplies or divides by a non-constant.
    pub fn is_nonlinear(&self) -> bool {
        match self {
            Term::Binary(BinaryOp::Mul, a, b) => {
                (!a.is_const() && !b.is_const()) || a.is_nonlinear() || b.is_nonlinear()
            }
            Term::Binary(BinaryOp::Div, a, b) => !b.is_const() || a.is_nonlinear(),
            Term::Binary(_, a, b) => a.is_nonlinear() || b.is_nonlinear(),
            Term::Unary(_, a) => a.is_nonlinear(),
            Term::Ite(c, a, b) => c.is_nonlinear() || a.is_nonlinear() || b.is_nonlinear(),
            _ => false,
        }
    }

    /// Evaluates under a sample assignment. `None` on division by zero
    /// or a missing sample.
    pub fn eval<R: Scalar>(&self, samples: &[R]) -> Option<Scalarish<R>> {
        match self {
            Term::Bool(b) => Some(Scalarish::Bool(*b)),
            Term::Int(i) => Some(Scalarish::Int(*i)),
            Term::Real(x) => Some(Scalarish::Real(R::from_f64(x.0))),
            Term::Sample(j) => samples.get(*j).cloned().map(Scalarish::Real),
            Term::Unary(op, a) => apply_unary(*op, &a.eval(samples)?),
            Term::Binary(op, a, b) => {
                apply_binary(*op, &a.eval(samples)?, &b.eval(samples)?).ok()?
            }
            Term::Ite(c, a, b) => match c.eval(samples)? {
                Scalarish::Bool(true) => a.eval(samples),
                Scalarish::Bool(false) => b.eval(samples),
                _ => None,
            },
        }
    }

    /// Boolean evaluation helper.
    pub fn holds<R: Scalar>(&self, samples: &[R]) -> Option<bool> {
        match self.eval(samples)? {
            Scalarish::Bool(b) => Some(b),
            _ => None,
        }
    }

    /// Writes the term in SMT-LIB syntax. Integers are written as reals.
    pub fn write_smt(&self, out: &mut String, name: &dyn Fn(usize) -> String) {
        match self {
            Term::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Term::Int(i) => out.push_str(&smt_real(*i as f64)),
            Term::Real(x) => out.push_str(&smt_real(x.0)),
            Term::Sample(j) => out.push_str(&name(*j)),
            Term::Unary(UnaryOp::IntToReal, a) => a.write_smt(out, name),
            Term::Unary(op, a) => {
                out.push('(');
                out.push_str(match op {
                    UnaryOp::Neg => "-",
                    _ => "not",
                });
                out.push(' ');
                a.write_smt(out, name);
                out.push(')');
            }
            Term::Binary(op, a, b) => {
                out.push('(');
                out.push_str(op.symbol());
                out.push(' ');
                a.write_smt(out, name);
                out.push(' ');
                b.write_smt(out, name);
                out.push(')');
            }
            Term::Ite(c, a, b) => {
                out.push_str("(ite ");
                c.write_smt(out, name);
                out.push(' ');
                a.write_smt(out, name);
                out.push(' ');
                b.write_smt(out, name);
                out.push(')');
            }
        }
    }

    pub fn to_smt(&self, name: &dyn Fn(usize) -> String) -> String {
        let mut s = String::new();
        self.write_smt(&mut s, name);
        s
    }
}

/// SMT-LIB real literal for a finite double, negatives as `(- x)`.
pub fn smt_real(x: f64) -> String {
    if x < 0.0 || (x == 0.0 && x.is_sign_negative()) {
        if x == 0.0 {
            return "0.0".to_string();
        }
        format!("(- {})", f64_to_decimal(-x))
    } else {
        f64_to_decimal(x)
    }
}

/// SMT-LIB literal for an exact rational.
pub fn smt_rational(r: &BigRational) -> String {
    use num_traits::Signed;
    let abs = r.abs();
    let body = match crate::value::rational_to_decimal(&abs) {
        Some(d) => d,
        None => format!("(/ {}.0 {}.0)", abs.numer(), abs.denom()),
    };
    if r.is_negative() {
        format!("(- {body})")
    } else {
        body
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_smt(&|j| format!("s{j}")))
    }
}

fn from_const(s: Scalarish<f64>) -> TermRef {
    Arc::new(match s {
        Scalarish::Bool(b) => Term::Bool(b),
        Scalarish::Int(i) => Term::Int(i),
        Scalarish::Real(x) => Term::Real(OrderedFloat(x)),
    })
}

pub fn t_bool(b: bool) -> TermRef {
    Arc::new(Term::Bool(b))
}

pub fn t_int(i: i64) -> TermRef {
    Arc::new(Term::Int(i))
}

pub fn t_real(x: f64) -> TermRef {
    Arc::new(Term::Real(OrderedFloat(x)))
}

pub fn t_sample(j: usize) -> TermRef {
    Arc::new(Term::Sample(j))
}

/// Unary operator with constant folding.
pub fn t_unary(op: UnaryOp, a: TermRef) -> TermRef {
    if let Some(c) = a.as_const() {
        if let Some(r) = apply_unary(op, &c) {
            return from_const(r);
        }
    }
    if let (UnaryOp::Not, Term::Unary(UnaryOp::Not, inner)) = (op, &*a) {
        return inner.clone();
    }
    Arc::new(Term::Unary(op, a))
}

pub fn t_not(a: TermRef) -> TermRef {
    t_unary(UnaryOp::Not, a)
}

/// Binary operator with constant folding and boolean simplification.
///
/// Folding uses the same `f64` arithmetic as the concrete interpreter.
pub fn t_binary(op: BinaryOp, a: TermRef, b: TermRef) -> Result<TermRef, DivByZero> {
    if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
        if let Some(r) = apply_binary(op, &x, &y)? {
            return Ok(from_const(r));
        }
    }
    match op {
        BinaryOp::And => match (a.as_bool(), b.as_bool()) {
            (Some(false), _) | (_, Some(false)) => return Ok(t_bool(false)),
            (Some(true), _) => return Ok(b),
            (_, Some(true)) => return Ok(a),
            _ if a == b => return Ok(a),
            _ => {}
        },
        BinaryOp::Or => match (a.as_bool(), b.as_bool()) {
            (Some(true), _) | (_, Some(true)) => return Ok(t_bool(true)),
            (Some(false), _) => return Ok(b),
            (_, Some(false)) => return Ok(a),
            _ if a == b => return Ok(a),
            _ => {}
        },
        _ => {}
    }
    Ok(Arc::new(Term::Binary(op, a, b)))
}

pub fn t_and(a: TermRef, b: TermRef) -> TermRef {
    t_binary(BinaryOp::And, a, b).expect("boolean ops cannot divide")
}

pub fn t_or(a: TermRef, b: TermRef) -> TermRef {
    t_binary(BinaryOp::Or, a, b).expect("boolean ops cannot divide")
}

pub fn t_conj(items: impl IntoIterator<Item = TermRef>) -> TermRef {
    items.into_iter().fold(t_bool(true), t_and)
}

pub fn t_ite(c: TermRef, a: TermRef, b: TermRef) -> TermRef {
    match c.as_bool() {
        Some(true) => return a,
        Some(false) => return b,
        None => {}
    }
    if a == b {
        return a;
    }
    if let (Some(x), Some(y)) = (a.as_bool(), b.as_bool()) {
        return if x && !y { c } else { t_not(c) };
    }
    Arc::new(Term::Ite(c, a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folding_matches_f64() {
        let t = t_binary(BinaryOp::Add, t_real(0.1), t_real(0.2)).unwrap();
        assert_eq!(*t, Term::Real(OrderedFloat(0.1 + 0.2)));
    }

    #[test]
    fn and_simplifies() {
        let s = t_binary(BinaryOp::Lt, t_sample(0), t_real(1.0)).unwrap();
        assert_eq!(t_and(t_bool(true), s.clone()), s);
        assert_eq!(*t_and(t_bool(false), s), Term::Bool(false));
    }

    #[test]
    fn smt_rendering() {
        let t = t_binary(
            BinaryOp::Lt,
            t_sample(1),
            t_binary(BinaryOp::Add, t_sample(0), t_int(-2)).unwrap(),
        )
        .unwrap();
        assert_eq!(t.to_smt(&|j| format!("x{j}")), "(< x1 (+ x0 (- 2.0)))");
    }
}
