//! Runtime values, numeric backends and sample provenance.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::dsl::{BinaryOp, Literal, Type, UnaryOp};

/// Numeric backend used for real-valued arithmetic.
///
/// `f64` drives sampling runs; `BigRational` gives exact replay.
pub trait Scalar: Clone + fmt::Debug + PartialEq + Send + Sync + 'static {
    fn from_f64(x: f64) -> Self;
    fn from_i64(i: i64) -> Self;
    fn to_f64(&self) -> f64;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    /// `None` when the backend cannot divide by zero.
    fn div(&self, o: &Self) -> Option<Self>;
    fn neg(&self) -> Self;
    fn total_cmp(&self, o: &Self) -> Ordering;
    /// Numeric equality (`-0.0 == 0.0`, `NaN != NaN` for floats).
    fn num_eq(&self, o: &Self) -> bool;
    fn num_lt(&self, o: &Self) -> bool;
    fn num_le(&self, o: &Self) -> bool;
    fn is_finite(&self) -> bool;
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn from_i64(i: i64) -> Self {
        i as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Option<Self> {
        Some(self / o)
    }
    fn neg(&self) -> Self {
        -self
    }
    fn total_cmp(&self, o: &Self) -> Ordering {
        f64::total_cmp(self, o)
    }
    fn num_eq(&self, o: &Self) -> bool {
        self == o
    }
    fn num_lt(&self, o: &Self) -> bool {
        self < o
    }
    fn num_le(&self, o: &Self) -> bool {
        self <= o
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl Scalar for BigRational {
    fn from_f64(x: f64) -> Self {
        exact_rational(x).expect("exact replay needs finite reals")
    }
    fn from_i64(i: i64) -> Self {
        BigRational::from_integer(BigInt::from(i))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Option<Self> {
        if o.is_zero() {
            None
        } else {
            Some(self / o)
        }
    }
    fn neg(&self) -> Self {
        -self
    }
    fn total_cmp(&self, o: &Self) -> Ordering {
        self.cmp(o)
    }
    fn num_eq(&self, o: &Self) -> bool {
        self == o
    }
    fn num_lt(&self, o: &Self) -> bool {
        self < o
    }
    fn num_le(&self, o: &Self) -> bool {
        self <= o
    }
    fn is_finite(&self) -> bool {
        true
    }
}

/// Exact rational value of a finite double.
pub fn exact_rational(x: f64) -> Option<BigRational> {
    BigRational::from_float(x)
}

/// Exact decimal rendering of a rational with a power-of-two (or 5) denominator,
/// falling back to `(/ p q)` notation otherwise. Always contains a decimal point.
pub fn rational_to_decimal(r: &BigRational) -> Option<String> {
    let mut den = r.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let mut twos = 0u32;
    let mut fives = 0u32;
    while (&den % &two).is_zero() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if den != BigInt::from(1) {
        return None;
    }
    let digits = twos.max(fives);
    let scale = num_traits::pow(BigInt::from(10), digits as usize);
    let scaled = (r * BigRational::from_integer(scale)).to_integer();
    let neg = scaled.is_negative();
    let s = scaled.abs().to_string();
    let d = digits as usize;
    let (int_part, frac_part) = if s.len() > d {
        (s[..s.len() - d].to_string(), s[s.len() - d..].to_string())
    } else {
        ("0".to_string(), format!("{}{}", "0".repeat(d - s.len()), s))
    };
    let frac = if frac_part.is_empty() { "0".to_string() } else { frac_part };
    Some(format!("{}{}.{}", if neg { "-" } else { "" }, int_part, frac))
}

/// Exact decimal rendering of a finite double, e.g. `2.0` or `0.1000000000000000055511151231257827021181583404541015625`.
pub fn f64_to_decimal(x: f64) -> String {
    let r = exact_rational(x).expect("finite double");
    rational_to_decimal(&r).expect("doubles have dyadic denominators")
}

/// Where a sampled real came from.
///
/// Leaves are Laplace draws identified by their call index within a run.
#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    Const(f64),
    Lap {
        center: Arc<Provenance>,
        width: f64,
        call: usize,
    },
    Unary(UnaryOp, Arc<Provenance>),
    Binary(BinaryOp, Arc<Provenance>, Arc<Provenance>),
}

impl Provenance {
    /// Evaluates the provenance exactly against the run's samples.
    pub fn eval_exact(&self, samples: &[BigRational]) -> Option<BigRational> {
        Some(match self {
            Provenance::Const(c) => exact_rational(*c)?,
            Provenance::Lap { call, .. } => samples.get(*call)?.clone(),
            Provenance::Unary(UnaryOp::Neg, a) => -a.eval_exact(samples)?,
            Provenance::Unary(_, a) => a.eval_exact(samples)?,
            Provenance::Binary(op, a, b) => {
                let (x, y) = (a.eval_exact(samples)?, b.eval_exact(samples)?);
                match op {
                    BinaryOp::Add => x + y,
                    BinaryOp::Sub => x - y,
                    BinaryOp::Mul => x * y,
                    BinaryOp::Div => {
                        if y.is_zero() {
                            return None;
                        }
                        x / y
                    }
                    _ => return None,
                }
            }
        })
    }
}

/// A first-order runtime value. Reals may carry provenance.
#[derive(Clone, Debug)]
pub enum Value<R: Scalar = f64> {
    Unit,
    Bool(bool),
    Int(i64),
    Real(R, Option<Arc<Provenance>>),
    Pair(Box<Value<R>>, Box<Value<R>>),
    List(Vec<Value<R>>),
    Map(BTreeMap<Value<R>, Value<R>>),
    Opt(Option<Box<Value<R>>>),
}

impl<R: Scalar> Value<R> {
    pub fn real(x: R) -> Self {
        Value::Real(x, None)
    }

    pub fn pair(a: Value<R>, b: Value<R>) -> Self {
        Value::Pair(Box::new(a), Box::new(b))
    }

    pub fn from_literal(l: &Literal) -> Self {
        match l {
            Literal::Unit => Value::Unit,
            Literal::Bool(b) => Value::Bool(*b),
            Literal::Int(i) => Value::Int(*i),
            Literal::Real(x) => Value::real(R::from_f64(*x)),
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_real(&self) -> Option<&R> {
        match self {
            Value::Real(x, _) => Some(x),
            _ => None,
        }
    }

    pub fn provenance(&self) -> Option<&Arc<Provenance>> {
        match self {
            Value::Real(_, p) => p.as_ref(),
            _ => None,
        }
    }

    /// True when any real inside carries provenance.
    pub fn has_provenance(&self) -> bool {
        match self {
            Value::Real(_, p) => p.is_some(),
            Value::Pair(a, b) => a.has_provenance() || b.has_provenance(),
            Value::List(xs) => xs.iter().any(Value::has_provenance),
            Value::Map(m) => m.iter().any(|(k, v)| k.has_provenance() || v.has_provenance()),
            Value::Opt(o) => o.as_ref().is_some_and(|v| v.has_provenance()),
            _ => false,
        }
    }

    /// Drops provenance everywhere.
    pub fn strip(&self) -> Value<R> {
        match self {
            Value::Real(x, _) => Value::Real(x.clone(), None),
            Value::Pair(a, b) => Value::pair(a.strip(), b.strip()),
            Value::List(xs) => Value::List(xs.iter().map(Value::strip).collect()),
            Value::Map(m) => Value::Map(m.iter().map(|(k, v)| (k.strip(), v.strip())).collect()),
            Value::Opt(o) => Value::Opt(o.as_ref().map(|v| Box::new(v.strip()))),
            other => other.clone(),
        }
    }

    /// Whether the value inhabits the given type.
    pub fn has_type(&self, ty: &Type) -> bool {
        match (self, ty) {
            (Value::Unit, Type::Unit) | (Value::Bool(_), Type::Bool) => true,
            (Value::Int(_), Type::Int) | (Value::Real(..), Type::Real) => true,
            (Value::Pair(a, b), Type::Pair(ta, tb)) => a.has_type(ta) && b.has_type(tb),
            (Value::List(xs), Type::List(t)) => xs.iter().all(|x| x.has_type(t)),
            (Value::Map(m), Type::Map(tk, tv)) => {
                m.iter().all(|(k, v)| k.has_type(tk) && v.has_type(tv))
            }
            (Value::Opt(o), Type::Option(t)) => o.as_ref().is_none_or(|v| v.has_type(t)),
            _ => false,
        }
    }

    /// Converts between numeric backends, dropping provenance.
    pub fn map_scalar<S: Scalar>(&self, f: &impl Fn(&R) -> S) -> Value<S> {
        match self {
            Value::Unit => Value::Unit,
            Value::Bool(b) => Value::Bool(*b),
            Value::Int(i) => Value::Int(*i),
            Value::Real(x, _) => Value::Real(f(x), None),
            Value::Pair(a, b) => Value::pair(a.map_scalar(f), b.map_scalar(f)),
            Value::List(xs) => Value::List(xs.iter().map(|x| x.map_scalar(f)).collect()),
            Value::Map(m) => Value::Map(
                m.iter()
                    .map(|(k, v)| (k.map_scalar(f), v.map_scalar(f)))
                    .collect(),
            ),
            Value::Opt(o) => Value::Opt(o.as_ref().map(|v| Box::new(v.map_scalar(f)))),
        }
    }

    /// Partial order used by loop cutoffs: numbers by `<=`, lists by prefix,
    /// maps by inclusion, pairs and options componentwise, other values by equality.
    pub fn prefix_le(&self, other: &Value<R>) -> bool {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a <= b,
            (Value::Real(a, _), Value::Real(b, _)) => a.num_le(b),
            (Value::Pair(a1, b1), Value::Pair(a2, b2)) => a1.prefix_le(a2) && b1.prefix_le(b2),
            (Value::List(xs), Value::List(ys)) => {
                xs.len() <= ys.len() && xs.iter().zip(ys).all(|(x, y)| x == y)
            }
            (Value::Map(m1), Value::Map(m2)) => {
                m1.iter().all(|(k, v)| m2.get(k).is_some_and(|w| w == v))
            }
            (Value::Opt(None), Value::Opt(_)) => true,
            (Value::Opt(Some(a)), Value::Opt(Some(b))) => a.prefix_le(b),
            (a, b) => a == b,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Unit => 0,
            Value::Bool(_) => 1,
            Value::Int(_) => 2,
            Value::Real(..) => 3,
            Value::Pair(..) => 4,
            Value::List(_) => 5,
            Value::Map(_) => 6,
            Value::Opt(_) => 7,
        }
    }
}

impl<R: Scalar> PartialEq for Value<R> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<R: Scalar> Eq for Value<R> {}

impl<R: Scalar> PartialOrd for Value<R> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Total order ignoring provenance; reals use IEEE total order.
impl<R: Scalar> Ord for Value<R> {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Bool(a), Value::Bool(b)) => a.cmp(b),
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Real(a, _), Value::Real(b, _)) => a.total_cmp(b),
            (Value::Pair(a1, b1), Value::Pair(a2, b2)) => a1.cmp(a2).then_with(|| b1.cmp(b2)),
            (Value::List(xs), Value::List(ys)) => xs.cmp(ys),
            (Value::Map(m1), Value::Map(m2)) => m1.iter().cmp(m2.iter()),
            (Value::Opt(a), Value::Opt(b)) => a.cmp(b),
            (a, b) => a.rank().cmp(&b.rank()),
        }
    }
}

impl<R: Scalar> fmt::Display for Value<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Unit => write!(f, "()"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(x, _) => write!(f, "{}", x.to_f64()),
            Value::Pair(a, b) => write!(f, "({a}, {b})"),
            Value::List(xs) => {
                write!(f, "[")?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "]")
            }
            Value::Map(m) => {
                write!(f, "{{")?;
                for (i, (k, v)) in m.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{k}: {v}")?;
                }
                write!(f, "}}")
            }
            Value::Opt(None) => write!(f, "nothing"),
            Value::Opt(Some(v)) => write!(f, "just {v}"),
        }
    }
}

impl<R: Scalar> Value<R> {
    /// JSON rendering for reports.
    pub fn to_json(&self) -> serde_json::Value {
        use serde_json::json;
        match self {
            Value::Unit => json!(null),
            Value::Bool(b) => json!(b),
            Value::Int(i) => json!(i),
            Value::Real(x, _) => json!(x.to_f64()),
            Value::Pair(a, b) => json!([a.to_json(), b.to_json()]),
            Value::List(xs) => serde_json::Value::Array(xs.iter().map(Value::to_json).collect()),
            Value::Map(m) => serde_json::Value::Array(
                m.iter().map(|(k, v)| json!([k.to_json(), v.to_json()])).collect(),
            ),
            Value::Opt(None) => json!({ "nothing": null }),
            Value::Opt(Some(v)) => json!({ "just": v.to_json() }),
        }
    }
}

/// Result of applying a scalar operator.
#[derive(Clone, Debug, PartialEq)]
pub enum Scalarish<R> {
    Bool(bool),
    Int(i64),
    Real(R),
}

/// Arithmetic on concrete scalars shared by the interpreter and the
/// symbolic constant folder. Integer overflow wraps.
pub fn apply_unary<R: Scalar>(op: UnaryOp, a: &Scalarish<R>) -> Option<Scalarish<R>> {
    Some(match (op, a) {
        (UnaryOp::Neg, Scalarish::Int(i)) => Scalarish::Int(i.wrapping_neg()),
        (UnaryOp::Neg, Scalarish::Real(x)) => Scalarish::Real(x.neg()),
        (UnaryOp::Not, Scalarish::Bool(b)) => Scalarish::Bool(!b),
        (UnaryOp::IntToReal, Scalarish::Int(i)) => Scalarish::Real(R::from_i64(*i)),
        _ => return None,
    })
}

/// Binary operator on concrete scalars. `Err(())` signals division by zero.
pub fn apply_binary<R: Scalar>(
    op: BinaryOp,
    a: &Scalarish<R>,
    b: &Scalarish<R>,
) -> Result<Option<Scalarish<R>>, DivByZero> {
    use Scalarish::*;
    Ok(Some(match (op, a, b) {
        (BinaryOp::Add, Int(x), Int(y)) => Int(x.wrapping_add(*y)),
        (BinaryOp::Sub, Int(x), Int(y)) => Int(x.wrapping_sub(*y)),
        (BinaryOp::Mul, Int(x), Int(y)) => Int(x.wrapping_mul(*y)),
        (BinaryOp::Div, Int(x), Int(y)) => {
            if *y == 0 {
                return Err(DivByZero);
            }
            Int(x.wrapping_div(*y))
        }
        (BinaryOp::Add, Real(x), Real(y)) => Real(x.add(y)),
        (BinaryOp::Sub, Real(x), Real(y)) => Real(x.sub(y)),
        (BinaryOp::Mul, Real(x), Real(y)) => Real(x.mul(y)),
        (BinaryOp::Div, Real(x), Real(y)) => Real(x.div(y).ok_or(DivByZero)?),
        (BinaryOp::Lt, Int(x), Int(y)) => Bool(x < y),
        (BinaryOp::Le, Int(x), Int(y)) => Bool(x <= y),
        (BinaryOp::Eq, Int(x), Int(y)) => Bool(x == y),
        (BinaryOp::Lt, Real(x), Real(y)) => Bool(x.num_lt(y)),
        (BinaryOp::Le, Real(x), Real(y)) => Bool(x.num_le(y)),
        (BinaryOp::Eq, Real(x), Real(y)) => Bool(x.num_eq(y)),
        (BinaryOp::Eq, Bool(x), Bool(y)) => Bool(x == y),
        (BinaryOp::And, Bool(x), Bool(y)) => Bool(*x && *y),
        (BinaryOp::Or, Bool(x), Bool(y)) => Bool(*x || *y),
        _ => return Ok(None),
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DivByZero;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_rendering_is_exact() {
        assert_eq!(f64_to_decimal(2.0), "2.0");
        assert_eq!(f64_to_decimal(0.5), "0.5");
        assert_eq!(f64_to_decimal(-1.25), "-1.25");
        assert_eq!(
            f64_to_decimal(0.1),
            "0.1000000000000000055511151231257827021181583404541015625"
        );
        let r = exact_rational(0.1).unwrap();
        assert_eq!(rational_to_decimal(&r).unwrap(), f64_to_decimal(0.1));
    }

    #[test]
    fn ordering_ignores_provenance() {
        let p = Arc::new(Provenance::Const(1.0));
        let a: Value = Value::Real(1.0, Some(p));
        let b: Value = Value::Real(1.0, None);
        assert_eq!(a, b);
    }

    #[test]
    fn map_prefix_order_is_inclusion() {
        let mut m1 = BTreeMap::new();
        m1.insert(Value::Int(1), Value::Unit);
        let mut m2 = m1.clone();
        m2.insert(Value::Int(2), Value::Unit);
        let (a, b): (Value, Value) = (Value::Map(m1), Value::Map(m2));
        assert!(a.prefix_le(&b));
        assert!(!b.prefix_le(&a));
    }
}
