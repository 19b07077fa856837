//! Typed expression language for randomized programs.
//!
//! Programs are immutable, reference-counted trees. Every node is built
//! through a checked constructor, so a value of type [`Expr`] is always
//! well typed. Pure expressions denote first-order values; expressions of
//! type `Dist(t)` denote computations that may draw Laplace samples.

use std::fmt;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;

use thiserror::Error;

/// Static types.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Type {
    Unit,
    Bool,
    Int,
    Real,
    Pair(Box<Type>, Box<Type>),
    List(Box<Type>),
    Map(Box<Type>, Box<Type>),
    Option(Box<Type>),
    Dist(Box<Type>),
}

impl Type {
    pub fn pair(a: Type, b: Type) -> Type {
        Type::Pair(Box::new(a), Box::new(b))
    }

    pub fn list(t: Type) -> Type {
        Type::List(Box::new(t))
    }

    pub fn map(k: Type, v: Type) -> Type {
        Type::Map(Box::new(k), Box::new(v))
    }

    pub fn option(t: Type) -> Type {
        Type::Option(Box::new(t))
    }

    pub fn dist(t: Type) -> Type {
        Type::Dist(Box::new(t))
    }

    /// True for first-order value types (no `Dist` anywhere inside).
    pub fn is_value(&self) -> bool {
        match self {
            Type::Unit | Type::Bool | Type::Int | Type::Real => true,
            Type::Pair(a, b) | Type::Map(a, b) => a.is_value() && b.is_value(),
            Type::List(t) | Type::Option(t) => t.is_value(),
            Type::Dist(_) => false,
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Type::Int | Type::Real)
    }

    /// The payload type of a `Dist`, if this is one.
    pub fn dist_payload(&self) -> Option<&Type> {
        match self {
            Type::Dist(t) => Some(t),
            _ => None,
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Unit => write!(f, "Unit"),
            Type::Bool => write!(f, "Bool"),
            Type::Int => write!(f, "Int"),
            Type::Real => write!(f, "Real"),
            Type::Pair(a, b) => write!(f, "({a}, {b})"),
            Type::List(t) => write!(f, "[{t}]"),
            Type::Map(k, v) => write!(f, "Map {k} {v}"),
            Type::Option(t) => write!(f, "Option {t}"),
            Type::Dist(t) => write!(f, "Dist {t}"),
        }
    }
}

/// Errors raised while constructing or checking expressions.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum TypeError {
    #[error("type mismatch in {node}: expected {expected}, found {found}")]
    TypeMismatch {
        node: &'static str,
        expected: String,
        found: Type,
    },
    #[error("laplace width must be a positive finite constant, got {0}")]
    InvalidWidth(f64),
    #[error("unbound variable {0}")]
    UnboundVariable(Var),
    #[error("variable {var} used at type {used} but bound at {bound}")]
    VariableType { var: Var, used: Type, bound: Type },
}

fn mismatch(node: &'static str, expected: impl Into<String>, found: &Type) -> TypeError {
    TypeError::TypeMismatch {
        node,
        expected: expected.into(),
        found: found.clone(),
    }
}

static NEXT_VAR: AtomicU32 = AtomicU32::new(0);

/// A typed variable. Identity is the numeric id; the hint only affects printing.
#[derive(Clone, Debug)]
pub struct Var {
    id: u32,
    ty: Type,
    hint: &'static str,
}

impl Var {
    /// Allocates a fresh variable of the given value type.
    pub fn fresh(hint: &'static str, ty: Type) -> Var {
        Var {
            id: NEXT_VAR.fetch_add(1, Ordering::Relaxed),
            ty,
            hint,
        }
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn ty(&self) -> &Type {
        &self.ty
    }

    pub fn hint(&self) -> &'static str {
        self.hint
    }
}

impl PartialEq for Var {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for Var {}

impl std::hash::Hash for Var {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.id.hash(state)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.hint, self.id)
    }
}

/// Scalar literals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Literal {
    Unit,
    Bool(bool),
    Int(i64),
    Real(f64),
}

impl Literal {
    pub fn ty(&self) -> Type {
        match self {
            Literal::Unit => Type::Unit,
            Literal::Bool(_) => Type::Bool,
            Literal::Int(_) => Type::Int,
            Literal::Real(_) => Type::Real,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub enum UnaryOp {
    Neg,
    Not,
    IntToReal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Le,
    Eq,
    And,
    Or,
}

impl UnaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Not => "not",
            UnaryOp::IntToReal => "to_real",
        }
    }
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Eq => "=",
            BinaryOp::And => "and",
            BinaryOp::Or => "or",
        }
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(
            self,
            BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div
        )
    }
}

/// Expression node shapes.
#[derive(Debug)]
pub enum ExprKind {
    Lit(Literal),
    Var(Var),
    Unary(UnaryOp, Expr),
    Binary(BinaryOp, Expr, Expr),
    If {
        cond: Expr,
        then_branch: Expr,
        else_branch: Expr,
    },
    Let {
        var: Var,
        value: Expr,
        body: Expr,
    },
    Pair(Expr, Expr),
    Fst(Expr),
    Snd(Expr),
    Nil,
    Cons(Expr, Expr),
    Snoc(Expr, Expr),
    /// `Uncons(xs)` has type `Option (head, tail)`.
    Uncons(Expr),
    IsNil(Expr),
    Length(Expr),
    MapEmpty,
    MapInsert {
        map: Expr,
        key: Expr,
        value: Expr,
    },
    MapLookup {
        map: Expr,
        key: Expr,
    },
    MapSize(Expr),
    Nothing,
    Just(Expr),
    CaseOption {
        scrutinee: Expr,
        on_nothing: Expr,
        var: Var,
        on_just: Expr,
    },
    Laplace {
        center: Expr,
        width: f64,
    },
    Return(Expr),
    Bind {
        dist: Expr,
        var: Var,
        body: Expr,
    },
    Assert(Expr),
    Sequence(Expr, Expr),
    Abort(String),
    Loop {
        init: Expr,
        var: Var,
        cond: Expr,
        body: Expr,
        metric: Option<Expr>,
    },
}

#[derive(Debug)]
struct Node {
    kind: ExprKind,
    ty: Type,
}

/// A well-typed expression.
#[derive(Clone, Debug)]
pub struct Expr(Arc<Node>);

impl Expr {
    pub fn kind(&self) -> &ExprKind {
        &self.0.kind
    }

    pub fn ty(&self) -> &Type {
        &self.0.ty
    }

    /// Pointer identity.
    pub fn same(&self, other: &Expr) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    fn mk(kind: ExprKind, ty: Type) -> Expr {
        Expr(Arc::new(Node { kind, ty }))
    }

    /// Checks one node against the already-typed children and builds it.
    pub fn new(kind: ExprKind) -> Result<Expr, TypeError> {
        let ty = node_type(&kind)?;
        Ok(Expr::mk(kind, ty))
    }

    // Leaves

    pub fn lit(l: Literal) -> Expr {
        let ty = l.ty();
        Expr::mk(ExprKind::Lit(l), ty)
    }

    pub fn unit() -> Expr {
        Expr::lit(Literal::Unit)
    }

    pub fn bool(b: bool) -> Expr {
        Expr::lit(Literal::Bool(b))
    }

    pub fn int(i: i64) -> Expr {
        Expr::lit(Literal::Int(i))
    }

    pub fn real(x: f64) -> Expr {
        Expr::lit(Literal::Real(x))
    }

    pub fn var(v: &Var) -> Expr {
        Expr::mk(ExprKind::Var(v.clone()), v.ty().clone())
    }

    pub fn nil(elem: Type) -> Expr {
        Expr::mk(ExprKind::Nil, Type::list(elem))
    }

    pub fn map_empty(key: Type, value: Type) -> Expr {
        Expr::mk(ExprKind::MapEmpty, Type::map(key, value))
    }

    pub fn nothing(t: Type) -> Expr {
        Expr::mk(ExprKind::Nothing, Type::option(t))
    }

    /// `Abort` at distribution type `Dist(t)`.
    pub fn abort(t: Type, message: impl Into<String>) -> Expr {
        Expr::mk(ExprKind::Abort(message.into()), Type::dist(t))
    }

    // Pure operators

    pub fn unary(op: UnaryOp, e: Expr) -> Result<Expr, TypeError> {
        Expr::new(ExprKind::Unary(op, e))
    }

    pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Result<Expr, TypeError> {
        Expr::new(ExprKind::Binary(op, a, b))
    }

    pub fn neg(e: Expr) -> Result<Expr, TypeError> {
        Expr::unary(UnaryOp::Neg, e)
    }

    pub fn not(e: Expr) -> Result<Expr, TypeError> {
        Expr::unary(UnaryOp::Not, e)
    }

    pub fn to_real(e: Expr) -> Result<Expr, TypeError> {
        Expr::unary(UnaryOp::IntToReal, e)
    }

    pub fn add(a: Expr, b: Expr) -> Result<Expr, TypeError> {
        Expr::binary(BinaryOp::Add, a, b)
    }

    pub fn sub(a: Expr, b: Expr) -> Result<Expr, TypeError> {
        Expr::binary(BinaryOp::Sub, a, b)
    }

    pub fn mul(a: Expr, b: Expr) -> Result<Expr, TypeError> {
        Expr::binary(BinaryOp::Mul, a, b)
    }

    pub fn div(a: Expr, b: Expr) -> Result<Expr, TypeError> {
        Expr::binary(BinaryOp::Div, a, b)
    }

    pub fn lt(a: Expr, b: Expr) -> Result<Expr, TypeError> {
        Expr::binary(BinaryOp::Lt, a, b)
    }

    pub fn le(a: Expr, b: Expr) -> Result<Expr, TypeError> {
        Expr::binary(BinaryOp::Le, a, b)
    }

    pub fn eq(a: Expr, b: Expr) -> Result<Expr, TypeError> {
        Expr::binary(BinaryOp::Eq, a, b)
    }

    pub fn and(a: Expr, b: Expr) -> Result<Expr, TypeError> {
        Expr::binary(BinaryOp::And, a, b)
    }

    pub fn or(a: Expr, b: Expr) -> Result<Expr, TypeError> {
        Expr::binary(BinaryOp::Or, a, b)
    }

    pub fn if_(cond: Expr, then_branch: Expr, else_branch: Expr) -> Result<Expr, TypeError> {
        Expr::new(ExprKind::If {
            cond,
            then_branch,
            else_branch,
        })
    }

    pub fn let_(var: &Var, value: Expr, body: Expr) -> Result<Expr, TypeError> {
        Expr::new(ExprKind::Let {
            var: var.clone(),
            value,
            body,
        })
    }

    /// Binds a fresh variable to `value` and builds the body from it.
    pub fn let_with(
        hint: &'static str,
        value: Expr,
        body: impl FnOnce(Expr) -> Result<Expr, TypeError>,
    ) -> Result<Expr, TypeError> {
        let v = Var::fresh(hint, value.ty().clone());
        let b = body(Expr::var(&v))?;
        Expr::let_(&v, value, b)
    }

    pub fn pair(a: Expr, b: Expr) -> Result<Expr, TypeError> {
        Expr::new(ExprKind::Pair(a, b))
    }

    pub fn fst(p: Expr) -> Result<Expr, TypeError> {
        Expr::new(ExprKind::Fst(p))
    }

    pub fn snd(p: Expr) -> Result<Expr, TypeError> {
        Expr::new(ExprKind::Snd(p))
    }

    pub fn cons(head: Expr, tail: Expr) -> Result<Expr, TypeError> {
        Expr::new(ExprKind::Cons(head, tail))
    }

    pub fn snoc(list: Expr, elem: Expr) -> Result<Expr, TypeError> {
        Expr::new(ExprKind::Snoc(list, elem))
    }

    pub fn uncons(list: Expr) -> Result<Expr, TypeError> {
        Expr::new(ExprKind::Uncons(list))
    }

    pub fn is_nil(list: Expr) -> Result<Expr, TypeError> {
        Expr::new(ExprKind::IsNil(list))
    }

    pub fn length(list: Expr) -> Result<Expr, TypeError> {
        Expr::new(ExprKind::Length(list))
    }

    /// A list literal from element expressions.
    pub fn list(elem: Type, items: Vec<Expr>) -> Result<Expr, TypeError> {
        items
            .into_iter()
            .rev()
            .try_fold(Expr::nil(elem), |acc, e| Expr::cons(e, acc))
    }

    pub fn real_list(xs: &[f64]) -> Expr {
        Expr::list(Type::Real, xs.iter().map(|&x| Expr::real(x)).collect())
            .expect("real literals always form a real list")
    }

    pub fn map_insert(map: Expr, key: Expr, value: Expr) -> Result<Expr, TypeError> {
        Expr::new(ExprKind::MapInsert { map, key, value })
    }

    pub fn map_lookup(map: Expr, key: Expr) -> Result<Expr, TypeError> {
        Expr::new(ExprKind::MapLookup { map, key })
    }

    pub fn map_size(map: Expr) -> Result<Expr, TypeError> {
        Expr::new(ExprKind::MapSize(map))
    }

    pub fn just(e: Expr) -> Result<Expr, TypeError> {
        Expr::new(ExprKind::Just(e))
    }

    pub fn case_option(
        scrutinee: Expr,
        on_nothing: Expr,
        var: &Var,
        on_just: Expr,
    ) -> Result<Expr, TypeError> {
        Expr::new(ExprKind::CaseOption {
            scrutinee,
            on_nothing,
            var: var.clone(),
            on_just,
        })
    }

    /// `CaseOption` with a fresh binder built by `on_just`.
    pub fn case_option_with(
        scrutinee: Expr,
        on_nothing: Expr,
        hint: &'static str,
        on_just: impl FnOnce(Expr) -> Result<Expr, TypeError>,
    ) -> Result<Expr, TypeError> {
        let inner = match scrutinee.ty() {
            Type::Option(t) => (**t).clone(),
            other => return Err(mismatch("CaseOption", "Option", other)),
        };
        let v = Var::fresh(hint, inner);
        let body = on_just(Expr::var(&v))?;
        Expr::case_option(scrutinee, on_nothing, &v, body)
    }

    // Distributions

    pub fn laplace(center: Expr, width: f64) -> Result<Expr, TypeError> {
        Expr::new(ExprKind::Laplace { center, width })
    }

    pub fn ret(e: Expr) -> Result<Expr, TypeError> {
        Expr::new(ExprKind::Return(e))
    }

    pub fn bind(dist: Expr, var: &Var, body: Expr) -> Result<Expr, TypeError> {
        Expr::new(ExprKind::Bind {
            dist,
            var: var.clone(),
            body,
        })
    }

    /// Binds the result of `dist` to a fresh variable passed to `body`.
    pub fn bind_with(
        hint: &'static str,
        dist: Expr,
        body: impl FnOnce(Expr) -> Result<Expr, TypeError>,
    ) -> Result<Expr, TypeError> {
        let payload = match dist.ty() {
            Type::Dist(t) => (**t).clone(),
            other => return Err(mismatch("Bind", "Dist", other)),
        };
        let v = Var::fresh(hint, payload);
        let b = body(Expr::var(&v))?;
        Expr::bind(dist, &v, b)
    }

    pub fn assert(cond: Expr) -> Result<Expr, TypeError> {
        Expr::new(ExprKind::Assert(cond))
    }

    pub fn seq(first: Expr, second: Expr) -> Result<Expr, TypeError> {
        Expr::new(ExprKind::Sequence(first, second))
    }

    pub fn loop_(
        init: Expr,
        var: &Var,
        cond: Expr,
        body: Expr,
        metric: Option<Expr>,
    ) -> Result<Expr, TypeError> {
        Expr::new(ExprKind::Loop {
            init,
            var: var.clone(),
            cond,
            body,
            metric,
        })
    }

    /// Loop with a fresh state variable shared by `cond`, `body` and `metric`.
    pub fn loop_with(
        init: Expr,
        cond: impl FnOnce(Expr) -> Result<Expr, TypeError>,
        body: impl FnOnce(Expr) -> Result<Expr, TypeError>,
        metric: Option<Box<dyn FnOnce(Expr) -> Result<Expr, TypeError>>>,
    ) -> Result<Expr, TypeError> {
        let v = Var::fresh("st", init.ty().clone());
        let c = cond(Expr::var(&v))?;
        let b = body(Expr::var(&v))?;
        let m = match metric {
            Some(f) => Some(f(Expr::var(&v))?),
            None => None,
        };
        Expr::loop_(init, &v, c, b, m)
    }
}

fn expect_value(node: &'static str, t: &Type) -> Result<(), TypeError> {
    if t.is_value() {
        Ok(())
    } else {
        Err(mismatch(node, "a value type", t))
    }
}

fn expect_eq(node: &'static str, expected: &Type, found: &Type) -> Result<(), TypeError> {
    if expected == found {
        Ok(())
    } else {
        Err(mismatch(node, expected.to_string(), found))
    }
}

fn expect_dist(node: &'static str, t: &Type) -> Result<Type, TypeError> {
    t.dist_payload()
        .cloned()
        .ok_or_else(|| mismatch(node, "Dist", t))
}

fn list_elem(node: &'static str, t: &Type) -> Result<Type, TypeError> {
    match t {
        Type::List(e) => Ok((**e).clone()),
        other => Err(mismatch(node, "List", other)),
    }
}

fn node_type(kind: &ExprKind) -> Result<Type, TypeError> {
    use ExprKind as K;
    Ok(match kind {
        K::Lit(l) => l.ty(),
        K::Var(v) => v.ty().clone(),
        K::Unary(op, e) => match (op, e.ty()) {
            (UnaryOp::Neg, t) if t.is_numeric() => t.clone(),
            (UnaryOp::Not, Type::Bool) => Type::Bool,
            (UnaryOp::IntToReal, Type::Int) => Type::Real,
            (UnaryOp::Neg, t) => return Err(mismatch("Neg", "Int or Real", t)),
            (UnaryOp::Not, t) => return Err(mismatch("Not", "Bool", t)),
            (UnaryOp::IntToReal, t) => return Err(mismatch("IntToReal", "Int", t)),
        },
        K::Binary(op, a, b) => {
            let (ta, tb) = (a.ty(), b.ty());
            match op {
                BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div => {
                    if !ta.is_numeric() {
                        return Err(mismatch(op.symbol_node(), "Int or Real", ta));
                    }
                    expect_eq(op.symbol_node(), ta, tb)?;
                    ta.clone()
                }
                BinaryOp::Lt | BinaryOp::Le => {
                    if !ta.is_numeric() {
                        return Err(mismatch(op.symbol_node(), "Int or Real", ta));
                    }
                    expect_eq(op.symbol_node(), ta, tb)?;
                    Type::Bool
                }
                BinaryOp::Eq => {
                    if !(ta.is_numeric() || *ta == Type::Bool) {
                        return Err(mismatch("Eq", "Int, Real or Bool", ta));
                    }
                    expect_eq("Eq", ta, tb)?;
                    Type::Bool
                }
                BinaryOp::And | BinaryOp::Or => {
                    expect_eq(op.symbol_node(), &Type::Bool, ta)?;
                    expect_eq(op.symbol_node(), &Type::Bool, tb)?;
                    Type::Bool
                }
            }
        }
        K::If {
            cond,
            then_branch,
            else_branch,
        } => {
            expect_eq("If", &Type::Bool, cond.ty())?;
            expect_eq("If", then_branch.ty(), else_branch.ty())?;
            then_branch.ty().clone()
        }
        K::Let { var, value, body } => {
            expect_value("Let", value.ty())?;
            expect_eq("Let", var.ty(), value.ty())?;
            body.ty().clone()
        }
        K::Pair(a, b) => {
            expect_value("Pair", a.ty())?;
            expect_value("Pair", b.ty())?;
            Type::pair(a.ty().clone(), b.ty().clone())
        }
        K::Fst(p) => match p.ty() {
            Type::Pair(a, _) => (**a).clone(),
            other => return Err(mismatch("Fst", "Pair", other)),
        },
        K::Snd(p) => match p.ty() {
            Type::Pair(_, b) => (**b).clone(),
            other => return Err(mismatch("Snd", "Pair", other)),
        },
        K::Nil | K::MapEmpty | K::Nothing | K::Abort(_) => {
            unreachable!("type-annotated leaves are built by their dedicated constructors")
        }
        K::Cons(h, t) => {
            let elem = list_elem("Cons", t.ty())?;
            expect_eq("Cons", &elem, h.ty())?;
            t.ty().clone()
        }
        K::Snoc(l, e) => {
            let elem = list_elem("Snoc", l.ty())?;
            expect_eq("Snoc", &elem, e.ty())?;
            l.ty().clone()
        }
        K::Uncons(l) => {
            let elem = list_elem("Uncons", l.ty())?;
            Type::option(Type::pair(elem, l.ty().clone()))
        }
        K::IsNil(l) => {
            list_elem("IsNil", l.ty())?;
            Type::Bool
        }
        K::Length(l) => {
            list_elem("Length", l.ty())?;
            Type::Int
        }
        K::MapInsert { map, key, value } => match map.ty() {
            Type::Map(k, v) => {
                expect_eq("MapInsert", k, key.ty())?;
                expect_eq("MapInsert", v, value.ty())?;
                map.ty().clone()
            }
            other => return Err(mismatch("MapInsert", "Map", other)),
        },
        K::MapLookup { map, key } => match map.ty() {
            Type::Map(k, v) => {
                expect_eq("MapLookup", k, key.ty())?;
                Type::option((**v).clone())
            }
            other => return Err(mismatch("MapLookup", "Map", other)),
        },
        K::MapSize(m) => match m.ty() {
            Type::Map(..) => Type::Int,
            other => return Err(mismatch("MapSize", "Map", other)),
        },
        K::Just(e) => {
            expect_value("Just", e.ty())?;
            Type::option(e.ty().clone())
        }
        K::CaseOption {
            scrutinee,
            on_nothing,
            var,
            on_just,
        } => match scrutinee.ty() {
            Type::Option(inner) => {
                expect_eq("CaseOption", inner, var.ty())?;
                expect_eq("CaseOption", on_nothing.ty(), on_just.ty())?;
                on_just.ty().clone()
            }
            other => return Err(mismatch("CaseOption", "Option", other)),
        },
        K::Laplace { center, width } => {
            expect_eq("Laplace", &Type::Real, center.ty())?;
            if !(width.is_finite() && *width > 0.0) {
                return Err(TypeError::InvalidWidth(*width));
            }
            Type::dist(Type::Real)
        }
        K::Return(e) => {
            expect_value("Return", e.ty())?;
            Type::dist(e.ty().clone())
        }
        K::Bind { dist, var, body } => {
            let payload = expect_dist("Bind", dist.ty())?;
            expect_eq("Bind", &payload, var.ty())?;
            expect_dist("Bind", body.ty())?;
            body.ty().clone()
        }
        K::Assert(c) => {
            expect_eq("Assert", &Type::Bool, c.ty())?;
            Type::dist(Type::Unit)
        }
        K::Sequence(a, b) => {
            expect_dist("Sequence", a.ty())?;
            expect_dist("Sequence", b.ty())?;
            b.ty().clone()
        }
        K::Loop {
            init,
            var,
            cond,
            body,
            metric,
        } => {
            expect_value("Loop", init.ty())?;
            expect_eq("Loop", init.ty(), var.ty())?;
            expect_eq("Loop", &Type::Bool, cond.ty())?;
            expect_eq("Loop", &Type::dist(init.ty().clone()), body.ty())?;
            if let Some(m) = metric {
                expect_value("Loop", m.ty())?;
            }
            Type::dist(init.ty().clone())
        }
    })
}

impl BinaryOp {
    fn symbol_node(self) -> &'static str {
        match self {
            BinaryOp::Add => "Add",
            BinaryOp::Sub => "Sub",
            BinaryOp::Mul => "Mul",
            BinaryOp::Div => "Div",
            BinaryOp::Lt => "Lt",
            BinaryOp::Le => "Le",
            BinaryOp::Eq => "Eq",
            BinaryOp::And => "And",
            BinaryOp::Or => "Or",
        }
    }
}

/// Recursively re-checks an expression, including variable scoping.
///
/// Returns the type of the whole expression.
pub fn typecheck(e: &Expr) -> Result<Type, TypeError> {
    let mut scope: Vec<Var> = Vec::new();
    check_rec(e, &mut scope)?;
    Ok(e.ty().clone())
}

fn check_rec(e: &Expr, scope: &mut Vec<Var>) -> Result<(), TypeError> {
    use ExprKind as K;
    let with = |scope: &mut Vec<Var>, v: &Var, body: &Expr| -> Result<(), TypeError> {
        scope.push(v.clone());
        let r = check_rec(body, scope);
        scope.pop();
        r
    };
    match e.kind() {
        K::Lit(_) | K::Nil | K::MapEmpty | K::Nothing | K::Abort(_) => {}
        K::Var(v) => match scope.iter().rev().find(|b| *b == v) {
            None => return Err(TypeError::UnboundVariable(v.clone())),
            Some(b) if b.ty() != v.ty() => {
                return Err(TypeError::VariableType {
                    var: v.clone(),
                    used: v.ty().clone(),
                    bound: b.ty().clone(),
                })
            }
            Some(_) => {}
        },
        K::Unary(_, a)
        | K::Fst(a)
        | K::Snd(a)
        | K::Uncons(a)
        | K::IsNil(a)
        | K::Length(a)
        | K::MapSize(a)
        | K::Just(a)
        | K::Return(a)
        | K::Assert(a) => check_rec(a, scope)?,
        K::Laplace { center, .. } => check_rec(center, scope)?,
        K::Binary(_, a, b)
        | K::Pair(a, b)
        | K::Cons(a, b)
        | K::Snoc(a, b)
        | K::Sequence(a, b)
        | K::MapLookup { map: a, key: b } => {
            check_rec(a, scope)?;
            check_rec(b, scope)?;
        }
        K::MapInsert { map, key, value } => {
            check_rec(map, scope)?;
            check_rec(key, scope)?;
            check_rec(value, scope)?;
        }
        K::If {
            cond,
            then_branch,
            else_branch,
        } => {
            check_rec(cond, scope)?;
            check_rec(then_branch, scope)?;
            check_rec(else_branch, scope)?;
        }
        K::Let { var, value, body } => {
            check_rec(value, scope)?;
            with(scope, var, body)?;
        }
        K::Bind { dist, var, body } => {
            check_rec(dist, scope)?;
            with(scope, var, body)?;
        }
        K::CaseOption {
            scrutinee,
            on_nothing,
            var,
            on_just,
        } => {
            check_rec(scrutinee, scope)?;
            check_rec(on_nothing, scope)?;
            with(scope, var, on_just)?;
        }
        K::Loop {
            init,
            var,
            cond,
            body,
            metric,
        } => {
            check_rec(init, scope)?;
            with(scope, var, cond)?;
            with(scope, var, body)?;
            if let Some(m) = metric {
                with(scope, var, m)?;
            }
        }
    }
    // Re-derive the node type from the children to catch hand-built nodes.
    let derived = match e.kind() {
        K::Lit(_) | K::Var(_) | K::Nil | K::MapEmpty | K::Nothing | K::Abort(_) => e.ty().clone(),
        kind => node_type(kind)?,
    };
    if &derived != e.ty() {
        return Err(mismatch("node", derived.to_string(), e.ty()));
    }
    Ok(())
}

/// Static bound on the number of Laplace draws in one execution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LaplaceCount {
    Finite(u64),
    Unbounded,
}

impl LaplaceCount {
    fn plus(self, other: LaplaceCount) -> LaplaceCount {
        match (self, other) {
            (LaplaceCount::Finite(a), LaplaceCount::Finite(b)) => LaplaceCount::Finite(a + b),
            _ => LaplaceCount::Unbounded,
        }
    }

    fn max(self, other: LaplaceCount) -> LaplaceCount {
        match (self, other) {
            (LaplaceCount::Finite(a), LaplaceCount::Finite(b)) => LaplaceCount::Finite(a.max(b)),
            _ => LaplaceCount::Unbounded,
        }
    }

    pub fn finite(self) -> Option<u64> {
        match self {
            LaplaceCount::Finite(n) => Some(n),
            LaplaceCount::Unbounded => None,
        }
    }
}

/// Upper bound on Laplace calls along any single execution path.
///
/// Exact for loop-free programs; a loop whose body may sample is unbounded.
pub fn count_laplace_nodes(e: &Expr) -> LaplaceCount {
    use ExprKind as K;
    use LaplaceCount::Finite;
    match e.kind() {
        K::Laplace { .. } => Finite(1),
        K::Bind { dist, body, .. } => count_laplace_nodes(dist).plus(count_laplace_nodes(body)),
        K::Sequence(a, b) => count_laplace_nodes(a).plus(count_laplace_nodes(b)),
        K::If {
            then_branch,
            else_branch,
            ..
        } => count_laplace_nodes(then_branch).max(count_laplace_nodes(else_branch)),
        K::CaseOption {
            on_nothing,
            on_just,
            ..
        } => count_laplace_nodes(on_nothing).max(count_laplace_nodes(on_just)),
        K::Let { body, .. } => count_laplace_nodes(body),
        K::Loop { body, .. } => match count_laplace_nodes(body) {
            Finite(0) => Finite(0),
            _ => LaplaceCount::Unbounded,
        },
        _ => Finite(0),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ExprKind as K;
        match self.kind() {
            K::Lit(Literal::Unit) => write!(f, "()"),
            K::Lit(Literal::Bool(b)) => write!(f, "{b}"),
            K::Lit(Literal::Int(i)) => write!(f, "{i}"),
            K::Lit(Literal::Real(x)) => write!(f, "{x:?}"),
            K::Var(v) => write!(f, "{v}"),
            K::Unary(op, a) => write!(f, "({} {a})", op.symbol()),
            K::Binary(op, a, b) => write!(f, "({} {a} {b})", op.symbol()),
            K::If {
                cond,
                then_branch,
                else_branch,
            } => write!(f, "(if {cond} {then_branch} {else_branch})"),
            K::Let { var, value, body } => write!(f, "(let {var} {value} {body})"),
            K::Pair(a, b) => write!(f, "(pair {a} {b})"),
            K::Fst(a) => write!(f, "(fst {a})"),
            K::Snd(a) => write!(f, "(snd {a})"),
            K::Nil => write!(f, "nil"),
            K::Cons(a, b) => write!(f, "(cons {a} {b})"),
            K::Snoc(a, b) => write!(f, "(snoc {a} {b})"),
            K::Uncons(a) => write!(f, "(uncons {a})"),
            K::IsNil(a) => write!(f, "(nil? {a})"),
            K::Length(a) => write!(f, "(length {a})"),
            K::MapEmpty => write!(f, "empty-map"),
            K::MapInsert { map, key, value } => write!(f, "(insert {map} {key} {value})"),
            K::MapLookup { map, key } => write!(f, "(lookup {map} {key})"),
            K::MapSize(m) => write!(f, "(size {m})"),
            K::Nothing => write!(f, "nothing"),
            K::Just(a) => write!(f, "(just {a})"),
            K::CaseOption {
                scrutinee,
                on_nothing,
                var,
                on_just,
            } => write!(f, "(case {scrutinee} {on_nothing} ({var} {on_just}))"),
            K::Laplace { center, width } => write!(f, "(laplace {center} {width:?})"),
            K::Return(a) => write!(f, "(return {a})"),
            K::Bind { dist, var, body } => write!(f, "(bind {dist} ({var} {body}))"),
            K::Assert(c) => write!(f, "(assert {c})"),
            K::Sequence(a, b) => write!(f, "(seq {a} {b})"),
            K::Abort(m) => write!(f, "(abort {m:?})"),
            K::Loop {
                init,
                var,
                cond,
                body,
                metric,
            } => {
                write!(f, "(loop {init} ({var} {cond} {body})")?;
                if let Some(m) = metric {
                    write!(f, " (metric {m})")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_rejects_bool_operand() {
        let err = Expr::add(Expr::real(1.0), Expr::bool(true)).unwrap_err();
        assert!(matches!(err, TypeError::TypeMismatch { node: "Add", .. }));
    }

    #[test]
    fn laplace_rejects_nonpositive_width() {
        assert_eq!(
            Expr::laplace(Expr::real(0.0), 0.0).unwrap_err(),
            TypeError::InvalidWidth(0.0)
        );
        assert!(Expr::laplace(Expr::real(0.0), f64::NAN).is_err());
    }

    #[test]
    fn bind_needs_dist() {
        let v = Var::fresh("x", Type::Real);
        let body = Expr::ret(Expr::var(&v)).unwrap();
        assert!(Expr::bind(Expr::real(1.0), &v, body).is_err());
    }

    #[test]
    fn typecheck_catches_unbound_var() {
        let v = Var::fresh("x", Type::Real);
        let e = Expr::add(Expr::var(&v), Expr::real(1.0)).unwrap();
        assert!(matches!(typecheck(&e), Err(TypeError::UnboundVariable(_))));
    }

    #[test]
    fn count_for_if_is_max_of_branches() {
        let two = Expr::bind_with("a", Expr::laplace(Expr::real(0.0), 1.0).unwrap(), |a| {
            Expr::bind_with("b", Expr::laplace(a, 1.0)?, Expr::ret)
        })
        .unwrap();
        let one = Expr::laplace(Expr::real(0.0), 1.0).unwrap();
        let e = Expr::if_(Expr::bool(true), two, one).unwrap();
        assert_eq!(count_laplace_nodes(&e), LaplaceCount::Finite(2));
    }

    #[test]
    fn sampling_loop_is_unbounded() {
        let e = Expr::loop_with(
            Expr::real(0.0),
            |s| Expr::lt(s, Expr::real(1.0)),
            |s| Expr::laplace(s, 1.0),
            None,
        )
        .unwrap();
        assert_eq!(count_laplace_nodes(&e), LaplaceCount::Unbounded);
    }
}
