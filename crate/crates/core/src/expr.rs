//! Expectation and predicate expressions.
//!
//! One tree serves both roles: a predicate is an [`Expr`] of boolean type and
//! an expectation is an [`Expr`] of numeric type. `Lift` embeds the former
//! into the latter as an indicator.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops;

use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::value::{Name, State, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Min,
    Max,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            CmpOp::Eq => ord == Equal,
            CmpOp::Ne => ord != Equal,
            CmpOp::Lt => ord == Less,
            CmpOp::Le => ord != Greater,
            CmpOp::Gt => ord == Greater,
            CmpOp::Ge => ord != Less,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(Value),
    Var(Name),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    /// Indicator of a predicate: 1 where it holds, 0 elsewhere.
    Lift(Box<Expr>),
    Cond(Box<Expr>, Box<Expr>, Box<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    In(Box<Expr>, Vec<Value>),
}

/// Expressions used as expectations.
pub type Expectation = Expr;
/// Expressions used as predicates.
pub type Predicate = Expr;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(Name),
    #[error("division by zero")]
    DivisionByZero,
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Ty {
    Bool,
    Num,
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Bool => write!(f, "bool"),
            Ty::Num => write!(f, "number"),
        }
    }
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(Name::from(name))
    }

    pub fn int(v: i64) -> Expr {
        Expr::Const(Value::Int(v))
    }

    pub fn rat(n: i64, d: i64) -> Expr {
        Expr::Const(Value::number(crate::scalar::ratio(n, d)))
    }

    pub fn constant(r: BigRational) -> Expr {
        Expr::Const(Value::number(r))
    }

    pub fn bool(b: bool) -> Expr {
        Expr::Const(Value::Bool(b))
    }

    pub fn lift(pred: Expr) -> Expr {
        Expr::Lift(Box::new(pred))
    }

    pub fn min(a: Expr, b: Expr) -> Expr {
        Expr::Bin(BinOp::Min, Box::new(a), Box::new(b))
    }

    pub fn max(a: Expr, b: Expr) -> Expr {
        Expr::Bin(BinOp::Max, Box::new(a), Box::new(b))
    }

    pub fn cond(p: Expr, a: Expr, b: Expr) -> Expr {
        Expr::Cond(Box::new(p), Box::new(a), Box::new(b))
    }

    pub fn cmp(op: CmpOp, a: Expr, b: Expr) -> Expr {
        Expr::Cmp(op, Box::new(a), Box::new(b))
    }

    pub fn eq(a: Expr, b: Expr) -> Expr {
        Expr::cmp(CmpOp::Eq, a, b)
    }

    pub fn and(a: Expr, b: Expr) -> Expr {
        Expr::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Expr, b: Expr) -> Expr {
        Expr::Or(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Expr) -> Expr {
        Expr::Not(Box::new(a))
    }

    pub fn member(a: Expr, set: Vec<Value>) -> Expr {
        Expr::In(Box::new(a), set)
    }

    /// Conjunction of all items; `true` when empty.
    pub fn all(items: impl IntoIterator<Item = Expr>) -> Expr {
        items
            .into_iter()
            .reduce(Expr::and)
            .unwrap_or_else(|| Expr::bool(true))
    }

    /// Exact evaluation to a [`Value`].
    pub fn eval(&self, s: &State) -> Result<Value, EvalError> {
        match self {
            Expr::Const(v) => Ok(v.clone()),
            Expr::Var(n) => s
                .get(n)
                .cloned()
                .ok_or_else(|| EvalError::UnboundVariable(n.clone())),
            Expr::Neg(a) => Ok(Value::number(-num(&a.eval(s)?)?)),
            Expr::Bin(op, a, b) => {
                let x = num(&a.eval(s)?)?;
                let y = num(&b.eval(s)?)?;
                let r = match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y.is_zero() {
                            return Err(EvalError::DivisionByZero);
                        }
                        x / y
                    }
                    BinOp::Min => x.min(y),
                    BinOp::Max => x.max(y),
                };
                Ok(Value::number(r))
            }
            Expr::Lift(p) => Ok(Value::Int(i64::from(p.eval_bool(s)?))),
            Expr::Cond(p, a, b) => {
                if p.eval_bool(s)? {
                    a.eval(s)
                } else {
                    b.eval(s)
                }
            }
            Expr::Cmp(..) | Expr::And(..) | Expr::Or(..) | Expr::Not(..) | Expr::In(..) => {
                Ok(Value::Bool(self.eval_bool(s)?))
            }
        }
    }

    pub fn eval_bool(&self, s: &State) -> Result<bool, EvalError> {
        match self {
            Expr::Cmp(op, a, b) => {
                let (x, y) = (a.eval(s)?, b.eval(s)?);
                let ord = x.compare(&y).ok_or_else(|| {
                    EvalError::TypeMismatch(format!("cannot compare {x} with {y}"))
                })?;
                Ok(op.holds(ord))
            }
            Expr::And(a, b) => Ok(a.eval_bool(s)? && b.eval_bool(s)?),
            Expr::Or(a, b) => Ok(a.eval_bool(s)? || b.eval_bool(s)?),
            Expr::Not(a) => Ok(!a.eval_bool(s)?),
            Expr::In(a, set) => {
                let x = a.eval(s)?;
                Ok(set.iter().any(|v| x.compare(v) == Some(std::cmp::Ordering::Equal)))
            }
            _ => match self.eval(s)? {
                Value::Bool(b) => Ok(b),
                v => Err(EvalError::TypeMismatch(format!("expected a boolean, found {v}"))),
            },
        }
    }

    /// Numeric evaluation in the scalar type `S`.
    ///
    /// Predicates inside `Lift`/`Cond` are always decided exactly.
    pub fn eval_scalar<S: Scalar>(&self, s: &State) -> Result<S, EvalError> {
        match self {
            Expr::Const(v) => Ok(S::from_rational(&num(v)?)),
            Expr::Var(n) => {
                let v = s
                    .get(n)
                    .ok_or_else(|| EvalError::UnboundVariable(n.clone()))?;
                Ok(S::from_rational(&num(v)?))
            }
            Expr::Neg(a) => Ok(-a.eval_scalar::<S>(s)?),
            Expr::Bin(op, a, b) => {
                let x = a.eval_scalar::<S>(s)?;
                let y = b.eval_scalar::<S>(s)?;
                Ok(match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y.is_zero() {
                            return Err(EvalError::DivisionByZero);
                        }
                        x / y
                    }
                    BinOp::Min => x.min_of(y),
                    BinOp::Max => x.max_of(y),
                })
            }
            Expr::Lift(p) => Ok(if p.eval_bool(s)? { S::one() } else { S::zero() }),
            Expr::Cond(p, a, b) => {
                if p.eval_bool(s)? {
                    a.eval_scalar(s)
                } else {
                    b.eval_scalar(s)
                }
            }
            _ => Err(EvalError::TypeMismatch(format!(
                "expected a number, found predicate `{self}`"
            ))),
        }
    }

    /// Simultaneous substitution `self[x := map[x]]`.
    pub fn subst(&self, map: &BTreeMap<Name, Expr>) -> Expr {
        let go = |e: &Expr| Box::new(e.subst(map));
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Var(n) => map.get(n).cloned().unwrap_or_else(|| self.clone()),
            Expr::Neg(a) => Expr::Neg(go(a)),
            Expr::Bin(op, a, b) => Expr::Bin(*op, go(a), go(b)),
            Expr::Lift(a) => Expr::Lift(go(a)),
            Expr::Cond(p, a, b) => Expr::Cond(go(p), go(a), go(b)),
            Expr::Cmp(op, a, b) => Expr::Cmp(*op, go(a), go(b)),
            Expr::And(a, b) => Expr::And(go(a), go(b)),
            Expr::Or(a, b) => Expr::Or(go(a), go(b)),
            Expr::Not(a) => Expr::Not(go(a)),
            Expr::In(a, set) => Expr::In(go(a), set.clone()),
        }
    }

    pub fn subst_one(&self, name: &Name, by: &Expr) -> Expr {
        let mut m = BTreeMap::new();
        m.insert(name.clone(), by.clone());
        self.subst(&m)
    }

    pub fn free_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Name>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(n) => {
                out.insert(n.clone());
            }
            Expr::Neg(a) | Expr::Lift(a) | Expr::Not(a) | Expr::In(a, _) => a.collect_vars(out),
            Expr::Bin(_, a, b)
            | Expr::Cmp(_, a, b)
            | Expr::And(a, b)
            | Expr::Or(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Cond(p, a, b) => {
                p.collect_vars(out);
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Constant folding of closed subtrees. Never changes the value.
    pub fn fold(&self) -> Expr {
        let folded = match self {
            Expr::Const(_) | Expr::Var(_) => return self.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.fold())),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.fold(), b.fold());
                match (op, &a, &b) {
                    (BinOp::Mul, Expr::Const(v), x) | (BinOp::Mul, x, Expr::Const(v))
                        if is_num(v, 1) =>
                    {
                        return x.clone();
                    }
                    (BinOp::Mul, Expr::Const(v), _) | (BinOp::Mul, _, Expr::Const(v))
                        if is_num(v, 0) =>
                    {
                        return Expr::int(0);
                    }
                    (BinOp::Add, Expr::Const(v), x) | (BinOp::Add, x, Expr::Const(v))
                        if is_num(v, 0) =>
                    {
                        return x.clone();
                    }
                    _ => {}
                }
                Expr::Bin(*op, Box::new(a), Box::new(b))
            }
            Expr::Lift(a) => Expr::Lift(Box::new(a.fold())),
            Expr::Cond(p, a, b) => {
                let p = p.fold();
                if let Expr::Const(Value::Bool(c)) = p {
                    return if c { a.fold() } else { b.fold() };
                }
                Expr::Cond(Box::new(p), Box::new(a.fold()), Box::new(b.fold()))
            }
            Expr::Cmp(op, a, b) => Expr::Cmp(*op, Box::new(a.fold()), Box::new(b.fold())),
            Expr::And(a, b) => Expr::And(Box::new(a.fold()), Box::new(b.fold())),
            Expr::Or(a, b) => Expr::Or(Box::new(a.fold()), Box::new(b.fold())),
            Expr::Not(a) => Expr::Not(Box::new(a.fold())),
            Expr::In(a, set) => Expr::In(Box::new(a.fold()), set.clone()),
        };
        if folded.free_vars().is_empty() {
            if let Ok(v) = folded.eval(&State::new()) {
                return Expr::Const(v);
            }
        }
        folded
    }

    /// Infers the expression's type given variable types.
    pub fn infer(&self, var_ty: &dyn Fn(&str) -> Option<Ty>) -> Result<Ty, String> {
        let want = |e: &Expr, t: Ty| -> Result<(), String> {
            let got = e.infer(var_ty)?;
            if got == t {
                Ok(())
            } else {
                Err(format!("expected {t}, found {got} in `{e}`"))
            }
        };
        match self {
            Expr::Const(v) => Ok(if v.is_numeric() { Ty::Num } else { Ty::Bool }),
            Expr::Var(n) => var_ty(n).ok_or_else(|| format!("unknown identifier `{n}`")),
            Expr::Neg(a) => want(a, Ty::Num).map(|_| Ty::Num),
            Expr::Bin(_, a, b) => {
                want(a, Ty::Num)?;
                want(b, Ty::Num)?;
                Ok(Ty::Num)
            }
            Expr::Lift(p) => want(p, Ty::Bool).map(|_| Ty::Num),
            Expr::Cond(p, a, b) => {
                want(p, Ty::Bool)?;
                let t = a.infer(var_ty)?;
                want(b, t)?;
                Ok(t)
            }
            Expr::Cmp(op, a, b) => {
                let t = a.infer(var_ty)?;
                want(b, t)?;
                if t == Ty::Bool && !matches!(op, CmpOp::Eq | CmpOp::Ne) {
                    return Err(format!("ordering comparison on booleans in `{self}`"));
                }
                Ok(Ty::Bool)
            }
            Expr::And(a, b) | Expr::Or(a, b) => {
                want(a, Ty::Bool)?;
                want(b, Ty::Bool)?;
                Ok(Ty::Bool)
            }
            Expr::Not(a) => want(a, Ty::Bool).map(|_| Ty::Bool),
            Expr::In(a, set) => {
                let t = a.infer(var_ty)?;
                for v in set {
                    let vt = if v.is_numeric() { Ty::Num } else { Ty::Bool };
                    if vt != t {
                        return Err(format!("set element {v} does not match {t} in `{self}`"));
                    }
                }
                Ok(Ty::Bool)
            }
        }
    }
}

fn num(v: &Value) -> Result<BigRational, EvalError> {
    v.as_rational()
        .ok_or_else(|| EvalError::TypeMismatch(format!("expected a number, found {v}")))
}

fn is_num(v: &Value, k: i64) -> bool {
    v.as_rational()
        .is_some_and(|r| r == BigRational::from_integer(k.into()))
}

macro_rules! arith_impl {
    ($tr:ident, $f:ident, $op:expr) => {
        impl ops::$tr for Expr {
            type Output = Expr;
            fn $f(self, rhs: Expr) -> Expr {
                Expr::Bin($op, Box::new(self), Box::new(rhs))
            }
        }
    };
}

arith_impl!(Add, add, BinOp::Add);
arith_impl!(Sub, sub, BinOp::Sub);
arith_impl!(Mul, mul, BinOp::Mul);
arith_impl!(Div, div, BinOp::Div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

pub(crate) fn write_value(f: &mut fmt::Formatter<'_>, v: &Value) -> fmt::Result {
    match v {
        Value::Int(i) if *i < 0 => write!(f, "({i})"),
        Value::Rat(r) => write!(f, "({}/{})", r.numer(), r.denom()),
        _ => write!(f, "{v}"),
    }
}

/// Prints in the concrete syntax accepted by the parser. Binary nodes are
/// fully parenthesised, so printing then parsing is the identity.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(v) => write_value(f, v),
            Expr::Var(n) => write!(f, "{n}"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Bin(op, a, b) => match op {
                BinOp::Add => write!(f, "({a} + {b})"),
                BinOp::Sub => write!(f, "({a} - {b})"),
                BinOp::Mul => write!(f, "({a} * {b})"),
                BinOp::Div => write!(f, "({a} / {b})"),
                BinOp::Min => write!(f, "min({a}, {b})"),
                BinOp::Max => write!(f, "max({a}, {b})"),
            },
            Expr::Lift(p) => write!(f, "lift[{p}]"),
            Expr::Cond(p, a, b) => write!(f, "if {p} then {a} else {b} fi"),
            Expr::Cmp(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::And(a, b) => write!(f, "({a} && {b})"),
            Expr::Or(a, b) => write!(f, "({a} || {b})"),
            Expr::Not(a) => write!(f, "!{a}"),
            Expr::In(a, set) => {
                write!(f, "({a} in {{")?;
                for (i, v) in set.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write_value(f, v)?;
                }
                write!(f, "}})")
            }
        }
    }
}

/// `true` when the value is a probability: a number in `[0, 1]`.
pub fn is_probability(v: &Value) -> bool {
    v.as_rational()
        .is_some_and(|r| r >= BigRational::zero() && r <= BigRational::one())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;

    #[test]
    fn lifted_predicate() {
        let e = Expr::lift(Expr::eq(Expr::var("s"), Expr::int(0)));
        let s = State::from_pairs([("s", 0i64)]);
        assert_eq!(e.eval_scalar::<BigRational>(&s).unwrap(), ratio(1, 1));
    }

    #[test]
    fn division_and_errors() {
        let e = Expr::var("x") / Expr::int(2);
        let s = State::from_pairs([("x", 1i64)]);
        assert_eq!(e.eval_scalar::<BigRational>(&s).unwrap(), ratio(1, 2));
        assert_eq!(
            e.eval_scalar::<BigRational>(&State::new()),
            Err(EvalError::UnboundVariable("x".into()))
        );
        let z = Expr::int(1) / (Expr::var("x") - Expr::int(1));
        assert_eq!(z.eval_scalar::<f64>(&s), Err(EvalError::DivisionByZero));
    }

    #[test]
    fn fold_keeps_value() {
        let e = (Expr::int(1) / Expr::int(3)) * Expr::var("x") + Expr::int(0);
        assert_eq!(e.fold(), Expr::rat(1, 3) * Expr::var("x"));
    }

    #[test]
    fn substitution_is_simultaneous() {
        let e = Expr::var("x") - Expr::var("y");
        let mut m = BTreeMap::new();
        m.insert(Name::from("x"), Expr::var("y"));
        m.insert(Name::from("y"), Expr::var("x"));
        assert_eq!(e.subst(&m), Expr::var("y") - Expr::var("x"));
    }
}
