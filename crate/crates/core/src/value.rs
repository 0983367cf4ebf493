//! Program values and states.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// Interned variable name.
pub type Name = Arc<str>;

/// A scalar program value.
///
/// Invariant: `Rat` never holds an integral value; use [`Value::number`] to
/// normalise arithmetic results.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Rat(BigRational),
}

impl Value {
    /// Normalising constructor for numeric results.
    pub fn number(r: BigRational) -> Value {
        if r.denom().is_one() {
            if let Some(i) = r.numer().to_i64() {
                return Value::Int(i);
            }
        }
        Value::Rat(r)
    }

    pub fn as_rational(&self) -> Option<BigRational> {
        match self {
            Value::Int(i) => Some(BigRational::from_integer(BigInt::from(*i))),
            Value::Rat(r) => Some(r.clone()),
            Value::Bool(_) => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn is_numeric(&self) -> bool {
        !matches!(self, Value::Bool(_))
    }

    /// Numeric comparison across `Int`/`Rat`; `None` for mixed kinds.
    pub fn compare(&self, other: &Value) -> Option<std::cmp::Ordering> {
        match (self, other) {
            (Value::Bool(a), Value::Bool(b)) => Some(a.cmp(b)),
            (Value::Int(a), Value::Int(b)) => Some(a.cmp(b)),
            _ => Some(self.as_rational()?.cmp(&other.as_rational()?)),
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<BigRational> for Value {
    fn from(v: BigRational) -> Self {
        Value::number(v)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Rat(r) => {
                if r.is_zero() {
                    write!(f, "0")
                } else {
                    write!(f, "{}/{}", r.numer(), r.denom())
                }
            }
        }
    }
}

/// Variable bindings. The derived `Ord` is the canonical state order:
/// lexicographic over `(name, value)` pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    bindings: BTreeMap<Name, Value>,
}

impl State {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I, K, V>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: Into<Value>,
    {
        let bindings = pairs
            .into_iter()
            .map(|(k, v)| (Name::from(k.as_ref()), v.into()))
            .collect();
        State { bindings }
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.bindings.get(name)
    }

    pub fn set(&mut self, name: Name, value: Value) {
        self.bindings.insert(name, value);
    }

    pub fn with(&self, name: &str, value: Value) -> State {
        let mut s = self.clone();
        s.set(Name::from(name), value);
        s
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Name, &Value)> {
        self.bindings.iter()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    /// Values in the given variable order, e.g. `(3,true)`.
    pub fn tuple(&self, order: &[Name]) -> String {
        let parts: Vec<String> = order
            .iter()
            .map(|n| self.get(n).map_or_else(|| "?".to_string(), Value::to_string))
            .collect();
        format!("({})", parts.join(","))
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (k, v)) in self.bindings.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k}:{v}")?;
        }
        write!(f, "}}")
    }
}
