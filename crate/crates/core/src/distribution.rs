//! Finite-support probability distributions and expectation-level operations.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::scalar::Scalar;
use crate::value::State;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum DistributionError {
    #[error("probability {0} is outside (0, 1]")]
    OutOfRange(String),
    #[error("probabilities sum to {0}, not 1")]
    BadSum(String),
    #[error("empty support")]
    Empty,
}

/// Map from outcomes to strictly positive probabilities summing to 1.
///
/// Exact scalars must sum to exactly 1; floats within `1e-9`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Distribution<K: Ord, S> {
    support: BTreeMap<K, S>,
}

impl<K: Ord + Clone + fmt::Debug, S: Scalar> Distribution<K, S> {
    /// Validating constructor. Repeated keys are merged.
    pub fn new(pairs: impl IntoIterator<Item = (K, S)>) -> Result<Self, DistributionError> {
        let mut support: BTreeMap<K, S> = BTreeMap::new();
        for (k, p) in pairs {
            if !(p > S::zero() && p <= S::one()) {
                return Err(DistributionError::OutOfRange(format!("{p}")));
            }
            let slot = support.entry(k).or_insert_with(S::zero);
            *slot = slot.clone() + p;
        }
        if support.is_empty() {
            return Err(DistributionError::Empty);
        }
        let total = support.values().fold(S::zero(), |a, b| a + b.clone());
        if !total.approx_eq(&S::one()) {
            return Err(DistributionError::BadSum(format!("{total}")));
        }
        Ok(Distribution { support })
    }

    /// Accumulates weights without validation; zero weights are dropped.
    /// Callers must guarantee the result sums to one.
    pub(crate) fn from_weights_unchecked(pairs: impl IntoIterator<Item = (K, S)>) -> Self {
        let mut support: BTreeMap<K, S> = BTreeMap::new();
        for (k, p) in pairs {
            if p.is_zero() {
                continue;
            }
            let slot = support.entry(k).or_insert_with(S::zero);
            *slot = slot.clone() + p;
        }
        Distribution { support }
    }

    pub fn point(k: K) -> Self {
        let mut support = BTreeMap::new();
        support.insert(k, S::one());
        Distribution { support }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &S)> {
        self.support.iter()
    }

    pub fn prob(&self, k: &K) -> S {
        self.support.get(k).cloned().unwrap_or_else(S::zero)
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &K> {
        self.support.keys()
    }

    pub fn total(&self) -> S {
        self.support.values().fold(S::zero(), |a, b| a + b.clone())
    }

    /// Pushes outcomes through `f`, merging collisions.
    pub fn map<K2: Ord + Clone + fmt::Debug>(&self, f: impl Fn(&K) -> K2) -> Distribution<K2, S> {
        Distribution::from_weights_unchecked(self.support.iter().map(|(k, p)| (f(k), p.clone())))
    }

    /// `Σ_k δ(k)·f(k)`.
    pub fn expect<E>(&self, mut f: impl FnMut(&K) -> Result<S, E>) -> Result<S, E> {
        let mut acc = S::zero();
        for (k, p) in &self.support {
            acc = acc + p.clone() * f(k)?;
        }
        Ok(acc)
    }
}

impl<K: Ord + fmt::Display, S: fmt::Display> fmt::Display for Distribution<K, S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (k, p)) in self.support.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k}: {p}")?;
        }
        write!(f, "}}")
    }
}

/// `Σ_s δ(s)·e(s)`, computed in the scalar type of the distribution.
pub fn exp_value<S: Scalar>(d: &Distribution<State, S>, e: &Expr) -> Result<S, EvalError> {
    d.expect(|s| e.eval_scalar::<S>(s))
}

/// Evaluates an expectation at a state.
pub fn eval_expectation<S: Scalar>(e: &Expr, s: &State) -> Result<S, EvalError> {
    e.eval_scalar::<S>(s)
}

/// Outcome of a pointwise comparison `e1 ≤ e2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Refinement {
    Holds,
    /// The least violating state in canonical order.
    Violated(State),
}

impl Refinement {
    pub fn holds(&self) -> bool {
        matches!(self, Refinement::Holds)
    }
}

/// Checks `e1 ≤ e2` at every listed state. States are examined in canonical
/// order whatever order the caller supplies them in.
pub fn refines<S: Scalar>(e1: &Expr, e2: &Expr, states: &[State]) -> Result<Refinement, EvalError> {
    let mut sorted: Vec<&State> = states.iter().collect();
    sorted.sort();
    for s in sorted {
        let a: S = e1.eval_scalar(s)?;
        let b: S = e2.eval_scalar(s)?;
        if a > b && !a.approx_eq(&b) {
            return Ok(Refinement::Violated(s.clone()));
        }
    }
    Ok(Refinement::Holds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;
    use crate::value::Value;
    use num_rational::BigRational;

    fn xs(v: i64) -> State {
        State::from_pairs([("x", v)])
    }

    #[test]
    fn rejects_bad_mass() {
        let bad = Distribution::<State, BigRational>::new([(xs(0), ratio(1, 2)), (xs(1), ratio(1, 3))]);
        assert!(matches!(bad, Err(DistributionError::BadSum(_))));
        let neg = Distribution::<State, BigRational>::new([(xs(0), ratio(-1, 2)), (xs(1), ratio(3, 2))]);
        assert!(matches!(neg, Err(DistributionError::OutOfRange(_))));
    }

    #[test]
    fn uniform_expectation() {
        let d = Distribution::new((0..3).map(|v| (xs(v), ratio(1, 3)))).unwrap();
        let e = Expr::var("x") / Expr::int(2);
        assert_eq!(exp_value(&d, &e).unwrap(), ratio(1, 2));
    }

    #[test]
    fn refinement_examples() {
        let member = Expr::lift(Expr::member(Expr::var("x"), vec![Value::Int(1), Value::Int(2)]));
        let half_x = Expr::var("x") / Expr::int(2);
        let states: Vec<State> = (0..3).map(xs).collect();
        assert_eq!(refines::<BigRational>(&half_x, &member, &states).unwrap(), Refinement::Holds);
        assert_eq!(
            refines::<BigRational>(&Expr::rat(1, 2), &member, &[xs(0)]).unwrap(),
            Refinement::Violated(xs(0))
        );
    }
}
