//! Analysis of probabilistic abstract machines.
//!
//! Machines are written in a small guarded-command language with
//! probabilistic and demonic choice. The crate provides:
//!
//! * expectations over program states and their exact evaluation;
//! * a weakest pre-expectation transformer and annotation checks;
//! * explicit MDP construction with bounded extremal values;
//! * safety checks by bounded model checking and by inductivity;
//! * failure-mode analysis over a monitored product MDP.
//!
//! Every analysis is generic over [`Scalar`]. The exact route uses
//! [`Rational`]; `f64` gives an approximate cross-check.

pub mod distribution;
pub mod export;
pub mod expr;
pub mod failure;
pub mod lang;
pub mod mdp;
pub mod models;
pub mod report;
pub mod safety;
pub mod scalar;
pub mod semantics;
#[cfg(feature = "testkit")]
pub mod testkit;
pub mod value;
pub mod wp;

pub use distribution::{eval_expectation, exp_value, refines, Distribution, Refinement};
pub use expr::{Expectation, Expr, Predicate};
pub use scalar::Scalar;
pub use value::{Name, State, Value};

/// Exact rational scalar used by default.
pub type Rational = num_rational::BigRational;

/// Explicit MDP with exact transition probabilities.
pub type ExactMdp = mdp::ExplicitMdp<Rational>;
/// Explicit MDP with floating-point transition probabilities.
pub type FloatMdp = mdp::ExplicitMdp<f64>;
/// Exact state distribution.
pub type StateDistribution = Distribution<State, Rational>;
