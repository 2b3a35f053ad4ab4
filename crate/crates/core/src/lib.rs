//! Workbench for comparing probabilistic processes by testing.
//!
//! A process and a test are both probabilistic labelled transition systems; running a
//! test against a process means composing the two, resolving the nondeterminism of the
//! composite, and reading off the probability with which each success action fires.
//! The set of outcomes a composite can produce forms a convex polytope of vectors,
//! and the interesting questions — may/must testing, reward-weighted comparison,
//! failure simulation — all reduce to exact geometric checks on those polytopes.
//!
//! Everything here computes with arbitrary-precision rationals. The verdicts rest on
//! hull membership and LP feasibility, which need exact sign decisions; rounding at
//! any point would make the answers untrustworthy.
//!
//! Module map:
//! * [`subdist`], [`plts`], [`lifting`] — distributions, transition systems, lifted moves
//! * [`lp`] — exact simplex feasibility with Farkas certificates, and linear solving
//! * [`parser`] — the model file format
//! * [`compose`] — test/process composition and success-state pruning
//! * [`resolution`] — scheduler enumeration and the value functional
//! * [`derivation`] — weak derivations, extreme derivatives, convergence
//! * [`polytope`] — outcome vectors and canonical hulls
//! * [`preorder`] — the six testing preorders with replayable counterexamples
//! * [`failsim`] — failure simulation checking and candidate search
//! * [`corpus`] — the bundled example models and their pinned expected results

pub mod compose;
pub mod corpus;
pub mod derivation;
pub mod failsim;
pub mod lifting;
pub mod resolution;
pub mod lp;
pub mod parser;
pub mod plts;
pub mod polytope;
pub mod preorder;
pub mod subdist;

/// Scalar used everywhere: arbitrary-precision rational.
pub type Rational = num_rational::BigRational;

/// Shorthand for building a rational from machine integers.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(num.into(), den.into())
}
