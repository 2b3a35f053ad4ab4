//! Subdistributions over pLTS states.
//!
//! A subdistribution assigns positive rational weight to finitely many states with
//! total mass at most 1. The empty subdistribution (mass 0) is a legal value and is
//! how diverging computations surface: mass that internally loops forever simply
//! vanishes from the limit. Zero entries are stripped on construction so equality
//! is plain structural equality.

use crate::plts::StateId;
use crate::Rational;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MassError {
    #[error("weight for a state is negative")]
    NegativeWeight,
    #[error("total mass {mass} exceeds 1")]
    Overflow { mass: Rational },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Subdistribution {
    weights: BTreeMap<StateId, Rational>,
}

impl Subdistribution {
    /// The empty subdistribution, mass 0.
    pub fn empty() -> Self {
        Subdistribution::default()
    }

    /// Point distribution: all mass on one state.
    pub fn point(s: StateId) -> Self {
        Subdistribution { weights: BTreeMap::from([(s, Rational::one())]) }
    }

    /// Build from state/weight pairs. Repeated states accumulate; zero entries are
    /// dropped; negative weights and mass above 1 are rejected.
    pub fn from_pairs(
        pairs: impl IntoIterator<Item = (StateId, Rational)>,
    ) -> Result<Self, MassError> {
        let mut weights: BTreeMap<StateId, Rational> = BTreeMap::new();
        for (s, w) in pairs {
            if w.is_negative() {
                return Err(MassError::NegativeWeight);
            }
            if w.is_zero() {
                continue;
            }
            *weights.entry(s).or_insert_with(Rational::zero) += w;
        }
        let d = Subdistribution { weights };
        let mass = d.mass();
        if mass > Rational::one() {
            return Err(MassError::Overflow { mass });
        }
        Ok(d)
    }

    pub fn mass(&self) -> Rational {
        self.weights.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Weight of `s`, zero when absent.
    pub fn get(&self, s: StateId) -> Rational {
        self.weights.get(&s).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn support(&self) -> impl Iterator<Item = StateId> + '_ {
        self.weights.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (StateId, &Rational)> {
        self.weights.iter().map(|(s, w)| (*s, w))
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    /// Convex-ish combination `sum p_i * d_i`. The caller must keep the total mass
    /// within 1; coefficients must be nonnegative.
    pub fn combine(parts: &[(Rational, &Subdistribution)]) -> Result<Self, MassError> {
        let mut pairs: Vec<(StateId, Rational)> = Vec::new();
        for (p, d) in parts {
            if p.is_negative() {
                return Err(MassError::NegativeWeight);
            }
            for (s, w) in d.iter() {
                pairs.push((s, p * w));
            }
        }
        Subdistribution::from_pairs(pairs)
    }

    /// Scale every weight by a nonnegative factor, erroring if mass leaves [0, 1].
    pub fn scale(&self, factor: &Rational) -> Result<Self, MassError> {
        Subdistribution::combine(&[(factor.clone(), self)])
    }

    /// Expected value of a vector-valued function over the states, as a vector of
    /// the given dimension. States outside the support are not consulted.
    pub fn expected_value(
        &self,
        dim: usize,
        f: impl Fn(StateId) -> Vec<Rational>,
    ) -> Vec<Rational> {
        let mut acc = vec![Rational::zero(); dim];
        for (s, w) in self.iter() {
            let v = f(s);
            assert_eq!(v.len(), dim, "value function returned wrong dimension");
            for (a, x) in acc.iter_mut().zip(v) {
                *a += w * x;
            }
        }
        acc
    }

    /// Push the subdistribution forward through a state map, merging collisions.
    pub fn image(&self, f: &BTreeMap<StateId, StateId>) -> Self {
        let mut weights: BTreeMap<StateId, Rational> = BTreeMap::new();
        for (s, w) in self.iter() {
            let t = *f.get(&s).unwrap_or(&s);
            *weights.entry(t).or_insert_with(Rational::zero) += w;
        }
        Subdistribution { weights }
    }

    /// Restrict to the states satisfying the predicate.
    pub fn filter(&self, keep: impl Fn(StateId) -> bool) -> Self {
        Subdistribution {
            weights: self
                .weights
                .iter()
                .filter(|(s, _)| keep(**s))
                .map(|(s, w)| (*s, w.clone()))
                .collect(),
        }
    }

    /// Pointwise sum; errors if the result would exceed mass 1.
    pub fn add(&self, other: &Subdistribution) -> Result<Self, MassError> {
        Subdistribution::combine(&[(Rational::one(), self), (Rational::one(), other)])
    }

    /// Pointwise comparison: true when `self(s) <= other(s)` for every state.
    pub fn le_pointwise(&self, other: &Subdistribution) -> bool {
        self.iter().all(|(s, w)| *w <= other.get(s))
    }
}
