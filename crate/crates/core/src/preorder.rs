//! The testing preorders, decided geometrically.
//!
//! Fix a test and compare the outcome polytopes `A` of the left process and `B`
//! of the right. The six preorder kinds are containments of `A` and `B` up to an
//! orthant shift:
//!
//! * may (probabilistic = nonnegative-reward): every point of `A` is dominated by
//!   a point of `B` — `A ⊆ hull(B)` sagged along the negative orthant;
//! * must (probabilistic = nonnegative-reward): every point of `B` dominates a
//!   point of `A` — `B ⊆ hull(A)` raised along the positive orthant;
//! * real-reward may / must: the containments on the nose, no shift.
//!
//! Equivalently, may says every nonnegative reward tuple's best-case payoff can
//! only improve from left to right, must says the worst-case payoff can only
//! improve, and the real-reward forms quantify over tuples of either sign. When a
//! containment fails, the LP's infeasibility certificate *is* such a reward tuple:
//! it is normalised into the mode's box and handed back with both payoffs, so a
//! sceptic can replay `left > right` with plain dot products.

use crate::parser::SourceModel;
use crate::polytope::{OutcomePolytope, Shift};
use crate::resolution::{EngineError, EngineOpts};
use crate::Rational;
use num_traits::{Signed, Zero};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreorderKind {
    Pmay,
    Pmust,
    Nrmay,
    Nrmust,
    Rrmay,
    Rrmust,
}

impl PreorderKind {
    pub const ALL: [PreorderKind; 6] = [
        PreorderKind::Pmay,
        PreorderKind::Pmust,
        PreorderKind::Nrmay,
        PreorderKind::Nrmust,
        PreorderKind::Rrmay,
        PreorderKind::Rrmust,
    ];

    pub fn is_must(self) -> bool {
        matches!(self, PreorderKind::Pmust | PreorderKind::Nrmust | PreorderKind::Rrmust)
    }

    /// The reward sign discipline this kind quantifies over.
    pub fn mode(self) -> RewardMode {
        match self {
            PreorderKind::Rrmay | PreorderKind::Rrmust => RewardMode::Real,
            _ => RewardMode::Nonnegative,
        }
    }
}

impl fmt::Display for PreorderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PreorderKind::Pmay => "pmay",
            PreorderKind::Pmust => "pmust",
            PreorderKind::Nrmay => "nrmay",
            PreorderKind::Nrmust => "nrmust",
            PreorderKind::Rrmay => "rrmay",
            PreorderKind::Rrmust => "rrmust",
        })
    }
}

impl std::str::FromStr for PreorderKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pmay" => Ok(PreorderKind::Pmay),
            "pmust" => Ok(PreorderKind::Pmust),
            "nrmay" => Ok(PreorderKind::Nrmay),
            "nrmust" => Ok(PreorderKind::Nrmust),
            "rrmay" => Ok(PreorderKind::Rrmay),
            "rrmust" => Ok(PreorderKind::Rrmust),
            other => Err(format!("unknown preorder kind `{other}`")),
        }
    }
}

/// Whether rewards may be negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardMode {
    /// Components in [0, 1].
    Nonnegative,
    /// Components in [-1, 1].
    Real,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RewardError {
    #[error("reward component {value} at position {index} is outside the mode's box")]
    OutOfRange { index: usize, value: Rational },
    #[error("{values} reward components for {omegas} success actions")]
    DimensionMismatch { values: usize, omegas: usize },
}

/// One reward per success action, range-checked against its mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewardTuple {
    pub omegas: Vec<String>,
    pub mode: RewardMode,
    values: Vec<Rational>,
}

impl RewardTuple {
    pub fn new(
        omegas: Vec<String>,
        mode: RewardMode,
        values: Vec<Rational>,
    ) -> Result<Self, RewardError> {
        if values.len() != omegas.len() {
            return Err(RewardError::DimensionMismatch {
                values: values.len(),
                omegas: omegas.len(),
            });
        }
        let one = Rational::from_integer(1.into());
        for (index, v) in values.iter().enumerate() {
            let low = match mode {
                RewardMode::Nonnegative => Rational::zero(),
                RewardMode::Real => -one.clone(),
            };
            if *v < low || *v > one {
                return Err(RewardError::OutOfRange { index, value: v.clone() });
            }
        }
        Ok(RewardTuple { omegas, mode, values })
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }
}

impl fmt::Display for RewardTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .omegas
            .iter()
            .zip(&self.values)
            .map(|(w, v)| format!("{w}: {v}"))
            .collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// A payoff together with the vertex attaining it.
pub type PayoffAt<'p> = (Rational, &'p [Rational]);

/// Smallest and largest payoff of a reward tuple over a polytope, each with an
/// attaining vertex.
pub fn reward_extremum<'p>(
    h: &RewardTuple,
    p: &'p OutcomePolytope,
) -> (PayoffAt<'p>, PayoffAt<'p>) {
    assert_eq!(h.omegas, p.omegas(), "reward tuple and polytope disagree on success actions");
    let ((lo, vlo), (hi, vhi)) = p.extrema(&h.values);
    ((lo, vlo.as_slice()), (hi, vhi.as_slice()))
}

/// A replayable refutation: a reward tuple under which the left process beats the
/// right one, against the direction the preorder demands.
#[derive(Debug, Clone)]
pub struct Counterexample {
    /// Which test separated the processes (absent when comparing raw polytopes).
    pub test: Option<String>,
    pub h: RewardTuple,
    /// For may kinds the best-case payoffs, for must kinds the worst-case ones.
    pub left_payoff: Rational,
    pub right_payoff: Rational,
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(t) = &self.test {
            write!(f, "test `{t}`, ")?;
        }
        write!(
            f,
            "reward {} gives left {} > right {}",
            self.h, self.left_payoff, self.right_payoff
        )
    }
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub holds: bool,
    pub counterexample: Option<Counterexample>,
}

/// Decide one preorder kind between two outcome polytopes over the same test.
pub fn compare_outcomes(
    kind: PreorderKind,
    left: &OutcomePolytope,
    right: &OutcomePolytope,
) -> Verdict {
    assert_eq!(left.omegas(), right.omegas());
    // Which polytope's vertices are scanned against which (shifted) hull, and
    // whether the certificate needs its sign flipped to become a reward tuple.
    let (scan, hull, shift, negate) = match kind {
        PreorderKind::Pmay | PreorderKind::Nrmay => (left, right, Shift::MinusOrthant, false),
        PreorderKind::Pmust | PreorderKind::Nrmust => (right, left, Shift::PlusOrthant, true),
        PreorderKind::Rrmay => (left, right, Shift::Exact, false),
        PreorderKind::Rrmust => (right, left, Shift::Exact, true),
    };
    match hull.contains(scan, shift) {
        Ok(()) => Verdict { holds: true, counterexample: None },
        Err((_, ev)) => {
            let mut h = ev.g;
            if negate {
                for x in &mut h {
                    *x = -x.clone();
                }
            }
            // Positive scaling preserves the violated inequality; scale the
            // largest component to magnitude 1 so the tuple sits in the mode's box.
            let scale = h.iter().map(|x| x.abs()).max().expect("certificates are nonzero");
            assert!(!scale.is_zero(), "a zero functional separates nothing");
            for x in &mut h {
                *x /= &scale;
            }
            let tuple = RewardTuple::new(left.omegas().to_vec(), kind.mode(), h)
                .expect("scaled certificate fits the box");
            let payoff = |p: &OutcomePolytope| {
                let ((lo, _), (hi, _)) = p.extrema(tuple.values());
                if kind.is_must() {
                    lo
                } else {
                    hi
                }
            };
            let left_payoff = payoff(left);
            let right_payoff = payoff(right);
            debug_assert!(left_payoff > right_payoff, "counterexample must replay");
            Verdict {
                holds: false,
                counterexample: Some(Counterexample {
                    test: None,
                    h: tuple,
                    left_payoff,
                    right_payoff,
                }),
            }
        }
    }
}

/// Which outcome engine a suite comparison runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Resolution,
    Derivation,
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "resolution" => Ok(Method::Resolution),
            "derivation" => Ok(Method::Derivation),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

pub fn outcomes(
    method: Method,
    test: &SourceModel,
    process: &SourceModel,
    opts: &EngineOpts,
) -> Result<crate::resolution::EngineRun, EngineError> {
    let (t_init, _) = test.default_init();
    let (p_init, _) = process.default_init();
    match method {
        Method::Resolution => {
            crate::resolution::apply_resolution_based(test, process, t_init, p_init, opts)
        }
        Method::Derivation => {
            crate::derivation::apply_derivation_based(test, process, t_init, p_init, opts)
        }
    }
}

/// Verdict of a preorder over a whole test suite: per-test detail plus the
/// conjunction.
#[derive(Debug, Clone)]
pub struct SuiteVerdict {
    pub holds: bool,
    pub per_test: Vec<(String, Verdict)>,
}

/// Run every test in the suite against both processes and decide the preorder.
/// Tests with a failing verdict carry their counterexample, tagged with the
/// test's name; the suite holds when every test does.
pub fn preorder_on_suite(
    kind: PreorderKind,
    left: &SourceModel,
    right: &SourceModel,
    tests: &[SourceModel],
    method: Method,
    opts: &EngineOpts,
) -> Result<SuiteVerdict, EngineError> {
    let mut per_test = Vec::new();
    let mut holds = true;
    for test in tests {
        let a = outcomes(method, test, left, opts)?;
        let b = outcomes(method, test, right, opts)?;
        let mut verdict = compare_outcomes(kind, &a.polytope, &b.polytope);
        if let Some(ce) = &mut verdict.counterexample {
            ce.test = Some(test.name.clone());
        }
        holds &= verdict.holds;
        per_test.push((test.name.clone(), verdict));
    }
    Ok(SuiteVerdict { holds, per_test })
}
