//! Probabilistic labelled transition systems.
//!
//! A pLTS has finitely many named states and finitely many transitions
//! `state --label--> distribution`, where every transition target is a full
//! probability distribution (mass exactly 1). Labels are visible actions, the
//! internal action tau, or success actions; success actions only appear in tests
//! and in compositions.

use crate::subdist::Subdistribution;
use crate::Rational;
use num_traits::One;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

/// Opaque state handle, valid only within the pLTS that issued it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub(crate) u32);

impl StateId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Transition label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    /// The internal action.
    Tau,
    /// An ordinary visible action from the alphabet.
    Visible(String),
    /// A success action (tests only; by convention the name starts with `w`).
    Success(String),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Tau => write!(f, "tau"),
            Label::Visible(a) | Label::Success(a) => write!(f, "{}", a),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub source: StateId,
    pub label: Label,
    pub target: Subdistribution,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PltsError {
    #[error("transition target has mass {mass}, expected exactly 1")]
    TargetNotFull { mass: Rational },
    #[error("label {label} is not covered by the alphabet of this system")]
    LabelOutsideAlphabet { label: String },
    #[error("state id does not belong to this system")]
    ForeignState,
}

/// A finitary pLTS: interned state names, an alphabet split into visible and
/// success actions, and a transition table indexed per source state.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Plts {
    names: Vec<String>,
    by_name: BTreeMap<String, StateId>,
    pub visible: BTreeSet<String>,
    pub successes: BTreeSet<String>,
    transitions: Vec<Transition>,
    outgoing: Vec<Vec<usize>>,
}

impl Plts {
    pub fn new(visible: BTreeSet<String>, successes: BTreeSet<String>) -> Self {
        Plts { visible, successes, ..Default::default() }
    }

    /// Intern a state name, returning the existing id on repeats.
    pub fn add_state(&mut self, name: &str) -> StateId {
        if let Some(&id) = self.by_name.get(name) {
            return id;
        }
        let id = StateId(self.names.len() as u32);
        self.names.push(name.to_owned());
        self.by_name.insert(name.to_owned(), id);
        self.outgoing.push(Vec::new());
        id
    }

    pub fn state(&self, name: &str) -> Option<StateId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: StateId) -> &str {
        &self.names[id.index()]
    }

    pub fn n_states(&self) -> usize {
        self.names.len()
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.names.len() as u32).map(StateId)
    }

    pub fn contains(&self, id: StateId) -> bool {
        id.index() < self.names.len()
    }

    pub fn add_transition(
        &mut self,
        source: StateId,
        label: Label,
        target: Subdistribution,
    ) -> Result<usize, PltsError> {
        if !self.contains(source) || target.support().any(|s| !self.contains(s)) {
            return Err(PltsError::ForeignState);
        }
        if !target.mass().is_one() {
            return Err(PltsError::TargetNotFull { mass: target.mass() });
        }
        match &label {
            Label::Tau => {}
            Label::Visible(a) => {
                if !self.visible.contains(a) {
                    return Err(PltsError::LabelOutsideAlphabet { label: a.clone() });
                }
            }
            Label::Success(w) => {
                if !self.successes.contains(w) {
                    return Err(PltsError::LabelOutsideAlphabet { label: w.clone() });
                }
            }
        }
        // Transitions form a set: an exact repeat collapses onto the original.
        let tr = Transition { source, label, target };
        if let Some(&i) = self.outgoing[source.index()].iter().find(|&&i| self.transitions[i] == tr)
        {
            return Ok(i);
        }
        let idx = self.transitions.len();
        self.transitions.push(tr);
        self.outgoing[source.index()].push(idx);
        Ok(idx)
    }

    pub fn transition(&self, idx: usize) -> &Transition {
        &self.transitions[idx]
    }

    pub fn n_transitions(&self) -> usize {
        self.transitions.len()
    }

    /// Indices of all transitions leaving `s`.
    pub fn outgoing(&self, s: StateId) -> &[usize] {
        &self.outgoing[s.index()]
    }

    /// Indices of the transitions leaving `s` with exactly this label.
    pub fn outgoing_labelled<'a>(&'a self, s: StateId, label: &'a Label) -> Vec<usize> {
        self.outgoing[s.index()]
            .iter()
            .copied()
            .filter(|&i| &self.transitions[i].label == label)
            .collect()
    }

    pub fn tau_transitions(&self, s: StateId) -> Vec<usize> {
        self.outgoing_labelled(s, &Label::Tau)
    }

    /// A state is stable when it has no tau transition.
    pub fn is_stable(&self, s: StateId) -> bool {
        self.outgoing[s.index()].iter().all(|&i| self.transitions[i].label != Label::Tau)
    }

    pub fn enables(&self, s: StateId, label: &Label) -> bool {
        self.outgoing[s.index()].iter().any(|&i| &self.transitions[i].label == label)
    }

    /// Success labels enabled at `s`, deduplicated.
    pub fn enabled_successes(&self, s: StateId) -> BTreeSet<&str> {
        self.outgoing[s.index()]
            .iter()
            .filter_map(|&i| match &self.transitions[i].label {
                Label::Success(w) => Some(w.as_str()),
                _ => None,
            })
            .collect()
    }

    /// Visible actions enabled at `s`.
    pub fn enabled_visible(&self, s: StateId) -> BTreeSet<&str> {
        self.outgoing[s.index()]
            .iter()
            .filter_map(|&i| match &self.transitions[i].label {
                Label::Visible(a) => Some(a.as_str()),
                _ => None,
            })
            .collect()
    }

    /// States reachable from the support of `from` along any transitions.
    pub fn reachable(&self, from: &Subdistribution) -> BTreeSet<StateId> {
        self.reachable_by(from, |_| true)
    }

    /// States reachable from the support of `from` along tau transitions only.
    pub fn tau_reachable(&self, from: &Subdistribution) -> BTreeSet<StateId> {
        self.reachable_by(from, |l| *l == Label::Tau)
    }

    fn reachable_by(
        &self,
        from: &Subdistribution,
        keep: impl Fn(&Label) -> bool,
    ) -> BTreeSet<StateId> {
        let mut seen: BTreeSet<StateId> = from.support().collect();
        let mut work: Vec<StateId> = seen.iter().copied().collect();
        while let Some(s) = work.pop() {
            for &i in self.outgoing(s) {
                let tr = &self.transitions[i];
                if keep(&tr.label) {
                    for t in tr.target.support() {
                        if seen.insert(t) {
                            work.push(t);
                        }
                    }
                }
            }
        }
        seen
    }

    /// True when no state has two transitions carrying the same label.
    pub fn is_deterministic(&self) -> bool {
        self.states().all(|s| {
            let mut seen: BTreeSet<&Label> = BTreeSet::new();
            self.outgoing(s).iter().all(|&i| seen.insert(&self.transitions[i].label))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat;
    use crate::subdist::Subdistribution;

    fn point(s: StateId) -> Subdistribution {
        Subdistribution::point(s)
    }

    #[test]
    fn interning_is_idempotent() {
        let mut p = Plts::new(BTreeSet::new(), BTreeSet::new());
        let a = p.add_state("x");
        let b = p.add_state("x");
        assert_eq!(a, b);
        assert_eq!(p.n_states(), 1);
        assert_eq!(p.name(a), "x");
    }

    #[test]
    fn rejects_subfull_targets() {
        let mut p = Plts::new(BTreeSet::new(), BTreeSet::new());
        let s = p.add_state("s");
        let t = p.add_state("t");
        let half = Subdistribution::from_pairs([(t, rat(1, 2))]).unwrap();
        let err = p.add_transition(s, Label::Tau, half).unwrap_err();
        assert_eq!(err, PltsError::TargetNotFull { mass: rat(1, 2) });
    }

    #[test]
    fn rejects_undeclared_labels() {
        let mut p = Plts::new(BTreeSet::from(["a".to_owned()]), BTreeSet::new());
        let s = p.add_state("s");
        let err = p
            .add_transition(s, Label::Visible("b".into()), point(s))
            .unwrap_err();
        assert!(matches!(err, PltsError::LabelOutsideAlphabet { .. }));
    }

    #[test]
    fn stability_and_reachability() {
        let mut p = Plts::new(BTreeSet::from(["a".to_owned()]), BTreeSet::new());
        let s = p.add_state("s");
        let t = p.add_state("t");
        let u = p.add_state("u");
        p.add_transition(s, Label::Tau, point(t)).unwrap();
        p.add_transition(t, Label::Visible("a".into()), point(u)).unwrap();
        assert!(!p.is_stable(s));
        assert!(p.is_stable(t));
        let tau_only = p.tau_reachable(&point(s));
        assert!(tau_only.contains(&t) && !tau_only.contains(&u));
        assert!(p.reachable(&point(s)).contains(&u));
        assert!(p.is_deterministic());
    }
}
