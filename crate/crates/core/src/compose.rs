//! Applying a test to a process.
//!
//! The composite runs test and process in parallel: the test moves alone on tau and
//! on success actions, the process moves alone on tau, and the two synchronise on
//! every shared visible action, the joint move becoming a tau. The composed system
//! therefore only carries tau and success labels. Probabilistic targets multiply
//! out, and only state pairs reachable from the joint start are kept.
//!
//! Pruning cuts the tau moves of success states. A composite is "omega-respecting"
//! when success states have no tau moves at all; pruning establishes that, and the
//! outcome engines assume it — without pruning, a run that has already hit success
//! could still be dragged into divergence and lose its reward.

use crate::parser::{validate_test, ModelKind, SourceModel, TestViolation};
use crate::plts::{Label, Plts, StateId};
use crate::subdist::Subdistribution;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error("alphabet mismatch: test speaks {{{test}}}, process speaks {{{process}}}")]
    AlphabetMismatch { test: String, process: String },
    #[error("`{name}` is a {found} model, expected a {expected} model")]
    WrongKind { name: String, expected: ModelKind, found: ModelKind },
    #[error("test `{name}` is malformed: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    MalformedTest { name: String, violations: Vec<TestViolation> },
    #[error("model `{model}` has no init distribution named `{name}`")]
    UnknownInit { model: String, name: String },
}

/// A composed system: a pLTS over tau and the test's success actions, its initial
/// distribution, and where each composed state came from.
#[derive(Debug, Clone)]
pub struct ComposedPlts {
    pub plts: Plts,
    pub init: Subdistribution,
    /// Composed state -> (test state name, process state name).
    pub origin: BTreeMap<StateId, (String, String)>,
}

fn pair_name(test: &Plts, t: StateId, proc: &Plts, p: StateId) -> String {
    format!("{}|{}", test.name(t), proc.name(p))
}

/// Compose a test with a process, keeping only reachable pairs.
pub fn compose(
    test: &SourceModel,
    process: &SourceModel,
    init_test: &str,
    init_process: &str,
) -> Result<ComposedPlts, ComposeError> {
    if test.kind != ModelKind::Test {
        return Err(ComposeError::WrongKind {
            name: test.name.clone(),
            expected: ModelKind::Test,
            found: test.kind,
        });
    }
    if process.kind != ModelKind::Process {
        return Err(ComposeError::WrongKind {
            name: process.name.clone(),
            expected: ModelKind::Process,
            found: process.kind,
        });
    }
    let violations = validate_test(test);
    if !violations.is_empty() {
        return Err(ComposeError::MalformedTest { name: test.name.clone(), violations });
    }
    if test.plts.visible != process.plts.visible {
        let fmt = |s: &BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(", ");
        return Err(ComposeError::AlphabetMismatch {
            test: fmt(&test.plts.visible),
            process: fmt(&process.plts.visible),
        });
    }
    let theta = test.init(init_test).ok_or_else(|| ComposeError::UnknownInit {
        model: test.name.clone(),
        name: init_test.to_owned(),
    })?;
    let delta = process.init(init_process).ok_or_else(|| ComposeError::UnknownInit {
        model: process.name.clone(),
        name: init_process.to_owned(),
    })?;

    let tp = &test.plts;
    let pp = &process.plts;
    let mut plts = Plts::new(BTreeSet::new(), tp.successes.clone());
    let mut origin = BTreeMap::new();
    let mut index: BTreeMap<(StateId, StateId), StateId> = BTreeMap::new();
    let mut work: Vec<(StateId, StateId)> = Vec::new();

    let intern =
        |plts: &mut Plts,
         origin: &mut BTreeMap<StateId, (String, String)>,
         work: &mut Vec<(StateId, StateId)>,
         index: &mut BTreeMap<(StateId, StateId), StateId>,
         t: StateId,
         p: StateId| {
            *index.entry((t, p)).or_insert_with(|| {
                let id = plts.add_state(&pair_name(tp, t, pp, p));
                origin.insert(id, (tp.name(t).to_owned(), pp.name(p).to_owned()));
                work.push((t, p));
                id
            })
        };

    // Product of two full distributions, interning the pairs it touches.
    macro_rules! product {
        ($th:expr, $dl:expr) => {{
            let mut pairs: Vec<(StateId, crate::Rational)> = Vec::new();
            for (t, wt) in $th.iter() {
                for (p, wp) in $dl.iter() {
                    let id = intern(&mut plts, &mut origin, &mut work, &mut index, t, p);
                    pairs.push((id, wt * wp));
                }
            }
            Subdistribution::from_pairs(pairs).expect("product of full distributions")
        }};
    }

    let init = product!(theta, delta);
    while let Some((t, p)) = work.pop() {
        let source = index[&(t, p)];
        let add = |plts: &mut Plts, label: Label, target: Subdistribution| {
            plts.add_transition(source, label, target).expect("composed transition");
        };
        // Test moves alone on anything outside the shared alphabet (tau, success).
        for &i in tp.outgoing(t) {
            let tr = tp.transition(i).clone();
            match &tr.label {
                Label::Tau | Label::Success(_) => {
                    let target = product!(&tr.target, &Subdistribution::point(p));
                    add(&mut plts, tr.label.clone(), target);
                }
                Label::Visible(_) => {}
            }
        }
        // Process moves alone on tau.
        for &j in pp.outgoing(p) {
            let tr = pp.transition(j).clone();
            if tr.label == Label::Tau {
                let target = product!(&Subdistribution::point(t), &tr.target);
                add(&mut plts, Label::Tau, target);
            }
        }
        // Synchronisation on each visible action, relabelled to tau.
        for &i in tp.outgoing(t) {
            let ti = tp.transition(i).clone();
            let Label::Visible(a) = &ti.label else { continue };
            for &j in pp.outgoing(p) {
                let pj = pp.transition(j).clone();
                if pj.label == Label::Visible(a.clone()) {
                    let target = product!(&ti.target, &pj.target);
                    add(&mut plts, Label::Tau, target);
                }
            }
        }
    }

    Ok(ComposedPlts { plts, init, origin })
}

/// Drop every tau transition leaving a success-enabled state.
pub fn prune(c: &ComposedPlts) -> ComposedPlts {
    let mut plts = Plts::new(c.plts.visible.clone(), c.plts.successes.clone());
    for s in c.plts.states() {
        plts.add_state(c.plts.name(s));
    }
    for s in c.plts.states() {
        let success_here = !c.plts.enabled_successes(s).is_empty();
        for &i in c.plts.outgoing(s) {
            let tr = c.plts.transition(i);
            if success_here && tr.label == Label::Tau {
                continue;
            }
            plts.add_transition(tr.source, tr.label.clone(), tr.target.clone())
                .expect("copying a valid transition");
        }
    }
    ComposedPlts { plts, init: c.init.clone(), origin: c.origin.clone() }
}

/// True when no success-enabled state retains a tau move.
pub fn is_omega_respecting(p: &Plts) -> bool {
    p.states()
        .all(|s| p.enabled_successes(s).is_empty() || p.is_stable(s))
}

impl ComposedPlts {
    /// Look up the composed state for a (test state, process state) pair.
    pub fn pair(&self, test_state: &str, process_state: &str) -> Option<StateId> {
        self.plts.state(&format!("{}|{}", test_state, process_state))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_model;
    use crate::rat;

    fn model(text: &str, kind: ModelKind) -> SourceModel {
        parse_model(text, kind).unwrap()
    }

    fn ta() -> SourceModel {
        model(
            "model test ta\nalphabet a\nsuccess w\nstate t0 { a -> { 1 t1 } }\nstate t1 { w -> { 1 t2 } }\nstate t2 { }\ninit main = { 1 t0 }\n",
            ModelKind::Test,
        )
    }

    #[test]
    fn synchronisation_becomes_tau() {
        let p = model(
            "model process one\nalphabet a\nstate g0 { a -> { 1 g1 } }\nstate g1 { }\ninit main = { 1 g0 }\n",
            ModelKind::Process,
        );
        let c = compose(&ta(), &p, "main", "main").unwrap();
        let s0 = c.pair("t0", "g0").unwrap();
        let s1 = c.pair("t1", "g1").unwrap();
        let out = c.plts.outgoing(s0);
        assert_eq!(out.len(), 1);
        let tr = c.plts.transition(out[0]);
        assert_eq!(tr.label, Label::Tau);
        assert_eq!(tr.target, Subdistribution::point(s1));
        assert!(c.plts.enables(s1, &Label::Success("w".into())));
        assert_eq!(c.init.get(s0), rat(1, 1));
        // the post-success state is retained even though nothing inspects it
        assert!(c.pair("t2", "g1").is_some());
    }

    #[test]
    fn process_tau_interleaves_and_test_waits() {
        let p = model(
            "model process d\nalphabet a\nstate d { tau -> { 1 d } }\ninit main = { 1 d }\n",
            ModelKind::Process,
        );
        let c = compose(&ta(), &p, "main", "main").unwrap();
        let s0 = c.pair("t0", "d").unwrap();
        let out = c.plts.outgoing(s0);
        // no synchronisation partner for `a`, so only the process tau self-loop
        assert_eq!(out.len(), 1);
        assert_eq!(c.plts.transition(out[0]).target, Subdistribution::point(s0));
    }

    #[test]
    fn probabilistic_targets_multiply() {
        let t = model(
            "model test t\nalphabet a\nsuccess w\nstate t0 { a -> { 1/2 tw, 1/2 tx } }\nstate tw { w -> { 1 te } }\nstate tx { }\nstate te { }\ninit main = { 1 t0 }\n",
            ModelKind::Test,
        );
        let p = model(
            "model process p\nalphabet a\nstate g0 { a -> { 1/3 g0, 2/3 g1 } }\nstate g1 { }\ninit main = { 1 g0 }\n",
            ModelKind::Process,
        );
        let c = compose(&t, &p, "main", "main").unwrap();
        let s0 = c.pair("t0", "g0").unwrap();
        let tr = c.plts.transition(c.plts.outgoing(s0)[0]);
        assert_eq!(tr.target.get(c.pair("tw", "g0").unwrap()), rat(1, 6));
        assert_eq!(tr.target.get(c.pair("tw", "g1").unwrap()), rat(1, 3));
        assert_eq!(tr.target.get(c.pair("tx", "g0").unwrap()), rat(1, 6));
        assert_eq!(tr.target.get(c.pair("tx", "g1").unwrap()), rat(1, 3));
        assert_eq!(tr.target.mass(), rat(1, 1));
    }

    #[test]
    fn alphabets_must_agree() {
        let p = model(
            "model process p\nalphabet b\nstate s { }\ninit main = { 1 s }\n",
            ModelKind::Process,
        );
        assert!(matches!(
            compose(&ta(), &p, "main", "main"),
            Err(ComposeError::AlphabetMismatch { .. })
        ));
    }

    #[test]
    fn malformed_tests_are_refused() {
        let bad = model(
            "model test bad\nalphabet a\nsuccess w1, w2\nstate t { w1 -> { 1 e }; w2 -> { 1 e } }\nstate e { }\ninit main = { 1 t }\n",
            ModelKind::Test,
        );
        let p = model(
            "model process p\nalphabet a\nstate s { }\ninit main = { 1 s }\n",
            ModelKind::Process,
        );
        assert!(matches!(
            compose(&bad, &p, "main", "main"),
            Err(ComposeError::MalformedTest { .. })
        ));
    }

    #[test]
    fn pruning_cuts_tau_under_success() {
        // After synchronising, the success state still carries the process's
        // tau loop; pruning removes it and nothing else.
        let p = model(
            "model process p\nalphabet a\nstate p0 { a -> { 1 p1 } }\nstate p1 { tau -> { 1 p1 } }\ninit main = { 1 p0 }\n",
            ModelKind::Process,
        );
        let c = compose(&ta(), &p, "main", "main").unwrap();
        let s1 = c.pair("t1", "p1").unwrap();
        assert!(!c.plts.is_stable(s1));
        assert!(!is_omega_respecting(&c.plts));
        let pruned = prune(&c);
        let s1p = pruned.pair("t1", "p1").unwrap();
        assert!(pruned.plts.is_stable(s1p));
        assert!(pruned.plts.enables(s1p, &Label::Success("w".into())));
        assert!(is_omega_respecting(&pruned.plts));
        // non-success states keep their tau moves
        let s0p = pruned.pair("t0", "p0").unwrap();
        assert_eq!(pruned.plts.outgoing(s0p).len(), 1);
    }
}
