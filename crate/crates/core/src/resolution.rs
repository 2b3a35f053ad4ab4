//! Resolving nondeterminism and reading off success probabilities.
//!
//! A composed system usually has states with several tau moves. A resolution fixes
//! those choices: it is a deterministic system together with a map back onto the
//! composite, such that transitions project faithfully and no enabled label is
//! dropped. The memoryless resolutions — one fixed choice per state — are the
//! extreme points: every more elaborate (history-dependent, interpolating)
//! resolution produces a value inside their convex hull, which is why enumerating
//! them is enough to build the whole outcome polytope.
//!
//! The value of a deterministic system assigns each state, per success action, the
//! probability of eventually firing it: 1 where it is enabled, the expected value
//! across the tau move where one exists, 0 at dead ends. That description has many
//! fixed points when tau cycles are present; the one meant here is the least. It is
//! computed exactly: states that cannot reach the success action along kept tau
//! moves are pinned to 0, and on the rest the recursion becomes a linear system
//! whose matrix is nonsingular precisely because success is reachable from
//! everywhere in it.

use crate::compose::{ComposeError, ComposedPlts};
use crate::lp::solve_linear;
use crate::parser::SourceModel;
use crate::plts::{Label, Plts, StateId};
use crate::polytope::OutcomePolytope;
use crate::subdist::Subdistribution;
use crate::Rational;
use num_traits::Zero;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error("more than {bound} schedulers; raise the bound to enumerate anyway")]
    TooManySchedulers { bound: u64 },
    #[error("state `{state}` has several tau transitions; resolve the system first")]
    TauNondeterminism { state: String },
    #[error("scheduler leaves unstable state `{state}` without a choice")]
    IncompleteScheduler { state: String },
    #[error("state `{state}` is unstable; outcomes are read only off stopped mass")]
    NotStable { state: String },
}

/// What a scheduler does at a state: follow one specific tau transition, or stop.
/// Stopping is only legal at stable states — a resolution may not suppress an
/// enabled tau.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Choice {
    Take(usize),
    Halt,
}

/// One fixed choice per state.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct MemorylessScheduler {
    pub choices: BTreeMap<StateId, Choice>,
}

impl MemorylessScheduler {
    /// The tau transition kept at `s`, if any.
    pub fn kept_tau(&self, s: StateId) -> Option<usize> {
        match self.choices.get(&s) {
            Some(&Choice::Take(i)) => Some(i),
            _ => None,
        }
    }
}

/// Options shared by both outcome engines.
#[derive(Debug, Clone)]
pub struct EngineOpts {
    /// Abort enumeration once this many schedulers have been produced.
    pub max_schedulers: u64,
}

impl Default for EngineOpts {
    fn default() -> Self {
        EngineOpts { max_schedulers: 1 << 20 }
    }
}

/// All memoryless schedulers of `c` that differ somewhere it matters.
///
/// The enumeration only branches at states that are tau-reachable from the start
/// under the choices already made: choices at unreachable states cannot influence
/// anything, so they are filled uniformly (first tau option) instead of multiplied
/// out. Stable states map to `Halt`. The result is deduplicated and sorted, so its
/// length is a meaningful count of genuinely distinct schedulers.
pub fn enumerate_schedulers(
    c: &ComposedPlts,
    opts: &EngineOpts,
) -> Result<Vec<MemorylessScheduler>, EngineError> {
    fn explore(
        p: &Plts,
        init: &Subdistribution,
        assigned: &mut BTreeMap<StateId, usize>,
        emitted: &mut u64,
        out: &mut BTreeSet<BTreeMap<StateId, usize>>,
        bound: u64,
    ) -> Result<(), EngineError> {
        // Which states can the run reach along tau under the current choices, and
        // is any of them still waiting for one?
        let mut seen: BTreeSet<StateId> = init.support().collect();
        let mut stack: Vec<StateId> = seen.iter().copied().collect();
        let mut pending: Option<StateId> = None;
        while let Some(s) = stack.pop() {
            if p.tau_transitions(s).is_empty() {
                continue;
            }
            match assigned.get(&s) {
                Some(&i) => {
                    for t in p.transition(i).target.support() {
                        if seen.insert(t) {
                            stack.push(t);
                        }
                    }
                }
                None => {
                    pending = Some(match pending {
                        Some(q) if q < s => q,
                        _ => s,
                    })
                }
            }
        }
        match pending {
            None => {
                if *emitted >= bound {
                    return Err(EngineError::TooManySchedulers { bound });
                }
                *emitted += 1;
                out.insert(assigned.clone());
                Ok(())
            }
            Some(s) => {
                for i in p.tau_transitions(s) {
                    assigned.insert(s, i);
                    explore(p, init, assigned, emitted, out, bound)?;
                }
                assigned.remove(&s);
                Ok(())
            }
        }
    }

    let mut out = BTreeSet::new();
    let mut emitted = 0;
    explore(&c.plts, &c.init, &mut BTreeMap::new(), &mut emitted, &mut out, opts.max_schedulers)?;
    Ok(out
        .into_iter()
        .map(|assigned| {
            let choices = c
                .plts
                .states()
                .map(|s| {
                    let taus = c.plts.tau_transitions(s);
                    let choice = match assigned.get(&s) {
                        Some(&i) => Choice::Take(i),
                        None if taus.is_empty() => Choice::Halt,
                        None => Choice::Take(taus[0]),
                    };
                    (s, choice)
                })
                .collect();
            MemorylessScheduler { choices }
        })
        .collect())
}

/// A deterministic system, its start, and the map back onto the composite it
/// resolves.
#[derive(Debug, Clone)]
pub struct Resolution {
    pub plts: Plts,
    pub init: Subdistribution,
    /// Resolution state -> composite state.
    pub mapping: BTreeMap<StateId, StateId>,
}

/// Build the resolution a memoryless scheduler induces: same states, identity map,
/// and per state the chosen tau transition plus one transition per remaining label.
///
/// Where a state carries several transitions with one non-tau label, the first is
/// kept; the value functional only asks whether a success action fires, never where
/// it leads, so the pick is immaterial.
pub fn induced_resolution(
    c: &ComposedPlts,
    sched: &MemorylessScheduler,
) -> Result<Resolution, EngineError> {
    let mut plts = Plts::new(c.plts.visible.clone(), c.plts.successes.clone());
    for s in c.plts.states() {
        plts.add_state(c.plts.name(s));
    }
    for s in c.plts.states() {
        let taus = c.plts.tau_transitions(s);
        if !taus.is_empty() {
            let i = sched.kept_tau(s).ok_or_else(|| EngineError::IncompleteScheduler {
                state: c.plts.name(s).to_owned(),
            })?;
            let tr = c.plts.transition(i);
            plts.add_transition(s, Label::Tau, tr.target.clone()).expect("kept tau");
        }
        let mut kept_labels: BTreeSet<&Label> = BTreeSet::new();
        for &i in c.plts.outgoing(s) {
            let tr = c.plts.transition(i);
            if tr.label == Label::Tau || !kept_labels.insert(&tr.label) {
                continue;
            }
            plts.add_transition(s, tr.label.clone(), tr.target.clone()).expect("kept transition");
        }
    }
    let mapping = c.plts.states().map(|s| (s, s)).collect();
    Ok(Resolution { plts, init: c.init.clone(), mapping })
}

/// One way a claimed resolution fails to resolve `c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResolutionViolation {
    /// Two transitions with the same label leave this resolution state.
    NotDeterministic { state: String, label: Label },
    /// A resolution state maps to nothing, or to a state outside the composite.
    Unmapped { state: String },
    /// The start distributions disagree after mapping.
    InitMismatch,
    /// A resolution transition whose image is not a transition of the composite.
    UnmatchedTransition { state: String, label: Label },
    /// The composite enables this label here, the resolution does not.
    DroppedLabel { state: String, label: Label },
}

impl std::fmt::Display for ResolutionViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ResolutionViolation::NotDeterministic { state, label } => {
                write!(f, "state `{state}` has several `{label}` transitions")
            }
            ResolutionViolation::Unmapped { state } => {
                write!(f, "state `{state}` is not mapped into the composite")
            }
            ResolutionViolation::InitMismatch => {
                write!(f, "mapped start distribution differs from the composite's")
            }
            ResolutionViolation::UnmatchedTransition { state, label } => {
                write!(f, "`{label}` from `{state}` does not project onto a composite transition")
            }
            ResolutionViolation::DroppedLabel { state, label } => {
                write!(f, "composite enables `{label}` at the image of `{state}`, resolution does not")
            }
        }
    }
}

/// Check the three defining conditions of a resolution of `c`: the mapped start
/// matches, every transition projects onto a composite transition with the mapped
/// target, and every label the composite enables stays enabled. Also checks
/// determinism and that the map is total. Returns every violation found.
pub fn check_resolution(c: &ComposedPlts, r: &Resolution) -> Vec<ResolutionViolation> {
    let mut out = Vec::new();
    for s in r.plts.states() {
        let mut seen: BTreeSet<&Label> = BTreeSet::new();
        for &i in r.plts.outgoing(s) {
            let label = &r.plts.transition(i).label;
            if !seen.insert(label) {
                out.push(ResolutionViolation::NotDeterministic {
                    state: r.plts.name(s).to_owned(),
                    label: label.clone(),
                });
            }
        }
        match r.mapping.get(&s) {
            Some(img) if c.plts.contains(*img) => {}
            _ => out.push(ResolutionViolation::Unmapped { state: r.plts.name(s).to_owned() }),
        }
    }
    if !out.iter().any(|v| matches!(v, ResolutionViolation::Unmapped { .. })) {
        if r.init.image(&r.mapping) != c.init {
            out.push(ResolutionViolation::InitMismatch);
        }
        for s in r.plts.states() {
            let img = r.mapping[&s];
            for &i in r.plts.outgoing(s) {
                let tr = r.plts.transition(i);
                let projected = tr.target.image(&r.mapping);
                let matched = c.plts.outgoing(img).iter().any(|&j| {
                    let cj = c.plts.transition(j);
                    cj.label == tr.label && cj.target == projected
                });
                if !matched {
                    out.push(ResolutionViolation::UnmatchedTransition {
                        state: r.plts.name(s).to_owned(),
                        label: tr.label.clone(),
                    });
                }
            }
            for &j in c.plts.outgoing(img) {
                let label = &c.plts.transition(j).label;
                if !r.plts.enables(s, label) {
                    out.push(ResolutionViolation::DroppedLabel {
                        state: r.plts.name(s).to_owned(),
                        label: label.clone(),
                    });
                }
            }
        }
    }
    out.sort_by_key(|v| v.to_string());
    out.dedup();
    out
}

/// The success actions of `p` in coordinate order.
pub fn omegas_of(p: &Plts) -> Vec<String> {
    p.successes.iter().cloned().collect()
}

/// Exact least solution of the value recursion on a tau-deterministic system:
/// per state and success action, the probability of eventually firing it.
///
/// An enabled success action counts as 1 outright, even if the state also has a
/// tau move — on pruned systems the situation never arises, and this reading keeps
/// a firing success from being talked out of its reward elsewhere.
pub fn value_lfp(p: &Plts) -> Result<BTreeMap<StateId, Vec<Rational>>, EngineError> {
    for s in p.states() {
        if p.tau_transitions(s).len() > 1 {
            return Err(EngineError::TauNondeterminism { state: p.name(s).to_owned() });
        }
    }
    let omegas = omegas_of(p);
    let mut values: BTreeMap<StateId, Vec<Rational>> =
        p.states().map(|s| (s, vec![Rational::zero(); omegas.len()])).collect();
    for (oi, omega) in omegas.iter().enumerate() {
        let label = Label::Success(omega.clone());
        let winning: BTreeSet<StateId> = p.states().filter(|&s| p.enables(s, &label)).collect();
        for &s in &winning {
            values.get_mut(&s).unwrap()[oi] = Rational::from_integer(1.into());
        }
        // Backward tau-reachability: from which states can the run still win?
        let mut can_reach = winning.clone();
        loop {
            let mut grew = false;
            for s in p.states() {
                if can_reach.contains(&s) {
                    continue;
                }
                if let Some(&i) = p.tau_transitions(s).first() {
                    if p.transition(i).target.support().any(|t| can_reach.contains(&t)) {
                        can_reach.insert(s);
                        grew = true;
                    }
                }
            }
            if !grew {
                break;
            }
        }
        // Everything outside `can_reach` is pinned to 0 (that is what makes this
        // the least fixed point); on the rest the recursion is linear.
        let unknown: Vec<StateId> =
            can_reach.iter().copied().filter(|s| !winning.contains(s)).collect();
        if unknown.is_empty() {
            continue;
        }
        let pos: BTreeMap<StateId, usize> =
            unknown.iter().copied().enumerate().map(|(i, s)| (s, i)).collect();
        let n = unknown.len();
        let mut a = vec![vec![Rational::zero(); n]; n];
        let mut b = vec![Rational::zero(); n];
        for (row, &s) in unknown.iter().enumerate() {
            a[row][row] = Rational::from_integer(1.into());
            let i = p.tau_transitions(s)[0];
            for (t, w) in p.transition(i).target.iter() {
                if let Some(&col) = pos.get(&t) {
                    a[row][col] -= w;
                } else if winning.contains(&t) {
                    b[row] += w;
                }
            }
        }
        let x = solve_linear(a, b)
            .expect("success is reachable from every unknown state, so the system is nonsingular");
        for (i, &s) in unknown.iter().enumerate() {
            values.get_mut(&s).unwrap()[oi] = x[i].clone();
        }
    }
    Ok(values)
}

/// `n` rounds of the value recursion from all-zero. Approaches [`value_lfp`] from
/// below; useful as an independent cross-check and for exhibiting the limit.
pub fn iterate_value_functional(
    p: &Plts,
    n: usize,
) -> Result<BTreeMap<StateId, Vec<Rational>>, EngineError> {
    for s in p.states() {
        if p.tau_transitions(s).len() > 1 {
            return Err(EngineError::TauNondeterminism { state: p.name(s).to_owned() });
        }
    }
    let omegas = omegas_of(p);
    let dim = omegas.len();
    let mut cur: BTreeMap<StateId, Vec<Rational>> =
        p.states().map(|s| (s, vec![Rational::zero(); dim])).collect();
    for _ in 0..n {
        let mut next = BTreeMap::new();
        for s in p.states() {
            let mut v = vec![Rational::zero(); dim];
            for (oi, omega) in omegas.iter().enumerate() {
                if p.enables(s, &Label::Success(omega.clone())) {
                    v[oi] = Rational::from_integer(1.into());
                } else if let Some(&i) = p.tau_transitions(s).first() {
                    v[oi] = p
                        .transition(i)
                        .target
                        .iter()
                        .map(|(t, w)| w * &cur[&t][oi])
                        .sum();
                }
            }
            next.insert(s, v);
        }
        cur = next;
    }
    Ok(cur)
}

/// Expected value of a resolution from its start distribution.
pub fn resolution_value(r: &Resolution) -> Result<Vec<Rational>, EngineError> {
    let values = value_lfp(&r.plts)?;
    let dim = omegas_of(&r.plts).len();
    Ok(r.init.expected_value(dim, |s| values[&s].clone()))
}

/// Outcome of running one of the engines: the hull of the per-scheduler outcome
/// vectors, plus how many schedulers were considered.
#[derive(Debug, Clone)]
pub struct EngineRun {
    pub polytope: OutcomePolytope,
    pub schedulers: usize,
}

/// The resolution-based outcome set of a pruned composite: one value vector per
/// memoryless scheduler, collected into a hull.
pub fn outcomes_by_resolution(
    pruned: &ComposedPlts,
    opts: &EngineOpts,
) -> Result<EngineRun, EngineError> {
    let scheds = enumerate_schedulers(pruned, opts)?;
    let mut points = Vec::with_capacity(scheds.len());
    for sched in &scheds {
        let r = induced_resolution(pruned, sched)?;
        points.push(resolution_value(&r)?);
    }
    Ok(EngineRun {
        polytope: OutcomePolytope::hull(omegas_of(&pruned.plts), points),
        schedulers: scheds.len(),
    })
}

/// Full pipeline: compose, prune, enumerate, evaluate.
pub fn apply_resolution_based(
    test: &SourceModel,
    process: &SourceModel,
    init_test: &str,
    init_process: &str,
    opts: &EngineOpts,
) -> Result<EngineRun, EngineError> {
    let c = crate::compose::compose(test, process, init_test, init_process)?;
    outcomes_by_resolution(&crate::compose::prune(&c), opts)
}
