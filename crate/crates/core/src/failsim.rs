//! Failure simulation between processes.
//!
//! A candidate relation pairs each state of the *simulated* process (the keys)
//! with subdistributions over the *simulating* process (the generators). The
//! candidate is valid when every pair survives two obligations:
//!
//! * moves — whatever distribution a key state can weakly reach by a tau or
//!   visible action, the generator can weakly match, landing in the convex hull
//!   of the generators of the reached states;
//! * refusals — any set of actions the key state can come to refuse (reach
//!   stability with none of them enabled), the generator can come to refuse too.
//!
//! One process sits below another when, additionally, the simulating start can
//! derive into the hull prescribed for the simulated start. The point of the
//! exercise: this single relation forces the simulating process's outcome
//! polytope to contain the simulated one's under every test, which is the
//! worst-case (real-reward must) comparison in coinductive form.
//!
//! Everything quantified over distributions is handled by vertex enumeration on
//! the universal side (derivative polytopes have finitely many extreme points,
//! reached by fixing one stop-or-move choice per state) and LP feasibility on the
//! existential side. Both need convergence; divergent inputs are refused at the
//! door rather than half-answered.

use crate::lp::{Feasibility, LpOutcome};
use crate::parser::{ModelKind, SourceModel};
use crate::plts::{Label, Plts, StateId};
use crate::subdist::Subdistribution;
use crate::Rational;
use num_traits::Zero;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FailsimError {
    #[error("`{name}` is a test; failure simulation compares processes")]
    NotAProcess { name: String },
    #[error("alphabet mismatch: {left} vs {right}")]
    AlphabetMismatch { left: String, right: String },
    #[error("tau divergence at `{example}`; failure simulation here assumes convergent processes")]
    DivergentInput { example: String },
    #[error("candidate line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("candidate refers to unknown state `{name}`")]
    ForeignState { name: String },
    #[error("candidate is not a failure simulation ({} violations, first: {})", .violations.len(), .violations[0])]
    CandidateInvalid { violations: Vec<CandidateViolation> },
    #[error("more than {bound} stop-or-move combinations; raise the cap to search anyway")]
    SearchSpaceTooLarge { bound: usize },
    #[error("refusal enumeration over {n} actions exceeds the cap of {cap}")]
    AlphabetTooLarge { n: usize, cap: usize },
}

/// Enumeration ceilings. The defaults are generous for the bundled models; raise
/// them explicitly for bigger systems.
#[derive(Debug, Clone)]
pub struct FailsimCaps {
    /// Stop-or-move profile budget per vertex enumeration.
    pub max_profiles: usize,
    /// Largest visible alphabet for refusal-set enumeration.
    pub max_refusal_alphabet: usize,
}

impl Default for FailsimCaps {
    fn default() -> Self {
        FailsimCaps { max_profiles: 1 << 14, max_refusal_alphabet: 12 }
    }
}

/// A claimed failure simulation: simulated state -> generator subdistributions
/// over the simulating process.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FailureSimCandidate {
    pub pairs: BTreeMap<StateId, Vec<Subdistribution>>,
}

/// A set of visible actions to be refused, validated against an alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefusalQuery {
    actions: BTreeSet<String>,
}

impl RefusalQuery {
    pub fn new(p: &Plts, actions: BTreeSet<String>) -> Result<Self, FailsimError> {
        for a in &actions {
            if !p.visible.contains(a) {
                return Err(FailsimError::ForeignState { name: a.clone() });
            }
        }
        Ok(RefusalQuery { actions })
    }

    pub fn actions(&self) -> &BTreeSet<String> {
        &self.actions
    }
}

/// One way a candidate pair fails its obligations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CandidateViolation {
    /// The key state weakly reaches `derivative` by `action`; this generator
    /// cannot match it into the prescribed hull.
    Move {
        state: String,
        generator: usize,
        action: Label,
        derivative: Vec<(String, Rational)>,
    },
    /// The key state can come to refuse `refused`; this generator cannot.
    Refusal { state: String, generator: usize, refused: BTreeSet<String> },
}

impl std::fmt::Display for CandidateViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CandidateViolation::Move { state, generator, action, derivative } => {
                let d: Vec<String> =
                    derivative.iter().map(|(s, w)| format!("{w} {s}")).collect();
                write!(
                    f,
                    "`{state}` reaches {{ {} }} by `{action}`; generator #{generator} cannot follow",
                    d.join(", ")
                )
            }
            CandidateViolation::Refusal { state, generator, refused } => {
                let r: Vec<&str> = refused.iter().map(String::as_str).collect();
                write!(
                    f,
                    "`{state}` can refuse {{{}}}; generator #{generator} cannot",
                    r.join(", ")
                )
            }
        }
    }
}

fn ensure_convergent(p: &Plts) -> Result<(), FailsimError> {
    // candidate mass may sit anywhere, so the whole system must converge
    let region: BTreeSet<StateId> = p.states().collect();
    let (core, _) = crate::derivation::divergent_core(p, &region);
    match core.iter().next() {
        Some(&s) => Err(FailsimError::DivergentInput { example: p.name(s).to_owned() }),
        None => Ok(()),
    }
}

/// Where mass settles when the states in `moving` each push it through their
/// assigned tau transition and every other state holds it. Convergence makes the
/// mass-conservation system nonsingular, so the answer is exact and total.
fn derivative_under(
    p: &Plts,
    from: &Subdistribution,
    moving: &BTreeMap<StateId, usize>,
) -> Subdistribution {
    let mut region: BTreeSet<StateId> = from.support().collect();
    let mut stack: Vec<StateId> = region.iter().copied().collect();
    while let Some(s) = stack.pop() {
        if let Some(&i) = moving.get(&s) {
            for t in p.transition(i).target.support() {
                if region.insert(t) {
                    stack.push(t);
                }
            }
        }
    }
    let transient: Vec<StateId> =
        region.iter().copied().filter(|s| moving.contains_key(s)).collect();
    let pos: BTreeMap<StateId, usize> =
        transient.iter().copied().enumerate().map(|(i, s)| (s, i)).collect();
    let n = transient.len();
    let mut a = vec![vec![Rational::zero(); n]; n];
    let mut b = vec![Rational::zero(); n];
    for (row, &s) in transient.iter().enumerate() {
        a[row][row] += Rational::from_integer(1.into());
        b[row] = from.get(s);
    }
    for &s in &transient {
        for (t, w) in p.transition(moving[&s]).target.iter() {
            if let Some(&row) = pos.get(&t) {
                a[row][pos[&s]] -= w;
            }
        }
    }
    let x = crate::lp::solve_linear(a, b)
        .expect("convergence leaves no closed set of moving states");
    let mut stop: BTreeMap<StateId, Rational> = BTreeMap::new();
    for &s in &region {
        if !moving.contains_key(&s) {
            let m = from.get(s);
            if !m.is_zero() {
                stop.insert(s, m);
            }
        }
    }
    for (&s, &col) in &pos {
        for (t, w) in p.transition(moving[&s]).target.iter() {
            if !pos.contains_key(&t) {
                let add = &x[col] * w;
                if !add.is_zero() {
                    *stop.entry(t).or_default() += add;
                }
            }
        }
    }
    Subdistribution::from_pairs(stop.into_iter().collect::<Vec<_>>())
        .expect("settled mass is bounded by the source")
}

/// All stop-or-move assignments that matter from `from`: branch only at states the
/// mass can actually reach under the choices made so far.
fn stop_or_move_profiles(
    p: &Plts,
    from: &Subdistribution,
    caps: &FailsimCaps,
) -> Result<Vec<BTreeMap<StateId, usize>>, FailsimError> {
    fn explore(
        p: &Plts,
        from: &Subdistribution,
        moved: &mut BTreeMap<StateId, usize>,
        stopped: &mut BTreeSet<StateId>,
        out: &mut Vec<BTreeMap<StateId, usize>>,
        cap: usize,
    ) -> Result<(), FailsimError> {
        let mut seen: BTreeSet<StateId> = from.support().collect();
        let mut stack: Vec<StateId> = seen.iter().copied().collect();
        let mut pending: Option<StateId> = None;
        while let Some(s) = stack.pop() {
            if p.tau_transitions(s).is_empty() || stopped.contains(&s) {
                continue;
            }
            match moved.get(&s) {
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
                if out.len() >= cap {
                    return Err(FailsimError::SearchSpaceTooLarge { bound: cap });
                }
                out.push(moved.clone());
                Ok(())
            }
            Some(s) => {
                stopped.insert(s);
                explore(p, from, moved, stopped, out, cap)?;
                stopped.remove(&s);
                for i in p.tau_transitions(s) {
                    moved.insert(s, i);
                    explore(p, from, moved, stopped, out, cap)?;
                }
                moved.remove(&s);
                Ok(())
            }
        }
    }
    let mut out = Vec::new();
    explore(p, from, &mut BTreeMap::new(), &mut BTreeSet::new(), &mut out, caps.max_profiles)?;
    Ok(out)
}

/// Extreme points of the weak tau-derivative set of `from`. Every derivative is a
/// convex mixture of these; the list may contain interior points as well, which is
/// harmless for both sides of the obligations.
pub fn weak_tau_vertices(
    p: &Plts,
    from: &Subdistribution,
    caps: &FailsimCaps,
) -> Result<Vec<Subdistribution>, FailsimError> {
    let mut out: BTreeSet<Subdistribution> = BTreeSet::new();
    for profile in stop_or_move_profiles(p, from, caps)? {
        out.insert(derivative_under(p, from, &profile));
    }
    Ok(out.into_iter().collect())
}

/// Extreme points of the weak `a`-derivative set of `from`: derive, fire one `a`
/// transition per resting state (all mass must fire), derive again.
pub fn weak_action_vertices(
    p: &Plts,
    from: &Subdistribution,
    action: &str,
    caps: &FailsimCaps,
) -> Result<Vec<Subdistribution>, FailsimError> {
    let label = Label::Visible(action.to_owned());
    let mut out: BTreeSet<Subdistribution> = BTreeSet::new();
    for profile in stop_or_move_profiles(p, from, caps)? {
        let pre = derivative_under(p, from, &profile);
        let support: Vec<StateId> = pre.support().collect();
        let menus: Vec<Vec<usize>> =
            support.iter().map(|&s| p.outgoing_labelled(s, &label)).collect();
        if menus.iter().any(Vec::is_empty) {
            continue; // some resting mass cannot fire `a`: no derivative this way
        }
        // one deterministic pick per resting state; mixtures are interior
        let mut picks = vec![0usize; support.len()];
        loop {
            let parts: Vec<(Rational, &Subdistribution)> = support
                .iter()
                .enumerate()
                .map(|(k, &s)| (pre.get(s), &p.transition(menus[k][picks[k]]).target))
                .collect();
            let mid = Subdistribution::combine(&parts).expect("full targets keep mass");
            for v in weak_tau_vertices(p, &mid, caps)? {
                out.insert(v);
            }
            // advance the odometer
            let mut k = 0;
            loop {
                if k == picks.len() {
                    break;
                }
                picks[k] += 1;
                if picks[k] < menus[k].len() {
                    break;
                }
                picks[k] = 0;
                k += 1;
            }
            if k == picks.len() {
                break;
            }
        }
    }
    Ok(out.into_iter().collect())
}

/// Can `src` derive into a distribution that is stable and refuses every action in
/// the query? Decided by flow feasibility with stopping allowed only at refusing
/// states.
pub fn weak_refusal(p: &Plts, src: &Subdistribution, query: &RefusalQuery) -> bool {
    let region: BTreeSet<StateId> = p.tau_reachable(src);
    let refuses = |s: StateId| {
        p.is_stable(s) && p.enabled_visible(s).iter().all(|a| !query.actions.contains(*a))
    };
    let mut flows: BTreeMap<(StateId, usize), usize> = BTreeMap::new();
    let mut stops: BTreeMap<StateId, usize> = BTreeMap::new();
    let mut n = 0;
    for &s in &region {
        for i in p.tau_transitions(s) {
            flows.insert((s, i), n);
            n += 1;
        }
        if refuses(s) {
            stops.insert(s, n);
            n += 1;
        }
    }
    let mut lp = Feasibility::new(n);
    for &s in &region {
        let mut coeffs: Vec<(usize, Rational)> = Vec::new();
        for (&(u, i), &col) in &flows {
            let mut c = Rational::zero();
            if u == s {
                c -= Rational::from_integer(1.into());
            }
            c += p.transition(i).target.get(s);
            if !c.is_zero() {
                coeffs.push((col, c));
            }
        }
        if let Some(&col) = stops.get(&s) {
            coeffs.push((col, -Rational::from_integer(1.into())));
        }
        lp.add_sparse_row(&coeffs, -src.get(s));
    }
    matches!(lp.solve(), LpOutcome::Feasible(_))
}

/// The maximal action sets a state can come to refuse. Refusal is downward
/// closed, so the maximal sets carry all the information.
pub fn maximal_refusals(
    p: &Plts,
    s: StateId,
    caps: &FailsimCaps,
) -> Result<Vec<BTreeSet<String>>, FailsimError> {
    let alphabet: Vec<&String> = p.visible.iter().collect();
    let n = alphabet.len();
    if n > caps.max_refusal_alphabet {
        return Err(FailsimError::AlphabetTooLarge { n, cap: caps.max_refusal_alphabet });
    }
    let from = Subdistribution::point(s);
    let mut refusable: Vec<BTreeSet<String>> = Vec::new();
    for mask in 0..(1u32 << n) {
        let set: BTreeSet<String> = (0..n)
            .filter(|k| mask & (1 << k) != 0)
            .map(|k| alphabet[k].clone())
            .collect();
        let query = RefusalQuery { actions: set.clone() };
        if weak_refusal(p, &from, &query) {
            refusable.push(set);
        }
    }
    Ok(refusable
        .iter()
        .filter(|a| !refusable.iter().any(|b| a.is_subset(b) && b.len() > a.len()))
        .cloned()
        .collect())
}

/// Can `g` weakly perform `action` (tau meaning none) and land in the mixture of
/// generators that `target` prescribes through `cand`?
///
/// One joint LP: derivation flows, an optional lifted action step, more derivation
/// flows, and mixture weights tying the result to the candidate's hulls.
fn generator_matches(
    values: &Plts,
    cand: &FailureSimCandidate,
    g: &Subdistribution,
    action: Option<&str>,
    target: &Subdistribution,
) -> bool {
    let states: Vec<StateId> = values.states().collect();
    let mut n = 0;
    let mut f1: BTreeMap<(StateId, usize), usize> = BTreeMap::new();
    for &s in &states {
        for i in values.tau_transitions(s) {
            f1.insert((s, i), n);
            n += 1;
        }
    }
    let mut commit: BTreeMap<(StateId, usize), usize> = BTreeMap::new();
    let mut f2: BTreeMap<(StateId, usize), usize> = BTreeMap::new();
    if let Some(a) = action {
        let label = Label::Visible(a.to_owned());
        for &s in &states {
            for i in values.outgoing_labelled(s, &label) {
                commit.insert((s, i), n);
                n += 1;
            }
        }
        for &s in &states {
            for i in values.tau_transitions(s) {
                f2.insert((s, i), n);
                n += 1;
            }
        }
    }
    // mixture weights per (target-support state, generator index)
    let mut wvars: BTreeMap<(StateId, usize), usize> = BTreeMap::new();
    for u in target.support() {
        for j in 0..cand.pairs.get(&u).map_or(0, Vec::len) {
            wvars.insert((u, j), n);
            n += 1;
        }
    }
    let mut lp = Feasibility::new(n);
    let flow_coeffs = |vars: &BTreeMap<(StateId, usize), usize>, s: StateId| {
        let mut coeffs: Vec<(usize, Rational)> = Vec::new();
        for (&(u, i), &col) in vars {
            let mut c = Rational::zero();
            if u == s {
                c -= Rational::from_integer(1.into());
            }
            c += values.transition(i).target.get(s);
            if !c.is_zero() {
                coeffs.push((col, c));
            }
        }
        coeffs
    };
    let matched_coeffs = |s: StateId| {
        let mut coeffs: Vec<(usize, Rational)> = Vec::new();
        for (&(u, j), &col) in &wvars {
            let w = cand.pairs[&u][j].get(s);
            if !w.is_zero() {
                coeffs.push((col, -w));
            }
        }
        coeffs
    };
    if action.is_some() {
        // phase 1 rests exactly on the committing mass
        for &s in &states {
            let mut coeffs = flow_coeffs(&f1, s);
            for (&(u, _), &col) in &commit {
                if u == s {
                    coeffs.push((col, -Rational::from_integer(1.into())));
                }
            }
            lp.add_sparse_row(&coeffs, -g.get(s));
        }
        // phase 2 starts from the fired mass and rests on the prescribed mixture
        for &s in &states {
            let mut coeffs = flow_coeffs(&f2, s);
            for (&(_, i), &col) in &commit {
                let w = values.transition(i).target.get(s);
                if !w.is_zero() {
                    coeffs.push((col, w));
                }
            }
            coeffs.extend(matched_coeffs(s));
            lp.add_sparse_row(&coeffs, Rational::zero());
        }
    } else {
        for &s in &states {
            let mut coeffs = flow_coeffs(&f1, s);
            coeffs.extend(matched_coeffs(s));
            lp.add_sparse_row(&coeffs, -g.get(s));
        }
    }
    // mixture weights reproduce the target mass per key state
    for u in target.support() {
        let coeffs: Vec<(usize, Rational)> = (0..cand.pairs.get(&u).map_or(0, Vec::len))
            .map(|j| (wvars[&(u, j)], Rational::from_integer(1.into())))
            .collect();
        lp.add_sparse_row(&coeffs, target.get(u));
    }
    matches!(lp.solve(), LpOutcome::Feasible(_))
}

/// Check every obligation of every candidate pair. An empty result means the
/// candidate is a failure simulation.
pub fn validate_candidate(
    keys: &Plts,
    values: &Plts,
    cand: &FailureSimCandidate,
    caps: &FailsimCaps,
) -> Result<Vec<CandidateViolation>, FailsimError> {
    if keys.visible != values.visible {
        let fmt = |p: &Plts| {
            p.visible.iter().cloned().collect::<Vec<_>>().join(", ")
        };
        return Err(FailsimError::AlphabetMismatch { left: fmt(values), right: fmt(keys) });
    }
    ensure_convergent(keys)?;
    ensure_convergent(values)?;
    for (&s, gens) in &cand.pairs {
        if !keys.contains(s) {
            return Err(FailsimError::ForeignState { name: format!("{s:?}") });
        }
        for g in gens {
            if g.support().any(|u| !values.contains(u)) {
                return Err(FailsimError::ForeignState { name: format!("{g:?}") });
            }
        }
    }

    let mut violations = Vec::new();
    let actions: Vec<Option<String>> = std::iter::once(None)
        .chain(keys.visible.iter().cloned().map(Some))
        .collect();
    for (&s, gens) in &cand.pairs {
        let point = Subdistribution::point(s);
        let refusals = maximal_refusals(keys, s, caps)?;
        for action in &actions {
            let targets = match action {
                None => weak_tau_vertices(keys, &point, caps)?,
                Some(a) => weak_action_vertices(keys, &point, a, caps)?,
            };
            for target in &targets {
                for (gi, g) in gens.iter().enumerate() {
                    if !generator_matches(values, cand, g, action.as_deref(), target) {
                        violations.push(CandidateViolation::Move {
                            state: keys.name(s).to_owned(),
                            generator: gi,
                            action: match action {
                                None => Label::Tau,
                                Some(a) => Label::Visible(a.clone()),
                            },
                            derivative: target
                                .iter()
                                .map(|(u, w)| (keys.name(u).to_owned(), w.clone()))
                                .collect(),
                        });
                    }
                }
            }
        }
        for refused in &refusals {
            for (gi, g) in gens.iter().enumerate() {
                let query = RefusalQuery { actions: refused.clone() };
                if !weak_refusal(values, g, &query) {
                    violations.push(CandidateViolation::Refusal {
                        state: keys.name(s).to_owned(),
                        generator: gi,
                        refused: refused.clone(),
                    });
                }
            }
        }
    }
    Ok(violations)
}

/// Does `left`'s start derive into the hull the candidate prescribes for
/// `right`'s start? The returned witness is one such derivative.
fn root_obligation(
    values: &Plts,
    cand: &FailureSimCandidate,
    left_init: &Subdistribution,
    right_init: &Subdistribution,
) -> Option<Subdistribution> {
    let states: Vec<StateId> = values.states().collect();
    let mut n = 0;
    let mut flows: BTreeMap<(StateId, usize), usize> = BTreeMap::new();
    for &s in &states {
        for i in values.tau_transitions(s) {
            flows.insert((s, i), n);
            n += 1;
        }
    }
    let mut wvars: BTreeMap<(StateId, usize), usize> = BTreeMap::new();
    for u in right_init.support() {
        for j in 0..cand.pairs.get(&u).map_or(0, Vec::len) {
            wvars.insert((u, j), n);
            n += 1;
        }
    }
    let mut lp = Feasibility::new(n);
    for &s in &states {
        let mut coeffs: Vec<(usize, Rational)> = Vec::new();
        for (&(u, i), &col) in &flows {
            let mut c = Rational::zero();
            if u == s {
                c -= Rational::from_integer(1.into());
            }
            c += values.transition(i).target.get(s);
            if !c.is_zero() {
                coeffs.push((col, c));
            }
        }
        for (&(u, j), &col) in &wvars {
            let w = cand.pairs[&u][j].get(s);
            if !w.is_zero() {
                coeffs.push((col, -w));
            }
        }
        lp.add_sparse_row(&coeffs, -left_init.get(s));
    }
    for u in right_init.support() {
        let coeffs: Vec<(usize, Rational)> = (0..cand.pairs.get(&u).map_or(0, Vec::len))
            .map(|j| (wvars[&(u, j)], Rational::from_integer(1.into())))
            .collect();
        lp.add_sparse_row(&coeffs, right_init.get(u));
    }
    match lp.solve() {
        LpOutcome::Feasible(x) => {
            let mut pairs: Vec<(StateId, Rational)> = Vec::new();
            for (&(u, j), &col) in &wvars {
                for (s, w) in cand.pairs[&u][j].iter() {
                    pairs.push((s, w * &x[col]));
                }
            }
            Some(
                Subdistribution::from_pairs(pairs)
                    .expect("mixture of subdistributions"),
            )
        }
        LpOutcome::Infeasible(_) => None,
    }
}

/// Outcome of a full failure-simulation check.
#[derive(Debug, Clone)]
pub struct FsVerdict {
    pub holds: bool,
    /// When it holds: a derivative of the left start inside the prescribed hull.
    pub witness: Option<Subdistribution>,
}

/// Decide `left` below `right` via the given candidate: validate it, then
/// discharge the start obligation.
pub fn fs_leq(
    left: &SourceModel,
    right: &SourceModel,
    cand: &FailureSimCandidate,
    caps: &FailsimCaps,
) -> Result<FsVerdict, FailsimError> {
    for m in [left, right] {
        if m.kind != ModelKind::Process {
            return Err(FailsimError::NotAProcess { name: m.name.clone() });
        }
    }
    let violations = validate_candidate(&right.plts, &left.plts, cand, caps)?;
    if !violations.is_empty() {
        return Err(FailsimError::CandidateInvalid { violations });
    }
    let (_, left_init) = left.default_init();
    let (_, right_init) = right.default_init();
    match root_obligation(&left.plts, cand, left_init, right_init) {
        Some(witness) => Ok(FsVerdict { holds: true, witness: Some(witness) }),
        None => Ok(FsVerdict { holds: false, witness: None }),
    }
}

/// Search for a failure simulation witnessing `left` below `right`.
///
/// Seeds every simulated state with all derivative vertices reachable from the
/// left start by at most `depth` visible steps, then strips failing generators
/// until the obligations close under themselves (the result is the largest such
/// relation within the seeded universe). `None` means no candidate was found at
/// this depth — a deeper seed may still succeed.
pub fn bounded_candidate_search(
    left: &SourceModel,
    right: &SourceModel,
    depth: usize,
    caps: &FailsimCaps,
) -> Result<Option<FailureSimCandidate>, FailsimError> {
    for m in [left, right] {
        if m.kind != ModelKind::Process {
            return Err(FailsimError::NotAProcess { name: m.name.clone() });
        }
    }
    if right.plts.visible != left.plts.visible {
        let fmt =
            |p: &Plts| p.visible.iter().cloned().collect::<Vec<_>>().join(", ");
        return Err(FailsimError::AlphabetMismatch {
            left: fmt(&left.plts),
            right: fmt(&right.plts),
        });
    }
    ensure_convergent(&left.plts)?;
    ensure_convergent(&right.plts)?;

    // Generator pool: tau-derivative vertices of the left start, then of
    // everything one visible step further, and so on.
    let (_, left_init) = left.default_init();
    let mut pool: BTreeSet<Subdistribution> =
        weak_tau_vertices(&left.plts, left_init, caps)?.into_iter().collect();
    let mut frontier = pool.clone();
    for _ in 0..depth {
        let mut next: BTreeSet<Subdistribution> = BTreeSet::new();
        for g in &frontier {
            for a in &left.plts.visible.clone() {
                for v in weak_action_vertices(&left.plts, g, a, caps)? {
                    if !pool.contains(&v) {
                        next.insert(v);
                    }
                }
            }
        }
        if next.is_empty() {
            break;
        }
        pool.extend(next.iter().cloned());
        frontier = next;
    }
    let pool: Vec<Subdistribution> = pool.into_iter().collect();

    let mut cand = FailureSimCandidate {
        pairs: right.plts.states().map(|s| (s, pool.clone())).collect(),
    };
    // Greatest fixed point: drop generators that fail an obligation against the
    // current candidate, repeat until stable.
    loop {
        let violations = validate_candidate(&right.plts, &left.plts, &cand, caps)?;
        if violations.is_empty() {
            break;
        }
        let mut doomed: BTreeMap<StateId, BTreeSet<usize>> = BTreeMap::new();
        for v in &violations {
            let (state, gi) = match v {
                CandidateViolation::Move { state, generator, .. } => (state, *generator),
                CandidateViolation::Refusal { state, generator, .. } => (state, *generator),
            };
            let id = right.plts.state(state).expect("violations name key states");
            doomed.entry(id).or_default().insert(gi);
        }
        for (s, drop) in doomed {
            let gens = cand.pairs.get_mut(&s).unwrap();
            *gens = gens
                .iter()
                .enumerate()
                .filter(|(i, _)| !drop.contains(i))
                .map(|(_, g)| g.clone())
                .collect();
        }
    }
    let (_, right_init) = right.default_init();
    if root_obligation(&left.plts, &cand, left_init, right_init).is_some() {
        cand.pairs.retain(|_, gens| !gens.is_empty());
        Ok(Some(cand))
    } else {
        Ok(None)
    }
}

/// Parse a candidate file: one `state |- { weight state, ... }` line per
/// generator, `#` comments, keys resolved in the simulated process and generator
/// support in the simulating one.
pub fn parse_candidate(
    text: &str,
    keys: &Plts,
    values: &Plts,
) -> Result<FailureSimCandidate, FailsimError> {
    let mut pairs: BTreeMap<StateId, Vec<Subdistribution>> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key_part, gen_part)) = content.split_once("|-") else {
            return Err(FailsimError::Syntax { line, message: "expected `state |- { ... }`".into() });
        };
        let key_name = key_part.trim();
        let key = keys
            .state(key_name)
            .ok_or_else(|| FailsimError::ForeignState { name: key_name.to_owned() })?;
        let inner = gen_part.trim();
        let inner = inner
            .strip_prefix('{')
            .and_then(|s| s.strip_suffix('}'))
            .ok_or_else(|| FailsimError::Syntax {
                line,
                message: "generator must be braced: `{ weight state, ... }`".into(),
            })?
            .trim();
        let mut weights: Vec<(StateId, Rational)> = Vec::new();
        if !inner.is_empty() {
            for entry in inner.split(',') {
                let mut it = entry.split_whitespace();
                let (Some(w), Some(name), None) = (it.next(), it.next(), it.next()) else {
                    return Err(FailsimError::Syntax {
                        line,
                        message: format!("malformed entry `{}`", entry.trim()),
                    });
                };
                let weight = parse_fraction(w).ok_or_else(|| FailsimError::Syntax {
                    line,
                    message: format!("malformed weight `{w}`"),
                })?;
                let state = values
                    .state(name)
                    .ok_or_else(|| FailsimError::ForeignState { name: name.to_owned() })?;
                weights.push((state, weight));
            }
        }
        let gen = Subdistribution::from_pairs(weights).map_err(|e| FailsimError::Syntax {
            line,
            message: e.to_string(),
        })?;
        pairs.entry(key).or_default().push(gen);
    }
    Ok(FailureSimCandidate { pairs })
}

fn parse_fraction(s: &str) -> Option<Rational> {
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let n: i64 = num.parse().ok()?;
    let d: i64 = den.parse().ok()?;
    if d <= 0 || n < 0 {
        return None;
    }
    Some(crate::rat(n, d))
}

/// Render a candidate in the same format [`parse_candidate`] reads.
pub fn serialize_candidate(
    cand: &FailureSimCandidate,
    keys: &Plts,
    values: &Plts,
) -> String {
    let mut out = String::new();
    for (&s, gens) in &cand.pairs {
        for g in gens {
            let entries: Vec<String> =
                g.iter().map(|(u, w)| format!("{} {}", w, values.name(u))).collect();
            out.push_str(&format!("{} |- {{ {} }}\n", keys.name(s), entries.join(", ")));
        }
    }
    out
}
