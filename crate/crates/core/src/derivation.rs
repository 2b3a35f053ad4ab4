//! Weak derivations: where mass ends up when tau runs to completion.
//!
//! A derivation repeatedly splits the current distribution into a part that stops
//! and a part that takes another tau step; its limit is a subdistribution — mass
//! can vanish down a tau vortex, which is how divergence shows up here. An
//! *extreme* derivative is the maximal kind: mass may only stop where no tau is
//! available. The derivation-based outcome of a composite reads success
//! probabilities off extreme derivatives, one per scheduler, and hulls them;
//! agreement with the resolution-based engine is one of the workbench's core
//! cross-checks.
//!
//! Rather than chasing the limit numerically, the expected number of traversals of
//! each kept transition is computed exactly: those occupancies satisfy a linear
//! conservation law (mass in = mass out everywhere mass cannot rest), and the
//! system is nonsingular on the states that can still escape to stability. States
//! that cannot escape keep their mass forever; it is reported as missing, never
//! silently normalised away.

use crate::compose::ComposedPlts;
use crate::lp::{solve_linear, Feasibility, LpOutcome};
use crate::parser::SourceModel;
use crate::plts::{Label, Plts, StateId};
use crate::polytope::OutcomePolytope;
use crate::resolution::{enumerate_schedulers, EngineError, EngineOpts, EngineRun, MemorylessScheduler};
use crate::subdist::Subdistribution;
use crate::Rational;
use num_traits::Zero;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Verdict of the convergence check.
///
/// `Convergent` carries an elimination order as evidence: every state in it either
/// has no tau transition, or each of its tau transitions puts positive mass on a
/// state listed earlier — so no set of states can cycle mass among themselves
/// forever. `Divergent` carries the offending core: a nonempty set in which every
/// state has a tau transition staying entirely inside the set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Convergence {
    Convergent { order: Vec<StateId> },
    Divergent { core: BTreeSet<StateId> },
}

impl Convergence {
    pub fn is_convergent(&self) -> bool {
        matches!(self, Convergence::Convergent { .. })
    }
}

/// The divergent core within `region`: greatest subset in which every state has a
/// tau transition whose support stays inside. Also returns the removal order of
/// the rest.
pub(crate) fn divergent_core(
    p: &Plts,
    region: &BTreeSet<StateId>,
) -> (BTreeSet<StateId>, Vec<StateId>) {
    let mut core: BTreeSet<StateId> = region.clone();
    let mut order: Vec<StateId> = Vec::new();
    loop {
        let doomed: Vec<StateId> = core
            .iter()
            .copied()
            .filter(|&s| {
                !p.tau_transitions(s)
                    .iter()
                    .any(|&i| p.transition(i).target.support().all(|t| core.contains(&t)))
            })
            .collect();
        if doomed.is_empty() {
            return (core, order);
        }
        for s in doomed {
            core.remove(&s);
            order.push(s);
        }
    }
}

/// Can any mass launched from `from` be trapped in tau forever? The check covers
/// the tau-reachable region: derivations move only along tau, so a loop hiding
/// behind a visible or success action is no threat to *this* distribution — it
/// belongs to whatever distribution that action produces.
pub fn is_convergent(p: &Plts, from: &Subdistribution) -> Convergence {
    let region = p.tau_reachable(from);
    let (core, order) = divergent_core(p, &region);
    if core.is_empty() {
        Convergence::Convergent { order }
    } else {
        Convergence::Divergent { core }
    }
}

/// Expected traversal counts of the kept tau transitions, and where mass stops.
///
/// Conservation holds at every state the solution mentions: initial mass plus
/// inflow equals stop plus outflow, and stop is only placed on stable states. Mass
/// that flows into a divergent region leaves the accounted states and reappears
/// nowhere — the deficit `1 - stop total` is exactly the diverging mass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupationSolution {
    /// (source state, transition index) -> expected traversals.
    pub flow: BTreeMap<(StateId, usize), Rational>,
    pub stop: BTreeMap<StateId, Rational>,
}

impl OccupationSolution {
    /// Replay the conservation law against `p`; `Err` pinpoints the state where
    /// the books do not balance. States mass diverges into are exempt — their
    /// occupancy is infinite and deliberately unrepresented.
    pub fn check_conservation(
        &self,
        p: &Plts,
        init: &Subdistribution,
        diverging: &BTreeSet<StateId>,
    ) -> Result<(), String> {
        let mut inflow: BTreeMap<StateId, Rational> = BTreeMap::new();
        let mut outflow: BTreeMap<StateId, Rational> = BTreeMap::new();
        for (&(s, i), x) in &self.flow {
            *outflow.entry(s).or_default() += x;
            for (t, w) in p.transition(i).target.iter() {
                *inflow.entry(t).or_default() += x * w;
            }
        }
        let mut states: BTreeSet<StateId> = init.support().collect();
        states.extend(inflow.keys().copied());
        states.extend(outflow.keys().copied());
        states.extend(self.stop.keys().copied());
        for s in states {
            if diverging.contains(&s) {
                continue;
            }
            let stop = self.stop.get(&s).cloned().unwrap_or_default();
            if !stop.is_zero() && !p.is_stable(s) {
                return Err(format!("stop mass on unstable state `{}`", p.name(s)));
            }
            let lhs = init.get(s) + inflow.get(&s).cloned().unwrap_or_default();
            let rhs = stop + outflow.get(&s).cloned().unwrap_or_default();
            if lhs != rhs {
                return Err(format!("imbalance at `{}`: {} in, {} out", p.name(s), lhs, rhs));
            }
        }
        Ok(())
    }
}

/// An extreme derivative together with its justification.
#[derive(Debug, Clone)]
pub struct ExtremeDerivation {
    /// Where the mass that terminates ends up. Mass below 1 is diverging.
    pub limit: Subdistribution,
    pub occupation: OccupationSolution,
    /// States whose mass cannot stop and is lost.
    pub diverging: BTreeSet<StateId>,
    /// Step-by-step prefix: per round, the mass that moves on and the mass that
    /// stops. Truncated once the moving part is empty or the cap is hit.
    pub stages: Vec<(Subdistribution, Subdistribution)>,
    pub truncated: bool,
}

const STAGE_CAP: usize = 48;

/// The extreme derivative of `init` under one scheduler: mass keeps taking the
/// chosen tau transition until it lands where no tau exists.
pub fn extreme_derivative(
    p: &Plts,
    init: &Subdistribution,
    sched: &MemorylessScheduler,
) -> Result<ExtremeDerivation, EngineError> {
    // Reachable along kept edges, with the scheduler's completeness checked on the way.
    let mut region: BTreeSet<StateId> = init.support().collect();
    let mut stack: Vec<StateId> = region.iter().copied().collect();
    while let Some(s) = stack.pop() {
        if p.is_stable(s) {
            continue;
        }
        let i = sched
            .kept_tau(s)
            .ok_or_else(|| EngineError::IncompleteScheduler { state: p.name(s).to_owned() })?;
        for t in p.transition(i).target.support() {
            if region.insert(t) {
                stack.push(t);
            }
        }
    }
    // Which unstable states can still escape to stability along kept edges?
    let stable: BTreeSet<StateId> = region.iter().copied().filter(|&s| p.is_stable(s)).collect();
    let mut escaping: BTreeSet<StateId> = stable.clone();
    loop {
        let mut grew = false;
        for &s in &region {
            if escaping.contains(&s) || p.is_stable(s) {
                continue;
            }
            let i = sched.kept_tau(s).unwrap();
            if p.transition(i).target.support().any(|t| escaping.contains(&t)) {
                escaping.insert(s);
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    let diverging: BTreeSet<StateId> =
        region.iter().copied().filter(|s| !escaping.contains(s)).collect();
    let transient: Vec<StateId> =
        region.iter().copied().filter(|&s| !p.is_stable(s) && escaping.contains(&s)).collect();

    // Occupancies on the transient states: x = init + (flow already here, pushed on).
    let pos: BTreeMap<StateId, usize> =
        transient.iter().copied().enumerate().map(|(i, s)| (s, i)).collect();
    let n = transient.len();
    let mut a = vec![vec![Rational::zero(); n]; n];
    let mut b = vec![Rational::zero(); n];
    for (row, &s) in transient.iter().enumerate() {
        a[row][row] += Rational::from_integer(1.into());
        b[row] = init.get(s);
    }
    for &s in &transient {
        let i = sched.kept_tau(s).unwrap();
        for (t, w) in p.transition(i).target.iter() {
            if let Some(&row) = pos.get(&t) {
                a[row][pos[&s]] -= w;
            }
        }
    }
    let x = solve_linear(a, b).expect("escape is possible from every transient state");

    let mut flow = BTreeMap::new();
    let mut stop: BTreeMap<StateId, Rational> = BTreeMap::new();
    for &t in &stable {
        let m = init.get(t);
        if !m.is_zero() {
            stop.insert(t, m);
        }
    }
    for (&s, &col) in &pos {
        let i = sched.kept_tau(s).unwrap();
        if !x[col].is_zero() {
            flow.insert((s, i), x[col].clone());
        }
        for (t, w) in p.transition(i).target.iter() {
            if stable.contains(&t) {
                let add = &x[col] * w;
                if !add.is_zero() {
                    *stop.entry(t).or_default() += add;
                }
            }
        }
    }
    stop.retain(|_, v| !v.is_zero());
    let limit = Subdistribution::from_pairs(
        stop.iter().map(|(s, w)| (*s, w.clone())).collect::<Vec<_>>(),
    )
    .expect("stopped mass cannot exceed what was launched");

    // Step-by-step prefix, for exhibition and cross-checks.
    let mut stages = Vec::new();
    let mut cur = init.clone();
    let mut truncated = false;
    loop {
        let moving = cur.filter(|s| !p.is_stable(s));
        let stopping = cur.filter(|s| p.is_stable(s));
        if moving.is_empty() {
            if !stopping.is_empty() || stages.is_empty() {
                stages.push((moving, stopping));
            }
            break;
        }
        stages.push((moving.clone(), stopping));
        if stages.len() >= STAGE_CAP {
            truncated = true;
            break;
        }
        let parts: Vec<(Rational, &Subdistribution)> = moving
            .iter()
            .map(|(s, w)| {
                let i = sched.kept_tau(s).expect("checked above");
                (w.clone(), &p.transition(i).target)
            })
            .collect();
        cur = Subdistribution::combine(&parts).expect("full targets cannot grow mass");
    }

    Ok(ExtremeDerivation {
        limit,
        occupation: OccupationSolution { flow, stop },
        diverging,
        stages,
        truncated,
    })
}

/// Success probabilities of a stopped distribution: per success action, the mass
/// sitting on states that enable it. Only defined on stable support.
pub fn outcome_dollar(
    omegas: &[String],
    p: &Plts,
    delta: &Subdistribution,
) -> Result<Vec<Rational>, EngineError> {
    if let Some(s) = delta.support().find(|&s| !p.is_stable(s)) {
        return Err(EngineError::NotStable { state: p.name(s).to_owned() });
    }
    Ok(omegas
        .iter()
        .map(|w| {
            let label = Label::Success(w.clone());
            delta
                .iter()
                .filter(|(s, _)| p.enables(*s, &label))
                .map(|(_, m)| m.clone())
                .sum()
        })
        .collect())
}

/// The derivation-based outcome set of a pruned composite: one extreme derivative
/// per memoryless scheduler, read off and hulled.
pub fn outcomes_by_derivation(
    pruned: &ComposedPlts,
    opts: &EngineOpts,
) -> Result<EngineRun, EngineError> {
    let omegas = crate::resolution::omegas_of(&pruned.plts);
    let scheds = enumerate_schedulers(pruned, opts)?;
    let mut points = Vec::with_capacity(scheds.len());
    for sched in &scheds {
        let d = extreme_derivative(&pruned.plts, &pruned.init, sched)?;
        points.push(outcome_dollar(&omegas, &pruned.plts, &d.limit)?);
    }
    Ok(EngineRun { polytope: OutcomePolytope::hull(omegas, points), schedulers: scheds.len() })
}

/// Full pipeline: compose, prune, enumerate, derive.
pub fn apply_derivation_based(
    test: &SourceModel,
    process: &SourceModel,
    init_test: &str,
    init_process: &str,
    opts: &EngineOpts,
) -> Result<EngineRun, EngineError> {
    let c = crate::compose::compose(test, process, init_test, init_process)?;
    outcomes_by_derivation(&crate::compose::prune(&c), opts)
}

#[derive(Debug, Error)]
pub enum WeakDerivError {
    #[error(
        "tau divergence reachable from the source (e.g. `{example}`); \
         the one-shot feasibility check answers only on convergent systems — \
         try the bounded staged check instead"
    )]
    DivergentInput { example: String },
}

/// Decide `src ==> tgt` (weak derivation, any scheduling, history-dependence and
/// interpolation included), or with `extreme` set, `src ==>> tgt`.
///
/// Works by flow feasibility: a derivation exists iff transition occupancies with
/// the right conservation profile exist. That equivalence needs convergence — a
/// divergent region reachable from `src` makes the limit behaviour invisible to
/// finite flows, so such inputs are refused rather than misjudged.
pub fn weak_derivative_check(
    p: &Plts,
    src: &Subdistribution,
    tgt: &Subdistribution,
    extreme: bool,
) -> Result<Option<OccupationSolution>, WeakDerivError> {
    let region = p.tau_reachable(src);
    let (core, _) = divergent_core(p, &region);
    if let Some(&s) = core.iter().next() {
        return Err(WeakDerivError::DivergentInput { example: p.name(s).to_owned() });
    }
    if extreme && tgt.support().any(|s| !p.is_stable(s)) {
        return Ok(None);
    }
    if src.mass() < tgt.mass() || tgt.support().any(|s| !region.contains(&s)) {
        return Ok(None);
    }
    // One flow variable per tau transition in the region; conservation per state.
    let mut vars: BTreeMap<(StateId, usize), usize> = BTreeMap::new();
    for &s in &region {
        for i in p.tau_transitions(s) {
            let next = vars.len();
            vars.insert((s, i), next);
        }
    }
    let mut lp = Feasibility::new(vars.len());
    for &s in &region {
        let mut coeffs: Vec<(usize, Rational)> = Vec::new();
        for (&(u, i), &col) in &vars {
            let tr = p.transition(i);
            let mut c = Rational::zero();
            if u == s {
                c -= Rational::from_integer(1.into());
            }
            c += tr.target.get(s);
            if !c.is_zero() {
                coeffs.push((col, c));
            }
        }
        // The stop profile is the target itself, folded into the right-hand side;
        // the extreme case already rejected targets resting on unstable states.
        lp.add_sparse_row(&coeffs, tgt.get(s) - src.get(s));
    }
    // When not extreme, mass is also allowed to stop at unstable states — which
    // the rows above already permit, since `tgt` is simply consulted as written.
    match lp.solve() {
        LpOutcome::Feasible(x) => {
            let flow = vars
                .into_iter()
                .filter(|&(_, col)| !x[col].is_zero())
                .map(|(k, col)| (k, x[col].clone()))
                .collect();
            let stop = tgt.iter().map(|(s, w)| (s, w.clone())).collect();
            Ok(Some(OccupationSolution { flow, stop }))
        }
        LpOutcome::Infeasible(_) => Ok(None),
    }
}

/// A finite-stage witness for `src ==> tgt`: per round, the mass that moved and
/// the mass that stopped.
#[derive(Debug, Clone)]
pub struct StagedDerivation {
    pub stages: Vec<(Subdistribution, Subdistribution)>,
}

/// Search for a derivation of `tgt` from `src` that finishes within `depth` tau
/// rounds. Sound on any input, divergent ones included — but only a semi-decision:
/// derivations that need the limit (geometric stopping, vanishing mass) have no
/// finite-depth witness, so `None` never proves underivability.
pub fn bounded_weak_derivative(
    p: &Plts,
    src: &Subdistribution,
    tgt: &Subdistribution,
    extreme: bool,
    depth: usize,
) -> Option<StagedDerivation> {
    let region: Vec<StateId> = p.tau_reachable(src).into_iter().collect();
    let may_stop = |s: StateId| !extreme || p.is_stable(s);

    // Variables: flow g(k, transition) for rounds 0..depth, stop c(k, state) for
    // rounds 0..=depth where stopping is allowed.
    let mut g: BTreeMap<(usize, StateId, usize), usize> = BTreeMap::new();
    let mut c: BTreeMap<(usize, StateId), usize> = BTreeMap::new();
    let mut n = 0;
    for k in 0..=depth {
        for &s in &region {
            if k < depth {
                for i in p.tau_transitions(s) {
                    g.insert((k, s, i), n);
                    n += 1;
                }
            }
            if may_stop(s) {
                c.insert((k, s), n);
                n += 1;
            }
        }
    }
    let mut lp = Feasibility::new(n);
    // Round k at state s: what arrives must split into stopping and moving.
    for k in 0..=depth {
        for &s in &region {
            let mut coeffs: Vec<(usize, Rational)> = Vec::new();
            if let Some(&col) = c.get(&(k, s)) {
                coeffs.push((col, Rational::from_integer(1.into())));
            }
            if k < depth {
                for i in p.tau_transitions(s) {
                    coeffs.push((g[&(k, s, i)], Rational::from_integer(1.into())));
                }
            }
            let rhs = if k == 0 { src.get(s) } else { Rational::zero() };
            if k > 0 {
                for &u in &region {
                    for i in p.tau_transitions(u) {
                        let w = p.transition(i).target.get(s);
                        if !w.is_zero() {
                            coeffs.push((g[&(k - 1, u, i)], -w));
                        }
                    }
                }
            }
            if coeffs.is_empty() {
                if !rhs.is_zero() {
                    return None; // mass arrives somewhere it can neither stop nor move
                }
                continue;
            }
            lp.add_sparse_row(&coeffs, rhs);
        }
    }
    // Total stopped per state must equal the target.
    let mut tgt_states: BTreeSet<StateId> = region.iter().copied().collect();
    tgt_states.extend(tgt.support());
    for s in tgt_states {
        let coeffs: Vec<(usize, Rational)> = (0..=depth)
            .filter_map(|k| c.get(&(k, s)).map(|&col| (col, Rational::from_integer(1.into()))))
            .collect();
        if coeffs.is_empty() {
            if !tgt.get(s).is_zero() {
                return None;
            }
            continue;
        }
        lp.add_sparse_row(&coeffs, tgt.get(s));
    }
    match lp.solve() {
        LpOutcome::Feasible(x) => {
            let mut stages = Vec::new();
            for k in 0..=depth {
                let moving = Subdistribution::from_pairs(
                    g.iter()
                        .filter(|((kk, _, _), _)| *kk == k)
                        .map(|(&(_, s, _), &col)| (s, x[col].clone()))
                        .collect::<Vec<_>>(),
                )
                .expect("moving mass within bounds");
                let stopping = Subdistribution::from_pairs(
                    c.iter()
                        .filter(|((kk, _), _)| *kk == k)
                        .map(|(&(_, s), &col)| (s, x[col].clone()))
                        .collect::<Vec<_>>(),
                )
                .expect("stopping mass within bounds");
                if moving.is_empty() && stopping.is_empty() {
                    continue;
                }
                stages.push((moving, stopping));
            }
            Some(StagedDerivation { stages })
        }
        LpOutcome::Infeasible(_) => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compose::{compose, prune};
    use crate::parser::{parse_model, ModelKind};
    use crate::rat;
    use crate::resolution::{outcomes_by_resolution, EngineOpts};

    fn t1() -> SourceModel {
        parse_model(
            "model test t1\nalphabet a, c\nsuccess w\n\
             state t0 { a -> { 1/2 tw, 1/2 tx }; c -> { 1 tw } }\n\
             state tw { w -> { 1 te } }\nstate tx { tau -> { 1 td } }\n\
             state td { }\nstate te { }\ninit main = { 1 t0 }\n",
            ModelKind::Test,
        )
        .unwrap()
    }

    fn q1() -> SourceModel {
        parse_model(
            "model process q1\nalphabet a, c\n\
             state q0 { tau -> { 1 q1 } }\nstate q1 { tau -> { 1/2 q0, 1/2 q2 } }\n\
             state q2 { c -> { 1 qc } }\nstate qc { }\ninit main = { 1 q0 }\n",
            ModelKind::Process,
        )
        .unwrap()
    }

    fn ta() -> SourceModel {
        parse_model(
            "model test ta\nalphabet a\nsuccess w\nstate t0 { a -> { 1 t1 } }\n\
             state t1 { w -> { 1 t2 } }\nstate t2 { }\ninit main = { 1 t0 }\n",
            ModelKind::Test,
        )
        .unwrap()
    }

    fn looping() -> SourceModel {
        parse_model(
            "model process diverge\nalphabet a\nstate d { tau -> { 1 d } }\ninit main = { 1 d }\n",
            ModelKind::Process,
        )
        .unwrap()
    }

    fn stall_after_a() -> SourceModel {
        parse_model(
            "model process stall\nalphabet a\nstate p0 { a -> { 1 p1 } }\n\
             state p1 { tau -> { 1 p1 } }\ninit main = { 1 p0 }\n",
            ModelKind::Process,
        )
        .unwrap()
    }

    fn one_sched(c: &ComposedPlts) -> MemorylessScheduler {
        let mut scheds = enumerate_schedulers(c, &EngineOpts::default()).unwrap();
        assert_eq!(scheds.len(), 1);
        scheds.pop().unwrap()
    }

    #[test]
    fn convergence_verdicts_and_witnesses() {
        let lc = compose(&ta(), &looping(), "main", "main").unwrap();
        match is_convergent(&lc.plts, &lc.init) {
            Convergence::Divergent { core } => {
                assert_eq!(core, [lc.pair("t0", "d").unwrap()].into())
            }
            v => panic!("expected divergence, got {v:?}"),
        }

        let qc = compose(&t1(), &q1(), "main", "main").unwrap();
        match is_convergent(&qc.plts, &qc.init) {
            Convergence::Convergent { order } => {
                // replay the evidence: every tau transition leaks onto earlier states
                let position: BTreeMap<StateId, usize> =
                    order.iter().copied().enumerate().map(|(i, s)| (s, i)).collect();
                for (k, &s) in order.iter().enumerate() {
                    for i in qc.plts.tau_transitions(s) {
                        assert!(
                            qc.plts
                                .transition(i)
                                .target
                                .support()
                                .any(|t| position[&t] < k),
                            "state {} lacks a leak",
                            qc.plts.name(s)
                        );
                    }
                }
            }
            v => panic!("expected convergence, got {v:?}"),
        }

        // pruning can restore convergence: the tau loop sits under a success state
        let pc = compose(&ta(), &stall_after_a(), "main", "main").unwrap();
        assert!(!is_convergent(&pc.plts, &pc.init).is_convergent());
        assert!(is_convergent(&prune(&pc).plts, &prune(&pc).init).is_convergent());
    }

    #[test]
    fn geometric_escape_solves_exactly() {
        let c = prune(&compose(&t1(), &q1(), "main", "main").unwrap());
        let sched = one_sched(&c);
        let d = extreme_derivative(&c.plts, &c.init, &sched).unwrap();
        assert_eq!(d.limit, Subdistribution::point(c.pair("tw", "qc").unwrap()));
        assert!(d.diverging.is_empty());
        d.occupation.check_conservation(&c.plts, &c.init, &d.diverging).unwrap();
        // the restart loop is traversed twice in expectation
        let occ: BTreeMap<&str, Rational> =
            d.occupation.flow.iter().map(|(&(s, _), x)| (c.plts.name(s), x.clone())).collect();
        assert_eq!(occ["t0|q0"], rat(2, 1));
        assert_eq!(occ["t0|q1"], rat(2, 1));
        assert_eq!(occ["t0|q2"], rat(1, 1));
        // the staged prefix is truncated (the loop stops only in the limit) and
        // what has stopped so far stays below the limit
        assert!(d.truncated);
        let stopped: Rational = d.stages.iter().map(|(_, stop)| stop.mass()).sum();
        let still_moving = d.stages.last().unwrap().0.mass();
        assert!(stopped < rat(1, 1) && stopped.clone() + still_moving <= rat(1, 1));
    }

    #[test]
    fn divergence_loses_mass_not_errors() {
        let c = prune(&compose(&ta(), &looping(), "main", "main").unwrap());
        let sched = one_sched(&c);
        let d = extreme_derivative(&c.plts, &c.init, &sched).unwrap();
        assert!(d.limit.is_empty());
        assert_eq!(d.diverging, [c.pair("t0", "d").unwrap()].into());
        d.occupation.check_conservation(&c.plts, &c.init, &d.diverging).unwrap();
        let omegas = crate::resolution::omegas_of(&c.plts);
        assert_eq!(outcome_dollar(&omegas, &c.plts, &d.limit).unwrap(), vec![rat(0, 1)]);
    }

    #[test]
    fn pruning_changes_the_derived_outcome() {
        let unpruned = compose(&ta(), &stall_after_a(), "main", "main").unwrap();
        let run = outcomes_by_derivation(&unpruned, &EngineOpts::default()).unwrap();
        assert_eq!(run.polytope.vertices(), &[vec![rat(0, 1)]]);
        let run = outcomes_by_derivation(&prune(&unpruned), &EngineOpts::default()).unwrap();
        assert_eq!(run.polytope.vertices(), &[vec![rat(1, 1)]]);
    }

    #[test]
    fn outcome_needs_stable_support() {
        let c = compose(&ta(), &stall_after_a(), "main", "main").unwrap();
        let unstable = c.pair("t1", "p1").unwrap();
        let omegas = crate::resolution::omegas_of(&c.plts);
        assert!(matches!(
            outcome_dollar(&omegas, &c.plts, &Subdistribution::point(unstable)),
            Err(EngineError::NotStable { .. })
        ));
    }

    #[test]
    fn both_engines_agree_on_the_fixtures() {
        for process in [q1(), stall_after_a()] {
            let test = if process.name == "q1" { t1() } else { ta() };
            let c = prune(&compose(&test, &process, "main", "main").unwrap());
            let by_r = outcomes_by_resolution(&c, &EngineOpts::default()).unwrap();
            let by_d = outcomes_by_derivation(&c, &EngineOpts::default()).unwrap();
            assert_eq!(by_r.polytope, by_d.polytope);
        }
    }

    #[test]
    fn flow_feasibility_decides_derivability() {
        let c = prune(&compose(&t1(), &q1(), "main", "main").unwrap());
        let p = &c.plts;
        let hit = |name: &str| Subdistribution::point(p.state(name).unwrap());

        // the extreme derivative is reachable...
        let sol = weak_derivative_check(p, &c.init, &hit("tw|qc"), true).unwrap().unwrap();
        sol.check_conservation(p, &c.init, &BTreeSet::new()).unwrap();
        // ...an interior split is a derivative but not an extreme one...
        let half = Subdistribution::from_pairs(vec![
            (p.state("t0|q0").unwrap(), rat(1, 2)),
            (p.state("t0|q2").unwrap(), rat(1, 2)),
        ])
        .unwrap();
        assert!(weak_derivative_check(p, &c.init, &half, false).unwrap().is_some());
        assert!(weak_derivative_check(p, &c.init, &half, true).unwrap().is_none());
        // ...and a state only reachable through a success action is no derivative.
        assert!(weak_derivative_check(p, &c.init, &hit("te|qc"), false).unwrap().is_none());

        let lc = compose(&ta(), &looping(), "main", "main").unwrap();
        assert!(matches!(
            weak_derivative_check(&lc.plts, &lc.init, &Subdistribution::empty(), false),
            Err(WeakDerivError::DivergentInput { .. })
        ));
    }

    #[test]
    fn staged_search_is_a_semi_decision() {
        let c = prune(&compose(&t1(), &q1(), "main", "main").unwrap());
        let p = &c.plts;
        let half = Subdistribution::from_pairs(vec![
            (p.state("t0|q0").unwrap(), rat(1, 2)),
            (p.state("t0|q2").unwrap(), rat(1, 2)),
        ])
        .unwrap();
        // two rounds suffice for the even split, one is too few
        let staged = bounded_weak_derivative(p, &c.init, &half, false, 2).unwrap();
        assert!(staged.stages.len() <= 3);
        assert!(bounded_weak_derivative(p, &c.init, &half, false, 1).is_none());
        // the geometric target has no finite-stage witness: inconclusive, honestly
        let hit = Subdistribution::point(p.state("tw|qc").unwrap());
        assert!(bounded_weak_derivative(p, &c.init, &hit, true, 6).is_none());

        // divergent inputs are fine here: staying put is a zero-round derivation,
        // but draining the loop needs the limit and is not found
        let lp = looping();
        let lplts = &lp.plts;
        let d = Subdistribution::point(lplts.state("d").unwrap());
        let stay = bounded_weak_derivative(lplts, &d, &d, false, 0).unwrap();
        assert_eq!(stay.stages.len(), 1);
        assert!(bounded_weak_derivative(lplts, &d, &Subdistribution::empty(), false, 6).is_none());
    }
}
