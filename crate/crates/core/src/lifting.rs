//! Lifting strong transitions to subdistributions.
//!
//! `src --label--> tgt` holds for subdistributions when the mass of every source
//! state can be split across that state's transitions with the given label so that
//! the weighted targets add up to `tgt` exactly. The split is a small LP; a
//! satisfying assignment is returned as a witness so callers can replay it.

use crate::lp::{Feasibility, LpOutcome};
use crate::plts::{Label, Plts, StateId};
use crate::subdist::Subdistribution;
use crate::Rational;
use num_traits::Zero;
use std::collections::BTreeSet;

/// How a lifted transition decomposes: `rows[k] = (state, transition index, weight)`
/// with the weights for one state summing to that state's mass in the source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiftedWitness {
    pub rows: Vec<(StateId, usize, Rational)>,
}

/// Decide whether `src --label--> tgt` as a lifted transition, with witness.
///
/// The empty subdistribution lifts to the empty one under every label (an empty
/// decomposition); mass can neither appear nor disappear otherwise.
pub fn check_lifted_transition(
    p: &Plts,
    src: &Subdistribution,
    label: &Label,
    tgt: &Subdistribution,
) -> Option<LiftedWitness> {
    if src.is_empty() {
        return if tgt.is_empty() { Some(LiftedWitness { rows: Vec::new() }) } else { None };
    }
    if src.mass() != tgt.mass() {
        return None;
    }

    // One variable per (source state, matching transition).
    let mut vars: Vec<(StateId, usize)> = Vec::new();
    for s in src.support() {
        for idx in p.outgoing_labelled(s, label) {
            vars.push((s, idx));
        }
    }

    // Universe of states that must balance on the target side.
    let mut universe: BTreeSet<StateId> = tgt.support().collect();
    for (_, idx) in &vars {
        universe.extend(p.transition(*idx).target.support());
    }

    let mut lp = Feasibility::new(vars.len());
    for s in src.support() {
        let row: Vec<(usize, Rational)> = vars
            .iter()
            .enumerate()
            .filter(|(_, (vs, _))| *vs == s)
            .map(|(j, _)| (j, Rational::from_integer(1.into())))
            .collect();
        lp.add_sparse_row(&row, src.get(s));
    }
    for t in universe {
        let row: Vec<(usize, Rational)> = vars
            .iter()
            .enumerate()
            .map(|(j, (_, idx))| (j, p.transition(*idx).target.get(t)))
            .collect();
        lp.add_sparse_row(&row, tgt.get(t));
    }

    match lp.solve() {
        LpOutcome::Feasible(x) => Some(LiftedWitness {
            rows: vars
                .into_iter()
                .zip(x)
                .filter(|(_, w)| !w.is_zero())
                .map(|((s, idx), w)| (s, idx, w))
                .collect(),
        }),
        LpOutcome::Infeasible(_) => None,
    }
}

/// Replay a witness: check the per-state splits and the recombined target.
pub fn verify_witness(
    p: &Plts,
    src: &Subdistribution,
    label: &Label,
    tgt: &Subdistribution,
    witness: &LiftedWitness,
) -> bool {
    use num_traits::Signed;
    let mut per_state: std::collections::BTreeMap<StateId, Rational> = Default::default();
    let mut recombined: Vec<(StateId, Rational)> = Vec::new();
    for (s, idx, w) in &witness.rows {
        let tr = p.transition(*idx);
        if tr.source != *s || &tr.label != label || w.is_negative() {
            return false;
        }
        *per_state.entry(*s).or_insert_with(Rational::zero) += w;
        for (t, tw) in tr.target.iter() {
            recombined.push((t, w * tw));
        }
    }
    for s in src.support() {
        if per_state.get(&s).cloned().unwrap_or_else(Rational::zero) != src.get(s) {
            return false;
        }
    }
    match Subdistribution::from_pairs(recombined) {
        Ok(d) => d == *tgt,
        Err(_) => false,
    }
}
