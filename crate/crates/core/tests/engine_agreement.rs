//! Randomized cross-checks between the two outcome engines and the structures
//! they rest on. Everything is seeded, so a failure here replays exactly.

mod common;

use common::{parse_process, parse_test, random_process, random_test, rng_for};
use num_traits::ToPrimitive;
use preorderlab_core::compose::{compose, prune, ComposedPlts};
use preorderlab_core::corpus;
use preorderlab_core::derivation::{is_convergent, outcomes_by_derivation, Convergence};
use preorderlab_core::parser::{parse_model, ModelKind, SourceModel};
use preorderlab_core::plts::{Label, Plts, StateId};
use preorderlab_core::polytope::Shift;
use preorderlab_core::resolution::{
    check_resolution, outcomes_by_resolution, resolution_value, EngineError, EngineOpts,
    EngineRun, Resolution,
};
use preorderlab_core::subdist::Subdistribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

const OPTS: EngineOpts = EngineOpts { max_schedulers: 256 };

/// Compose, clean, and run both engines; `None` when the pair needs more
/// schedulers than the cap allows.
fn both_engines(test: &SourceModel, process: &SourceModel) -> Option<(EngineRun, EngineRun)> {
    let c = compose(test, process, "main", "main").expect("generated models compose");
    let pruned = prune(&c);
    match (
        outcomes_by_resolution(&pruned, &OPTS),
        outcomes_by_derivation(&pruned, &OPTS),
    ) {
        (Ok(r), Ok(d)) => Some((r, d)),
        (Err(EngineError::TooManySchedulers { .. }), _)
        | (_, Err(EngineError::TooManySchedulers { .. })) => None,
        (r, d) => panic!("engine failed on a generated pair: {r:?} / {d:?}"),
    }
}

#[test]
fn resolution_and_derivation_agree_on_random_pairs() {
    let mut checked = 0;
    let mut seed = 0u64;
    while checked < 200 {
        seed += 1;
        assert!(seed < 4000, "generator keeps exceeding the scheduler cap");
        let mut rng = rng_for(seed);
        let test = parse_test(&random_test(&mut rng, "t"));
        let process = parse_process(&random_process(&mut rng, "p"));
        let Some((res, der)) = both_engines(&test, &process) else {
            continue;
        };
        assert_eq!(
            res.polytope.vertices(),
            der.polytope.vertices(),
            "engines disagree at seed {seed}\ntest:\n{}\nprocess:\n{}",
            test.serialize(),
            process.serialize()
        );
        checked += 1;
    }
}

#[test]
fn state_numbering_does_not_matter() {
    let mut checked = 0;
    let mut seed = 10_000u64;
    while checked < 40 {
        seed += 1;
        assert!(seed < 11_000, "generator keeps exceeding the scheduler cap");
        let mut rng = rng_for(seed);
        let raw_test = random_test(&mut rng, "t");
        let raw_process = random_process(&mut rng, "p");

        let mut order: Vec<usize> = (0..raw_process.n_blocks()).collect();
        order.reverse();
        let process = parse_process(&raw_process);
        let permuted =
            parse_model(&raw_process.text_with_order(&order), ModelKind::Process).unwrap();
        let test = parse_test(&raw_test);

        let (Some((res_a, der_a)), Some((res_b, der_b))) =
            (both_engines(&test, &process), both_engines(&test, &permuted))
        else {
            continue;
        };
        assert_eq!(res_a.polytope.vertices(), res_b.polytope.vertices(), "seed {seed}");
        assert_eq!(der_a.polytope.vertices(), der_b.polytope.vertices(), "seed {seed}");
        checked += 1;
    }
}

/// A depth-bounded tree resolution: every visit down to `cap` picks its own
/// internal move, then the run falls into a fixed memoryless tail. This is the
/// strictly-richer scheduler class; its values must still land inside the hull
/// the memoryless engine computed.
fn random_tree_resolution(c: &ComposedPlts, rng: &mut ChaCha8Rng, cap: usize) -> Resolution {
    let p = &c.plts;
    let mut r = Plts::new(p.visible.clone(), p.successes.clone());
    let mut mapping: BTreeMap<StateId, StateId> = BTreeMap::new();
    let name_of = |p: &Plts, s: StateId, k: usize| {
        if k < cap {
            format!("d{k}:{}", p.name(s))
        } else {
            format!("inf:{}", p.name(s))
        }
    };
    let intern = |r: &mut Plts, mapping: &mut BTreeMap<StateId, StateId>, s: StateId, k: usize| {
        let id = r.add_state(&name_of(p, s, k));
        mapping.insert(id, s);
        id
    };

    let mut stack: Vec<(StateId, usize)> = Vec::new();
    let mut seen: BTreeSet<(StateId, usize)> = BTreeSet::new();
    let mut init_pairs: Vec<(StateId, preorderlab_core::Rational)> = Vec::new();
    for (s, w) in c.init.iter() {
        let id = intern(&mut r, &mut mapping, s, 0);
        init_pairs.push((id, w.clone()));
        if seen.insert((s, 0)) {
            stack.push((s, 0));
        }
    }
    while let Some((s, k)) = stack.pop() {
        let node = r.add_state(&name_of(p, s, k));
        let next_k = (k + 1).min(cap);
        // one transition per label: a random internal move below the cap, the
        // first one at the tail; the first transition for every other label
        let mut chosen: Vec<usize> = Vec::new();
        let taus = p.tau_transitions(s);
        if !taus.is_empty() {
            chosen.push(if k < cap { taus[rng.gen_range(0..taus.len())] } else { taus[0] });
        }
        let mut labels_done: BTreeSet<&Label> = BTreeSet::new();
        for &i in p.outgoing(s) {
            let label = &p.transition(i).label;
            if *label != Label::Tau && labels_done.insert(label) {
                chosen.push(i);
            }
        }
        for i in chosen {
            let tr = p.transition(i);
            let mut pairs = Vec::new();
            for (t, w) in tr.target.iter() {
                let tid = intern(&mut r, &mut mapping, t, next_k);
                pairs.push((tid, w.clone()));
                if seen.insert((t, next_k)) {
                    stack.push((t, next_k));
                }
            }
            let target = Subdistribution::from_pairs(pairs).expect("image of a full target");
            r.add_transition(node, tr.label.clone(), target).expect("labels came from p");
        }
    }
    Resolution {
        plts: r,
        init: Subdistribution::from_pairs(init_pairs).expect("image of the init"),
        mapping,
    }
}

#[test]
fn history_dependent_resolutions_stay_inside_the_hull() {
    let fixture = |test_path: &str, proc_path: &str| {
        let t = parse_model(&corpus::text_of(test_path).unwrap(), ModelKind::Test).unwrap();
        let p = parse_model(&corpus::text_of(proc_path).unwrap(), ModelKind::Process).unwrap();
        prune(&compose(&t, &p, "main", "main").unwrap())
    };
    let composites = [
        fixture("restart/t1.test", "restart/q2.proc"),
        fixture("refine/tdiv.test", "refine/divC.proc"),
        fixture("refine/tb.test", "refine/divL.proc"),
    ];
    let runs: Vec<EngineRun> =
        composites.iter().map(|c| outcomes_by_resolution(c, &OPTS).unwrap()).collect();

    let mut rng = rng_for(42);
    for round in 0..100 {
        let which = round % composites.len();
        let c = &composites[which];
        let cap = rng.gen_range(1..=8);
        let r = random_tree_resolution(c, &mut rng, cap);
        let violations = check_resolution(c, &r);
        assert!(violations.is_empty(), "round {round}: {violations:?}");
        let value = resolution_value(&r).unwrap();
        assert!(
            runs[which].polytope.member(&value, Shift::Exact).is_ok(),
            "round {round}: tree resolution value {value:?} escapes the hull"
        );
    }
}

/// Numeric cross-check of the convergence verdict: where it says convergent,
/// spreading mass uniformly over internal moves must drain the unstable states;
/// where it says divergent, the reported core must be closed under some
/// internal move at every member.
#[test]
fn convergence_verdict_matches_numeric_draining() {
    for seed in 0..100u64 {
        let mut rng = rng_for(20_000 + seed);
        let process = parse_process(&random_process(&mut rng, "p"));
        let p = &process.plts;
        let (_, init) = process.default_init();
        match is_convergent(p, init) {
            Convergence::Convergent { .. } => {
                let n = p.n_states();
                let mut cur = vec![0.0f64; n];
                for (s, w) in init.iter() {
                    cur[s.index()] = w.to_f64().unwrap();
                }
                let unstable_mass = |v: &[f64]| -> f64 {
                    p.states()
                        .filter(|s| !p.tau_transitions(*s).is_empty())
                        .map(|s| v[s.index()])
                        .sum()
                };
                let mut last = unstable_mass(&cur);
                for _ in 0..5_000 {
                    let mut next = vec![0.0f64; n];
                    for s in p.states() {
                        let taus = p.tau_transitions(s);
                        if taus.is_empty() {
                            next[s.index()] += cur[s.index()];
                            continue;
                        }
                        let share = cur[s.index()] / taus.len() as f64;
                        for &i in &taus {
                            for (t, w) in p.transition(i).target.iter() {
                                next[t.index()] += share * w.to_f64().unwrap();
                            }
                        }
                    }
                    let now = unstable_mass(&next);
                    assert!(now <= last + 1e-12, "unstable mass grew at seed {seed}");
                    last = now;
                    cur = next;
                }
                assert!(
                    last < 1e-6,
                    "verdict says convergent but mass lingers ({last}) at seed {seed}:\n{}",
                    process.serialize()
                );
            }
            Convergence::Divergent { core } => {
                assert!(!core.is_empty());
                for &s in &core {
                    let closed = p.tau_transitions(s).iter().any(|&i| {
                        p.transition(i).target.support().all(|t| core.contains(&t))
                    });
                    assert!(
                        closed,
                        "core state {} has no internal move staying inside at seed {seed}",
                        p.name(s)
                    );
                }
            }
        }
    }
}
