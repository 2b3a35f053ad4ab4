//! Grid checks of the geometric preorder decisions against their defining
//! quantifier: "holds" must mean no reward tuple in the box separates the two
//! polytopes the wrong way, and "fails" must come with a replayable refutation.
//!
//! Vertices are drawn on an eighth-grid and reward tuples on a per-dimension
//! grid, so every payoff fits an i64 numerator over a fixed denominator and the
//! sweep stays exact without big-rational arithmetic in the hot loop.

mod common;

use common::rng_for;
use preorderlab_core::polytope::OutcomePolytope;
use preorderlab_core::preorder::{compare_outcomes, PreorderKind};
use preorderlab_core::{rat, Rational};
use num_traits::ToPrimitive;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn omega_names(dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("w{i}")).collect()
}

/// 1 to 4 points with coordinates k/8 in [0, 1].
fn random_polytope(rng: &mut ChaCha8Rng, dim: usize) -> OutcomePolytope {
    let n = rng.gen_range(1..=4);
    let points = (0..n)
        .map(|_| (0..dim).map(|_| rat(rng.gen_range(0..=8), 8)).collect::<Vec<Rational>>())
        .collect();
    OutcomePolytope::hull(omega_names(dim), points)
}

/// Vertex coordinates as integer numerators over 8.
fn eighths(p: &OutcomePolytope) -> Vec<Vec<i64>> {
    p.vertices()
        .iter()
        .map(|v| {
            v.iter()
                .map(|c| {
                    let scaled = c * rat(8, 1);
                    assert!(scaled.is_integer(), "vertex left the eighth-grid: {c}");
                    scaled.to_integer().to_i64().unwrap()
                })
                .collect()
        })
        .collect()
}

/// Smallest and largest of h . v over the vertex list, as numerators over
/// (reward denominator * 8).
fn extrema(h: &[i64], vertices: &[Vec<i64>]) -> (i64, i64) {
    let mut lo = i64::MAX;
    let mut hi = i64::MIN;
    for v in vertices {
        let dot: i64 = h.iter().zip(v).map(|(a, b)| a * b).sum();
        lo = lo.min(dot);
        hi = hi.max(dot);
    }
    (lo, hi)
}

/// Walk the reward grid over [-1, 1]^dim with numerators over `den`, calling
/// `f(h, nonnegative)` for each tuple.
fn for_each_reward(dim: usize, den: i64, mut f: impl FnMut(&[i64], bool)) {
    let mut h = vec![-den; dim];
    loop {
        f(&h, h.iter().all(|&c| c >= 0));
        let mut i = 0;
        loop {
            if i == dim {
                return;
            }
            h[i] += 1;
            if h[i] <= den {
                break;
            }
            h[i] = -den;
            i += 1;
        }
    }
}

fn grid_denominator(dim: usize) -> i64 {
    match dim {
        1 => 32,
        2 => 16,
        _ => 4,
    }
}

#[test]
fn verdicts_survive_a_reward_sweep() {
    for seed in 0..500u64 {
        let mut rng = rng_for(30_000 + seed);
        let dim = 1 + (seed % 3) as usize;
        let left = random_polytope(&mut rng, dim);
        let right = random_polytope(&mut rng, dim);
        let verdicts: Vec<bool> = PreorderKind::ALL
            .iter()
            .map(|&k| {
                let v = compare_outcomes(k, &left, &right);
                if !v.holds {
                    replay(k, &left, &right, &v);
                }
                v.holds
            })
            .collect();
        let [pmay, pmust, nrmay, nrmust, rrmay, rrmust] = verdicts[..] else { unreachable!() };

        let lv = eighths(&left);
        let rv = eighths(&right);
        for_each_reward(dim, grid_denominator(dim), |h, nonneg| {
            let (l_inf, l_sup) = extrema(h, &lv);
            let (r_inf, r_sup) = extrema(h, &rv);
            if nonneg {
                assert!(!pmay || l_sup <= r_sup, "seed {seed}: pmay broken by {h:?}");
                assert!(!nrmay || l_sup <= r_sup, "seed {seed}: nrmay broken by {h:?}");
                assert!(!pmust || l_inf <= r_inf, "seed {seed}: pmust broken by {h:?}");
                assert!(!nrmust || l_inf <= r_inf, "seed {seed}: nrmust broken by {h:?}");
            }
            assert!(!rrmay || l_sup <= r_sup, "seed {seed}: rrmay broken by {h:?}");
            assert!(!rrmust || l_inf <= r_inf, "seed {seed}: rrmust broken by {h:?}");
        });
    }
}

/// Recompute the payoffs the counterexample claims and check they refute the
/// preorder: a strictly larger left payoff under its stated reward tuple.
fn replay(
    kind: PreorderKind,
    left: &OutcomePolytope,
    right: &OutcomePolytope,
    verdict: &preorderlab_core::preorder::Verdict,
) {
    let cex = verdict.counterexample.as_ref().expect("failed verdicts carry a refutation");
    let payoff = |p: &OutcomePolytope| {
        let dots: Vec<Rational> = p
            .vertices()
            .iter()
            .map(|v| cex.h.values().iter().zip(v).map(|(a, b)| a * b).sum())
            .collect();
        if kind.is_must() {
            dots.into_iter().min().unwrap()
        } else {
            dots.into_iter().max().unwrap()
        }
    };
    let l = payoff(left);
    let r = payoff(right);
    assert!(l > r, "{kind:?} counterexample does not separate: left {l}, right {r}");
    assert_eq!(l, cex.left_payoff, "{kind:?} misreports the left payoff");
    assert_eq!(r, cex.right_payoff, "{kind:?} misreports the right payoff");
}

#[test]
fn real_reward_may_and_must_are_mirror_images() {
    for seed in 0..200u64 {
        let mut rng = rng_for(40_000 + seed);
        let dim = 1 + (seed % 3) as usize;
        let a = random_polytope(&mut rng, dim);
        let b = random_polytope(&mut rng, dim);
        assert_eq!(
            compare_outcomes(PreorderKind::Rrmay, &a, &b).holds,
            compare_outcomes(PreorderKind::Rrmust, &b, &a).holds,
            "seed {seed}"
        );
        assert_eq!(
            compare_outcomes(PreorderKind::Rrmay, &b, &a).holds,
            compare_outcomes(PreorderKind::Rrmust, &a, &b).holds,
            "seed {seed}"
        );
    }
}
