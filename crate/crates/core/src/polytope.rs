//! Outcome vectors and their convex hulls.
//!
//! Running a test yields, per scheduler, a vector of success probabilities — one
//! coordinate per success action, each in [0,1]. The set of all such vectors is the
//! convex hull of finitely many of them. This module keeps those hulls in a canonical
//! form (sorted vertex list, interior points removed) so that two runs produce the
//! same value if and only if the structs compare equal, and answers membership and
//! containment questions exactly, handing back a Farkas certificate when a point is
//! outside. The certificate is what the preorder layer turns into a separating
//! reward tuple.

use crate::lp::{Feasibility, LpOutcome};
use crate::Rational;
use num_traits::Zero;
use std::fmt;

pub type OutcomeVector = Vec<Rational>;

/// How to pad the hull before a membership test.
///
/// `Exact` asks for the point itself; `MinusOrthant` accepts any point dominated by
/// a hull member (coordinates may sag); `PlusOrthant` accepts any point dominating
/// one (coordinates may rise). These are the three comparisons the testing preorders
/// need.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shift {
    Exact,
    MinusOrthant,
    PlusOrthant,
}

/// Evidence that a point lies outside a (possibly shifted) hull: a linear functional
/// `g` and bound `c` with g·v > c for the queried point but g·u <= c for every
/// point of the shifted hull.
#[derive(Debug, Clone)]
pub struct SeparationEvidence {
    pub g: Vec<Rational>,
    pub c: Rational,
}

/// A convex polytope of outcome vectors, stored by its vertices in canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomePolytope {
    omegas: Vec<String>,
    vertices: Vec<OutcomeVector>,
}

impl OutcomePolytope {
    /// Build the hull of the given points: deduplicate, drop every point expressible
    /// as a convex combination of the others, sort what remains.
    ///
    /// Every coordinate must lie in [0,1] and every point must have one coordinate
    /// per success action; at least one point is required (an empty outcome set
    /// cannot arise — even a test that never fires yields the zero vector).
    pub fn hull(omegas: Vec<String>, points: Vec<OutcomeVector>) -> Self {
        assert!(!points.is_empty(), "outcome sets are never empty");
        let zero = Rational::zero();
        let one = Rational::from_integer(1.into());
        for p in &points {
            assert_eq!(p.len(), omegas.len(), "outcome vector has wrong dimension");
            for x in p {
                assert!(*x >= zero && *x <= one, "outcome coordinate outside [0,1]");
            }
        }
        let mut vertices: Vec<OutcomeVector> = points;
        vertices.sort();
        vertices.dedup();
        // Remove interior points: a point stays only if the others cannot express it.
        let mut keep = vec![true; vertices.len()];
        for i in 0..vertices.len() {
            let others: Vec<&OutcomeVector> = vertices
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i && keep[j])
                .map(|(_, v)| v)
                .collect();
            if !others.is_empty() && in_hull_of(&others, &vertices[i], Shift::Exact).is_ok() {
                keep[i] = false;
            }
        }
        let vertices = vertices
            .into_iter()
            .zip(keep)
            .filter_map(|(v, k)| k.then_some(v))
            .collect();
        OutcomePolytope { omegas, vertices }
    }

    /// The success actions labelling the coordinates, in order.
    pub fn omegas(&self) -> &[String] {
        &self.omegas
    }

    pub fn vertices(&self) -> &[OutcomeVector] {
        &self.vertices
    }

    pub fn dim(&self) -> usize {
        self.omegas.len()
    }

    /// Decide whether `point` lies in this hull, shifted as requested. `Err` carries
    /// a separating functional.
    pub fn member(&self, point: &OutcomeVector, shift: Shift) -> Result<(), SeparationEvidence> {
        assert_eq!(point.len(), self.dim());
        let refs: Vec<&OutcomeVector> = self.vertices.iter().collect();
        in_hull_of(&refs, point, shift)
    }

    /// Decide whether every point of `other` lies in this (shifted) hull. On failure
    /// returns the first offending vertex of `other` together with the evidence.
    pub fn contains(
        &self,
        other: &OutcomePolytope,
        shift: Shift,
    ) -> Result<(), (OutcomeVector, SeparationEvidence)> {
        assert_eq!(self.omegas, other.omegas, "comparing hulls over different success actions");
        for v in &other.vertices {
            if let Err(ev) = self.member(v, shift) {
                return Err((v.clone(), ev));
            }
        }
        Ok(())
    }

    /// Minimum and maximum of `h · x` over the polytope, with an attaining vertex each.
    pub fn extrema(&self, h: &[Rational]) -> ((Rational, &OutcomeVector), (Rational, &OutcomeVector)) {
        assert_eq!(h.len(), self.dim());
        let mut lo: Option<(Rational, &OutcomeVector)> = None;
        let mut hi: Option<(Rational, &OutcomeVector)> = None;
        for v in &self.vertices {
            let d = dot(h, v);
            if lo.as_ref().is_none_or(|(b, _)| d < *b) {
                lo = Some((d.clone(), v));
            }
            if hi.as_ref().is_none_or(|(b, _)| d > *b) {
                hi = Some((d, v));
            }
        }
        (lo.unwrap(), hi.unwrap())
    }
}

impl fmt::Display for OutcomePolytope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "success actions: {}", self.omegas.join(", "))?;
        for v in &self.vertices {
            let coords: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            writeln!(f, "  ({})", coords.join(", "))?;
        }
        Ok(())
    }
}

pub fn dot(h: &[Rational], v: &[Rational]) -> Rational {
    h.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Feasibility core shared by membership and hull canonicalisation.
///
/// Encodes: find weights `lambda >= 0` summing to 1 (plus orthant slack when
/// shifted) with `sum lambda_i v_i (+/- s) = point`. Infeasibility yields a Farkas
/// vector `y`; splitting it as (g over the coordinate rows, y0 for the weight row)
/// gives g·point + y0 > 0 while g·v_i + y0 <= 0 for each vertex and the slack sign
/// condition holds, i.e. g separates the point from the shifted hull with bound
/// c = -y0.
fn in_hull_of(
    vertices: &[&OutcomeVector],
    point: &OutcomeVector,
    shift: Shift,
) -> Result<(), SeparationEvidence> {
    let dim = point.len();
    let k = vertices.len();
    let slack = match shift {
        Shift::Exact => 0,
        _ => dim,
    };
    let mut lp = Feasibility::new(k + slack);
    for d in 0..dim {
        let mut row: Vec<Rational> = Vec::with_capacity(k + slack);
        for v in vertices {
            row.push(v[d].clone());
        }
        for j in 0..slack {
            let sign = match shift {
                Shift::MinusOrthant => -1i64,
                Shift::PlusOrthant => 1,
                Shift::Exact => unreachable!(),
            };
            row.push(if j == d { crate::rat(sign, 1) } else { Rational::zero() });
        }
        lp.add_row(row, point[d].clone());
    }
    let mut weight_row = vec![Rational::from_integer(1.into()); k];
    weight_row.extend(std::iter::repeat_n(Rational::zero(), slack));
    lp.add_row(weight_row, Rational::from_integer(1.into()));
    match lp.solve() {
        LpOutcome::Feasible(_) => Ok(()),
        LpOutcome::Infeasible(cert) => {
            let g: Vec<Rational> = cert.y[..dim].to_vec();
            let c = -cert.y[dim].clone();
            debug_assert!(dot(&g, point) > c, "separation must cut off the point");
            Err(SeparationEvidence { g, c })
        }
    }
}
