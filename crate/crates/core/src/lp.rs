//! Exact linear programming over rationals.
//!
//! Two workhorses live here. `solve_linear` is plain Gauss–Jordan elimination for the
//! square systems produced by value computation and occupation measures. `Feasibility`
//! is a phase-I simplex for systems `A·x = b, x >= 0`: it either returns a feasible
//! point or a Farkas certificate `y` with `y·A <= 0` componentwise and `y·b > 0`,
//! which is what the preorder checker turns into a separating reward tuple.
//!
//! Pivoting uses Bland's rule, so termination does not depend on nondegeneracy.
//! Problem sizes in this crate are tiny (tens of variables), so the tableau is dense.

use crate::Rational;
use num_traits::{One, Signed, Zero};

/// Equality-constrained feasibility problem `A·x = b` with `x >= 0`.
#[derive(Debug, Clone)]
pub struct Feasibility {
    n_vars: usize,
    rows: Vec<(Vec<Rational>, Rational)>,
}

/// Proof that `A·x = b, x >= 0` has no solution: `y·A <= 0` but `y·b > 0`.
#[derive(Debug, Clone)]
pub struct FarkasCertificate {
    pub y: Vec<Rational>,
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Feasible(Vec<Rational>),
    Infeasible(FarkasCertificate),
}

impl Feasibility {
    pub fn new(n_vars: usize) -> Self {
        Feasibility { n_vars, rows: Vec::new() }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// Add the constraint `coeffs · x = rhs`. Missing trailing coefficients are zero.
    pub fn add_row(&mut self, mut coeffs: Vec<Rational>, rhs: Rational) {
        assert!(coeffs.len() <= self.n_vars, "row wider than variable count");
        coeffs.resize(self.n_vars, Rational::zero());
        self.rows.push((coeffs, rhs));
    }

    /// Sparse variant of `add_row`; repeated indices accumulate.
    pub fn add_sparse_row(&mut self, entries: &[(usize, Rational)], rhs: Rational) {
        let mut coeffs = vec![Rational::zero(); self.n_vars];
        for (j, c) in entries {
            assert!(*j < self.n_vars, "column {} out of range", j);
            coeffs[*j] += c;
        }
        self.rows.push((coeffs, rhs));
    }

    /// Phase-I simplex. Decides feasibility exactly.
    pub fn solve(&self) -> LpOutcome {
        let m = self.rows.len();
        let n = self.n_vars;
        if m == 0 {
            return LpOutcome::Feasible(vec![Rational::zero(); n]);
        }

        // Tableau columns: n structural vars, m artificials, then the rhs.
        // Rows are normalised so every rhs is nonnegative; `flipped` remembers which
        // original rows changed sign, for the certificate at the end.
        let width = n + m + 1;
        let mut t: Vec<Vec<Rational>> = Vec::with_capacity(m);
        let mut flipped = vec![false; m];
        for (i, (coeffs, rhs)) in self.rows.iter().enumerate() {
            let mut row: Vec<Rational> = Vec::with_capacity(width);
            let neg = rhs.is_negative();
            flipped[i] = neg;
            for c in coeffs {
                row.push(if neg { -c.clone() } else { c.clone() });
            }
            for k in 0..m {
                row.push(if k == i { Rational::one() } else { Rational::zero() });
            }
            row.push(if neg { -rhs.clone() } else { rhs.clone() });
            t.push(row);
        }
        let mut basis: Vec<usize> = (n..n + m).collect();

        // Reduced costs for the phase-I objective (minimise the artificial sum),
        // recomputed from scratch each pivot; cheap at these sizes and hard to get wrong.
        let reduced = |t: &Vec<Vec<Rational>>, basis: &Vec<usize>| -> Vec<Rational> {
            let mut r: Vec<Rational> = (0..width - 1)
                .map(|j| if j >= n { Rational::one() } else { Rational::zero() })
                .collect();
            for (i, &bj) in basis.iter().enumerate() {
                if bj >= n {
                    // basic artificial has unit cost: subtract its row
                    for j in 0..width - 1 {
                        let v = t[i][j].clone();
                        r[j] -= v;
                    }
                }
            }
            r
        };

        loop {
            let r = reduced(&t, &basis);
            // Bland: entering column = smallest index with negative reduced cost.
            let entering = (0..width - 1).find(|&j| r[j].is_negative());
            let Some(e) = entering else {
                // Optimal. Objective value = sum of basic artificial rhs entries.
                let obj: Rational = basis
                    .iter()
                    .enumerate()
                    .filter(|(_, &bj)| bj >= n)
                    .map(|(i, _)| t[i][width - 1].clone())
                    .sum();
                if obj.is_zero() {
                    let mut x = vec![Rational::zero(); n];
                    for (i, &bj) in basis.iter().enumerate() {
                        if bj < n {
                            x[bj] = t[i][width - 1].clone();
                        }
                    }
                    return LpOutcome::Feasible(x);
                }
                // y_i = 1 - reduced cost of artificial column i, undoing row flips.
                let mut y = Vec::with_capacity(m);
                for i in 0..m {
                    let yi = Rational::one() - r[n + i].clone();
                    y.push(if flipped[i] { -yi } else { yi });
                }
                return LpOutcome::Infeasible(FarkasCertificate { y });
            };

            // Ratio test over rows with positive pivot column entry; Bland tie-break
            // on the smallest basic variable index.
            let mut leave: Option<(usize, Rational)> = None;
            for i in 0..m {
                if t[i][e].is_positive() {
                    let ratio = &t[i][width - 1] / &t[i][e];
                    match &leave {
                        None => leave = Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < *lr || (ratio == *lr && basis[i] < basis[*li]) {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let (li, _) = leave.expect("phase-I objective is bounded below, a pivot row must exist");

            // Pivot on (li, e).
            let pivot = t[li][e].clone();
            for v in t[li].iter_mut() {
                *v /= &pivot;
            }
            for i in 0..m {
                if i != li && !t[i][e].is_zero() {
                    let factor = t[i][e].clone();
                    // Indexing: reads row `li` while writing row `i`.
                    #[allow(clippy::needless_range_loop)]
                    for j in 0..width {
                        let delta = &factor * &t[li][j];
                        t[i][j] -= delta;
                    }
                }
            }
            basis[li] = e;
        }
    }

    /// Check a claimed solution against the rows (used by tests and callers that
    /// want to assert witnesses before trusting them).
    pub fn verify(&self, x: &[Rational]) -> bool {
        if x.len() != self.n_vars || x.iter().any(|v| v.is_negative()) {
            return false;
        }
        self.rows.iter().all(|(coeffs, rhs)| {
            let lhs: Rational = coeffs.iter().zip(x).map(|(c, v)| c * v).sum();
            lhs == *rhs
        })
    }

    /// Check a Farkas certificate: `y·A <= 0` componentwise and `y·b > 0`.
    pub fn verify_certificate(&self, cert: &FarkasCertificate) -> bool {
        if cert.y.len() != self.rows.len() {
            return false;
        }
        for j in 0..self.n_vars {
            let col: Rational = self
                .rows
                .iter()
                .zip(&cert.y)
                .map(|((coeffs, _), yi)| &coeffs[j] * yi)
                .sum();
            if col.is_positive() {
                return false;
            }
        }
        let yb: Rational = self.rows.iter().zip(&cert.y).map(|((_, rhs), yi)| rhs * yi).sum();
        yb.is_positive()
    }
}

/// Solve the square system `a·x = b` by Gauss–Jordan elimination.
/// Returns `None` when the matrix is singular.
pub fn solve_linear(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Option<Vec<Rational>> {
    let n = b.len();
    assert!(a.len() == n && a.iter().all(|r| r.len() == n), "system must be square");
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let pivot_row = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        perm.swap(col, pivot_row);
        let pivot = a[col][col].clone();
        for v in a[col].iter_mut() {
            *v /= &pivot;
        }
        b[col] /= &pivot;
        for row in 0..n {
            if row != col && !a[row][col].is_zero() {
                let factor = a[row][col].clone();
                // Indexing: reads row `col` while writing row `row`.
                #[allow(clippy::needless_range_loop)]
                for j in col..n {
                    let delta = &factor * &a[col][j];
                    a[row][j] -= delta;
                }
                let delta = &factor * &b[col];
                b[row] -= delta;
            }
        }
    }
    Some(b)
}
