//! Brute-force reference solvers used only by tests.
//!
//! Compiled for unit tests and behind the `oracles` feature so that other
//! crates' test suites can reach them. Nothing in the library calls into this
//! module.

use crate::lpsolve::{LinearProgram, Sense};
use rand::Rng;

/// Outcome of exhaustive vertex enumeration.
#[derive(Debug, Clone, PartialEq)]
pub enum VertexOptimum {
    Optimal { objective: f64, point: Vec<f64> },
    Infeasible,
}

/// Enumerates every basic solution (n linearly independent active rows or
/// bounds), keeps the feasible ones and returns the best objective.
///
/// Only valid when the feasible region is bounded, which holds whenever every
/// variable has finite bounds.
pub fn vertex_enumeration(lp: &LinearProgram) -> VertexOptimum {
    let n = lp.num_vars();
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in &lp.constraints {
        let mut a = vec![0.0; n];
        for &(j, v) in &c.terms {
            a[j] += v;
        }
        planes.push((a, c.rhs));
    }
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        for b in [lo, hi] {
            if b.is_finite() {
                let mut a = vec![0.0; n];
                a[j] = 1.0;
                planes.push((a, b));
            }
        }
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut pick = Vec::with_capacity(n);
    combinations(planes.len(), n, 0, &mut pick, &mut |idx| {
        let rows: Vec<&(Vec<f64>, f64)> = idx.iter().map(|&k| &planes[k]).collect();
        if let Some(x) = solve_square(&rows) {
            if is_feasible(lp, &x, 1e-7) {
                let obj: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                    best = Some((obj, x));
                }
            }
        }
    });
    match best {
        Some((objective, point)) => VertexOptimum::Optimal { objective, point },
        None => VertexOptimum::Infeasible,
    }
}

fn combinations(total: usize, k: usize, start: usize, pick: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if pick.len() == k {
        f(pick);
        return;
    }
    for i in start..total {
        if total - i < k - pick.len() {
            break;
        }
        pick.push(i);
        combinations(total, k, i + 1, pick, f);
        pick.pop();
    }
}

#[allow(clippy::needless_range_loop)]
fn solve_square(rows: &[&(Vec<f64>, f64)]) -> Option<Vec<f64>> {
    let n = rows.len();
    let mut m: Vec<Vec<f64>> = rows
        .iter()
        .map(|(a, b)| {
            let mut r = a.clone();
            r.push(*b);
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                if f != 0.0 {
                    for c in col..=n {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

fn is_feasible(lp: &LinearProgram, x: &[f64], tol: f64) -> bool {
    for (v, &(lo, hi)) in x.iter().zip(&lp.bounds) {
        if *v < lo - tol || *v > hi + tol {
            return false;
        }
    }
    lp.constraints.iter().all(|c| {
        let act = c.activity(x);
        match c.sense {
            Sense::Ge => act >= c.rhs - tol,
            Sense::Le => act <= c.rhs + tol,
            Sense::Eq => (act - c.rhs).abs() <= tol,
        }
    })
}

/// Random LP with `2..=max_vars` variables, `1..=max_rows` rows, small
/// integer data and finite bounds on every variable.
pub fn random_bounded_lp<R: Rng>(rng: &mut R, max_vars: usize, max_rows: usize) -> LinearProgram {
    let n = rng.random_range(2..=max_vars);
    let m = rng.random_range(1..=max_rows);
    let mut lp = LinearProgram::new(n);
    lp.objective = (0..n).map(|_| rng.random_range(-5..=5) as f64).collect();
    lp.bounds = (0..n)
        .map(|_| match rng.random_range(0..4) {
            0 => (0.0, rng.random_range(1..=10) as f64),
            1 => {
                let u = rng.random_range(1..=10) as f64;
                (-u, u)
            }
            2 => (rng.random_range(-3..=0) as f64, rng.random_range(1..=20) as f64),
            _ => (-20.0, 20.0),
        })
        .collect();
    for _ in 0..m {
        let coeffs: Vec<f64> = (0..n).map(|_| rng.random_range(-4..=4) as f64).collect();
        let sense = match rng.random_range(0..7) {
            0..=2 => Sense::Le,
            3..=5 => Sense::Ge,
            _ => Sense::Eq,
        };
        let rhs = rng.random_range(-10..=10) as f64;
        lp.add(crate::lpsolve::Constraint::dense(&coeffs, sense, rhs));
    }
    lp
}
