//! Bounded-variable primal simplex for small and medium dense-ish LPs.
//!
//! Every row `a_i . x (sense) b_i` is rewritten as `a_i . x - r_i = 0` with a
//! logical variable `r_i` whose bounds carry the sense and right-hand side, so
//! the whole system is homogeneous and every variable is simply bounded.
//! Rows whose logical starts out of bounds get an artificial variable and a
//! phase-1 pass minimizes the sum of artificials.
//!
//! The tableau is stored row-wise and sparse. Pricing is Dantzig (most
//! negative reduced cost) and switches to Bland's smallest-index rule after a
//! run of degenerate pivots, which rules out cycling.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("constraint {row} references variable {col} but the program has {n} variables")]
    ColumnOutOfRange { row: usize, col: usize, n: usize },
    #[error("variable {0} has lower bound above upper bound")]
    InvertedBounds(usize),
    #[error("bounds vector has length {bounds}, objective has length {n}")]
    BoundsLength { bounds: usize, n: usize },
    #[error("non-finite coefficient in {0}")]
    NonFinite(&'static str),
    #[error("value vector has length {got}, program has {n} variables")]
    Dimension { got: usize, n: usize },
    #[error("simplex iteration limit ({0}) reached")]
    IterationLimit(usize),
    #[error("numerical breakdown: {0}")]
    Numerical(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Ge,
    Le,
    Eq,
}

/// One linear row stored as `(variable, coefficient)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Self {
        Self { terms, sense, rhs }
    }

    /// Builds a row from a dense coefficient vector, dropping zeros.
    pub fn dense(coeffs: &[f64], sense: Sense, rhs: f64) -> Self {
        let terms = coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(j, c)| (j, *c))
            .collect();
        Self { terms, sense, rhs }
    }

    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|(j, a)| a * values[*j]).sum()
    }
}

/// `minimize objective . x` subject to the constraints and per-variable bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    /// `(lower, upper)`, either side may be infinite.
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    /// A program with `n` non-negative variables and zero objective.
    pub fn new(n: usize) -> Self {
        Self {
            objective: vec![0.0; n],
            constraints: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn add(&mut self, c: Constraint) {
        self.constraints.push(c);
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(LpError::BoundsLength {
                bounds: self.bounds.len(),
                n,
            });
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::NonFinite("objective"));
        }
        for (j, (lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || *lo == f64::INFINITY || *hi == f64::NEG_INFINITY {
                return Err(LpError::NonFinite("bounds"));
            }
            if lo > hi {
                return Err(LpError::InvertedBounds(j));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(LpError::NonFinite("right-hand side"));
            }
            for &(j, a) in &c.terms {
                if j >= n {
                    return Err(LpError::ColumnOutOfRange { row: i, col: j, n });
                }
                if !a.is_finite() {
                    return Err(LpError::NonFinite("constraint coefficients"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal values; meaningful only when `status` is optimal.
    pub values: Vec<f64>,
    pub objective_value: f64,
    pub iterations: usize,
}

/// Rescaling applied to right-hand sides and bounds before solving.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhsScale {
    /// Power of ten that brings the largest finite rhs/bound magnitude into [1, 10).
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub rhs_scale: RhsScale,
    /// Consecutive degenerate pivots tolerated before switching to Bland's rule.
    pub degenerate_limit: usize,
    pub max_iterations: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rhs_scale: RhsScale::Auto,
            degenerate_limit: 50,
            max_iterations: None,
        }
    }
}

const PIVOT_TOL: f64 = 1e-10;
const OPT_TOL: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-8;
const DROP_TOL: f64 = 1e-14;
pub const FEAS_TOL: f64 = 1e-8;

pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_with(lp, &SolverOptions::default())
}

pub fn solve_with(lp: &LinearProgram, opts: &SolverOptions) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let (scaled, col_scale) = equilibrate(lp);
    let scale = match opts.rhs_scale {
        RhsScale::Fixed(s) => s,
        RhsScale::Auto => auto_scale(&scaled),
    };
    let mut tab = Tableau::build(&scaled, scale);
    let limit = opts.max_iterations.unwrap_or(50 * (tab.ncols + tab.rows.len()) + 1000);

    let n = lp.num_vars();
    if tab.n_art > 0 {
        tab.set_phase1_costs();
        match tab.iterate(opts.degenerate_limit, limit)? {
            Outcome::Optimal => {}
            // Phase 1 is bounded below by zero, so this only happens when
            // the tableau has lost accuracy.
            Outcome::Unbounded => return Err(LpError::Numerical("unbounded phase-1 ray")),
        }
        tab.refresh_basics();
        let infeas: f64 = (tab.ncols - tab.n_art..tab.ncols).map(|j| tab.value[j]).sum();
        if infeas > PHASE1_TOL * tab.rows.len().max(1) as f64 {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                values: vec![f64::NAN; n],
                objective_value: f64::NAN,
                iterations: tab.iterations,
            });
        }
        tab.retire_artificials();
    }
    tab.set_phase2_costs(&scaled.objective);
    let outcome = tab.iterate(opts.degenerate_limit, limit)?;
    tab.refresh_basics();
    if outcome == Outcome::Unbounded {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            values: vec![f64::NAN; n],
            objective_value: f64::NEG_INFINITY,
            iterations: tab.iterations,
        });
    }
    let mut values: Vec<f64> = tab.value[..n]
        .iter()
        .zip(&col_scale)
        .map(|(v, c)| v * c / scale)
        .collect();
    // Snap nonbasic structurals exactly onto their original bounds.
    for (j, v) in values.iter_mut().enumerate() {
        match tab.state[j] {
            VarState::Lower => *v = lp.bounds[j].0,
            VarState::Upper => *v = lp.bounds[j].1,
            _ => {}
        }
    }
    let objective_value = lp.objective.iter().zip(&values).map(|(c, x)| c * x).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        values,
        objective_value,
        iterations: tab.iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub feasible: bool,
    pub max_violation: f64,
}

/// Checks every row and bound. A row or bound counts as satisfied when its
/// violation is at most `1e-8 * max(1, |rhs|)`; `max_violation` is absolute.
pub fn check_feasible(lp: &LinearProgram, values: &[f64]) -> Result<Feasibility, LpError> {
    if values.len() != lp.num_vars() {
        return Err(LpError::Dimension {
            got: values.len(),
            n: lp.num_vars(),
        });
    }
    let mut worst: f64 = 0.0;
    let mut feasible = true;
    let mut note = |viol: f64, magnitude: f64| {
        let viol = viol.max(0.0);
        worst = worst.max(viol);
        if viol > FEAS_TOL * magnitude.abs().max(1.0) || viol.is_nan() {
            feasible = false;
        }
    };
    for (j, (&v, &(lo, hi))) in values.iter().zip(&lp.bounds).enumerate() {
        let _ = j;
        if lo.is_finite() {
            note(lo - v, lo);
        }
        if hi.is_finite() {
            note(v - hi, hi);
        }
    }
    for c in &lp.constraints {
        let act = c.activity(values);
        match c.sense {
            Sense::Ge => note(c.rhs - act, c.rhs),
            Sense::Le => note(act - c.rhs, c.rhs),
            Sense::Eq => note((act - c.rhs).abs(), c.rhs),
        }
    }
    Ok(Feasibility {
        feasible,
        max_violation: worst,
    })
}

/// Power-of-two column then row equilibration, so that every column and row
/// has largest coefficient magnitude near 1. Returns the scaled program and
/// the column factors `s_j` with `x_j = s_j * x'_j`.
fn equilibrate(lp: &LinearProgram) -> (LinearProgram, Vec<f64>) {
    let n = lp.num_vars();
    let mut col_max = vec![0.0f64; n];
    for c in &lp.constraints {
        for &(j, a) in &c.terms {
            col_max[j] = col_max[j].max(a.abs());
        }
    }
    let pow2 = |m: f64| if m > 0.0 { (-m.log2().round()).exp2() } else { 1.0 };
    let col_scale: Vec<f64> = col_max.iter().map(|&m| pow2(m)).collect();
    let mut out = lp.clone();
    for (j, (lo, hi)) in out.bounds.iter_mut().enumerate() {
        *lo /= col_scale[j];
        *hi /= col_scale[j];
    }
    for (c, s) in out.objective.iter_mut().zip(&col_scale) {
        *c *= s;
    }
    for c in out.constraints.iter_mut() {
        let mut row_max: f64 = 0.0;
        for (j, a) in c.terms.iter_mut() {
            *a *= col_scale[*j];
            row_max = row_max.max(a.abs());
        }
        let rs = pow2(row_max);
        for (_, a) in c.terms.iter_mut() {
            *a *= rs;
        }
        c.rhs *= rs;
    }
    (out, col_scale)
}

fn auto_scale(lp: &LinearProgram) -> f64 {
    let max = lp
        .constraints
        .iter()
        .map(|c| c.rhs.abs())
        .chain(
            lp.bounds
                .iter()
                .flat_map(|(l, h)| [*l, *h])
                .filter(|b| b.is_finite())
                .map(f64::abs),
        )
        .fold(0.0, f64::max);
    if max > 10.0 {
        10f64.powi(-(max.log10().floor() as i32))
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    Lower,
    Upper,
    /// Nonbasic free variable parked at zero.
    Zero,
}

#[derive(Debug, PartialEq, Eq)]
enum Outcome {
    Optimal,
    Unbounded,
}

struct Tableau {
    /// Row `i` encodes `sum_j rows[i][j] * x_j = 0`; the basic variable has coefficient 1.
    rows: Vec<Vec<(u32, f64)>>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    value: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    reduced: Vec<f64>,
    ncols: usize,
    n_art: usize,
    iterations: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram, scale: f64) -> Self {
        let n = lp.num_vars();
        let m = lp.num_constraints();
        let mut lower = Vec::with_capacity(n + 2 * m);
        let mut upper = Vec::with_capacity(n + 2 * m);
        let mut state = Vec::with_capacity(n + 2 * m);
        let mut value = Vec::with_capacity(n + 2 * m);
        for &(lo, hi) in &lp.bounds {
            let (lo, hi) = (lo * scale, hi * scale);
            lower.push(lo);
            upper.push(hi);
            if lo.is_finite() {
                state.push(VarState::Lower);
                value.push(lo);
            } else if hi.is_finite() {
                state.push(VarState::Upper);
                value.push(hi);
            } else {
                state.push(VarState::Zero);
                value.push(0.0);
            }
        }
        for c in &lp.constraints {
            let b = c.rhs * scale;
            let (lo, hi) = match c.sense {
                Sense::Ge => (b, f64::INFINITY),
                Sense::Le => (f64::NEG_INFINITY, b),
                Sense::Eq => (b, b),
            };
            lower.push(lo);
            upper.push(hi);
            state.push(VarState::Basic);
            value.push(0.0);
        }

        let mut rows = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut art_rows = Vec::new();
        for (i, c) in lp.constraints.iter().enumerate() {
            let mut terms: Vec<(u32, f64)> = Vec::with_capacity(c.terms.len() + 1);
            // Merge duplicate column references.
            let mut sorted = c.terms.clone();
            sorted.sort_by_key(|t| t.0);
            for (j, a) in sorted {
                match terms.last_mut() {
                    Some(last) if last.0 as usize == j => last.1 += a,
                    _ => terms.push((j as u32, a)),
                }
            }
            terms.retain(|t| t.1 != 0.0);
            let act: f64 = terms.iter().map(|&(j, a)| a * value[j as usize]).sum();
            let r = n + i;
            let (lo, hi) = (lower[r], upper[r]);
            let target = if act < lo {
                Some((lo, VarState::Lower))
            } else if act > hi {
                Some((hi, VarState::Upper))
            } else {
                None
            };
            match target {
                None => {
                    // -a.x + r = 0, r basic.
                    let mut row: Vec<(u32, f64)> = terms.iter().map(|&(j, a)| (j, -a)).collect();
                    row.push((r as u32, 1.0));
                    value[r] = act;
                    rows.push(row);
                    basis.push(r);
                }
                Some((b, st)) => {
                    // a.x - r + sigma * art = 0 with art = |b - act| >= 0.
                    value[r] = b;
                    state[r] = st;
                    let sigma = if b > act { 1.0 } else { -1.0 };
                    let mut row: Vec<(u32, f64)> = terms.iter().map(|&(j, a)| (j, a / sigma)).collect();
                    row.push((r as u32, -1.0 / sigma));
                    art_rows.push((rows.len(), (b - act).abs()));
                    rows.push(row);
                    basis.push(usize::MAX);
                }
            }
        }
        let first_art = n + m;
        for (k, &(i, v)) in art_rows.iter().enumerate() {
            let a = first_art + k;
            rows[i].push((a as u32, 1.0));
            basis[i] = a;
            lower.push(0.0);
            upper.push(f64::INFINITY);
            state.push(VarState::Basic);
            value.push(v);
        }
        let ncols = lower.len();
        Self {
            rows,
            basis,
            state,
            value,
            lower,
            upper,
            cost: vec![0.0; ncols],
            reduced: vec![0.0; ncols],
            ncols,
            n_art: art_rows.len(),
            iterations: 0,
        }
    }

    fn set_phase1_costs(&mut self) {
        let mut cost = vec![0.0; self.ncols];
        for c in cost.iter_mut().skip(self.ncols - self.n_art) {
            *c = 1.0;
        }
        self.cost = cost;
        self.recompute_reduced();
    }

    fn set_phase2_costs(&mut self, objective: &[f64]) {
        let mut cost = vec![0.0; self.ncols];
        cost[..objective.len()].copy_from_slice(objective);
        self.cost = cost;
        self.recompute_reduced();
    }

    fn retire_artificials(&mut self) {
        for a in self.ncols - self.n_art..self.ncols {
            self.upper[a] = 0.0;
            if self.state[a] != VarState::Basic {
                self.state[a] = VarState::Lower;
                self.value[a] = 0.0;
            }
        }
    }

    fn recompute_reduced(&mut self) {
        self.reduced.copy_from_slice(&self.cost);
        for (i, row) in self.rows.iter().enumerate() {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                for &(j, t) in row {
                    self.reduced[j as usize] -= cb * t;
                }
            }
        }
        for &b in &self.basis {
            self.reduced[b] = 0.0;
        }
    }

    /// Recomputes basic values from the nonbasic ones.
    fn refresh_basics(&mut self) {
        for (i, row) in self.rows.iter().enumerate() {
            let b = self.basis[i];
            let mut v = 0.0;
            for &(j, t) in row {
                let j = j as usize;
                if j != b && self.state[j] != VarState::Basic {
                    v -= t * self.value[j];
                }
            }
            self.value[b] = v;
        }
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.lower[j] == self.upper[j]
    }

    /// Entering variable and direction (+1 increase, -1 decrease).
    fn choose_entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.ncols {
            let st = self.state[j];
            if st == VarState::Basic || self.is_fixed(j) {
                continue;
            }
            let d = self.reduced[j];
            let dir = match st {
                VarState::Lower if d < -OPT_TOL => 1.0,
                VarState::Upper if d > OPT_TOL => -1.0,
                VarState::Zero if d.abs() > OPT_TOL => -d.signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(_, _, s)| d.abs() > s) {
                best = Some((j, dir, d.abs()));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn column(&self, e: usize) -> Vec<(usize, f64)> {
        let key = e as u32;
        self.rows
            .iter()
            .enumerate()
            .filter_map(|(i, row)| row.binary_search_by_key(&key, |t| t.0).ok().map(|k| (i, row[k].1)))
            .collect()
    }

    fn iterate(&mut self, degenerate_limit: usize, limit: usize) -> Result<Outcome, LpError> {
        let mut degenerate_run = 0usize;
        // Incremental updates drift; terminal decisions are only trusted
        // right after a fresh recomputation.
        let mut fresh = false;
        loop {
            if self.iterations >= limit {
                return Err(LpError::IterationLimit(limit));
            }
            if self.iterations % 256 == 255 && !fresh {
                self.recompute_reduced();
                self.refresh_basics();
            }
            let bland = degenerate_run >= degenerate_limit;
            let Some((e, dir)) = self.choose_entering(bland) else {
                if fresh {
                    return Ok(Outcome::Optimal);
                }
                self.recompute_reduced();
                self.refresh_basics();
                fresh = true;
                continue;
            };
            self.iterations += 1;
            let col = self.column(e);

            // Ratio test: basic in row i moves by g_i * theta.
            let mut theta = f64::INFINITY;
            for &(i, t) in &col {
                if t.abs() <= PIVOT_TOL {
                    continue;
                }
                if let Some(lim) = self.row_limit(i, -t * dir) {
                    theta = theta.min(lim);
                }
            }
            let flip = self.upper[e] - self.lower[e];
            let mut leaving: Option<usize> = None;
            if theta.is_finite() && !(flip.is_finite() && flip <= theta) {
                let tie = theta + 1e-12 * theta.max(1.0);
                let mut pick: Option<(usize, f64)> = None;
                for &(i, t) in &col {
                    if t.abs() <= PIVOT_TOL {
                        continue;
                    }
                    let Some(lim) = self.row_limit(i, -t * dir) else {
                        continue;
                    };
                    if lim > tie {
                        continue;
                    }
                    pick = match pick {
                        None => Some((i, t)),
                        Some((pi, pt)) => {
                            let better = if bland {
                                self.basis[i] < self.basis[pi]
                            } else {
                                t.abs() > pt.abs()
                            };
                            if better {
                                Some((i, t))
                            } else {
                                Some((pi, pt))
                            }
                        }
                    };
                }
                leaving = pick.map(|p| p.0);
            }
            let step = if leaving.is_none() && flip.is_finite() && flip <= theta {
                flip
            } else {
                theta
            };
            if !step.is_finite() {
                if fresh {
                    return Ok(Outcome::Unbounded);
                }
                self.recompute_reduced();
                self.refresh_basics();
                fresh = true;
                continue;
            }
            fresh = false;
            if step <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }

            self.value[e] += dir * step;
            for &(i, t) in &col {
                let b = self.basis[i];
                self.value[b] -= t * dir * step;
            }

            match leaving {
                None => {
                    // Bound flip, no basis change.
                    if dir > 0.0 {
                        self.state[e] = VarState::Upper;
                        self.value[e] = self.upper[e];
                    } else {
                        self.state[e] = VarState::Lower;
                        self.value[e] = self.lower[e];
                    }
                }
                Some(r) => {
                    let t = col.iter().find(|c| c.0 == r).map(|c| c.1).unwrap();
                    let l = self.basis[r];
                    let g = -t * dir;
                    if g > 0.0 {
                        self.state[l] = VarState::Upper;
                        self.value[l] = self.upper[l];
                    } else {
                        self.state[l] = VarState::Lower;
                        self.value[l] = self.lower[l];
                    }
                    if self.lower[l] == self.upper[l] {
                        self.state[l] = VarState::Lower;
                    }
                    self.state[e] = VarState::Basic;
                    self.basis[r] = e;
                    self.pivot(r, e, &col);
                }
            }
        }
    }

    /// Largest step before the basic in row `i` hits a bound when it moves at rate `g`.
    fn row_limit(&self, i: usize, g: f64) -> Option<f64> {
        let b = self.basis[i];
        let v = self.value[b];
        if g > 0.0 {
            let u = self.upper[b];
            u.is_finite().then(|| ((u - v) / g).max(0.0))
        } else if g < 0.0 {
            let l = self.lower[b];
            l.is_finite().then(|| ((v - l) / -g).max(0.0))
        } else {
            None
        }
    }

    fn pivot(&mut self, r: usize, e: usize, col: &[(usize, f64)]) {
        let key = e as u32;
        let p = col.iter().find(|c| c.0 == r).unwrap().1;
        let mut prow = std::mem::take(&mut self.rows[r]);
        for t in prow.iter_mut() {
            t.1 /= p;
        }
        if let Ok(k) = prow.binary_search_by_key(&key, |t| t.0) {
            prow[k].1 = 1.0;
        }
        for &(i, f) in col {
            if i == r {
                continue;
            }
            let merged = axpy_merge(&self.rows[i], -f, &prow, key);
            self.rows[i] = merged;
        }
        let de = self.reduced[e];
        if de != 0.0 {
            for &(j, t) in &prow {
                self.reduced[j as usize] -= de * t;
            }
        }
        self.reduced[e] = 0.0;
        self.rows[r] = prow;
    }
}

/// `a + f * b` for sorted sparse rows, removing column `kill` and tiny entries.
fn axpy_merge(a: &[(u32, f64)], f: f64, b: &[(u32, f64)], kill: u32) -> Vec<(u32, f64)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut k) = (0, 0);
    while i < a.len() || k < b.len() {
        let (j, v) = if k >= b.len() || (i < a.len() && a[i].0 < b[k].0) {
            i += 1;
            a[i - 1]
        } else if i >= a.len() || b[k].0 < a[i].0 {
            k += 1;
            (b[k - 1].0, f * b[k - 1].1)
        } else {
            i += 1;
            k += 1;
            (a[i - 1].0, a[i - 1].1 + f * b[k - 1].1)
        };
        if j != kill && v.abs() > DROP_TOL {
            out.push((j, v));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_var() -> LinearProgram {
        let mut lp = LinearProgram::new(1);
        lp.objective = vec![1.0];
        lp.bounds = vec![(0.0, 10.0)];
        lp.add(Constraint::dense(&[1.0], Sense::Ge, 3.0));
        lp
    }

    fn triangle() -> LinearProgram {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![-1.0, -1.0];
        lp.bounds = vec![(0.0, 1.0), (0.0, 1.0)];
        lp.add(Constraint::dense(&[1.0, 1.0], Sense::Le, 1.0));
        lp
    }

    #[test]
    fn single_binding_constraint() {
        let s = solve(&single_var()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.values[0] - 3.0).abs() < 1e-12);
        assert!((s.objective_value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn unit_triangle() {
        let lp = triangle();
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value + 1.0).abs() < 1e-12);
        assert!(check_feasible(&lp, &s.values).unwrap().feasible);
    }

    #[test]
    fn feasibility_checks() {
        let f = check_feasible(&triangle(), &[0.25, 0.5]).unwrap();
        assert!(f.feasible);
        assert_eq!(f.max_violation, 0.0);

        let f = check_feasible(&single_var(), &[2.0]).unwrap();
        assert!(!f.feasible);
        assert!((f.max_violation - 1.0).abs() < 1e-15);

        assert!(matches!(
            check_feasible(&single_var(), &[1.0, 2.0]),
            Err(LpError::Dimension { .. })
        ));
    }

    #[test]
    fn reports_infeasible() {
        let mut lp = single_var();
        lp.add(Constraint::dense(&[1.0], Sense::Le, 2.0));
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn reports_unbounded() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![-1.0, 0.0];
        lp.bounds = vec![(0.0, f64::INFINITY), (f64::NEG_INFINITY, f64::INFINITY)];
        lp.add(Constraint::dense(&[1.0, -1.0], Sense::Le, 4.0));
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_variables_and_equalities() {
        // min |t| style: min u s.t. u >= x - 2, u >= 2 - x, x = 5 (free x)
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![0.0, 1.0];
        lp.bounds = vec![(f64::NEG_INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::INFINITY)];
        lp.add(Constraint::dense(&[-1.0, 1.0], Sense::Ge, -2.0));
        lp.add(Constraint::dense(&[1.0, 1.0], Sense::Ge, 2.0));
        lp.add(Constraint::dense(&[1.0, 0.0], Sense::Eq, 5.0));
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.values[0] - 5.0).abs() < 1e-9);
        assert!((s.objective_value - 3.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_klee_minty_like_instance_terminates() {
        // Highly degenerate: many redundant constraints through the origin.
        let mut lp = LinearProgram::new(3);
        lp.objective = vec![-1.0, -1.0, -1.0];
        lp.bounds = vec![(0.0, f64::INFINITY); 3];
        for k in 0..30 {
            let a = 1.0 + k as f64 * 0.1;
            lp.add(Constraint::dense(&[a, -1.0, 0.0], Sense::Le, 0.0));
            lp.add(Constraint::dense(&[0.0, a, -1.0], Sense::Le, 0.0));
            lp.add(Constraint::dense(&[-1.0, 0.0, a], Sense::Le, 0.0));
        }
        lp.add(Constraint::dense(&[1.0, 1.0, 1.0], Sense::Le, 3.0));
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(check_feasible(&lp, &s.values).unwrap().feasible);
    }

    #[test]
    fn tiny_degenerate_limit_still_converges() {
        let opts = SolverOptions {
            degenerate_limit: 0,
            ..Default::default()
        };
        let s = solve_with(&triangle(), &opts).unwrap();
        assert!((s.objective_value + 1.0).abs() < 1e-12);
    }

    #[test]
    fn validation_errors() {
        let mut lp = single_var();
        lp.bounds[0] = (2.0, 1.0);
        assert_eq!(solve(&lp), Err(LpError::InvertedBounds(0)));
        let mut lp = single_var();
        lp.add(Constraint::new(vec![(4, 1.0)], Sense::Le, 1.0));
        assert!(matches!(solve(&lp), Err(LpError::ColumnOutOfRange { .. })));
    }

    #[test]
    fn scaling_is_transparent() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 2.0];
        lp.add(Constraint::dense(&[1.0, 1.0], Sense::Ge, 250_000.0));
        lp.add(Constraint::dense(&[1.0, -1.0], Sense::Le, 50_000.0));
        let s = solve(&lp).unwrap();
        assert!((s.values[0] - 150_000.0).abs() < 1e-6);
        assert!((s.values[1] - 100_000.0).abs() < 1e-6);
        assert!((s.objective_value - 350_000.0).abs() < 1e-6);
    }

    #[test]
    fn axpy_merge_basics() {
        let a = vec![(0, 1.0), (2, 2.0), (5, 1.0)];
        let b = vec![(2, 1.0), (3, 4.0), (5, 1.0)];
        let out = axpy_merge(&a, -1.0, &b, 2);
        assert_eq!(out, vec![(0, 1.0), (3, -4.0)]);
    }
}
