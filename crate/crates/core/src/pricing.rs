//! CVaR-minimizing premium programs: nominal, box-robust and polyhedral-robust.
//!
//! Variable layout shared by all three programs:
//!
//! ```text
//! [ alpha | z_1..z_J | w_(j,p) for j in 1..J, p in 1..P | x_1..x_P | q_(j,p) | s_(j,p) | r ]
//! ```
//!
//! The `q`, `s`, `r` block exists only in the polyhedral program. Non-negativity
//! of `z`, `w`, `q`, `s`, `r` is expressed through variable bounds.

use crate::lpsolve::{self, check_feasible, Constraint, LinearProgram, LpStatus, Sense};
use crate::riskcore::{empirical_cvar_var, Confidence, LossVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PricingError {
    #[error("scenario matrix must be non-empty with {scenarios}x{segments} = {len} finite entries")]
    BadShape {
        scenarios: usize,
        segments: usize,
        len: usize,
    },
    #[error("scenario ({scenario}, {segment}) is {value}; claim costs must be finite and non-negative")]
    BadScenario {
        scenario: usize,
        segment: usize,
        value: f64,
    },
    #[error("segment {0}: need finite lower <= upper price bound")]
    BadBounds(usize),
    #[error("expected {expected} per-segment bounds, got {got}")]
    BoundCount { expected: usize, got: usize },
    #[error("robust config invalid: {0}")]
    BadRobust(String),
    #[error("{kind:?} program with J={scenarios}, P={segments} is {status:?}")]
    NotOptimal {
        kind: FormulationKind,
        status: LpStatus,
        scenarios: usize,
        segments: usize,
    },
    #[error(transparent)]
    Solver(#[from] lpsolve::LpError),
    #[error("LP objective {lp} disagrees with scenario oracle {oracle}")]
    Inconsistent { lp: f64, oracle: f64 },
}

/// `J x P` table of simulated aggregate claim costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMatrix {
    scenarios: usize,
    segments: usize,
    /// Row-major: entry `(j, p)` at `j * segments + p`.
    data: Vec<f64>,
}

impl ScenarioMatrix {
    pub fn new(scenarios: usize, segments: usize, data: Vec<f64>) -> Result<Self, PricingError> {
        if scenarios == 0 || segments == 0 || data.len() != scenarios * segments {
            return Err(PricingError::BadShape {
                scenarios,
                segments,
                len: data.len(),
            });
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(PricingError::BadScenario {
                scenario: k / segments,
                segment: k % segments,
                value: data[k],
            });
        }
        Ok(Self {
            scenarios,
            segments,
            data,
        })
    }

    /// Single-segment matrix from one value per scenario.
    pub fn from_column(values: Vec<f64>) -> Result<Self, PricingError> {
        let j = values.len();
        Self::new(j, 1, values)
    }

    pub fn scenarios(&self) -> usize {
        self.scenarios
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn get(&self, j: usize, p: usize) -> f64 {
        self.data[j * self.segments + p]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.segments..(j + 1) * self.segments]
    }

    pub fn column(&self, p: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.scenarios).map(move |j| self.get(j, p))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    fn map(&self, f: impl Fn(usize, usize, f64) -> f64) -> Self {
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(k, v)| f(k / self.segments, k % self.segments, *v))
            .collect();
        Self {
            scenarios: self.scenarios,
            segments: self.segments,
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingProblem {
    pub scenarios: ScenarioMatrix,
    pub beta: Confidence,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl PricingProblem {
    pub fn new(
        scenarios: ScenarioMatrix,
        beta: Confidence,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self, PricingError> {
        let p = scenarios.segments();
        for got in [lower.len(), upper.len()] {
            if got != p {
                return Err(PricingError::BoundCount { expected: p, got });
            }
        }
        for (k, (l, h)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !h.is_finite() || l > h {
                return Err(PricingError::BadBounds(k));
            }
        }
        Ok(Self {
            scenarios,
            beta,
            lower,
            upper,
        })
    }

    /// Same bounds on every segment.
    pub fn uniform(scenarios: ScenarioMatrix, beta: Confidence, lower: f64, upper: f64) -> Result<Self, PricingError> {
        let p = scenarios.segments();
        Self::new(scenarios, beta, vec![lower; p], vec![upper; p])
    }

    pub fn layout(&self, kind: FormulationKind) -> Layout {
        Layout::new(self.scenarios.scenarios(), self.scenarios.segments(), kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormulationKind {
    Nominal,
    Box,
    Polyhedral,
}

impl FormulationKind {
    pub const ALL: [FormulationKind; 3] = [Self::Nominal, Self::Box, Self::Polyhedral];

    pub fn name(self) -> &'static str {
        match self {
            Self::Nominal => "nominal",
            Self::Box => "box",
            Self::Polyhedral => "polyhedral",
        }
    }
}

impl std::str::FromStr for FormulationKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nominal" => Ok(Self::Nominal),
            "box" => Ok(Self::Box),
            "polyhedral" => Ok(Self::Polyhedral),
            other => Err(format!("unknown formulation '{other}'")),
        }
    }
}

/// Uncertainty specification. The nominal scenario values play the role of the
/// uncertainty-set centres; `deviations` holds the per-entry half-widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustConfig {
    pub kind: FormulationKind,
    pub gamma: f64,
    pub deviations: Option<ScenarioMatrix>,
}

impl RobustConfig {
    pub fn nominal() -> Self {
        Self {
            kind: FormulationKind::Nominal,
            gamma: 0.0,
            deviations: None,
        }
    }

    /// Deviations proportional to the scenario values: `delta = eta * y`.
    pub fn relative(kind: FormulationKind, gamma: f64, eta: f64, scenarios: &ScenarioMatrix) -> Self {
        if kind == FormulationKind::Nominal {
            return Self::nominal();
        }
        Self {
            kind,
            gamma,
            deviations: Some(scenarios.map(|_, _, y| eta * y)),
        }
    }

    fn checked_deviations<'a>(&'a self, problem: &PricingProblem) -> Result<&'a ScenarioMatrix, PricingError> {
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(PricingError::BadRobust(format!(
                "gamma must be finite and >= 0, got {}",
                self.gamma
            )));
        }
        let d = self
            .deviations
            .as_ref()
            .ok_or_else(|| PricingError::BadRobust("deviations missing".into()))?;
        if d.scenarios() != problem.scenarios.scenarios() || d.segments() != problem.scenarios.segments() {
            return Err(PricingError::BadRobust(
                "deviation matrix shape differs from scenarios".into(),
            ));
        }
        Ok(d)
    }
}

/// Column indices of each variable block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub scenarios: usize,
    pub segments: usize,
    pub alpha: usize,
    pub z0: usize,
    pub w0: usize,
    pub x0: usize,
    pub q0: Option<usize>,
    pub s0: Option<usize>,
    pub r: Option<usize>,
    pub num_vars: usize,
}

impl Layout {
    fn new(j: usize, p: usize, kind: FormulationKind) -> Self {
        let z0 = 1;
        let w0 = z0 + j;
        let x0 = w0 + j * p;
        let base = x0 + p;
        let (q0, s0, r, num_vars) = if kind == FormulationKind::Polyhedral {
            (
                Some(base),
                Some(base + j * p),
                Some(base + 2 * j * p),
                base + 2 * j * p + 1,
            )
        } else {
            (None, None, None, base)
        };
        Self {
            scenarios: j,
            segments: p,
            alpha: 0,
            z0,
            w0,
            x0,
            q0,
            s0,
            r,
            num_vars,
        }
    }

    pub fn z(&self, j: usize) -> usize {
        self.z0 + j
    }

    pub fn w(&self, j: usize, p: usize) -> usize {
        self.w0 + j * self.segments + p
    }

    pub fn x(&self, p: usize) -> usize {
        self.x0 + p
    }
}

/// Shared skeleton: objective, `z_j >= sum_p w_pj - alpha`, bounds. The
/// per-entry `w_pj + x_p >= rhs` rows are added by the caller.
fn skeleton(problem: &PricingProblem, layout: &Layout) -> LinearProgram {
    let (j_count, p_count) = (layout.scenarios, layout.segments);
    let mut lp = LinearProgram::new(layout.num_vars);
    let nu = problem.beta.nu(j_count);
    lp.objective[layout.alpha] = 1.0;
    for j in 0..j_count {
        lp.objective[layout.z(j)] = nu;
    }
    lp.bounds[layout.alpha] = (f64::NEG_INFINITY, f64::INFINITY);
    for p in 0..p_count {
        lp.bounds[layout.x(p)] = (problem.lower[p], problem.upper[p]);
    }
    for j in 0..j_count {
        let mut terms = Vec::with_capacity(p_count + 2);
        terms.push((layout.z(j), 1.0));
        for p in 0..p_count {
            terms.push((layout.w(j, p), -1.0));
        }
        terms.push((layout.alpha, 1.0));
        lp.add(Constraint::new(terms, Sense::Ge, 0.0));
    }
    lp
}

fn add_cover_rows(lp: &mut LinearProgram, layout: &Layout, rhs: impl Fn(usize, usize) -> f64) {
    for j in 0..layout.scenarios {
        for p in 0..layout.segments {
            lp.add(Constraint::new(
                vec![(layout.w(j, p), 1.0), (layout.x(p), 1.0)],
                Sense::Ge,
                rhs(j, p),
            ));
        }
    }
}

/// Linearized nominal program.
pub fn build_nominal(problem: &PricingProblem) -> LinearProgram {
    let layout = problem.layout(FormulationKind::Nominal);
    let mut lp = skeleton(problem, &layout);
    add_cover_rows(&mut lp, &layout, |j, p| problem.scenarios.get(j, p));
    lp
}

/// Box-robust counterpart: every entry at its upper deviation `y + gamma * delta`.
pub fn build_box(problem: &PricingProblem, cfg: &RobustConfig) -> Result<LinearProgram, PricingError> {
    if cfg.kind != FormulationKind::Box {
        return Err(PricingError::BadRobust(format!(
            "expected box config, got {:?}",
            cfg.kind
        )));
    }
    let d = cfg.checked_deviations(problem)?;
    let layout = problem.layout(FormulationKind::Box);
    let mut lp = skeleton(problem, &layout);
    add_cover_rows(&mut lp, &layout, |j, p| {
        problem.scenarios.get(j, p) + cfg.gamma * d.get(j, p)
    });
    Ok(lp)
}

/// Polyhedral-robust counterpart built from the dual variables `q`, `s`, `r`:
///
/// ```text
/// w_pj + x_p >= mu_pj q_pj - mu_pj s_pj + gamma r
/// q_pj - s_pj = 1
/// -delta_pj q_pj - delta_pj s_pj + r >= 0
/// q, s, r >= 0
/// ```
pub fn build_polyhedral(problem: &PricingProblem, cfg: &RobustConfig) -> Result<LinearProgram, PricingError> {
    if cfg.kind != FormulationKind::Polyhedral {
        return Err(PricingError::BadRobust(format!(
            "expected polyhedral config, got {:?}",
            cfg.kind
        )));
    }
    let d = cfg.checked_deviations(problem)?;
    let layout = problem.layout(FormulationKind::Polyhedral);
    let mut lp = skeleton(problem, &layout);
    let (q0, s0, r) = (layout.q0.unwrap(), layout.s0.unwrap(), layout.r.unwrap());
    let p_count = layout.segments;
    for j in 0..layout.scenarios {
        for p in 0..p_count {
            let k = j * p_count + p;
            let mu = problem.scenarios.get(j, p);
            let mut terms = vec![(layout.w(j, p), 1.0), (layout.x(p), 1.0)];
            if mu != 0.0 {
                terms.push((q0 + k, -mu));
                terms.push((s0 + k, mu));
            }
            if cfg.gamma != 0.0 {
                terms.push((r, -cfg.gamma));
            }
            lp.add(Constraint::new(terms, Sense::Ge, 0.0));
        }
    }
    for k in 0..layout.scenarios * p_count {
        lp.add(Constraint::new(vec![(q0 + k, 1.0), (s0 + k, -1.0)], Sense::Eq, 1.0));
    }
    for j in 0..layout.scenarios {
        for p in 0..p_count {
            let k = j * p_count + p;
            let delta = d.get(j, p);
            let mut terms = Vec::with_capacity(3);
            if delta != 0.0 {
                terms.push((q0 + k, -delta));
                terms.push((s0 + k, -delta));
            }
            terms.push((r, 1.0));
            lp.add(Constraint::new(terms, Sense::Ge, 0.0));
        }
    }
    Ok(lp)
}

pub fn build(problem: &PricingProblem, cfg: &RobustConfig) -> Result<LinearProgram, PricingError> {
    match cfg.kind {
        FormulationKind::Nominal => Ok(build_nominal(problem)),
        FormulationKind::Box => build_box(problem, cfg),
        FormulationKind::Polyhedral => build_polyhedral(problem, cfg),
    }
}

/// Worst-case scenario matrix each program implicitly prices against.
///
/// Nominal: `y`. Box: `y + gamma * delta`. Polyhedral: the single shared dual
/// scalar `r` must cover the largest deviation, so every entry is lifted by
/// `gamma * max(delta)`.
pub fn effective_scenarios(problem: &PricingProblem, cfg: &RobustConfig) -> Result<ScenarioMatrix, PricingError> {
    let y = &problem.scenarios;
    match cfg.kind {
        FormulationKind::Nominal => Ok(y.clone()),
        FormulationKind::Box => {
            let d = cfg.checked_deviations(problem)?;
            Ok(y.map(|j, p, v| v + cfg.gamma * d.get(j, p)))
        }
        FormulationKind::Polyhedral => {
            let d = cfg.checked_deviations(problem)?;
            let lift = cfg.gamma * d.max();
            Ok(y.map(|_, _, v| v + lift))
        }
    }
}

/// Residual insurer loss per scenario at prices `x`.
pub fn residual_losses(scenarios: &ScenarioMatrix, prices: &[f64]) -> Vec<f64> {
    (0..scenarios.scenarios())
        .map(|j| scenarios.row(j).iter().zip(prices).map(|(y, x)| (y - x).max(0.0)).sum())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingSolution {
    pub kind: FormulationKind,
    pub prices: Vec<f64>,
    pub var: f64,
    pub cvar: f64,
    /// CVaR of the residual losses at `prices` from the sort-based oracle.
    pub oracle_cvar: f64,
    pub w: Vec<f64>,
    pub z: Vec<f64>,
    pub q: Option<Vec<f64>>,
    pub s: Option<Vec<f64>>,
    pub r: Option<f64>,
    pub iterations: usize,
}

const CONSISTENCY_TOL: f64 = 1e-6;

/// Builds, solves and post-processes one pricing program.
///
/// The returned point is an optimal solution of the LP in canonical form:
/// among equally good premiums the smallest is kept, `alpha` is the smallest
/// optimal VaR, and the auxiliaries are the tight values implied by `x` and
/// `alpha`.
pub fn price(problem: &PricingProblem, cfg: &RobustConfig) -> Result<PricingSolution, PricingError> {
    let lp = build(problem, cfg)?;
    let layout = problem.layout(cfg.kind);
    let sol = lpsolve::solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(PricingError::NotOptimal {
            kind: cfg.kind,
            status: sol.status,
            scenarios: layout.scenarios,
            segments: layout.segments,
        });
    }
    let mut iterations = sol.iterations;
    let cvar = sol.objective_value;
    let p_count = layout.segments;
    let mut prices: Vec<f64> = (0..p_count).map(|p| sol.values[layout.x(p)]).collect();
    let effective = effective_scenarios(problem, cfg)?;
    let oracle = |x: &[f64]| {
        let losses = LossVector::new(residual_losses(&effective, x)).expect("J >= 1 and finite");
        empirical_cvar_var(&losses, problem.beta)
    };

    if premium_is_flat(problem, &prices, cvar, &oracle) {
        let (x, it) = smallest_optimal_prices(&lp, &layout, cvar)?;
        iterations += it;
        prices = x;
    }

    let report = oracle(&prices);
    if (report.cvar - cvar).abs() > CONSISTENCY_TOL * cvar.abs().max(1.0) {
        return Err(PricingError::Inconsistent {
            lp: cvar,
            oracle: report.cvar,
        });
    }

    let mut w = vec![0.0; layout.scenarios * p_count];
    let mut z = vec![0.0; layout.scenarios];
    for j in 0..layout.scenarios {
        let mut total = 0.0;
        for p in 0..p_count {
            let v = (effective.get(j, p) - prices[p]).max(0.0);
            w[j * p_count + p] = v;
            total += v;
        }
        z[j] = (total - report.var).max(0.0);
    }
    let (q, s, r) = match (cfg.kind, cfg.deviations.as_ref()) {
        (FormulationKind::Polyhedral, Some(d)) => (
            Some(vec![1.0; layout.scenarios * p_count]),
            Some(vec![0.0; layout.scenarios * p_count]),
            Some(d.max()),
        ),
        _ => (None, None, None),
    };
    Ok(PricingSolution {
        kind: cfg.kind,
        prices,
        var: report.var,
        cvar,
        oracle_cvar: report.cvar,
        w,
        z,
        q,
        s,
        r,
        iterations,
    })
}

/// True when some premium can be lowered without raising CVaR.
fn premium_is_flat(
    problem: &PricingProblem,
    prices: &[f64],
    cvar: f64,
    oracle: &dyn Fn(&[f64]) -> crate::riskcore::RiskReport,
) -> bool {
    let tol = 1e-9 * cvar.abs().max(1.0);
    (0..prices.len()).any(|p| {
        let room = prices[p] - problem.lower[p];
        if room <= 1e-9 * prices[p].abs().max(1.0) {
            return false;
        }
        let eps = room.min(1e-3 * prices[p].abs().max(1.0));
        let mut probe = prices.to_vec();
        probe[p] -= eps;
        oracle(&probe).cvar <= cvar + tol
    })
}

/// Second-stage program: minimize total premium subject to the first-stage
/// optimum.
fn smallest_optimal_prices(
    lp: &LinearProgram,
    layout: &Layout,
    optimum: f64,
) -> Result<(Vec<f64>, usize), PricingError> {
    let mut second = lp.clone();
    let cap: Vec<(usize, f64)> = lp
        .objective
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(j, c)| (j, *c))
        .collect();
    second.add(Constraint::new(cap, Sense::Le, optimum + 1e-9 * optimum.abs().max(1.0)));
    second.objective = vec![0.0; lp.num_vars()];
    for p in 0..layout.segments {
        second.objective[layout.x(p)] = 1.0;
    }
    let sol = lpsolve::solve(&second)?;
    if sol.status != LpStatus::Optimal {
        return Err(PricingError::NotOptimal {
            kind: FormulationKind::Nominal,
            status: sol.status,
            scenarios: layout.scenarios,
            segments: layout.segments,
        });
    }
    debug_assert!(check_feasible(lp, &sol.values).map(|f| f.feasible).unwrap_or(false));
    let x = (0..layout.segments).map(|p| sol.values[layout.x(p)]).collect();
    Ok((x, sol.iterations))
}
