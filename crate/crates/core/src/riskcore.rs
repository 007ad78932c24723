//! Scenario-based loss, Value-at-Risk and Conditional Value-at-Risk.
//!
//! Everything here works on a finite set of equally likely scenarios. The
//! CVaR of a loss sample is the minimum over `alpha` of
//!
//! ```text
//! F(alpha) = alpha + nu * sum_j max(0, loss_j - alpha),   nu = 1 / ((1 - beta) * J)
//! ```
//!
//! and the smallest minimizer is the VaR. [`empirical_cvar_var`] evaluates
//! that minimum by sorting, without any optimization, and serves as the oracle
//! the LP-based pricer is checked against.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiskError {
    #[error("confidence level must lie strictly between 0 and 1, got {0}")]
    InvalidConfidence(f64),
    #[error("loss vector is empty")]
    EmptyLosses,
    #[error("non-finite loss at scenario {0}")]
    NonFinite(usize),
    #[error("dimension mismatch: {left} prices vs {right} scenario entries")]
    Dimension { left: usize, right: usize },
}

/// Confidence level `beta` in (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Confidence(f64);

impl Confidence {
    pub fn new(beta: f64) -> Result<Self, RiskError> {
        if beta.is_finite() && beta > 0.0 && beta < 1.0 {
            Ok(Self(beta))
        } else {
            Err(RiskError::InvalidConfidence(beta))
        }
    }

    pub fn beta(self) -> f64 {
        self.0
    }

    /// Scaling constant `1 / ((1 - beta) * J)` for `J` scenarios.
    pub fn nu(self, scenarios: usize) -> f64 {
        1.0 / ((1.0 - self.0) * scenarios as f64)
    }
}

/// Realized losses, one per scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossVector(Vec<f64>);

impl LossVector {
    pub fn new(losses: Vec<f64>) -> Result<Self, RiskError> {
        if losses.is_empty() {
            return Err(RiskError::EmptyLosses);
        }
        if let Some(j) = losses.iter().position(|l| !l.is_finite()) {
            return Err(RiskError::NonFinite(j));
        }
        Ok(Self(losses))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub var: f64,
    pub cvar: f64,
}

/// Insurer loss for one scenario: `sum_p max(0, y_p - x_p)`.
pub fn piecewise_loss(prices: &[f64], scenario: &[f64]) -> Result<f64, RiskError> {
    if prices.len() != scenario.len() {
        return Err(RiskError::Dimension {
            left: prices.len(),
            right: scenario.len(),
        });
    }
    Ok(prices.iter().zip(scenario).map(|(x, y)| (y - x).max(0.0)).sum())
}

/// Rockafellar-Uryasev auxiliary function evaluated at `alpha`.
pub fn ru_objective(alpha: f64, losses: &LossVector, beta: Confidence) -> f64 {
    let nu = beta.nu(losses.len());
    let excess: f64 = losses.as_slice().iter().map(|l| (l - alpha).max(0.0)).sum();
    alpha + nu * excess
}

/// Sort-based VaR/CVaR.
///
/// VaR is the `ceil(beta * J)`-th order statistic, which is the smallest
/// minimizer of [`ru_objective`]; CVaR is the objective at that point.
pub fn empirical_cvar_var(losses: &LossVector, beta: Confidence) -> RiskReport {
    let mut sorted = losses.as_slice().to_vec();
    sorted.sort_by(f64::total_cmp);
    let j = sorted.len();
    let k = var_rank(beta.beta(), j);
    let var = sorted[k - 1];
    let nu = beta.nu(j);
    // Only the entries above VaR contribute to the excess sum.
    let excess: f64 = sorted[k..].iter().map(|l| (l - var).max(0.0)).sum();
    RiskReport {
        var,
        cvar: var + nu * excess,
    }
}

/// 1-based rank `ceil(beta * J)`, guarded against `beta * J` landing a hair
/// above an integer through rounding.
pub(crate) fn var_rank(beta: f64, j: usize) -> usize {
    let raw = beta * j as f64;
    let nearest = raw.round();
    let k = if (raw - nearest).abs() <= 1e-9 * raw.max(1.0) {
        nearest
    } else {
        raw.ceil()
    };
    (k as usize).clamp(1, j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn lv(v: &[f64]) -> LossVector {
        LossVector::new(v.to_vec()).unwrap()
    }

    fn conf(b: f64) -> Confidence {
        Confidence::new(b).unwrap()
    }

    /// Minimum of the R-U objective over a dense grid that includes every
    /// sample point (the objective is piecewise linear with kinks there).
    fn grid_min(losses: &[f64], beta: f64) -> (f64, f64) {
        let l = lv(losses);
        let mut sorted = losses.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        let lo = sorted[0];
        let hi = *sorted.last().unwrap();
        let min_gap = sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let step = if min_gap.is_finite() { min_gap / 10.0 } else { 1.0 };
        let mut best = (f64::INFINITY, f64::INFINITY);
        let mut a = lo - step;
        let mut candidates: Vec<f64> = sorted.clone();
        while a <= hi + step {
            candidates.push(a);
            a += step;
        }
        candidates.sort_by(f64::total_cmp);
        for a in candidates {
            let v = ru_objective(a, &l, conf(beta));
            if v < best.1 - 1e-12 * v.abs().max(1.0) {
                best = (a, v);
            }
        }
        best
    }

    #[test]
    fn piecewise_loss_examples() {
        assert_eq!(piecewise_loss(&[150.0], &[100.0]).unwrap(), 0.0);
        assert_eq!(piecewise_loss(&[0.0], &[300.0]).unwrap(), 300.0);
        assert_eq!(piecewise_loss(&[150.0, 50.0], &[300.0, 40.0]).unwrap(), 150.0);
        assert!(matches!(
            piecewise_loss(&[1.0], &[1.0, 2.0]),
            Err(RiskError::Dimension { .. })
        ));
    }

    #[test]
    fn ru_objective_examples() {
        assert_eq!(ru_objective(0.0, &lv(&[10.0, 10.0]), conf(0.5)), 20.0);
        for b in [0.1, 0.5, 0.99] {
            assert_eq!(ru_objective(10.0, &lv(&[10.0, 10.0]), conf(b)), 10.0);
        }
        assert_relative_eq!(
            ru_objective(30.0, &lv(&[0.0, 10.0, 20.0, 30.0, 40.0]), conf(0.8)),
            40.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn empirical_examples() {
        let r = empirical_cvar_var(&lv(&[7.5; 6]), conf(0.9));
        assert_eq!((r.var, r.cvar), (7.5, 7.5));

        let r = empirical_cvar_var(&lv(&[0.0, 10.0, 20.0, 30.0, 40.0]), conf(0.8));
        assert_eq!(r.var, 30.0);
        assert_relative_eq!(r.cvar, 40.0, epsilon = 1e-12);

        let r = empirical_cvar_var(&lv(&[0.0, 50.0, 150.0]), conf(0.5));
        assert_eq!(r.var, 50.0);
        assert_relative_eq!(r.cvar, 350.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn grid_oracle_agrees_on_examples() {
        let (a, v) = grid_min(&[0.0, 10.0, 20.0, 30.0, 40.0], 0.8);
        assert_relative_eq!(a, 30.0, epsilon = 1e-9);
        assert_relative_eq!(v, 40.0, epsilon = 1e-9);
        let (a, v) = grid_min(&[0.0, 50.0, 150.0], 0.5);
        assert_relative_eq!(a, 50.0, epsilon = 1e-9);
        assert_relative_eq!(v, 350.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Confidence::new(0.0).is_err());
        assert!(Confidence::new(1.0).is_err());
        assert!(Confidence::new(f64::NAN).is_err());
        assert_eq!(LossVector::new(vec![]), Err(RiskError::EmptyLosses));
        assert_eq!(LossVector::new(vec![1.0, f64::INFINITY]), Err(RiskError::NonFinite(1)));
    }

    #[test]
    fn var_rank_handles_float_noise() {
        assert_eq!(var_rank(0.9, 1000), 900);
        assert_eq!(var_rank(0.95, 1000), 950);
        assert_eq!(var_rank(0.99, 1000), 990);
        assert_eq!(var_rank(0.7, 10), 7);
        assert_eq!(var_rank(0.71, 10), 8);
        assert_eq!(var_rank(0.01, 10), 1);
    }

    fn losses_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0u32..1000, 1..40).prop_map(|v| v.into_iter().map(|x| x as f64 * 1.5).collect())
    }

    proptest! {
        #[test]
        fn matches_grid_minimum(losses in losses_strategy(), beta in 0.05f64..0.97) {
            let r = empirical_cvar_var(&lv(&losses), conf(beta));
            let (_, v) = grid_min(&losses, beta);
            prop_assert!((r.cvar - v).abs() <= 1e-9 * v.abs().max(1.0));
            // VaR is the smallest minimizer: anything slightly lower is worse.
            let below = ru_objective(r.var - 1e-3, &lv(&losses), conf(beta));
            prop_assert!(below > r.cvar - 1e-9 * r.cvar.abs().max(1.0));
        }

        #[test]
        fn translation_and_homogeneity(losses in losses_strategy(), beta in 0.05f64..0.97,
                                       c in 0.0f64..500.0, t in 0.0f64..5.0) {
            let base = empirical_cvar_var(&lv(&losses), conf(beta));
            let shifted: Vec<f64> = losses.iter().map(|l| l + c).collect();
            let s = empirical_cvar_var(&lv(&shifted), conf(beta));
            prop_assert!((s.var - base.var - c).abs() < 1e-6);
            prop_assert!((s.cvar - base.cvar - c).abs() < 1e-6);
            let scaled: Vec<f64> = losses.iter().map(|l| l * t).collect();
            let h = empirical_cvar_var(&lv(&scaled), conf(beta));
            prop_assert!((h.var - t * base.var).abs() < 1e-6);
            prop_assert!((h.cvar - t * base.cvar).abs() < 1e-6);
        }

        #[test]
        fn ordering_properties(losses in losses_strategy(), b1 in 0.05f64..0.97, b2 in 0.05f64..0.97) {
            let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
            let l = lv(&losses);
            let r_lo = empirical_cvar_var(&l, conf(lo));
            let r_hi = empirical_cvar_var(&l, conf(hi));
            prop_assert!(r_lo.cvar <= r_hi.cvar + 1e-9);
            prop_assert!(r_lo.cvar >= r_lo.var - 1e-9);
            prop_assert!(r_lo.cvar >= l.mean() - 1e-9);
        }
    }
}
