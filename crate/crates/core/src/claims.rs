//! Claim-cost algebra and Monte-Carlo generation of claim scenarios.
//!
//! A classifier with specificity `kappa` and sensitivity `lambda` exposes the
//! insurer to a false-positive cost `K` (mean `mu`) and a false-negative cost
//! `L` (mean `M`) per patient. Each scenario sums the weighted costs of `N`
//! patients:
//!
//! ```text
//! y_pj = sum_i (1 - kappa_p) * K_pji + (1 - lambda_p) * L_pji
//! ```
//!
//! Every `(p, j)` cell draws from its own ChaCha stream derived from the
//! master seed, so the matrix does not depend on how the work is split across
//! threads. The draw count per patient is fixed regardless of the error rates,
//! which gives common random numbers across thresholds.

use crate::pricing::{PricingError, ScenarioMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClaimsError {
    #[error("cost mean must be positive and finite, got {0}")]
    Mean(f64),
    #[error("cost standard deviation must be non-negative and finite, got {0}")]
    Std(f64),
    #[error("correlation must lie in [-1, 1], got {0}")]
    Correlation(f64),
    #[error("{name} must lie in [0, 1], got {value}")]
    Rate { name: &'static str, value: f64 },
    #[error("{0} must be at least 1")]
    Count(&'static str),
    #[error(transparent)]
    Matrix(#[from] PricingError),
}

/// Normal distribution truncated at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostDistribution {
    pub mean: f64,
    pub std: f64,
}

impl CostDistribution {
    pub fn new(mean: f64, std: f64) -> Result<Self, ClaimsError> {
        let d = Self { mean, std };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), ClaimsError> {
        if !(self.mean.is_finite() && self.mean > 0.0) {
            return Err(ClaimsError::Mean(self.mean));
        }
        if !(self.std.is_finite() && self.std >= 0.0) {
            return Err(ClaimsError::Std(self.std));
        }
        Ok(())
    }

    fn at(&self, z: f64) -> f64 {
        self.mean + self.std * z
    }
}

/// False-positive cost `K`, false-negative cost `L` and their correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClaimCostModel {
    pub false_positive: CostDistribution,
    pub false_negative: CostDistribution,
    pub rho: f64,
}

impl ClaimCostModel {
    pub fn new(
        false_positive: CostDistribution,
        false_negative: CostDistribution,
        rho: f64,
    ) -> Result<Self, ClaimsError> {
        let m = Self {
            false_positive,
            false_negative,
            rho,
        };
        m.validate()?;
        Ok(m)
    }

    /// Independent costs given as `(mu, sigma_mu, M, sigma_M)`.
    pub fn independent(mu: f64, sigma_mu: f64, m: f64, sigma_m: f64) -> Result<Self, ClaimsError> {
        Self::new(
            CostDistribution::new(mu, sigma_mu)?,
            CostDistribution::new(m, sigma_m)?,
            0.0,
        )
    }

    pub fn validate(&self) -> Result<(), ClaimsError> {
        self.false_positive.validate()?;
        self.false_negative.validate()?;
        if !(self.rho.is_finite() && (-1.0..=1.0).contains(&self.rho)) {
            return Err(ClaimsError::Correlation(self.rho));
        }
        Ok(())
    }
}

/// Threshold together with the specificity and sensitivity it yields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    pub tau: f64,
    pub kappa: f64,
    pub lambda: f64,
}

impl ErrorRates {
    pub fn new(tau: f64, kappa: f64, lambda: f64) -> Result<Self, ClaimsError> {
        let r = Self { tau, kappa, lambda };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), ClaimsError> {
        for (name, value) in [("tau", self.tau), ("kappa", self.kappa), ("lambda", self.lambda)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ClaimsError::Rate { name, value });
            }
        }
        Ok(())
    }

    pub fn false_positive_rate(&self) -> f64 {
        1.0 - self.kappa
    }

    pub fn false_negative_rate(&self) -> f64 {
        1.0 - self.lambda
    }
}

/// How per-patient misclassification enters a scenario.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    /// Every patient's costs are weighted by the error probabilities.
    #[default]
    Weighted,
    /// Each patient is a false positive with probability `1 - kappa` and a
    /// false negative with probability `1 - lambda`, and pays full cost.
    Bernoulli,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub rates: ErrorRates,
    pub costs: ClaimCostModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractSpec {
    pub patients: usize,
    pub scenarios: usize,
    pub segments: Vec<Segment>,
    pub master_seed: u64,
    #[serde(default)]
    pub mode: SamplingMode,
}

impl ContractSpec {
    pub fn validate(&self) -> Result<(), ClaimsError> {
        if self.patients == 0 {
            return Err(ClaimsError::Count("patients per contract"));
        }
        if self.scenarios == 0 {
            return Err(ClaimsError::Count("scenario count"));
        }
        if self.segments.is_empty() {
            return Err(ClaimsError::Count("segment count"));
        }
        for s in &self.segments {
            s.rates.validate()?;
            s.costs.validate()?;
        }
        Ok(())
    }
}

/// `E(S) = (1 - kappa) mu + (1 - lambda) M`.
pub fn expected_claim_cost(rates: &ErrorRates, model: &ClaimCostModel) -> f64 {
    rates.false_positive_rate() * model.false_positive.mean + rates.false_negative_rate() * model.false_negative.mean
}

/// Variance of the per-patient claim cost.
pub fn claim_cost_variance(rates: &ErrorRates, model: &ClaimCostModel) -> f64 {
    let a = rates.false_positive_rate() * model.false_positive.std;
    let b = rates.false_negative_rate() * model.false_negative.std;
    a * a + b * b + 2.0 * a * b * model.rho
}

/// `E(C) = N * E(S)`.
pub fn total_expected_loss(rates: &ErrorRates, model: &ClaimCostModel, patients: usize) -> f64 {
    patients as f64 * expected_claim_cost(rates, model)
}

/// ChaCha stream for cell `(p, j)`.
pub fn cell_rng(master_seed: u64, segment: usize, scenario: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((segment as u64) << 40) | scenario as u64);
    rng
}

/// One `(K, L)` pair. Underlying standard normals are correlated first and
/// the pair is redrawn until both costs are non-negative.
pub fn draw_costs<R: Rng + ?Sized>(rng: &mut R, model: &ClaimCostModel) -> (f64, f64) {
    let c = (1.0 - model.rho * model.rho).max(0.0).sqrt();
    loop {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let k = model.false_positive.at(z1);
        let l = model.false_negative.at(model.rho * z1 + c * z2);
        if k >= 0.0 && l >= 0.0 {
            return (k, l);
        }
    }
}

fn scenario_cost(spec: &ContractSpec, p: usize, j: usize) -> f64 {
    let seg = &spec.segments[p];
    let fp = seg.rates.false_positive_rate();
    let fn_ = seg.rates.false_negative_rate();
    let mut rng = cell_rng(spec.master_seed, p, j);
    let mut total = 0.0;
    for _ in 0..spec.patients {
        let (k, l) = draw_costs(&mut rng, &seg.costs);
        match spec.mode {
            SamplingMode::Weighted => total += fp * k + fn_ * l,
            SamplingMode::Bernoulli => {
                let u: f64 = rng.random();
                let v: f64 = rng.random();
                if u < fp {
                    total += k;
                }
                if v < fn_ {
                    total += l;
                }
            }
        }
    }
    total
}

/// Simulates the `J x P` scenario matrix.
pub fn generate_scenarios(spec: &ContractSpec) -> Result<ScenarioMatrix, ClaimsError> {
    spec.validate()?;
    let p = spec.segments.len();
    let data: Vec<f64> = (0..spec.scenarios * p)
        .into_par_iter()
        .map(|k| scenario_cost(spec, k % p, k / p))
        .collect();
    Ok(ScenarioMatrix::new(spec.scenarios, p, data)?)
}
