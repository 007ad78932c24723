//! Synthetic data with a fidelity knob, the generator quality index and the
//! effect of data fidelity on priced risk.
//!
//! The generator mixes two mechanisms per synthetic row. With probability
//! `psi` it resamples a training row of the chosen class and adds Gaussian
//! jitter; otherwise it draws every feature independently from that class's
//! empirical marginal, which keeps the marginals but destroys the
//! dependence between features. `psi = 1` therefore reproduces the training
//! distribution and `psi = 0` is the least faithful setting.

use crate::classifier::{
    accuracy_at, predict_scores, roc_auc, ClassifierError, ForestModel, TabularDataset, ThresholdMetrics,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeneralizeError {
    #[error("class {class} has {rows} training rows; at least 2 are needed")]
    DegenerateClass { class: u8, rows: usize },
    #[error("psi must lie in [0, 1], got {0}")]
    Psi(f64),
    #[error("jitter bandwidth must be non-negative, got {0}")]
    Bandwidth(f64),
    #[error("synthetic sample has a single class")]
    DegenerateSample,
    #[error("{0} grid is empty")]
    EmptyGrid(&'static str),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error("pricing failed at psi={psi}, tau={tau}: {msg}")]
    Pricing { psi: f64, tau: f64, msg: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityGenerator {
    /// Training rows per class (index 0 = negative, 1 = positive).
    rows: [Vec<Vec<f64>>; 2],
    /// Share of positives in the training data.
    prevalence: f64,
    /// Per-feature standard deviation over the whole training set.
    feature_std: Vec<f64>,
    feature_names: Vec<String>,
    pub bandwidth: f64,
    pub seed: u64,
}

impl FidelityGenerator {
    pub fn fit(train: &TabularDataset, bandwidth: f64, seed: u64) -> Result<Self, GeneralizeError> {
        if !(bandwidth.is_finite() && bandwidth >= 0.0) {
            return Err(GeneralizeError::Bandwidth(bandwidth));
        }
        let mut rows: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
        for i in 0..train.len() {
            rows[train.labels()[i] as usize].push(train.row(i).to_vec());
        }
        for class in 0..2u8 {
            let n = rows[class as usize].len();
            if n < 2 {
                return Err(GeneralizeError::DegenerateClass { class, rows: n });
            }
        }
        let d = train.num_features();
        let n = train.len() as f64;
        let feature_std = (0..d)
            .map(|k| {
                let mean = (0..train.len()).map(|i| train.value(i, k)).sum::<f64>() / n;
                let var = (0..train.len())
                    .map(|i| (train.value(i, k) - mean).powi(2))
                    .sum::<f64>()
                    / (n - 1.0);
                var.sqrt()
            })
            .collect();
        Ok(Self {
            prevalence: rows[1].len() as f64 / n,
            rows,
            feature_std,
            feature_names: train.feature_names().to_vec(),
            bandwidth,
            seed,
        })
    }

    pub fn prevalence(&self) -> f64 {
        self.prevalence
    }

    /// Draws `n` labelled rows. Row `i` uses its own stream keyed by
    /// `(seed, key, i)` and always consumes the same number of draws, so
    /// samples for different `psi` with the same key are coupled: a row that
    /// is a jittered resample at some `psi` stays one at every larger `psi`.
    pub fn sample(&self, n: usize, psi: f64, key: u64) -> Result<TabularDataset, GeneralizeError> {
        if !(0.0..=1.0).contains(&psi) {
            return Err(GeneralizeError::Psi(psi));
        }
        let d = self.feature_std.len();
        let rows: Vec<(Vec<f64>, u8)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ key.wrapping_mul(0x9e37_79b9_7f4a_7c15));
                rng.set_stream(i as u64);
                let class = u8::from(rng.random::<f64>() < self.prevalence);
                let pool = &self.rows[class as usize];
                let faithful = rng.random::<f64>() < psi;
                let base = &pool[rng.random_range(0..pool.len())];
                let mut row = Vec::with_capacity(d);
                for k in 0..d {
                    let z: f64 = rng.sample(StandardNormal);
                    let donor = &pool[rng.random_range(0..pool.len())];
                    row.push(if faithful {
                        base[k] + self.bandwidth * self.feature_std[k] * z
                    } else {
                        donor[k]
                    });
                }
                (row, class)
            })
            .collect();
        let mut features = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for (r, l) in rows {
            features.extend(r);
            labels.push(l);
        }
        Ok(TabularDataset::new(features, labels, self.feature_names.clone())?)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QualityMetric {
    /// Accuracy at threshold 0.5.
    #[default]
    Accuracy,
    Auc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GqiReport {
    pub accuracy_real: f64,
    pub accuracy_synthetic: f64,
    pub gqi: f64,
}

fn quality(model: &ForestModel, test: &TabularDataset, metric: QualityMetric) -> Result<f64, ClassifierError> {
    let s = predict_scores(model, test)?;
    match metric {
        QualityMetric::Accuracy => accuracy_at(&s, test.labels(), 0.5),
        QualityMetric::Auc => roc_auc(&s, test.labels()),
    }
}

/// Ratio of the quality of a forest trained on `synthetic` to that of the
/// real model, both measured on the real test set. The fresh forest reuses
/// the real model's hyperparameters.
pub fn gqi_on(
    real_model: &ForestModel,
    synthetic: &TabularDataset,
    real_test: &TabularDataset,
    metric: QualityMetric,
    seed: u64,
) -> Result<GqiReport, GeneralizeError> {
    synthetic
        .check_both_classes()
        .map_err(|_| GeneralizeError::DegenerateSample)?;
    let synth_model = ForestModel::fit(synthetic, real_model.params, seed)?;
    let accuracy_real = quality(real_model, real_test, metric)?;
    let accuracy_synthetic = quality(&synth_model, real_test, metric)?;
    Ok(GqiReport {
        accuracy_real,
        accuracy_synthetic,
        gqi: accuracy_synthetic / accuracy_real,
    })
}

pub fn gqi(
    real_model: &ForestModel,
    gen: &FidelityGenerator,
    psi: f64,
    real_test: &TabularDataset,
    n_synth: usize,
    key: u64,
    metric: QualityMetric,
) -> Result<GqiReport, GeneralizeError> {
    let synthetic = gen.sample(n_synth, psi, key)?;
    gqi_on(real_model, &synthetic, real_test, metric, key)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSettings {
    pub psi_grid: Vec<f64>,
    pub taus: Vec<f64>,
    pub n_synth: usize,
    pub seeds: Vec<u64>,
    pub metric: QualityMetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftRow {
    pub psi: f64,
    pub seed: u64,
    pub gqi: GqiReport,
    pub best_tau: f64,
    pub best_cvar: f64,
}

/// For every `(psi, seed)`: samples a synthetic set, measures the real
/// model's error rates on it over the threshold grid, prices each operating
/// point with `price_cvar(metrics, seed)` and keeps the smallest CVaR.
/// Rows come back in `(psi, seed)` grid order.
pub fn cvar_under_shift<F>(
    real_model: &ForestModel,
    gen: &FidelityGenerator,
    real_test: &TabularDataset,
    settings: &ShiftSettings,
    price_cvar: F,
) -> Result<Vec<ShiftRow>, GeneralizeError>
where
    F: Fn(&ThresholdMetrics, u64) -> Result<f64, String> + Sync,
{
    if settings.psi_grid.is_empty() {
        return Err(GeneralizeError::EmptyGrid("psi"));
    }
    if settings.taus.is_empty() {
        return Err(GeneralizeError::EmptyGrid("tau"));
    }
    let cells: Vec<(f64, u64)> = settings
        .psi_grid
        .iter()
        .flat_map(|&p| settings.seeds.iter().map(move |&s| (p, s)))
        .collect();
    cells
        .par_iter()
        .map(|&(psi, seed)| {
            let synthetic = gen.sample(settings.n_synth, psi, seed)?;
            let report = gqi_on(real_model, &synthetic, real_test, settings.metric, seed)?;
            let scores = predict_scores(real_model, &synthetic)?;
            let mut best = (f64::NAN, f64::INFINITY);
            for &tau in &settings.taus {
                let m = crate::classifier::metrics_at_threshold(&scores, synthetic.labels(), tau)?;
                let cvar = price_cvar(&m, seed).map_err(|msg| GeneralizeError::Pricing { psi, tau, msg })?;
                if cvar < best.1 {
                    best = (tau, cvar);
                }
            }
            Ok(ShiftRow {
                psi,
                seed,
                gqi: report,
                best_tau: best.0,
                best_cvar: best.1,
            })
        })
        .collect()
}

/// Average ranks (ties share the mean rank), 1-based.
pub fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation; `NaN` when either input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}
