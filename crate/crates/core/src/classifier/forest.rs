//! Gini decision trees and bagged random forests.

use super::data::{stratified_folds, TabularDataset};
use super::metrics::roc_auc;
use super::ClassifierError;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Candidate features per split; `None` means `ceil(sqrt(D))`.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_leaf: 1,
            features_per_split: None,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    fn mtry(&self, d: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
            .clamp(1, d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Axis-aligned binary tree; rows with `x[feature] <= threshold` go left.
/// Leaves hold the fraction of class-1 training rows that reached them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut n = 0;
        loop {
            match self.nodes[n] {
                Node::Leaf(p) => return p,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => n = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, n: usize) -> usize {
            match t.nodes[n] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    /// Grows a tree on the rows listed in `sample` (repeats allowed).
    pub fn fit<R: Rng>(data: &TabularDataset, sample: &[usize], params: &ForestParams, rng: &mut R) -> Self {
        let mut tree = Self { nodes: Vec::new() };
        let mut idx = sample.to_vec();
        tree.grow(data, &mut idx, 0, params, rng);
        tree
    }

    fn grow<R: Rng>(
        &mut self,
        data: &TabularDataset,
        idx: &mut [usize],
        depth: usize,
        params: &ForestParams,
        rng: &mut R,
    ) -> usize {
        let me = self.nodes.len();
        let n = idx.len();
        let pos = idx.iter().filter(|&&i| data.labels()[i] == 1).count();
        let frac = pos as f64 / n as f64;
        self.nodes.push(Node::Leaf(frac));
        let pure = pos == 0 || pos == n;
        let depth_ok = params.max_depth.is_none_or(|m| depth < m);
        if pure || !depth_ok || n < 2 * params.min_leaf.max(1) {
            return me;
        }
        let Some((feature, threshold)) = best_split(data, idx, params, rng) else {
            return me;
        };
        let mut k = 0;
        for i in 0..n {
            if data.value(idx[i], feature) <= threshold {
                idx.swap(i, k);
                k += 1;
            }
        }
        let (l, r) = idx.split_at_mut(k);
        let left = self.grow(data, l, depth + 1, params, rng);
        let right = self.grow(data, r, depth + 1, params, rng);
        self.nodes[me] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        me
    }
}

fn gini(pos: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let p = pos / n;
    2.0 * p * (1.0 - p)
}

/// Best Gini split among `mtry` features drawn without replacement. As in
/// common implementations, constant features do not use up the budget.
fn best_split<R: Rng>(
    data: &TabularDataset,
    idx: &[usize],
    params: &ForestParams,
    rng: &mut R,
) -> Option<(usize, f64)> {
    let d = data.num_features();
    let mtry = params.mtry(d);
    let min_leaf = params.min_leaf.max(1);
    let n = idx.len() as f64;
    let total_pos = idx.iter().filter(|&&i| data.labels()[i] == 1).count() as f64;
    let parent = gini(total_pos, n);

    let mut features: Vec<usize> = (0..d).collect();
    features.shuffle(rng);
    let mut best: Option<(f64, usize, f64)> = None;
    let mut visited = 0;
    let mut pairs: Vec<(f64, u8)> = Vec::with_capacity(idx.len());
    for &f in &features {
        if visited >= mtry {
            break;
        }
        pairs.clear();
        pairs.extend(idx.iter().map(|&i| (data.value(i, f), data.labels()[i])));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pairs[0].0 == pairs[pairs.len() - 1].0 {
            continue;
        }
        visited += 1;
        let mut left_pos = 0.0;
        for s in 1..pairs.len() {
            left_pos += pairs[s - 1].1 as f64;
            if pairs[s].0 == pairs[s - 1].0 || s < min_leaf || pairs.len() - s < min_leaf {
                continue;
            }
            let nl = s as f64;
            let nr = n - nl;
            let score = (nl * gini(left_pos, nl) + nr * gini(total_pos - left_pos, nr)) / n;
            if best.is_none_or(|b| score < b.0) {
                let mut t = 0.5 * (pairs[s - 1].0 + pairs[s].0);
                // Guard against the midpoint rounding up to the right value.
                if t >= pairs[s].0 {
                    t = pairs[s - 1].0;
                }
                best = Some((score, f, t));
            }
        }
    }
    best.filter(|b| b.0 < parent - 1e-12).map(|b| (b.1, b.2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub params: ForestParams,
    pub seed: u64,
    pub num_features: usize,
}

fn tree_rng(seed: u64, t: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64);
    rng
}

impl ForestModel {
    /// Builds `params.n_trees` trees; tree `t` draws from its own stream so
    /// the result does not depend on the thread count.
    pub fn fit(data: &TabularDataset, params: ForestParams, seed: u64) -> Result<Self, ClassifierError> {
        if data.is_empty() {
            return Err(ClassifierError::SingleClass);
        }
        if params.n_trees == 0 {
            return Err(ClassifierError::EmptyGrid);
        }
        let n = data.len();
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = tree_rng(seed, t);
                let sample: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                DecisionTree::fit(data, &sample, &params, &mut rng)
            })
            .collect();
        Ok(Self {
            trees,
            params,
            seed,
            num_features: data.num_features(),
        })
    }

    pub fn from_trees(trees: Vec<DecisionTree>, num_features: usize) -> Self {
        Self {
            params: ForestParams {
                n_trees: trees.len(),
                ..ForestParams::default()
            },
            trees,
            seed: 0,
            num_features,
        }
    }

    /// Forest keeping only the first `k` trees.
    pub fn truncated(&self, k: usize) -> Self {
        let mut m = self.clone();
        m.trees.truncate(k);
        m.params.n_trees = m.trees.len();
        m
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Mean leaf fraction across trees for every row.
pub fn predict_scores(model: &ForestModel, data: &TabularDataset) -> Result<Vec<f64>, ClassifierError> {
    if data.num_features() != model.num_features {
        return Err(ClassifierError::FeatureCount {
            model: model.num_features,
            data: data.num_features(),
        });
    }
    Ok((0..data.len()).map(|i| model.predict_row(data.row(i))).collect())
}

/// Hyperparameter grid searched by cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestGrid {
    pub n_trees: Vec<usize>,
    pub max_depth: Vec<Option<usize>>,
}

impl Default for ForestGrid {
    fn default() -> Self {
        Self {
            n_trees: vec![50, 100, 200],
            max_depth: vec![Some(3), Some(5), Some(8), None],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub mean_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedForest {
    pub model: ForestModel,
    pub cv: Vec<CvScore>,
}

/// Picks `(n_trees, max_depth)` by mean `folds`-fold stratified AUC and
/// refits on the full training set. For each depth the largest forest is
/// grown once per fold and smaller sizes are scored on its tree prefixes,
/// which is equivalent to growing them separately with the same streams.
/// Ties go to the earlier grid entry (fewer trees, shallower).
pub fn train_forest(
    train: &TabularDataset,
    grid: &ForestGrid,
    folds: usize,
    seed: u64,
) -> Result<TrainedForest, ClassifierError> {
    train.check_both_classes()?;
    if grid.n_trees.is_empty() || grid.max_depth.is_empty() || grid.n_trees.contains(&0) {
        return Err(ClassifierError::EmptyGrid);
    }
    let folds = folds.clamp(2, train.positives().min(train.len() - train.positives()));
    let fold_of = stratified_folds(train.labels(), folds, seed ^ 0x9e37_79b9_7f4a_7c15);
    let max_trees = *grid.n_trees.iter().max().unwrap();

    let mut sizes = grid.n_trees.clone();
    sizes.sort_unstable();
    sizes.dedup();
    let mut cv = Vec::new();
    for &depth in &grid.max_depth {
        let params = ForestParams {
            n_trees: max_trees,
            max_depth: depth,
            ..ForestParams::default()
        };
        let per_fold: Vec<Vec<f64>> = (0..folds)
            .map(|k| {
                let tr: Vec<usize> = (0..train.len()).filter(|&i| fold_of[i] != k).collect();
                let va: Vec<usize> = (0..train.len()).filter(|&i| fold_of[i] == k).collect();
                let model = ForestModel::fit(&train.subset(&tr), params, seed.wrapping_add(k as u64 + 1))?;
                let valid = train.subset(&va);
                sizes
                    .iter()
                    .map(|&s| {
                        let scores = predict_scores(&model.truncated(s), &valid)?;
                        roc_auc(&scores, valid.labels())
                    })
                    .collect()
            })
            .collect::<Result<_, ClassifierError>>()?;
        for (si, &s) in sizes.iter().enumerate() {
            let mean_auc = per_fold.iter().map(|f| f[si]).sum::<f64>() / folds as f64;
            cv.push(CvScore {
                n_trees: s,
                max_depth: depth,
                mean_auc,
            });
        }
    }
    let mut best = &cv[0];
    for c in &cv[1..] {
        if c.mean_auc > best.mean_auc + 1e-12 {
            best = c;
        }
    }
    let params = ForestParams {
        n_trees: best.n_trees,
        max_depth: best.max_depth,
        ..ForestParams::default()
    };
    let model = ForestModel::fit(train, params, seed)?;
    Ok(TrainedForest { model, cv })
}
