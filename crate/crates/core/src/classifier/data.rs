//! Tabular datasets, the two Wisconsin file layouts, imputation and splits.

use super::ClassifierError;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Fully numeric dataset with binary labels (1 = positive/malignant).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularDataset {
    /// Row-major `rows x feature_names.len()`.
    features: Vec<f64>,
    labels: Vec<u8>,
    feature_names: Vec<String>,
}

impl TabularDataset {
    pub fn new(features: Vec<f64>, labels: Vec<u8>, feature_names: Vec<String>) -> Result<Self, ClassifierError> {
        let d = feature_names.len();
        if d == 0 || features.len() != labels.len() * d {
            return Err(ClassifierError::Shape {
                rows: labels.len(),
                features: d,
                values: features.len(),
            });
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(ClassifierError::NonFinite {
                row: i / d,
                feature: i % d,
            });
        }
        if let Some(i) = labels.iter().position(|&l| l > 1) {
            return Err(ClassifierError::Label(i));
        }
        Ok(Self {
            features,
            labels,
            feature_names,
        })
    }

    /// Builds a dataset from row vectors with generic `x0, x1, ...` names.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<u8>) -> Result<Self, ClassifierError> {
        let d = rows.first().map_or(0, Vec::len);
        let names = (0..d).map(|k| format!("x{k}")).collect();
        if rows.iter().any(|r| r.len() != d) {
            return Err(ClassifierError::Shape {
                rows: rows.len(),
                features: d,
                values: rows.iter().map(Vec::len).sum(),
            });
        }
        Self::new(rows.concat(), labels, names)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.num_features();
        &self.features[i * d..(i + 1) * d]
    }

    pub fn value(&self, i: usize, k: usize) -> f64 {
        self.features[i * self.num_features() + k]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        let mut features = Vec::with_capacity(idx.len() * self.num_features());
        for &i in idx {
            features.extend_from_slice(self.row(i));
        }
        Self {
            features,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    pub fn check_both_classes(&self) -> Result<(), ClassifierError> {
        let pos = self.positives();
        if pos == 0 || pos == self.len() {
            return Err(ClassifierError::SingleClass);
        }
        Ok(())
    }
}

/// Dataset as read from disk, before imputation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub features: Vec<Vec<Option<f64>>>,
    pub labels: Vec<u8>,
    pub feature_names: Vec<String>,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn missing(&self) -> usize {
        self.features.iter().flatten().filter(|v| v.is_none()).count()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }
}

/// Per-feature means used to fill missing values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanImputer {
    pub means: Vec<f64>,
}

impl MeanImputer {
    pub fn fit(raw: &RawDataset) -> Result<Self, ClassifierError> {
        let d = raw.feature_names.len();
        let mut sum = vec![0.0; d];
        let mut count = vec![0usize; d];
        for row in &raw.features {
            for (k, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    sum[k] += v;
                    count[k] += 1;
                }
            }
        }
        if let Some(k) = count.iter().position(|&c| c == 0) {
            return Err(ClassifierError::AllMissing(raw.feature_names[k].clone()));
        }
        Ok(Self {
            means: sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect(),
        })
    }

    pub fn apply(&self, raw: &RawDataset) -> Result<TabularDataset, ClassifierError> {
        let features = raw
            .features
            .iter()
            .flat_map(|row| row.iter().zip(&self.means).map(|(v, m)| v.unwrap_or(*m)))
            .collect();
        TabularDataset::new(features, raw.labels.clone(), raw.feature_names.clone())
    }
}

/// Fills missing entries with the means of the same dataset.
pub fn load_and_impute(raw: &RawDataset) -> Result<TabularDataset, ClassifierError> {
    MeanImputer::fit(raw)?.apply(raw)
}

/// On-disk layout of the Wisconsin breast-cancer files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetSchema {
    /// `id, M|B, 30 real features` (569 rows).
    #[serde(rename = "wdbc-569")]
    Wdbc,
    /// `id, 9 integer features with '?' for missing, 2|4` (699 rows).
    #[serde(rename = "original-699")]
    Original,
}

impl std::str::FromStr for DatasetSchema {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "wdbc-569" | "wdbc" => Ok(Self::Wdbc),
            "original-699" | "original" => Ok(Self::Original),
            _ => Err(format!("unknown dataset schema '{s}'")),
        }
    }
}

const ORIGINAL_FEATURES: [&str; 9] = [
    "clump_thickness",
    "cell_size_uniformity",
    "cell_shape_uniformity",
    "marginal_adhesion",
    "single_epithelial_cell_size",
    "bare_nuclei",
    "bland_chromatin",
    "normal_nucleoli",
    "mitoses",
];

const WDBC_BASE: [&str; 10] = [
    "radius",
    "texture",
    "perimeter",
    "area",
    "smoothness",
    "compactness",
    "concavity",
    "concave_points",
    "symmetry",
    "fractal_dimension",
];

impl DatasetSchema {
    pub fn feature_names(self) -> Vec<String> {
        match self {
            Self::Original => ORIGINAL_FEATURES.iter().map(|s| s.to_string()).collect(),
            Self::Wdbc => ["mean", "se", "worst"]
                .iter()
                .flat_map(|stat| WDBC_BASE.iter().map(move |b| format!("{b}_{stat}")))
                .collect(),
        }
    }

    fn parse_label(self, tok: &str) -> Option<u8> {
        match (self, tok) {
            (Self::Original, "4") | (Self::Wdbc, "M") => Some(1),
            (Self::Original, "2") | (Self::Wdbc, "B") => Some(0),
            _ => None,
        }
    }
}

/// Parses a comma-separated file in the given layout. Blank lines are
/// skipped; every other malformed line is reported with its 1-based number.
pub fn parse_dataset(text: &str, schema: DatasetSchema) -> Result<RawDataset, ClassifierError> {
    let names = schema.feature_names();
    let d = names.len();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| ClassifierError::Parse { line: line_no, msg };
        let toks: Vec<&str> = line.split(',').map(str::trim).collect();
        if toks.len() != d + 2 {
            return Err(bad(format!("expected {} fields, found {}", d + 2, toks.len())));
        }
        let (label_tok, feat_toks) = match schema {
            DatasetSchema::Wdbc => (toks[1], &toks[2..]),
            DatasetSchema::Original => (toks[d + 1], &toks[1..=d]),
        };
        let label = schema
            .parse_label(label_tok)
            .ok_or_else(|| bad(format!("unrecognized class label '{label_tok}'")))?;
        let mut row = Vec::with_capacity(d);
        for (k, tok) in feat_toks.iter().enumerate() {
            if *tok == "?" || tok.is_empty() {
                row.push(None);
                continue;
            }
            let v: f64 = tok
                .parse()
                .map_err(|_| bad(format!("feature '{}' is not numeric: '{tok}'", names[k])))?;
            if !v.is_finite() {
                return Err(bad(format!("feature '{}' is not finite", names[k])));
            }
            row.push(Some(v));
        }
        features.push(row);
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(ClassifierError::EmptyFile);
    }
    Ok(RawDataset {
        features,
        labels,
        feature_names: names,
    })
}

/// Stratified partition into `(train, test)` row indices. The train size is
/// `round(fraction * N)`, spread over the classes by largest remainder, so
/// each class lands within one row of its proportional share.
pub fn stratified_split_indices(
    labels: &[u8],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), ClassifierError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(ClassifierError::Fraction(train_fraction));
    }
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l as usize].push(i);
    }
    if by_class.iter().any(|c| c.len() < 2) {
        return Err(ClassifierError::DegenerateClasses {
            negatives: by_class[0].len(),
            positives: by_class[1].len(),
        });
    }
    let total = (train_fraction * labels.len() as f64).round() as usize;
    let quota: Vec<f64> = by_class.iter().map(|c| train_fraction * c.len() as f64).collect();
    let mut take: Vec<usize> = quota.iter().map(|q| q.floor() as usize).collect();
    let mut order = [0usize, 1];
    order.sort_by(|&a, &b| (quota[b] - quota[b].floor()).total_cmp(&(quota[a] - quota[a].floor())));
    let mut left = total.saturating_sub(take[0] + take[1]);
    for &c in order.iter().cycle().take(4) {
        if left == 0 {
            break;
        }
        if take[c] < by_class[c].len() - 1 {
            take[c] += 1;
            left -= 1;
        }
    }
    for t in take.iter_mut() {
        *t = (*t).max(1);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (c, idx) in by_class.iter_mut().enumerate() {
        idx.shuffle(&mut rng);
        train.extend_from_slice(&idx[..take[c]]);
        test.extend_from_slice(&idx[take[c]..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split(
    data: &TabularDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(TabularDataset, TabularDataset), ClassifierError> {
    let (tr, te) = stratified_split_indices(data.labels(), train_fraction, seed)?;
    Ok((data.subset(&tr), data.subset(&te)))
}

/// Stratified `k`-fold assignment: returns the fold id of every row.
pub fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; labels.len()];
    let mut next = 0;
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            fold[i] = next % k;
            next += 1;
        }
    }
    fold
}
