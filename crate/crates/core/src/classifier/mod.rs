//! From-scratch random-forest classifier, ROC AUC and the threshold metrics
//! that feed the claim model.

mod data;
mod forest;
mod metrics;

pub use data::{
    load_and_impute, parse_dataset, split, stratified_folds, stratified_split_indices, DatasetSchema, MeanImputer,
    RawDataset, TabularDataset,
};
pub use forest::{
    predict_scores, train_forest, CvScore, DecisionTree, ForestGrid, ForestModel, ForestParams, Node, TrainedForest,
};
pub use metrics::{accuracy_at, metrics_at_threshold, roc_auc, ThresholdMetrics};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifierError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dataset file contains no rows")]
    EmptyFile,
    #[error("feature '{0}' has no observed values")]
    AllMissing(String),
    #[error("{values} values do not form {rows} rows of {features} features")]
    Shape {
        rows: usize,
        features: usize,
        values: usize,
    },
    #[error("non-finite value at row {row}, feature {feature}")]
    NonFinite { row: usize, feature: usize },
    #[error("label at row {0} is not 0 or 1")]
    Label(usize),
    #[error("both classes must be present")]
    SingleClass,
    #[error("need at least two rows per class, got {negatives} negatives and {positives} positives")]
    DegenerateClasses { negatives: usize, positives: usize },
    #[error("train fraction must lie in (0, 1), got {0}")]
    Fraction(f64),
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("model expects {model} features, data has {data}")]
    FeatureCount { model: usize, data: usize },
    #[error("{scores} scores but {labels} labels")]
    Length { scores: usize, labels: usize },
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy(rows: &[(f64, u8)]) -> TabularDataset {
        let x: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.0]).collect();
        TabularDataset::from_rows(&x, rows.iter().map(|r| r.1).collect()).unwrap()
    }

    /// Mann-Whitney U / (n_pos * n_neg), counting ties as one half.
    fn mann_whitney(scores: &[f64], labels: &[u8]) -> f64 {
        let mut u = 0.0;
        let (mut np, mut nn) = (0.0, 0.0);
        for (i, &li) in labels.iter().enumerate() {
            if li == 1 {
                np += 1.0;
            } else {
                nn += 1.0;
                continue;
            }
            for (j, &lj) in labels.iter().enumerate() {
                if lj == 0 {
                    u += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        u / (np * nn)
    }

    #[test]
    fn parses_both_layouts() {
        let orig = "1000025,5,1,1,1,2,1,3,1,1,2\n\n1002945,5,4,4,5,7,?,3,2,1,4\n";
        let raw = parse_dataset(orig, DatasetSchema::Original).unwrap();
        assert_eq!(raw.len(), 2);
        assert_eq!(raw.labels, vec![0, 1]);
        assert_eq!(raw.missing(), 1);
        assert_eq!(raw.feature_names[5], "bare_nuclei");

        let row: Vec<String> = (0..30).map(|k| format!("{}.5", k)).collect();
        let wdbc = format!("842302,M,{}\n842517,B,{}\n", row.join(","), row.join(","));
        let raw = parse_dataset(&wdbc, DatasetSchema::Wdbc).unwrap();
        assert_eq!(raw.labels, vec![1, 0]);
        assert_eq!(raw.feature_names.len(), 30);
        assert_eq!(raw.features[0][2], Some(2.5));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        assert_eq!(
            parse_dataset("", DatasetSchema::Original),
            Err(ClassifierError::EmptyFile)
        );
        assert_eq!(
            parse_dataset("\n  \n", DatasetSchema::Wdbc),
            Err(ClassifierError::EmptyFile)
        );
        let text = "1,5,1,1,1,2,1,3,1,1,2\n2,5,1,1,1,2,1,3,1,1\n";
        match parse_dataset(text, DatasetSchema::Original) {
            Err(ClassifierError::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        let text = "1,5,1,1,1,2,1,3,1,1,2\n\n3,5,x,1,1,2,1,3,1,1,2\n";
        match parse_dataset(text, DatasetSchema::Original) {
            Err(ClassifierError::Parse { line: 3, msg }) => assert!(msg.contains("cell_size_uniformity")),
            other => panic!("{other:?}"),
        }
        match parse_dataset("1,5,1,1,1,2,1,3,1,1,3\n", DatasetSchema::Original) {
            Err(ClassifierError::Parse { line: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mean_imputation() {
        let raw = RawDataset {
            features: vec![
                vec![Some(4.0), Some(1.0)],
                vec![None, Some(2.0)],
                vec![Some(6.0), Some(3.0)],
            ],
            labels: vec![0, 1, 0],
            feature_names: vec!["a".into(), "b".into()],
        };
        let d = load_and_impute(&raw).unwrap();
        assert_eq!(d.row(1), &[5.0, 2.0]);
        let complete = RawDataset {
            features: vec![vec![Some(1.0)], vec![Some(2.0)]],
            labels: vec![0, 1],
            feature_names: vec!["a".into()],
        };
        assert_eq!(load_and_impute(&complete).unwrap().row(1), &[2.0]);
        let empty = RawDataset {
            features: vec![vec![None], vec![None]],
            labels: vec![0, 1],
            feature_names: vec!["a".into()],
        };
        assert_eq!(load_and_impute(&empty), Err(ClassifierError::AllMissing("a".into())));
    }

    #[test]
    fn split_is_stratified_exhaustive_and_seeded() {
        let labels: Vec<u8> = (0..100).map(|i| u8::from(i % 3 == 0)).collect();
        let (tr, te) = stratified_split_indices(&labels, 0.75, 4).unwrap();
        assert_eq!((tr.len(), te.len()), (75, 25));
        let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        let pos_train = tr.iter().filter(|&&i| labels[i] == 1).count() as f64;
        let global = labels.iter().filter(|&&l| l == 1).count() as f64 / 100.0;
        assert!((pos_train - global * 75.0).abs() <= 1.0);
        assert_eq!(stratified_split_indices(&labels, 0.75, 4).unwrap(), (tr, te));
        assert!(matches!(
            stratified_split_indices(&[0, 0, 0, 1], 0.75, 1),
            Err(ClassifierError::DegenerateClasses { .. })
        ));
    }

    #[test]
    fn separable_data_is_learned_perfectly() {
        let rows: Vec<(f64, u8)> = (0..40).map(|i| (i as f64, u8::from(i >= 20))).collect();
        let d = toy(&rows);
        let trained = train_forest(
            &d,
            &ForestGrid {
                n_trees: vec![10],
                max_depth: vec![Some(3)],
            },
            5,
            1,
        )
        .unwrap();
        let s = predict_scores(&trained.model, &d).unwrap();
        assert_eq!(roc_auc(&s, d.labels()).unwrap(), 1.0);
    }

    #[test]
    fn stump_reproduces_a_step() {
        let rows: Vec<(f64, u8)> = (0..10).map(|i| (i as f64 * 0.1, u8::from(i >= 6))).collect();
        let d = toy(&rows);
        let params = ForestParams {
            n_trees: 1,
            max_depth: Some(1),
            bootstrap: false,
            ..ForestParams::default()
        };
        let m = ForestModel::fit(&d, params, 0).unwrap();
        match m.trees[0].nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(feature, 0);
                assert!((threshold - 0.55).abs() < 1e-12);
            }
            ref n => panic!("{n:?}"),
        }
        assert_eq!(
            predict_scores(&m, &d).unwrap(),
            d.labels().iter().map(|&l| l as f64).collect::<Vec<_>>()
        );
    }

    #[test]
    fn forest_scores_average_trees() {
        let leaf = |p| DecisionTree {
            nodes: vec![Node::Leaf(p)],
        };
        let x = TabularDataset::from_rows(&[vec![0.0]], vec![0]).unwrap();
        let single = ForestModel::from_trees(vec![leaf(0.3)], 1);
        let same = ForestModel::from_trees(vec![leaf(0.3); 5], 1);
        assert_eq!(predict_scores(&single, &x).unwrap(), predict_scores(&same, &x).unwrap());
        assert_eq!(
            predict_scores(&ForestModel::from_trees(vec![leaf(1.0); 3], 1), &x).unwrap(),
            vec![1.0]
        );
        let two = ForestModel::from_trees(vec![leaf(0.2), leaf(0.6)], 1);
        assert!((predict_scores(&two, &x).unwrap()[0] - 0.4).abs() < 1e-15);
        let wide = TabularDataset::from_rows(&[vec![0.0, 1.0]], vec![0]).unwrap();
        assert!(matches!(
            predict_scores(&two, &wide),
            Err(ClassifierError::FeatureCount { .. })
        ));
    }

    #[test]
    fn threshold_examples() {
        let m = metrics_at_threshold(&[0.2, 0.5, 0.9], &[0, 1, 1], 0.0).unwrap();
        assert_eq!((m.sensitivity, m.specificity), (1.0, 0.0));
        let m = metrics_at_threshold(&[0.1, 0.4, 0.6, 0.9], &[0, 0, 1, 1], 0.5).unwrap();
        assert_eq!((m.tp, m.fp, m.tn, m.fn_), (2, 0, 2, 0));
        assert_eq!((m.sensitivity, m.specificity), (1.0, 1.0));
        // Strict inequality: a score equal to tau is negative.
        let m = metrics_at_threshold(&[0.5], &[1], 0.5).unwrap();
        assert_eq!(m.fn_, 1);
        assert!(metrics_at_threshold(&[0.5], &[1, 0], 0.5).is_err());
    }

    #[test]
    fn auc_examples() {
        let labels = [0, 0, 1, 1];
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &labels).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.9, 0.8, 0.2, 0.1], &labels).unwrap(), 0.0);
        assert_eq!(roc_auc(&[0.5; 4], &labels).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0.1, 0.2], &[1, 1]), Err(ClassifierError::SingleClass));

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let scores: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
        let labels: Vec<u8> = (0..10_000).map(|i| (i % 2) as u8).collect();
        assert!((roc_auc(&scores, &labels).unwrap() - 0.5).abs() < 0.02);
    }

    #[test]
    fn forest_is_thread_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..120)
            .map(|_| (0..4).map(|_| rng.random::<f64>()).collect())
            .collect();
        let labels = rows.iter().map(|r| u8::from(r[0] + 0.3 * r[1] > 0.6)).collect();
        let d = TabularDataset::from_rows(&rows, labels).unwrap();
        let params = ForestParams {
            n_trees: 16,
            ..ForestParams::default()
        };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| ForestModel::fit(&d, params, 9).unwrap());
        let b = four.install(|| ForestModel::fit(&d, params, 9).unwrap());
        assert_eq!(a, b);
    }

    fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
        prop::collection::vec((0u8..20, 0u8..2), 2..60).prop_filter_map("both classes", |v| {
            let labels: Vec<u8> = v.iter().map(|p| p.1).collect();
            let pos = labels.iter().filter(|&&l| l == 1).count();
            (pos > 0 && pos < labels.len()).then(|| (v.iter().map(|p| p.0 as f64 / 20.0).collect(), labels))
        })
    }

    proptest! {
        #[test]
        fn trapezoid_matches_mann_whitney((scores, labels) in scored()) {
            let a = roc_auc(&scores, &labels).unwrap();
            prop_assert!((a - mann_whitney(&scores, &labels)).abs() < 1e-10);
        }

        #[test]
        fn rates_are_monotone_in_tau((scores, labels) in scored(), t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let a = metrics_at_threshold(&scores, &labels, lo).unwrap();
            let b = metrics_at_threshold(&scores, &labels, hi).unwrap();
            prop_assert!(b.sensitivity <= a.sensitivity);
            prop_assert!(b.specificity >= a.specificity);
        }

        #[test]
        fn trees_respect_depth_and_leaf_range(seed in any::<u64>(), depth in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..60).map(|_| (0..3).map(|_| rng.random_range(0..5) as f64).collect()).collect();
            let labels: Vec<u8> = (0..60).map(|_| rng.random_range(0..2)).collect();
            let d = TabularDataset::from_rows(&rows, labels).unwrap();
            let m = ForestModel::fit(&d, ForestParams { n_trees: 5, max_depth: Some(depth), ..ForestParams::default() }, seed).unwrap();
            for t in &m.trees {
                prop_assert!(t.depth() <= depth);
                for n in &t.nodes {
                    if let Node::Leaf(p) = n {
                        prop_assert!((0.0..=1.0).contains(p));
                    }
                }
            }
        }
    }
}
