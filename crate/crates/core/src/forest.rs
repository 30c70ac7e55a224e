//! Random forests over augmented features: bootstrap resampling, per-node
//! column subsampling, majority-vote prediction, class-probability
//! estimates, and out-of-bag error accounting.
//!
//! Training is deterministic for a given seed: every tree owns a random
//! substream keyed by (master seed, tree index), so parallel scheduling
//! cannot change the result. With `mtry` equal to the column count no
//! column sampling happens and the forest degenerates to bagging.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{AugmentedFeatures, ColumnMeta};
use crate::cart::{grow_sampled, GrowParams, Impurity, Tree};
use crate::error::{Error, Result};

/// Training parameters for a forest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Candidate columns sampled per node; `None` means `round(√columns)`.
    pub mtry: Option<usize>,
    pub seed: u64,
    /// Disabled only for diagnostics; every tree then sees all rows.
    pub bootstrap: bool,
    pub grow: GrowParams,
}

impl ForestParams {
    pub fn new(n_trees: usize, seed: u64) -> Self {
        ForestParams {
            n_trees,
            mtry: None,
            seed,
            bootstrap: true,
            grow: GrowParams::forest(Impurity::Gini),
        }
    }
}

/// Default per-node candidate count: `round(√columns)`, at least 1.
pub fn default_mtry(n_cols: usize) -> usize {
    ((n_cols as f64).sqrt().round() as usize).clamp(1, n_cols.max(1))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<Tree>,
    /// `inbag[h][i]` is true when row `i` entered tree `h`'s bootstrap sample.
    inbag: Vec<Vec<bool>>,
    mtry: usize,
    params: ForestParams,
    feature_meta: Vec<ColumnMeta>,
    n_classes: usize,
}

/// Out-of-bag evaluation result. `NoCoverage` is returned when no row was
/// left out of every tree's bootstrap sample (possible for tiny forests).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OobOutcome {
    NoCoverage,
    Estimate { error: f64, n_scored: usize },
}

pub fn train_forest(features: &AugmentedFeatures, params: &ForestParams) -> Result<Forest> {
    if params.n_trees < 1 {
        return Err(Error::Validation("need at least one tree".into()));
    }
    let n = features.n_rows();
    if n == 0 {
        return Err(Error::Validation("cannot train on an empty feature set".into()));
    }
    let n_cols = features.n_cols();
    let mtry = match params.mtry {
        Some(m) => {
            if m < 1 || m > n_cols {
                return Err(Error::Validation(format!(
                    "mtry must lie in 1..={n_cols}, got {m}"
                )));
            }
            m
        }
        None => default_mtry(n_cols),
    };

    let results: Vec<Result<(Tree, Vec<bool>)>> = (0..params.n_trees)
        .into_par_iter()
        .map(|h| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(h as u64 + 1);
            let (rows, mask) = if params.bootstrap {
                let mut mask = vec![false; n];
                let rows: Vec<usize> = (0..n)
                    .map(|_| {
                        let r = rng.gen_range(0..n);
                        mask[r] = true;
                        r
                    })
                    .collect();
                (rows, mask)
            } else {
                ((0..n).collect(), vec![true; n])
            };
            let sample = crate::augment::subset_rows(features, &rows);
            let tree = grow_sampled(&sample, &params.grow, mtry, &mut rng)?;
            Ok((tree, mask))
        })
        .collect();

    let mut trees = Vec::with_capacity(params.n_trees);
    let mut inbag = Vec::with_capacity(params.n_trees);
    for r in results {
        let (tree, mask) = r?;
        trees.push(tree);
        inbag.push(mask);
    }

    Ok(Forest {
        trees,
        inbag,
        mtry,
        params: *params,
        feature_meta: features.column_meta.clone(),
        n_classes: features.n_classes,
    })
}

impl Forest {
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn mtry(&self) -> usize {
        self.mtry
    }

    pub fn seed(&self) -> u64 {
        self.params.seed
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn feature_meta(&self) -> &[ColumnMeta] {
        &self.feature_meta
    }

    pub fn inbag(&self) -> &[Vec<bool>] {
        &self.inbag
    }

    fn check_layout(&self, features: &AugmentedFeatures) -> Result<()> {
        if features.column_meta != self.feature_meta {
            return Err(Error::Validation(
                "feature column layout does not match the trained forest".into(),
            ));
        }
        Ok(())
    }

    /// Per-class vote fractions; each row sums to 1 and every entry is a
    /// multiple of `1 / n_trees`.
    pub fn predict_proba(&self, features: &AugmentedFeatures) -> Result<DMatrix<f64>> {
        self.check_layout(features)?;
        let n = features.n_rows();
        let h = self.trees.len() as f64;
        let mut proba = DMatrix::zeros(n, self.n_classes);
        for tree in &self.trees {
            for row in 0..n {
                let label = tree.predict_row(&features.matrix, row);
                proba[(row, label)] += 1.0;
            }
        }
        proba /= h;
        Ok(proba)
    }

    /// Majority-vote labels: the per-row argmax of `predict_proba`, ties
    /// resolved to the lowest class index.
    pub fn predict(&self, features: &AugmentedFeatures) -> Result<Vec<usize>> {
        let proba = self.predict_proba(features)?;
        Ok((0..proba.nrows())
            .map(|row| argmax_lowest(proba.row(row).iter().copied()))
            .collect())
    }

    /// Out-of-bag error: each row is voted on only by trees whose bootstrap
    /// sample excluded it; rows that are in-bag everywhere are skipped.
    pub fn oob_error(&self, features: &AugmentedFeatures) -> Result<OobOutcome> {
        self.check_layout(features)?;
        let n = features.n_rows();
        if features.labels.len() != n {
            return Err(Error::Validation("labels required for OOB error".into()));
        }
        let mut scored = 0usize;
        let mut wrong = 0usize;
        for row in 0..n {
            let mut votes = vec![0usize; self.n_classes];
            let mut any = false;
            for (h, tree) in self.trees.iter().enumerate() {
                if !self.inbag[h][row] {
                    votes[tree.predict_row(&features.matrix, row)] += 1;
                    any = true;
                }
            }
            if !any {
                continue;
            }
            scored += 1;
            if argmax_lowest(votes.iter().map(|&v| v as f64)) != features.labels[row] {
                wrong += 1;
            }
        }
        if scored == 0 {
            return Ok(OobOutcome::NoCoverage);
        }
        Ok(OobOutcome::Estimate {
            error: wrong as f64 / scored as f64,
            n_scored: scored,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("forest serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Forest> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            path: "<forest json>".into(),
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// Index of the maximum, ties resolved to the lowest index.
pub fn argmax_lowest(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::AugmentedFeatures;
    use crate::cart::grow;

    fn random_features(n: usize, cols: usize, seed: u64) -> AugmentedFeatures {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let matrix = DMatrix::from_fn(n, cols, |_, _| rng.gen::<f64>());
        let labels: Vec<usize> = (0..n)
            .map(|i| usize::from(matrix[(i, 0)] + 0.2 * matrix[(i, cols - 1)] > 0.6))
            .collect();
        let column_meta: Vec<ColumnMeta> = (0..cols)
            .map(|j| ColumnMeta {
                component: j + 1,
                deriv: 0,
            })
            .collect();
        let groups = (0..cols).map(|j| vec![j]).collect();
        AugmentedFeatures {
            matrix,
            column_meta,
            labels,
            n_classes: 2,
            groups,
        }
    }

    #[test]
    fn default_mtry_is_rounded_square_root() {
        assert_eq!(default_mtry(30), 5);
        assert_eq!(default_mtry(10), 3);
        assert_eq!(default_mtry(1), 1);
        assert_eq!(default_mtry(64), 8);
    }

    #[test]
    fn same_seed_gives_bit_identical_forests() {
        let f = random_features(30, 5, 1);
        let params = ForestParams::new(20, 99);
        let a = train_forest(&f, &params).unwrap();
        let b = train_forest(&f, &params).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.predict(&f).unwrap(), b.predict(&f).unwrap());
    }

    #[test]
    fn single_tree_without_bootstrap_matches_plain_growth() {
        let f = random_features(25, 4, 2);
        let params = ForestParams {
            n_trees: 1,
            mtry: Some(4),
            seed: 7,
            bootstrap: false,
            grow: GrowParams::forest(Impurity::Gini),
        };
        let forest = train_forest(&f, &params).unwrap();
        let tree = grow(&f, &params.grow).unwrap();
        assert_eq!(forest.trees()[0], tree);
        assert_eq!(
            forest.predict(&f).unwrap(),
            tree.predict(&f).unwrap()
        );
    }

    // Bagging oracle: with mtry equal to the column count, the forest must
    // equal an independently assembled bagging ensemble (bootstrap plus
    // unsampled growth) driven by the same per-tree substreams.
    #[test]
    fn full_mtry_reproduces_bagging_bit_exactly() {
        let f = random_features(30, 5, 3);
        let params = ForestParams {
            n_trees: 10,
            mtry: Some(5),
            seed: 1234,
            bootstrap: true,
            grow: GrowParams::forest(Impurity::Gini),
        };
        let forest = train_forest(&f, &params).unwrap();
        for h in 0..params.n_trees {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(h as u64 + 1);
            let rows: Vec<usize> = (0..f.n_rows()).map(|_| rng.gen_range(0..f.n_rows())).collect();
            let sample = crate::augment::subset_rows(&f, &rows);
            let bagged = grow(&sample, &params.grow).unwrap();
            assert_eq!(forest.trees()[h], bagged, "tree {h} diverged");
        }
    }

    #[test]
    fn probabilities_are_vote_fractions() {
        let f = random_features(20, 4, 4);
        let params = ForestParams::new(7, 5);
        let forest = train_forest(&f, &params).unwrap();
        let proba = forest.predict_proba(&f).unwrap();
        for row in 0..f.n_rows() {
            let mut votes = vec![0usize; 2];
            for tree in forest.trees() {
                votes[tree.predict_row(&f.matrix, row)] += 1;
            }
            for class in 0..2 {
                assert_eq!(proba[(row, class)], votes[class] as f64 / 7.0);
            }
            let sum: f64 = (0..2).map(|c| proba[(row, c)]).sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn predict_is_argmax_of_probabilities_with_low_tie() {
        let f = random_features(40, 4, 6);
        let params = ForestParams::new(4, 8); // even count invites ties
        let forest = train_forest(&f, &params).unwrap();
        let proba = forest.predict_proba(&f).unwrap();
        let preds = forest.predict(&f).unwrap();
        for row in 0..f.n_rows() {
            let expect = argmax_lowest(proba.row(row).iter().copied());
            assert_eq!(preds[row], expect);
        }
    }

    #[test]
    fn tie_between_classes_goes_to_the_lowest_index() {
        assert_eq!(argmax_lowest([0.5, 0.5].into_iter()), 0);
        assert_eq!(argmax_lowest([0.2, 0.8].into_iter()), 1);
        assert_eq!(argmax_lowest([0.3, 0.4, 0.3].into_iter()), 1);
    }

    #[test]
    fn oob_bookkeeping_matches_the_inbag_matrix() {
        let f = random_features(100, 4, 9);
        let params = ForestParams::new(1, 77);
        let forest = train_forest(&f, &params).unwrap();
        let expected_scored = forest.inbag()[0].iter().filter(|&&b| !b).count();
        match forest.oob_error(&f).unwrap() {
            OobOutcome::Estimate { n_scored, .. } => {
                assert_eq!(n_scored, expected_scored);
                // around e^{-1} of rows for a single bootstrap
                let frac = n_scored as f64 / 100.0;
                assert!((0.2..=0.55).contains(&frac), "scored fraction {frac}");
            }
            OobOutcome::NoCoverage => panic!("expected coverage"),
        }
    }

    #[test]
    fn no_bootstrap_forest_has_no_oob_coverage() {
        let f = random_features(15, 3, 10);
        let params = ForestParams {
            bootstrap: false,
            ..ForestParams::new(3, 1)
        };
        let forest = train_forest(&f, &params).unwrap();
        assert_eq!(forest.oob_error(&f).unwrap(), OobOutcome::NoCoverage);
    }

    #[test]
    fn forest_json_round_trips_to_identical_predictions() {
        let f = random_features(25, 5, 11);
        let forest = train_forest(&f, &ForestParams::new(9, 3)).unwrap();
        let restored = Forest::from_json(&forest.to_json()).unwrap();
        assert_eq!(forest.predict(&f).unwrap(), restored.predict(&f).unwrap());
        match (forest.oob_error(&f).unwrap(), restored.oob_error(&f).unwrap()) {
            (
                OobOutcome::Estimate { error: a, .. },
                OobOutcome::Estimate { error: b, .. },
            ) => assert_eq!(a, b),
            (a, b) => assert_eq!(a, b),
        }
    }

    #[test]
    fn mtry_out_of_range_is_rejected() {
        let f = random_features(10, 3, 12);
        let params = ForestParams {
            mtry: Some(4),
            ..ForestParams::new(2, 1)
        };
        assert!(train_forest(&f, &params).is_err());
        let params = ForestParams {
            mtry: Some(0),
            ..ForestParams::new(2, 1)
        };
        assert!(train_forest(&f, &params).is_err());
    }
}
