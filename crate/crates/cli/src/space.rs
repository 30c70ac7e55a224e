//! The fitted feature space shared by every pipeline: a smoothing basis,
//! one decomposition per derivative order, and the augmentation layout.
//! Fitted on training curves only; test curves are smoothed with the same
//! basis and projected with the training means and eigenfunctions.

use serde::{Deserialize, Serialize};

use fcurve_core::augment::{build_augmented, AugmentedFeatures};
use fcurve_core::basis::{default_n_basis, smooth, BasisSystem, SmoothedSet};
use fcurve_core::cart::Tree;
use fcurve_core::dataio::CurveSet;
use fcurve_core::forest::Forest;
use fcurve_core::fpca::{fit_fpca, FpcaModel};
use fcurve_core::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureSpace {
    pub basis: BasisSystem,
    pub models: Vec<FpcaModel>,
    /// Effective component count per order (the requested count capped by
    /// the available rank).
    pub k: usize,
    pub k_requested: usize,
    pub r_max: usize,
}

impl FeatureSpace {
    /// Fits basis and per-order decompositions on the training curves.
    /// `k` is capped at what every order can support: `min(N-1, S-r)`.
    pub fn fit(
        train: &CurveSet,
        n_basis: Option<usize>,
        order: usize,
        k: usize,
        r_max: usize,
    ) -> Result<Self> {
        let s = n_basis.unwrap_or_else(|| default_n_basis(train.n_points(), order));
        let basis = BasisSystem::new(s, order)?;
        if r_max > basis.max_deriv() {
            return Err(Error::Validation(format!(
                "r_max {r_max} needs spline order at least {}, got {order}",
                r_max + 2
            )));
        }
        let smoothed = smooth(train, &basis)?;
        let available = (0..=r_max)
            .map(|r| (train.n_curves() - 1).min(s - r))
            .min()
            .unwrap();
        let k_eff = k.min(available);
        if k_eff < 1 {
            return Err(Error::Validation("no components available".into()));
        }
        let models: Vec<FpcaModel> = (0..=r_max)
            .map(|r| fit_fpca(&smoothed, r, k_eff))
            .collect::<Result<_>>()?;
        Ok(FeatureSpace {
            basis,
            models,
            k: k_eff,
            k_requested: k,
            r_max,
        })
    }

    pub fn smoothed(&self, curves: &CurveSet) -> Result<SmoothedSet> {
        smooth(curves, &self.basis)
    }

    /// Augmented features at a component count and derivative depth no
    /// larger than the fitted ones.
    pub fn augment(
        &self,
        smoothed: &SmoothedSet,
        k: usize,
        r_max: usize,
    ) -> Result<AugmentedFeatures> {
        if r_max > self.r_max {
            return Err(Error::Validation(format!(
                "space fitted to r_max {}, requested {r_max}",
                self.r_max
            )));
        }
        build_augmented(&self.models, smoothed, k, r_max)
    }

    /// Smooth-and-augment at the space's own `k` and `r_max`.
    pub fn features(&self, curves: &CurveSet) -> Result<AugmentedFeatures> {
        let sm = self.smoothed(curves)?;
        self.augment(&sm, self.k, self.r_max)
    }
}

/// A trained classifier packaged with everything needed to featurize new
/// curve files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SavedModel {
    pub format_version: u32,
    pub space: FeatureSpace,
    pub class_names: Vec<String>,
    pub model: ModelKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ModelKind {
    Tree(Tree),
    Forest(Forest),
}

impl SavedModel {
    pub fn new(space: FeatureSpace, class_names: Vec<String>, model: ModelKind) -> Self {
        SavedModel {
            format_version: 1,
            space,
            class_names,
            model,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            path: "<model json>".into(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    /// Predicted class indices for a curve file.
    pub fn predict(&self, curves: &CurveSet) -> Result<Vec<usize>> {
        let features = self.space.features(curves)?;
        match &self.model {
            ModelKind::Tree(tree) => tree.predict(&features),
            ModelKind::Forest(forest) => forest.predict(&features),
        }
    }
}

/// Fraction of matching labels.
pub fn accuracy(predicted: &[usize], actual: &[usize]) -> f64 {
    debug_assert_eq!(predicted.len(), actual.len());
    let hits = predicted
        .iter()
        .zip(actual)
        .filter(|(a, b)| a == b)
        .count();
    hits as f64 / actual.len() as f64
}

/// Row-per-actual-class confusion counts: `confusion[actual][predicted]`.
pub fn confusion(predicted: &[usize], actual: &[usize], n_classes: usize) -> Vec<Vec<usize>> {
    let mut table = vec![vec![0usize; n_classes]; n_classes];
    for (&p, &a) in predicted.iter().zip(actual) {
        table[a][p] += 1;
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use fcurve_core::cart::{grow, GrowParams, Impurity};
    use fcurve_core::simgen::{generate_split, ScenarioConfig};

    #[test]
    fn feature_space_caps_k_at_the_available_rank() {
        let config = ScenarioConfig::with_size(1, 12, 40, 5).unwrap();
        let (train, _) = generate_split(&config).unwrap();
        // 12 curves per group, 24 total -> N-1 = 23; S = 20 -> S-2 = 18
        let space = FeatureSpace::fit(&train, Some(20), 4, 50, 2).unwrap();
        assert_eq!(space.k, 18);
        assert_eq!(space.k_requested, 50);
        let f = space.features(&train).unwrap();
        assert_eq!(f.n_cols(), 18 * 3);
    }

    #[test]
    fn saved_tree_model_round_trips_predictions() {
        let config = ScenarioConfig::with_size(3, 20, 50, 9).unwrap();
        let (train, test) = generate_split(&config).unwrap();
        let space = FeatureSpace::fit(&train, None, 4, 5, 2).unwrap();
        let ftrain = space.features(&train).unwrap();
        let tree = grow(&ftrain, &GrowParams::standalone(Impurity::Gini)).unwrap();
        let saved = SavedModel::new(
            space,
            train.class_names().to_vec(),
            ModelKind::Tree(tree),
        );
        let restored = SavedModel::from_json(&saved.to_json()).unwrap();
        assert_eq!(
            saved.predict(&test).unwrap(),
            restored.predict(&test).unwrap()
        );
    }

    #[test]
    fn accuracy_and_confusion_agree() {
        let pred = vec![0, 1, 1, 0, 2];
        let actual = vec![0, 1, 0, 0, 2];
        assert!((accuracy(&pred, &actual) - 0.8).abs() < 1e-12);
        let c = confusion(&pred, &actual, 3);
        assert_eq!(c[0], vec![2, 1, 0]);
        assert_eq!(c[1], vec![0, 1, 0]);
        assert_eq!(c[2], vec![0, 0, 1]);
    }
}
