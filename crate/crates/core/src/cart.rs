//! Classification trees over augmented features: impurity-based binary
//! splitting, cost-complexity pruning with cross-validated subtree selection,
//! prediction, and separation curves that read a split path back in the time
//! domain.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{AugmentedFeatures, ColumnMeta};
use crate::error::{Error, Result};
use crate::fpca::FpcaModel;

/// Split cost criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Impurity {
    Gini,
    Entropy,
}

/// Node impurity from class counts. Gini is `1 - Σ f²`; entropy is
/// `-Σ f ln f` with `0·ln 0 = 0`. Both are zero for a pure node.
pub fn impurity(counts: &[usize], kind: Impurity) -> Result<f64> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::Validation("impurity of an empty node".into()));
    }
    let n = total as f64;
    let value = match kind {
        Impurity::Gini => {
            1.0 - counts
                .iter()
                .map(|&c| {
                    let f = c as f64 / n;
                    f * f
                })
                .sum::<f64>()
        }
        Impurity::Entropy => -counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let f = c as f64 / n;
                f * f.ln()
            })
            .sum::<f64>(),
    };
    Ok(value)
}

/// A candidate binary split: rows with `value < threshold` go left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub column: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Exhaustive best split over the candidate columns, thresholds placed at
/// midpoints between consecutive distinct sorted values. Returns the split
/// maximizing the weighted impurity decrease, ties broken by lower column
/// index then lower threshold; `None` when no split has positive gain.
pub fn best_split(
    rows: &[usize],
    features: &AugmentedFeatures,
    candidate_cols: &[usize],
    kind: Impurity,
) -> Option<Split> {
    best_split_constrained(features, rows, candidate_cols, kind, 1)
}

fn class_counts(labels: &[usize], rows: &[usize], n_classes: usize) -> Vec<usize> {
    let mut counts = vec![0usize; n_classes];
    for &r in rows {
        counts[labels[r]] += 1;
    }
    counts
}

/// Best split subject to both children holding at least `min_leaf` rows.
fn best_split_constrained(
    features: &AugmentedFeatures,
    rows: &[usize],
    candidate_cols: &[usize],
    kind: Impurity,
    min_leaf: usize,
) -> Option<Split> {
    let n = rows.len();
    if n < 2 || candidate_cols.is_empty() {
        return None;
    }
    let n_classes = features.n_classes;
    let parent_counts = class_counts(&features.labels, rows, n_classes);
    let parent_impurity = impurity(&parent_counts, kind).ok()?;

    let mut best: Option<Split> = None;
    let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(n);
    for &col in candidate_cols {
        sorted.clear();
        sorted.extend(
            rows.iter()
                .map(|&r| (features.matrix[(r, col)], features.labels[r])),
        );
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

        let mut left_counts = vec![0usize; n_classes];
        let mut nl = 0usize;
        for i in 0..(n - 1) {
            left_counts[sorted[i].1] += 1;
            nl += 1;
            if sorted[i].0 == sorted[i + 1].0 {
                continue;
            }
            let nr = n - nl;
            if nl < min_leaf || nr < min_leaf {
                continue;
            }
            let threshold = 0.5 * (sorted[i].0 + sorted[i + 1].0);
            let right_counts: Vec<usize> = parent_counts
                .iter()
                .zip(&left_counts)
                .map(|(&p, &l)| p - l)
                .collect();
            let left_imp = impurity(&left_counts, kind).ok()?;
            let right_imp = impurity(&right_counts, kind).ok()?;
            let gain =
                parent_impurity - (nl as f64 * left_imp + nr as f64 * right_imp) / n as f64;
            if gain > 0.0 && best.as_ref().map_or(true, |b| gain > b.gain) {
                best = Some(Split {
                    column: col,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}

/// Growth hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowParams {
    pub impurity: Impurity,
    pub min_split: usize,
    pub min_leaf: usize,
    pub max_depth: usize,
}

impl GrowParams {
    /// Defaults for a standalone tree that will be pruned.
    pub fn standalone(impurity: Impurity) -> Self {
        GrowParams {
            impurity,
            min_split: 20,
            min_leaf: 7,
            max_depth: 30,
        }
    }

    /// Defaults for trees inside a forest: grown deep, never pruned.
    pub fn forest(impurity: Impurity) -> Self {
        GrowParams {
            impurity,
            min_split: 2,
            min_leaf: 1,
            max_depth: usize::MAX,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.min_leaf < 1 {
            return Err(Error::Validation("min_leaf must be at least 1".into()));
        }
        if self.min_split < 2 {
            return Err(Error::Validation("min_split must be at least 2".into()));
        }
        Ok(())
    }
}

impl Default for GrowParams {
    fn default() -> Self {
        GrowParams::standalone(Impurity::Gini)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NodeKind {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub kind: NodeKind,
    pub counts: Vec<usize>,
    pub majority: usize,
    pub impurity: f64,
}

/// One row of the pruning table: the weakest-link penalty at which a subtree
/// becomes optimal, its leaf count, and its cross-validated error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpEntry {
    pub alpha: f64,
    pub n_leaves: usize,
    pub cv_error: f64,
    pub cv_se: f64,
}

/// What the feature columns were built from. Separation curves are only
/// defined for score features, whose components have eigenfunctions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    FpcScores,
    SplineCoeffs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
    impurity_kind: Impurity,
    params: GrowParams,
    feature_meta: Vec<ColumnMeta>,
    feature_kind: FeatureKind,
    n_classes: usize,
    complexity_table: Vec<CpEntry>,
}

/// Grows a tree considering every column at every node.
pub fn grow(features: &AugmentedFeatures, params: &GrowParams) -> Result<Tree> {
    grow_impl(features, params, FeatureKind::FpcScores, &mut |_| None)
}

/// Grows a tree with feature provenance recorded (spline-coefficient trees
/// cannot be explained with separation curves).
pub fn grow_kind(
    features: &AugmentedFeatures,
    params: &GrowParams,
    kind: FeatureKind,
) -> Result<Tree> {
    grow_impl(features, params, kind, &mut |_| None)
}

/// Grows a tree sampling `mtry` candidate columns uniformly without
/// replacement at each node (forest mode). With `mtry` equal to the column
/// count no sampling happens and no random numbers are drawn, so the result
/// is identical to plain bagging over the same bootstrap sample.
pub fn grow_sampled<R: Rng>(
    features: &AugmentedFeatures,
    params: &GrowParams,
    mtry: usize,
    rng: &mut R,
) -> Result<Tree> {
    let n_cols = features.n_cols();
    if mtry < 1 || mtry > n_cols {
        return Err(Error::Validation(format!(
            "mtry must lie in 1..={n_cols}, got {mtry}"
        )));
    }
    if mtry == n_cols {
        return grow_impl(features, params, FeatureKind::FpcScores, &mut |_| None);
    }
    let mut sampler = |rng_cols: &mut Vec<usize>| {
        let all: Vec<usize> = (0..n_cols).collect();
        let mut chosen: Vec<usize> = all
            .choose_multiple(rng, mtry)
            .copied()
            .collect();
        chosen.sort_unstable();
        rng_cols.clear();
        rng_cols.extend(chosen);
        Some(())
    };
    grow_impl(features, params, FeatureKind::FpcScores, &mut |cols| {
        sampler(cols)
    })
}

/// Depth-first growth; `sample` fills the candidate column buffer per node
/// (returning `None` to use every column).
fn grow_impl(
    features: &AugmentedFeatures,
    params: &GrowParams,
    kind: FeatureKind,
    sample: &mut dyn FnMut(&mut Vec<usize>) -> Option<()>,
) -> Result<Tree> {
    params.validate()?;
    let n = features.n_rows();
    if n == 0 {
        return Err(Error::Validation("cannot grow a tree on no rows".into()));
    }
    let all_cols: Vec<usize> = (0..features.n_cols()).collect();
    let mut candidate_buf: Vec<usize> = Vec::new();

    let mut nodes: Vec<Node> = Vec::new();
    // (node index, rows, depth); children pushed right-then-left so the left
    // subtree is processed first.
    let mut stack: Vec<(usize, Vec<usize>, usize)> = Vec::new();
    nodes.push(placeholder_node(features, &(0..n).collect::<Vec<_>>(), params.impurity)?);
    stack.push((0, (0..n).collect(), 0));

    while let Some((idx, rows, depth)) = stack.pop() {
        let counts = nodes[idx].counts.clone();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || rows.len() < params.min_split || depth >= params.max_depth {
            continue; // stays a leaf
        }
        let cols: &[usize] = if sample(&mut candidate_buf).is_some() {
            &candidate_buf
        } else {
            &all_cols
        };
        let Some(split) =
            best_split_constrained(features, &rows, cols, params.impurity, params.min_leaf)
        else {
            continue;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| features.matrix[(r, split.column)] < split.threshold);
        let left = nodes.len();
        nodes.push(placeholder_node(features, &left_rows, params.impurity)?);
        let right = nodes.len();
        nodes.push(placeholder_node(features, &right_rows, params.impurity)?);
        nodes[idx].kind = NodeKind::Internal {
            feature: split.column,
            threshold: split.threshold,
            left,
            right,
        };
        stack.push((right, right_rows, depth + 1));
        stack.push((left, left_rows, depth + 1));
    }

    Ok(Tree {
        nodes,
        impurity_kind: params.impurity,
        params: *params,
        feature_meta: features.column_meta.clone(),
        feature_kind: kind,
        n_classes: features.n_classes,
        complexity_table: Vec::new(),
    })
}

fn placeholder_node(
    features: &AugmentedFeatures,
    rows: &[usize],
    kind: Impurity,
) -> Result<Node> {
    let counts = class_counts(&features.labels, rows, features.n_classes);
    let majority = counts
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.cmp(b).then(ib.cmp(ia)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let imp = impurity(&counts, kind)?;
    Ok(Node {
        kind: NodeKind::Leaf,
        counts,
        majority,
        impurity: imp,
    })
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn feature_meta(&self) -> &[ColumnMeta] {
        &self.feature_meta
    }

    pub fn feature_kind(&self) -> FeatureKind {
        self.feature_kind
    }

    pub fn complexity_table(&self) -> &[CpEntry] {
        &self.complexity_table
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Leaf))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], idx: usize) -> usize {
            match nodes[idx].kind {
                NodeKind::Leaf => 0,
                NodeKind::Internal { left, right, .. } => {
                    1 + walk(nodes, left).max(walk(nodes, right))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    /// Routes one row to a leaf and returns its majority label.
    pub fn predict_row(&self, matrix: &DMatrix<f64>, row: usize) -> usize {
        let mut idx = 0;
        loop {
            match self.nodes[idx].kind {
                NodeKind::Leaf => return self.nodes[idx].majority,
                NodeKind::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if matrix[(row, feature)] < threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    /// Routes one row with a single column's value replaced, without
    /// materializing a permuted copy of the matrix.
    pub fn predict_row_override(
        &self,
        matrix: &DMatrix<f64>,
        row: usize,
        over_col: usize,
        over_value: f64,
    ) -> usize {
        let mut idx = 0;
        loop {
            match self.nodes[idx].kind {
                NodeKind::Leaf => return self.nodes[idx].majority,
                NodeKind::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let v = if feature == over_col {
                        over_value
                    } else {
                        matrix[(row, feature)]
                    };
                    idx = if v < threshold { left } else { right };
                }
            }
        }
    }

    fn check_layout(&self, features: &AugmentedFeatures) -> Result<()> {
        if features.column_meta != self.feature_meta {
            return Err(Error::Validation(
                "feature column layout does not match the trained tree".into(),
            ));
        }
        Ok(())
    }

    /// Predicts every row of a feature matrix with the training layout.
    pub fn predict(&self, features: &AugmentedFeatures) -> Result<Vec<usize>> {
        self.check_layout(features)?;
        Ok((0..features.n_rows())
            .map(|r| self.predict_row(&features.matrix, r))
            .collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Tree> {
        serde_json::from_str(text)
            .map_err(|e| Error::Parse {
                path: "<tree json>".into(),
                line: e.line(),
                message: e.to_string(),
            })
    }

    /// Misclassification fraction (over `n_total`) of the subtree rooted at
    /// `idx`, and its leaf count.
    fn subtree_risk(&self, idx: usize, n_total: f64) -> (f64, usize) {
        match self.nodes[idx].kind {
            NodeKind::Leaf => (self.node_risk(idx, n_total), 1),
            NodeKind::Internal { left, right, .. } => {
                let (rl, ll) = self.subtree_risk(left, n_total);
                let (rr, lr) = self.subtree_risk(right, n_total);
                (rl + rr, ll + lr)
            }
        }
    }

    fn node_risk(&self, idx: usize, n_total: f64) -> f64 {
        let node = &self.nodes[idx];
        let n: usize = node.counts.iter().sum();
        (n - node.counts[node.majority]) as f64 / n_total
    }

    /// Weakest links: the minimum of `g(z) = (R(z) - R(T_z)) / (|T_z| - 1)`
    /// over internal nodes, with every node attaining it (ancestors subsume
    /// their descendants).
    fn weakest_links(&self) -> Option<(f64, Vec<usize>)> {
        let n_total: f64 = self.nodes[0].counts.iter().sum::<usize>() as f64;
        let mut gs: Vec<(usize, f64)> = Vec::new();
        for idx in 0..self.nodes.len() {
            if matches!(self.nodes[idx].kind, NodeKind::Internal { .. }) {
                let (r_sub, leaves) = self.subtree_risk(idx, n_total);
                let g = (self.node_risk(idx, n_total) - r_sub) / (leaves - 1) as f64;
                gs.push((idx, g));
            }
        }
        let min_g = gs
            .iter()
            .map(|&(_, g)| g)
            .min_by(|a, b| a.partial_cmp(b).unwrap())?;
        let candidates: Vec<usize> = gs
            .iter()
            .filter(|&&(_, g)| g <= min_g)
            .map(|&(i, _)| i)
            .collect();
        // drop nodes whose ancestor is also chosen
        let parents = self.parents();
        let chosen: Vec<usize> = candidates
            .iter()
            .copied()
            .filter(|&i| {
                let mut a = parents[i];
                while let Some(p) = a {
                    if candidates.contains(&p) {
                        return false;
                    }
                    a = parents[p];
                }
                true
            })
            .collect();
        Some((min_g, chosen))
    }

    fn parents(&self) -> Vec<Option<usize>> {
        let mut parents = vec![None; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            if let NodeKind::Internal { left, right, .. } = node.kind {
                parents[left] = Some(i);
                parents[right] = Some(i);
            }
        }
        parents
    }

    /// Rebuilds the arena with the given nodes collapsed to leaves.
    fn collapse(&self, collapse_set: &[usize]) -> Tree {
        fn copy(
            src: &Tree,
            idx: usize,
            collapse_set: &[usize],
            out: &mut Vec<Node>,
        ) -> usize {
            let slot = out.len();
            out.push(src.nodes[idx].clone());
            if collapse_set.contains(&idx) {
                out[slot].kind = NodeKind::Leaf;
                return slot;
            }
            if let NodeKind::Internal {
                feature,
                threshold,
                left,
                right,
            } = src.nodes[idx].kind
            {
                let new_left = copy(src, left, collapse_set, out);
                let new_right = copy(src, right, collapse_set, out);
                out[slot].kind = NodeKind::Internal {
                    feature,
                    threshold,
                    left: new_left,
                    right: new_right,
                };
            }
            slot
        }
        let mut nodes = Vec::new();
        copy(self, 0, collapse_set, &mut nodes);
        Tree {
            nodes,
            ..self.clone()
        }
    }
}

/// Collapses weakest links while their penalty does not exceed `alpha`.
/// `alpha = ∞` collapses everything down to the root leaf.
pub fn prune_at_alpha(tree: &Tree, alpha: f64) -> Tree {
    let mut current = tree.clone();
    loop {
        let Some((g, set)) = current.weakest_links() else {
            return current;
        };
        if g <= alpha {
            current = current.collapse(&set);
        } else {
            return current;
        }
    }
}

/// The weakest-link sequence: nested subtrees with the penalty value at
/// which each becomes optimal, starting from the full tree at zero.
fn cp_sequence(tree: &Tree) -> Vec<(f64, Tree)> {
    let mut seq = vec![(0.0, tree.clone())];
    let mut current = tree.clone();
    while let Some((g, set)) = current.weakest_links() {
        current = current.collapse(&set);
        seq.push((g.max(0.0), current.clone()));
    }
    seq
}

/// Subtree selection rule after cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PruneRule {
    /// Subtree with the minimum cross-validated error.
    Min,
    /// Smallest subtree within one standard error of the minimum.
    OneSe,
}

/// Stratified fold assignment: per-class indices are shuffled and dealt
/// round-robin, so every fold sees near-proportional class counts.
fn stratified_folds(
    labels: &[usize],
    n_classes: usize,
    folds: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let mut assignment = vec![0usize; labels.len()];
    let mut next = 0usize;
    for class in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(rng);
        for idx in members {
            assignment[idx] = next % folds;
            next += 1;
        }
    }
    assignment
}

/// Cost-complexity pruning: computes the weakest-link penalty sequence,
/// estimates per-penalty misclassification by stratified k-fold
/// cross-validation, and returns the subtree selected by `rule` with the
/// complexity table populated.
pub fn prune(
    tree: &Tree,
    features: &AugmentedFeatures,
    folds: usize,
    rule: PruneRule,
    seed: u64,
) -> Result<Tree> {
    tree.check_layout(features)?;
    if folds < 2 {
        return Err(Error::Validation("need at least 2 folds".into()));
    }
    let n = features.n_rows();
    if n < folds {
        return Err(Error::Validation(format!(
            "cannot split {n} rows into {folds} folds"
        )));
    }

    let seq = cp_sequence(tree);
    let alphas: Vec<f64> = seq.iter().map(|&(a, _)| a).collect();
    // Representative penalty inside each optimality interval: geometric mean
    // of the endpoints, infinity for the last (root-only) interval.
    let m = alphas.len();
    let betas: Vec<f64> = (0..m)
        .map(|i| {
            if i == 0 {
                0.0
            } else if i + 1 < m {
                (alphas[i] * alphas[i + 1]).sqrt()
            } else {
                f64::INFINITY
            }
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let assignment = stratified_folds(&features.labels, features.n_classes, folds, &mut rng);

    let mut errors = vec![0usize; m];
    for fold in 0..folds {
        let train_rows: Vec<usize> = (0..n).filter(|&i| assignment[i] != fold).collect();
        let test_rows: Vec<usize> = (0..n).filter(|&i| assignment[i] == fold).collect();
        if train_rows.is_empty() || test_rows.is_empty() {
            continue;
        }
        let train = crate::augment::subset_rows(features, &train_rows);
        let fold_tree = grow_kind(&train, &tree.params, tree.feature_kind)?;
        for (i, &beta) in betas.iter().enumerate() {
            let pruned = prune_at_alpha(&fold_tree, beta);
            for &row in &test_rows {
                if pruned.predict_row(&features.matrix, row) != features.labels[row] {
                    errors[i] += 1;
                }
            }
        }
    }

    let table: Vec<CpEntry> = (0..m)
        .map(|i| {
            let err = errors[i] as f64 / n as f64;
            CpEntry {
                alpha: alphas[i],
                n_leaves: seq[i].1.n_leaves(),
                cv_error: err,
                cv_se: (err * (1.0 - err) / n as f64).sqrt(),
            }
        })
        .collect();

    let best_idx = match rule {
        PruneRule::Min => {
            // ties prefer the smaller subtree (larger index)
            let mut best = 0;
            for i in 0..m {
                if table[i].cv_error <= table[best].cv_error {
                    best = i;
                }
            }
            best
        }
        PruneRule::OneSe => {
            let mut min_idx = 0;
            for i in 0..m {
                if table[i].cv_error <= table[min_idx].cv_error {
                    min_idx = i;
                }
            }
            let threshold = table[min_idx].cv_error + table[min_idx].cv_se;
            (0..m)
                .rev()
                .find(|&i| table[i].cv_error <= threshold)
                .unwrap_or(min_idx)
        }
    };

    let mut result = prune_at_alpha(tree, betas[best_idx]);
    result.complexity_table = table;
    Ok(result)
}

/// One additive term of a separation curve: the split threshold times the
/// eigenfunction of the split's component and derivative order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationTerm {
    pub component: usize,
    pub deriv: usize,
    pub threshold: f64,
}

/// The time-domain reading of a split path: `ψ_z(t)` accumulated over the
/// splits from the root down to (and including) node `z`.
#[derive(Debug, Clone)]
pub struct SeparationCurve {
    pub node_id: usize,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub terms: Vec<SeparationTerm>,
}

/// Builds the separation curve of an internal node from the fitted
/// per-order models. Fails for leaves and for spline-coefficient trees.
pub fn separation_curve(
    tree: &Tree,
    node_id: usize,
    models: &[FpcaModel],
    grid: &[f64],
) -> Result<SeparationCurve> {
    if tree.feature_kind != FeatureKind::FpcScores {
        return Err(Error::Validation(
            "separation curves need score features with eigenfunctions".into(),
        ));
    }
    let node = tree
        .nodes
        .get(node_id)
        .ok_or_else(|| Error::Validation(format!("no node {node_id}")))?;
    if matches!(node.kind, NodeKind::Leaf) {
        return Err(Error::Validation(format!(
            "node {node_id} is a leaf; only internal nodes define a separation"
        )));
    }

    // root-to-node path, inclusive of the node's own split
    let parents = tree.parents();
    let mut path = vec![node_id];
    let mut cursor = node_id;
    while let Some(p) = parents[cursor] {
        path.push(p);
        cursor = p;
    }
    path.reverse();

    let mut terms = Vec::with_capacity(path.len());
    let mut values = vec![0.0; grid.len()];
    for idx in path {
        let NodeKind::Internal {
            feature, threshold, ..
        } = tree.nodes[idx].kind
        else {
            continue;
        };
        let meta = tree.feature_meta[feature];
        let model = models
            .iter()
            .find(|m| m.deriv_order() == meta.deriv)
            .ok_or_else(|| {
                Error::Validation(format!("no model for derivative order {}", meta.deriv))
            })?;
        if meta.component > model.n_components() {
            return Err(Error::Validation(format!(
                "component {} exceeds the model for order {}",
                meta.component, meta.deriv
            )));
        }
        let funcs = model.eval_eigenfunctions(grid)?;
        for (j, v) in values.iter_mut().enumerate() {
            *v += threshold * funcs[(j, meta.component - 1)];
        }
        terms.push(SeparationTerm {
            component: meta.component,
            deriv: meta.deriv,
            threshold,
        });
    }

    Ok(SeparationCurve {
        node_id,
        grid: grid.to_vec(),
        values,
        terms,
    })
}
