//! Assembly of the augmented feature matrix: projection scores pooled across
//! derivative orders, laid out in blocks `r = 0, 1, …, r_max` with full
//! column provenance and the per-component column groups used by the
//! conditional importance metric.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::SmoothedSet;
use crate::error::{Error, Result};
use crate::fpca::FpcaModel;

/// Provenance of one feature column: component index (1-based) and
/// derivative order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub component: usize,
    pub deriv: usize,
}

impl ColumnMeta {
    /// Display name matching the CSV headers: `FPC_k`, `FPCd_k`, `FPCd2_k`.
    pub fn name(&self) -> String {
        match self.deriv {
            0 => format!("FPC_{}", self.component),
            1 => format!("FPCd_{}", self.component),
            d => format!("FPCd{}_{}", d, self.component),
        }
    }
}

/// A labeled feature matrix with column provenance.
///
/// `groups` collects, for each component `k`, the indices of the columns
/// carrying that component across derivative orders; the groups partition
/// the column set.
#[derive(Debug, Clone)]
pub struct AugmentedFeatures {
    pub matrix: DMatrix<f64>,
    pub column_meta: Vec<ColumnMeta>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    pub groups: Vec<Vec<usize>>,
}

impl AugmentedFeatures {
    pub fn n_rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.matrix.ncols()
    }

    /// The group containing a given column.
    pub fn group_of(&self, col: usize) -> &[usize] {
        let meta = &self.column_meta[col];
        self.groups
            .iter()
            .find(|g| g.iter().any(|&c| self.column_meta[c].component == meta.component))
            .map(|g| g.as_slice())
            .unwrap_or(&[])
    }
}

/// A row-indexed view materialized as a new feature set; indices may repeat
/// (bootstrap resamples are multisets).
pub fn subset_rows(features: &AugmentedFeatures, rows: &[usize]) -> AugmentedFeatures {
    let matrix = DMatrix::from_fn(rows.len(), features.n_cols(), |i, j| {
        features.matrix[(rows[i], j)]
    });
    AugmentedFeatures {
        matrix,
        column_meta: features.column_meta.clone(),
        labels: rows.iter().map(|&r| features.labels[r]).collect(),
        n_classes: features.n_classes,
        groups: features.groups.clone(),
    }
}

fn group_columns(meta: &[ColumnMeta]) -> Vec<Vec<usize>> {
    let mut components: Vec<usize> = meta.iter().map(|m| m.component).collect();
    components.sort_unstable();
    components.dedup();
    components
        .into_iter()
        .map(|k| {
            meta.iter()
                .enumerate()
                .filter(|(_, m)| m.component == k)
                .map(|(i, _)| i)
                .collect()
        })
        .collect()
}

/// Builds the block-concatenated score matrix with `k` components per
/// derivative order `0..=r_max`. With `r_max = 0` this reproduces the plain
/// score matrix used by the non-augmented baselines. No standardization is
/// applied; tree splits are invariant to per-column scale.
pub fn build_augmented(
    models: &[FpcaModel],
    set: &SmoothedSet,
    k: usize,
    r_max: usize,
) -> Result<AugmentedFeatures> {
    if k < 1 {
        return Err(Error::Validation("need at least one component".into()));
    }
    let mut blocks = Vec::with_capacity(r_max + 1);
    for r in 0..=r_max {
        let model = models
            .iter()
            .find(|m| m.deriv_order() == r)
            .ok_or_else(|| {
                Error::Validation(format!("no fitted model for derivative order {r}"))
            })?;
        if model.n_components() < k {
            return Err(Error::Validation(format!(
                "model for order {r} has {} components, {k} requested",
                model.n_components()
            )));
        }
        blocks.push(model.score(set)?);
    }

    let n = set.n_curves();
    let mut matrix = DMatrix::zeros(n, k * (r_max + 1));
    let mut column_meta = Vec::with_capacity(k * (r_max + 1));
    for (r, block) in blocks.iter().enumerate() {
        for comp in 0..k {
            let col = r * k + comp;
            for row in 0..n {
                matrix[(row, col)] = block.scores[(row, comp)];
            }
            column_meta.push(ColumnMeta {
                component: comp + 1,
                deriv: r,
            });
        }
    }
    let groups = group_columns(&column_meta);
    Ok(AugmentedFeatures {
        matrix,
        column_meta,
        labels: set.labels().to_vec(),
        n_classes: set.n_classes(),
        groups,
    })
}

/// The fixed-basis variant: blocks of raw spline coefficients per derivative
/// order instead of projection scores. Derivative blocks use the exact
/// reduced-order representation, so block `r` has `S - r` columns.
pub fn build_augmented_spline(set: &SmoothedSet, r_max: usize) -> Result<AugmentedFeatures> {
    if r_max > set.basis().max_deriv() {
        return Err(Error::Validation(format!(
            "derivative order {r_max} not supported by spline order {}",
            set.basis().order()
        )));
    }
    let blocks: Vec<DMatrix<f64>> = (0..=r_max)
        .map(|r| set.derive(r).map(|d| d.coeffs().clone()))
        .collect::<Result<_>>()?;
    let n = set.n_curves();
    let total: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut matrix = DMatrix::zeros(n, total);
    let mut column_meta = Vec::with_capacity(total);
    let mut col = 0;
    for (r, block) in blocks.iter().enumerate() {
        for s in 0..block.ncols() {
            for row in 0..n {
                matrix[(row, col)] = block[(row, s)];
            }
            column_meta.push(ColumnMeta {
                component: s + 1,
                deriv: r,
            });
            col += 1;
        }
    }
    let groups = group_columns(&column_meta);
    Ok(AugmentedFeatures {
        matrix,
        column_meta,
        labels: set.labels().to_vec(),
        n_classes: set.n_classes(),
        groups,
    })
}
