//! Functional principal component decomposition per derivative order.
//!
//! Curves (or their derivatives) live in a spline space with Gram matrix `W`.
//! Maximizing the variance of projection scores under the L² orthonormality
//! constraint reduces to a symmetric eigenproblem in coefficient space:
//! with centered coefficients `C̃`, eigen-decompose
//! `W^{1/2} (C̃ᵀC̃ / (N-1)) W^{1/2}` and map eigenvectors back through
//! `W^{-1/2}`. Scores are then coefficient inner products through `W`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{BasisSystem, SmoothedSet};
use crate::error::{Error, Result};

/// A fitted decomposition for one derivative order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FpcaModel {
    deriv_order: usize,
    basis: BasisSystem,
    mean_coeffs: DVector<f64>,
    /// Row `k` holds the basis coefficients of the k-th eigenfunction.
    eigen_coeffs: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    total_variance: f64,
    gram: DMatrix<f64>,
}

/// Projection scores for a curve set against one fitted model.
#[derive(Debug, Clone)]
pub struct ScoreMatrix {
    pub scores: DMatrix<f64>,
    pub deriv_order: usize,
}

/// Symmetric square root and inverse square root via eigendecomposition.
/// Fails if the matrix is numerically singular.
fn sqrt_and_inv_sqrt(w: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let eig = w.clone().symmetric_eigen();
    let max = eig.eigenvalues.amax();
    if eig.eigenvalues.iter().any(|&d| d <= 1e-12 * max) {
        return Err(Error::Numeric(
            "Gram matrix is numerically singular".into(),
        ));
    }
    let q = &eig.eigenvectors;
    let sqrt_d = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let inv_sqrt_d = DMatrix::from_diagonal(&eig.eigenvalues.map(|d| 1.0 / d.sqrt()));
    Ok((q * sqrt_d * q.transpose(), q * inv_sqrt_d * q.transpose()))
}

/// Fits the decomposition of the `deriv`-th derivative curves, keeping at
/// most `k_max` components (capped at `N - 1` and the basis size).
pub fn fit_fpca(set: &SmoothedSet, deriv: usize, k_max: usize) -> Result<FpcaModel> {
    if k_max < 1 {
        return Err(Error::Validation("k_max must be at least 1".into()));
    }
    let n = set.n_curves();
    if n < 2 {
        return Err(Error::Validation(
            "need at least 2 curves to estimate a covariance".into(),
        ));
    }
    let derived = set.derive(deriv)?;
    let coeffs = derived.coeffs();
    let s = coeffs.ncols();

    let mean_coeffs = DVector::from_fn(s, |j, _| coeffs.column(j).sum() / n as f64);
    let mut centered = coeffs.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean_coeffs.transpose();
    }

    let gram = derived.basis().gram(0)?;
    let (w_half, w_half_inv) = sqrt_and_inv_sqrt(&gram)?;

    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let mut m = &w_half * cov * &w_half;
    // enforce exact symmetry before the eigensolver
    m = (&m + m.transpose()) * 0.5;
    let total_variance = m.trace();
    let eig = m.symmetric_eigen();

    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());

    let k = k_max.min(n - 1).min(s);
    let mut eigenvalues = Vec::with_capacity(k);
    let mut eigen_coeffs = DMatrix::zeros(k, s);
    for (row, &idx) in order.iter().take(k).enumerate() {
        eigenvalues.push(eig.eigenvalues[idx].max(0.0));
        let b = &w_half_inv * eig.eigenvectors.column(idx);
        // sign convention: the coefficient of largest magnitude is positive
        let lead = b
            .iter()
            .enumerate()
            .max_by(|(_, x), (_, y)| x.abs().partial_cmp(&y.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let flip = if b[lead] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..s {
            eigen_coeffs[(row, j)] = flip * b[j];
        }
    }

    Ok(FpcaModel {
        deriv_order: deriv,
        basis: derived.basis().clone(),
        mean_coeffs,
        eigen_coeffs,
        eigenvalues,
        total_variance,
        gram,
    })
}

impl FpcaModel {
    pub fn deriv_order(&self) -> usize {
        self.deriv_order
    }

    pub fn basis(&self) -> &BasisSystem {
        &self.basis
    }

    pub fn n_components(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn mean_coeffs(&self) -> &DVector<f64> {
        &self.mean_coeffs
    }

    pub fn eigen_coeffs(&self) -> &DMatrix<f64> {
        &self.eigen_coeffs
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Scores of a curve set: derivatives are taken to the model's order,
    /// centered with the training mean, and projected onto the
    /// eigenfunctions through the Gram matrix.
    pub fn score(&self, set: &SmoothedSet) -> Result<ScoreMatrix> {
        let derived = set.derive(self.deriv_order)?;
        if derived.basis() != &self.basis {
            return Err(Error::Validation(
                "curve set basis does not match the fitted model".into(),
            ));
        }
        let mut centered = derived.coeffs().clone();
        for mut row in centered.row_iter_mut() {
            row -= self.mean_coeffs.transpose();
        }
        let scores = centered * &self.gram * self.eigen_coeffs.transpose();
        Ok(ScoreMatrix {
            scores,
            deriv_order: self.deriv_order,
        })
    }

    /// Variance carried by the first `p` components, as an absolute partial
    /// sum and as a fraction of the covariance operator's total trace.
    pub fn explained_variance(&self, p: usize) -> Result<(f64, f64)> {
        if p < 1 || p > self.n_components() {
            return Err(Error::Validation(format!(
                "p must lie in 1..={}, got {p}",
                self.n_components()
            )));
        }
        let partial: f64 = self.eigenvalues[..p].iter().sum();
        Ok((partial, partial / self.total_variance))
    }

    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    /// Eigenfunction values on a grid; one column per component.
    pub fn eval_eigenfunctions(&self, points: &[f64]) -> Result<DMatrix<f64>> {
        let b = self.basis.eval(points, 0)?;
        Ok(b * self.eigen_coeffs.transpose())
    }

    /// Mean function values on a grid.
    pub fn eval_mean(&self, points: &[f64]) -> Result<DVector<f64>> {
        let b = self.basis.eval(points, 0)?;
        Ok(b * &self.mean_coeffs)
    }
}
