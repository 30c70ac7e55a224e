//! B-spline basis systems on `[0, 1]`: construction, evaluation with
//! derivatives, least-squares smoothing of discrete curves, exact derivative
//! coefficients, and Gram matrices of basis-function inner products.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataio::CurveSet;
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

/// A clamped B-spline basis over `[0, 1]` with equally spaced interior knots.
///
/// `order` is the spline order (degree + 1); order 4 means cubic splines,
/// whose first and second derivatives are continuous at the knots. The knot
/// vector has endpoint multiplicity equal to the order, so the number of
/// basis functions is `interior_knots + order`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSystem {
    order: usize,
    n_basis: usize,
    knots: Vec<f64>,
}

/// Default basis size for a grid of `n_points` samples: generous enough for
/// 50–100-point series while keeping the least-squares system overdetermined.
pub fn default_n_basis(n_points: usize, order: usize) -> usize {
    20.min(n_points.saturating_sub(order)).max(order)
}

impl BasisSystem {
    /// Builds the clamped basis with `n_basis` functions of the given order.
    pub fn new(n_basis: usize, order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::Validation(format!(
                "spline order must be at least 2, got {order}"
            )));
        }
        if n_basis < order {
            return Err(Error::Validation(format!(
                "need at least as many basis functions as the order ({order}), got {n_basis}"
            )));
        }
        let interior = n_basis - order;
        let mut knots = Vec::with_capacity(n_basis + order);
        knots.extend(std::iter::repeat(0.0).take(order));
        for i in 1..=interior {
            knots.push(i as f64 / (interior + 1) as f64);
        }
        knots.extend(std::iter::repeat(1.0).take(order));
        Ok(BasisSystem {
            order,
            n_basis,
            knots,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_basis(&self) -> usize {
        self.n_basis
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Highest derivative order with a piecewise-continuous representation.
    pub fn max_deriv(&self) -> usize {
        self.order - 2
    }

    /// The basis spanning the `r`-th derivatives: order reduced by `r`, one
    /// knot dropped from each end per derivative. The interior knots are
    /// unchanged, so derivative coefficients live over the same breakpoints.
    pub fn derived(&self, r: usize) -> Result<BasisSystem> {
        if r > self.max_deriv() {
            return Err(Error::Validation(format!(
                "derivative order {r} not supported by spline order {}",
                self.order
            )));
        }
        Ok(BasisSystem {
            order: self.order - r,
            n_basis: self.n_basis - r,
            knots: self.knots[r..self.knots.len() - r].to_vec(),
        })
    }

    fn check_points(&self, points: &[f64]) -> Result<()> {
        if let Some(&bad) = points.iter().find(|&&t| !(0.0..=1.0).contains(&t)) {
            return Err(Error::Validation(format!(
                "evaluation point {bad} outside [0, 1]; extrapolation is not supported"
            )));
        }
        Ok(())
    }

    /// Evaluates the `deriv`-th derivative of every basis function at the
    /// given points. Row `j` holds `φ_1⁽ʳ⁾(t_j) … φ_S⁽ʳ⁾(t_j)`; for
    /// `deriv = 0` each row sums to 1 (partition of unity).
    pub fn eval(&self, points: &[f64], deriv: usize) -> Result<DMatrix<f64>> {
        self.check_points(points)?;
        if deriv > self.max_deriv() {
            return Err(Error::Validation(format!(
                "derivative order {deriv} needs spline order at least {}, got {}",
                deriv + 2,
                self.order
            )));
        }
        let mut out = DMatrix::zeros(points.len(), self.n_basis);
        let mut row = vec![0.0; self.knots.len() - 1];
        for (j, &t) in points.iter().enumerate() {
            self.eval_row(t, deriv, &mut row);
            for s in 0..self.n_basis {
                out[(j, s)] = row[s];
            }
        }
        Ok(out)
    }

    /// Cox–de Boor bottom-up evaluation into `row` (scratch of length
    /// `knots.len() - 1`); the first `n_basis` entries are the result.
    ///
    /// Degree is raised to `degree - deriv` with the standard recursion, then
    /// the derivative recurrence is applied `deriv` times. Terms with a zero
    /// knot-difference denominator are zero by convention.
    fn eval_row(&self, t: f64, deriv: usize, row: &mut [f64]) {
        let u = &self.knots;
        let degree = self.order - 1;
        row.fill(0.0);
        row[self.find_span(t)] = 1.0;

        for q in 1..=(degree - deriv) {
            for i in 0..(u.len() - 1 - q) {
                let d_left = u[i + q] - u[i];
                let d_right = u[i + q + 1] - u[i + 1];
                let left = if d_left > 0.0 {
                    (t - u[i]) / d_left * row[i]
                } else {
                    0.0
                };
                let right = if d_right > 0.0 {
                    (u[i + q + 1] - t) / d_right * row[i + 1]
                } else {
                    0.0
                };
                row[i] = left + right;
            }
        }
        for j in 1..=deriv {
            let q = degree - deriv + j;
            for i in 0..(u.len() - 1 - q) {
                let d_left = u[i + q] - u[i];
                let d_right = u[i + q + 1] - u[i + 1];
                let a = if d_left > 0.0 { row[i] / d_left } else { 0.0 };
                let b = if d_right > 0.0 {
                    row[i + 1] / d_right
                } else {
                    0.0
                };
                row[i] = q as f64 * (a - b);
            }
        }
    }

    /// Index of the nonempty knot span containing `t`, with the right
    /// boundary folded into the last span.
    fn find_span(&self, t: f64) -> usize {
        let u = &self.knots;
        let last = *u.last().unwrap();
        if t >= last {
            // Last nonempty span ends at the first knot equal to the right
            // endpoint.
            return u.partition_point(|&x| x < last) - 1;
        }
        u.partition_point(|&x| x <= t) - 1
    }

    /// Gram matrix `W[j][l] = ∫ φ_j⁽ʳ⁾(t) φ_l⁽ʳ⁾(t) dt`, integrated by
    /// per-span Gauss–Legendre quadrature exact for the integrand's degree.
    /// Symmetric PSD and banded with bandwidth `order - 1`.
    pub fn gram(&self, deriv: usize) -> Result<DMatrix<f64>> {
        if deriv > self.max_deriv() {
            return Err(Error::Validation(format!(
                "derivative order {deriv} not supported by spline order {}",
                self.order
            )));
        }
        let (nodes, weights) = gauss_legendre(self.order);
        let mut w = DMatrix::zeros(self.n_basis, self.n_basis);
        let mut row = vec![0.0; self.knots.len() - 1];
        for span in self.order - 1..self.n_basis {
            let (a, b) = (self.knots[span], self.knots[span + 1]);
            if b <= a {
                continue;
            }
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (&x, &wt) in nodes.iter().zip(&weights) {
                let t = mid + half * x;
                self.eval_row(t, deriv, &mut row);
                // Only the `order` functions alive on this span are nonzero.
                let lo = span + 1 - self.order;
                for j in lo..=span.min(self.n_basis - 1) {
                    for l in lo..=span.min(self.n_basis - 1) {
                        w[(j, l)] += wt * half * row[j] * row[l];
                    }
                }
            }
        }
        Ok(w)
    }
}

/// Curves represented by per-curve basis coefficients, with labels carried
/// along from the source data.
#[derive(Debug, Clone)]
pub struct SmoothedSet {
    basis: BasisSystem,
    coeffs: DMatrix<f64>,
    labels: Vec<usize>,
    n_classes: usize,
}

impl SmoothedSet {
    pub fn from_parts(
        basis: BasisSystem,
        coeffs: DMatrix<f64>,
        labels: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self> {
        if coeffs.ncols() != basis.n_basis() {
            return Err(Error::Validation(format!(
                "coefficient matrix has {} columns, basis has {} functions",
                coeffs.ncols(),
                basis.n_basis()
            )));
        }
        if coeffs.nrows() != labels.len() {
            return Err(Error::Validation("one label per curve required".into()));
        }
        Ok(SmoothedSet {
            basis,
            coeffs,
            labels,
            n_classes,
        })
    }

    pub fn basis(&self) -> &BasisSystem {
        &self.basis
    }

    /// Coefficient matrix, one row per curve.
    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_curves(&self) -> usize {
        self.coeffs.nrows()
    }

    /// Evaluates every curve's `deriv`-th derivative on a grid; one row per
    /// curve.
    pub fn evaluate(&self, points: &[f64], deriv: usize) -> Result<DMatrix<f64>> {
        let b = self.basis.eval(points, deriv)?;
        Ok(&self.coeffs * b.transpose())
    }

    /// Exact coefficients of the `r`-th derivative curves in the reduced
    /// order basis over the same interior knots.
    ///
    /// Evaluating the result reproduces `evaluate(·, r)` to round-off.
    pub fn derive(&self, r: usize) -> Result<SmoothedSet> {
        if r > self.basis.max_deriv() {
            return Err(Error::Validation(format!(
                "derivative order {r} not supported by spline order {}",
                self.basis.order()
            )));
        }
        let mut basis = self.basis.clone();
        let mut coeffs = self.coeffs.clone();
        for _ in 0..r {
            coeffs = derivative_step(&basis, &coeffs);
            basis = basis.derived(1)?;
        }
        SmoothedSet::from_parts(basis, coeffs, self.labels.clone(), self.n_classes)
    }
}

/// One differentiation step: coefficients of the derivative spline in the
/// order-reduced basis, `d_i = degree · (c_{i+1} - c_i) / (u_{i+deg+1} - u_{i+1})`.
fn derivative_step(basis: &BasisSystem, coeffs: &DMatrix<f64>) -> DMatrix<f64> {
    let degree = (basis.order() - 1) as f64;
    let u = basis.knots();
    let s = basis.n_basis();
    let n = coeffs.nrows();
    let mut out = DMatrix::zeros(n, s - 1);
    for i in 0..(s - 1) {
        let denom = u[i + basis.order()] - u[i + 1];
        let scale = if denom > 0.0 { degree / denom } else { 0.0 };
        for row in 0..n {
            out[(row, i)] = scale * (coeffs[(row, i + 1)] - coeffs[(row, i)]);
        }
    }
    out
}

/// Least-squares fit of every curve in the basis: minimizes
/// `Σ_j (z_ij - Σ_s c_is φ_s(t_j))²` per curve via a single QR factorization
/// of the shared design matrix with N right-hand sides.
pub fn smooth(curves: &CurveSet, basis: &BasisSystem) -> Result<SmoothedSet> {
    let t_len = curves.n_points();
    let s = basis.n_basis();
    if t_len < s {
        return Err(Error::Validation(format!(
            "need at least as many sample points ({t_len}) as basis functions ({s}); lower n_basis"
        )));
    }
    let design = basis.eval(curves.domain(), 0)?;
    let qr = design.qr();
    let r = qr.r();
    let max_diag = (0..s).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let min_diag = (0..s).map(|i| r[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if min_diag <= 1e-10 * max_diag {
        return Err(Error::Numeric(
            "rank-deficient design matrix; lower n_basis or supply more sample points".into(),
        ));
    }
    // R C' = Qᵀ Zᵀ, one column per curve.
    let rhs = qr.q().transpose() * curves.values().transpose();
    let solved = r
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::Numeric("triangular solve failed in smoothing".into()))?;
    SmoothedSet::from_parts(
        basis.clone(),
        solved.transpose(),
        curves.labels().to_vec(),
        curves.n_classes(),
    )
}

/// Integrates `f` over `[a, b]` by adaptive Simpson quadrature. The
/// requested tolerance is floored at the roundoff scale of the integrand so
/// the recursion terminates on noisy plateaus; tests use this as an
/// independent check on scores and Gram entries.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        let floor = 1e-15 * (left.abs() + right.abs() + 1.0);
        if depth == 0 || delta.abs() <= 15.0 * tol.max(floor) {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb) = (f(a), f(b));
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 24)
}

/// Sum of a binomial-coefficient product, used only by the Bernstein test.
#[cfg(test)]
fn binomial(n: usize, k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * (n - k + i) as f64 / i as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::unit_grid;
    use approx::assert_abs_diff_eq;

    fn grid(n: usize) -> Vec<f64> {
        unit_grid(n)
    }

    #[test]
    fn rejects_too_few_basis_functions() {
        assert!(BasisSystem::new(3, 4).is_err());
        assert!(BasisSystem::new(4, 4).is_ok());
    }

    #[test]
    fn knot_layout_counts_interior_knots() {
        let b = BasisSystem::new(20, 4).unwrap();
        let interior: Vec<f64> = b
            .knots()
            .iter()
            .copied()
            .filter(|&k| k > 0.0 && k < 1.0)
            .collect();
        assert_eq!(interior.len(), 16);
        // equally spaced
        for (i, &k) in interior.iter().enumerate() {
            assert_abs_diff_eq!(k, (i + 1) as f64 / 17.0, epsilon = 1e-15);
        }
        assert_eq!(b.knots().len(), 24);
    }

    #[test]
    fn degenerate_case_is_the_bernstein_basis() {
        let b = BasisSystem::new(4, 4).unwrap();
        let pts = grid(101);
        let m = b.eval(&pts, 0).unwrap();
        for (j, &t) in pts.iter().enumerate() {
            for s in 0..4 {
                let bern = binomial(3, s) * t.powi(s as i32) * (1.0 - t).powi(3 - s as i32);
                assert_abs_diff_eq!(m[(j, s)], bern, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn partition_of_unity_on_dense_grid() {
        for n_basis in [4, 7, 12, 20] {
            let b = BasisSystem::new(n_basis, 4).unwrap();
            let pts = grid(1000);
            let m = b.eval(&pts, 0).unwrap();
            for j in 0..pts.len() {
                let sum: f64 = (0..n_basis).map(|s| m[(j, s)]).sum();
                assert!(
                    (sum - 1.0).abs() <= 1e-12,
                    "n_basis={n_basis} t={} sum={sum}",
                    pts[j]
                );
            }
        }
    }

    #[test]
    fn local_support_vanishes_outside_knot_span() {
        let b = BasisSystem::new(12, 4).unwrap();
        let pts = grid(501);
        let m = b.eval(&pts, 0).unwrap();
        let u = b.knots();
        for s in 0..b.n_basis() {
            let (lo, hi) = (u[s], u[s + b.order()]);
            for (j, &t) in pts.iter().enumerate() {
                if t < lo - 1e-12 || t > hi + 1e-12 {
                    assert_eq!(m[(j, s)], 0.0, "basis {s} at t={t}");
                }
            }
        }
    }

    #[test]
    fn rejects_points_outside_domain() {
        let b = BasisSystem::new(8, 4).unwrap();
        assert!(b.eval(&[0.5, 1.0001], 0).is_err());
        assert!(b.eval(&[-0.1], 0).is_err());
    }

    // Finite-difference oracle: derivatives of the basis evaluation match
    // central differences of the plain evaluation at span-interior points.
    #[test]
    fn derivatives_match_finite_differences() {
        let b = BasisSystem::new(14, 4).unwrap();
        // points well inside spans: the difference window must not cross a
        // knot, where the third derivative jumps
        let pts: Vec<f64> = (0..60)
            .map(|i| 0.013 + 0.016 * i as f64)
            .filter(|&t| {
                b.knots()
                    .iter()
                    .all(|&k| (t - k).abs() > 5e-4)
            })
            .collect();
        assert!(pts.len() > 50);
        let h1 = 1e-6;
        let h2 = 1e-4;
        let d0 = |t: f64| b.eval(&[t], 0).unwrap();
        let d1 = b.eval(&pts, 1).unwrap();
        let d2 = b.eval(&pts, 2).unwrap();
        for (j, &t) in pts.iter().enumerate() {
            let plus = d0(t + h1);
            let minus = d0(t - h1);
            for s in 0..b.n_basis() {
                let fd = (plus[(0, s)] - minus[(0, s)]) / (2.0 * h1);
                assert!(
                    (d1[(j, s)] - fd).abs() < 1e-4,
                    "d1 s={s} t={t}: {} vs {fd}",
                    d1[(j, s)]
                );
            }
            let plus = d0(t + h2);
            let center = d0(t);
            let minus = d0(t - h2);
            for s in 0..b.n_basis() {
                let fd = (plus[(0, s)] - 2.0 * center[(0, s)] + minus[(0, s)]) / (h2 * h2);
                assert!(
                    (d2[(j, s)] - fd).abs() < 1e-4,
                    "d2 s={s} t={t}: {} vs {fd}",
                    d2[(j, s)]
                );
            }
        }
    }

    // Composite-Simpson oracle, span by span: the integrand is a smooth
    // polynomial inside each span, and a whole-interval adaptive rule can
    // miss locally supported products entirely.
    #[test]
    fn gram_entries_match_numerical_quadrature() {
        let b = BasisSystem::new(9, 4).unwrap();
        let mut breaks: Vec<f64> = b.knots().to_vec();
        breaks.dedup();
        let m = 2048usize; // subintervals per span (even)
        for deriv in 0..=2 {
            let w = b.gram(deriv).unwrap();
            let mut oracle = DMatrix::<f64>::zeros(b.n_basis(), b.n_basis());
            for span in breaks.windows(2) {
                let (lo, hi) = (span[0], span[1]);
                let h = (hi - lo) / m as f64;
                let pts: Vec<f64> = (0..=m).map(|i| lo + h * i as f64).collect();
                let vals = b.eval(&pts, deriv).unwrap();
                for j in 0..b.n_basis() {
                    for l in j..b.n_basis() {
                        let mut sum = 0.0;
                        for i in 0..=m {
                            let weight = if i == 0 || i == m {
                                1.0
                            } else if i % 2 == 1 {
                                4.0
                            } else {
                                2.0
                            };
                            sum += weight * vals[(i, j)] * vals[(i, l)];
                        }
                        oracle[(j, l)] += sum * h / 3.0;
                    }
                }
            }
            for j in 0..b.n_basis() {
                for l in j..b.n_basis() {
                    assert!(
                        (w[(j, l)] - oracle[(j, l)]).abs() < 1e-10,
                        "deriv={deriv} ({j},{l}): {} vs {}",
                        w[(j, l)],
                        oracle[(j, l)]
                    );
                }
            }
        }
    }

    #[test]
    fn gram_is_symmetric_banded_positive_diagonal() {
        let b = BasisSystem::new(12, 4).unwrap();
        let w = b.gram(0).unwrap();
        let total: f64 = w.iter().sum();
        // (Σφ)² integrates to the domain length
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        for j in 0..12 {
            assert!(w[(j, j)] > 0.0);
            for l in 0..12 {
                assert_abs_diff_eq!(w[(j, l)], w[(l, j)], epsilon = 1e-14);
                if l >= j + 4 {
                    assert_eq!(w[(j, l)], 0.0);
                }
            }
        }
    }

    fn curve_set_from_fn(n: usize, t_len: usize, f: impl Fn(usize, f64) -> f64) -> CurveSet {
        let pts = grid(t_len);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| pts.iter().map(|&t| f(i, t)).collect())
            .collect();
        CurveSet::from_rows(rows, vec![0; n]).unwrap()
    }

    #[test]
    fn constant_curves_fit_with_constant_coefficients() {
        let basis = BasisSystem::new(10, 4).unwrap();
        let set = curve_set_from_fn(3, 40, |_, _| 7.0);
        let sm = smooth(&set, &basis).unwrap();
        for c in sm.coeffs().iter() {
            assert_abs_diff_eq!(*c, 7.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn exactly_representable_curve_recovers_unit_coefficients() {
        let basis = BasisSystem::new(10, 4).unwrap();
        let pts = grid(40);
        let design = basis.eval(&pts, 0).unwrap();
        let rows = vec![(0..40).map(|j| design[(j, 3)]).collect::<Vec<f64>>()];
        let set = CurveSet::from_rows(rows, vec![0]).unwrap();
        let sm = smooth(&set, &basis).unwrap();
        for s in 0..10 {
            let expect = if s == 3 { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(sm.coeffs()[(0, s)], expect, epsilon = 1e-10);
        }
        let resid = sm.evaluate(&pts, 0).unwrap()
            - DMatrix::from_fn(1, 40, |_, j| design[(j, 3)]);
        assert!(resid.amax() < 1e-10);
    }

    #[test]
    fn noisy_fit_reduces_rmse_against_residual_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let pts = grid(80);
        let clean: Vec<f64> = pts
            .iter()
            .map(|&t| (2.0 * std::f64::consts::PI * t).sin())
            .collect();
        let noisy: Vec<f64> = clean
            .iter()
            .map(|&v| v + 0.2 * (rng.gen::<f64>() - 0.5))
            .collect();
        let set = CurveSet::from_rows(vec![noisy.clone()], vec![0]).unwrap();
        let basis = BasisSystem::new(20, 4).unwrap();
        let sm = smooth(&set, &basis).unwrap();
        let fit = sm.evaluate(&pts, 0).unwrap();
        let rmse = |a: &[f64], b: &[f64]| {
            (a.iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                / a.len() as f64)
                .sqrt()
        };
        let fit_row: Vec<f64> = (0..80).map(|j| fit[(0, j)]).collect();
        let fit_rmse = rmse(&fit_row, &clean);
        let noise_rmse = rmse(&noisy, &clean);
        assert!(
            fit_rmse <= noise_rmse,
            "fit rmse {fit_rmse} vs noise rmse {noise_rmse}"
        );
    }

    #[test]
    fn smoothing_is_linear_in_the_data() {
        let basis = BasisSystem::new(9, 4).unwrap();
        let s1 = curve_set_from_fn(2, 30, |i, t| (i as f64 + 1.0) * t * t + t.sin());
        let s2 = curve_set_from_fn(2, 30, |i, t| (3.0 - i as f64) * (5.0 * t).cos());
        let (a, b) = (2.5, -1.25);
        let combo_values = a * s1.values() + b * s2.values();
        let combo = CurveSet::new(
            combo_values,
            s1.domain().to_vec(),
            s1.labels().to_vec(),
            s1.class_names().to_vec(),
        )
        .unwrap();
        let f1 = smooth(&s1, &basis).unwrap();
        let f2 = smooth(&s2, &basis).unwrap();
        let fc = smooth(&combo, &basis).unwrap();
        let expect = a * f1.coeffs() + b * f2.coeffs();
        assert!((fc.coeffs() - expect).amax() < 1e-9);
    }

    #[test]
    fn derivative_of_linear_fit_is_constant() {
        let basis = BasisSystem::new(10, 4).unwrap();
        let set = curve_set_from_fn(1, 30, |_, t| 8.0 * t);
        let sm = smooth(&set, &basis).unwrap();
        let d1 = sm.derive(1).unwrap();
        let vals = d1.evaluate(&grid(100), 0).unwrap();
        for v in vals.iter() {
            assert_abs_diff_eq!(*v, 8.0, epsilon = 1e-8);
        }
        let d2 = sm.derive(2).unwrap();
        let vals = d2.evaluate(&grid(100), 0).unwrap();
        for v in vals.iter() {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn derived_coefficients_agree_with_direct_derivative_evaluation() {
        let basis = BasisSystem::new(13, 4).unwrap();
        let set = curve_set_from_fn(4, 50, |i, t| {
            (i as f64 + 1.0) * (3.0 * t).sin() + t * t * t
        });
        let sm = smooth(&set, &basis).unwrap();
        let pts = grid(333);
        for r in 1..=2 {
            let via_coeffs = sm.derive(r).unwrap().evaluate(&pts, 0).unwrap();
            let via_basis = sm.evaluate(&pts, r).unwrap();
            assert!(
                (via_coeffs - via_basis).amax() < 1e-10,
                "derivative {r} mismatch"
            );
        }
    }

    #[test]
    fn rejects_derivative_beyond_spline_order() {
        let basis = BasisSystem::new(10, 4).unwrap();
        let set = curve_set_from_fn(1, 30, |_, t| t);
        let sm = smooth(&set, &basis).unwrap();
        assert!(sm.derive(3).is_err());
    }

    #[test]
    fn smoothing_requires_enough_sample_points() {
        let basis = BasisSystem::new(20, 4).unwrap();
        let set = curve_set_from_fn(1, 10, |_, t| t);
        assert!(smooth(&set, &basis).is_err());
    }
}
