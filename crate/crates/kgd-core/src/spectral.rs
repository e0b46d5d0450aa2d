//! Symmetric eigendecomposition of Gram matrices and the eigenvalue-derived
//! quantities the stopping rules consume: the empirical effective dimension
//! and the local empirical Rademacher complexity.
//!
//! The decomposition is computed once per matrix and cached, so every
//! per-iteration effective-dimension query afterwards is O(n).

use nalgebra::{DMatrix, DVector};

use crate::error::{KgdError, Result};

/// Relative trace tolerance below which negative eigenvalues are treated as
/// floating-point noise and clamped to zero.
pub const PSD_TOLERANCE: f64 = 1e-8;

/// Symmetric n x n Gram matrix with its cached eigendecomposition.
///
/// Eigenvalues are sorted in decreasing order and clamped to be nonnegative;
/// a matrix whose spectrum dips below `-PSD_TOLERANCE * trace` is rejected as
/// non-Mercer.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    entries: DMatrix<f64>,
    eigvals: DVector<f64>,
    eigvecs: DMatrix<f64>,
}

impl KernelMatrix {
    pub fn from_entries(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() || entries.is_empty() {
            return Err(KgdError::Input("Gram matrix must be square and nonempty".into()));
        }
        let (mut eigvals, eigvecs) = eig_sym(&entries)?;
        let tol = PSD_TOLERANCE * entries.trace();
        for v in eigvals.iter_mut() {
            if *v < 0.0 {
                if *v < -tol {
                    return Err(KgdError::Numeric(format!(
                        "matrix is not positive semidefinite: eigenvalue {} below -{} (n = {}, trace = {})",
                        *v,
                        tol,
                        entries.nrows(),
                        entries.trace()
                    )));
                }
                *v = 0.0;
            }
        }
        Ok(Self { entries, eigvals, eigvecs })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Eigenvalues in decreasing order, clamped to be nonnegative.
    pub fn eigvals(&self) -> &DVector<f64> {
        &self.eigvals
    }

    /// Orthonormal eigenvector columns, matching `eigvals` order.
    pub fn eigvecs(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    /// Eigenvalues of K/n, the sample version of the integral operator.
    pub fn normalized_eigvals(&self) -> Vec<f64> {
        let n = self.n() as f64;
        self.eigvals.iter().map(|&s| s / n).collect()
    }

    /// Empirical effective dimension at regularization `lambda`.
    pub fn effective_dim(&self, lambda: f64) -> f64 {
        empirical_effective_dim(self.eigvals.as_slice(), lambda, self.n())
    }
}

/// Full eigendecomposition of a symmetric matrix, eigenvalues sorted in
/// decreasing order with eigenvector columns permuted to match.
pub fn eig_sym(entries: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if entries.iter().any(|v| !v.is_finite()) {
        return Err(KgdError::Numeric("matrix has non-finite entries".into()));
    }
    let n = entries.nrows();
    let max_niter = 100_000 + 200 * n;
    let eig = nalgebra::linalg::SymmetricEigen::try_new(entries.clone(), f64::EPSILON, max_niter)
        .ok_or_else(|| {
            KgdError::Numeric(format!(
                "symmetric eigendecomposition failed to converge (n = {}, trace = {}, max|entry| = {})",
                n,
                entries.trace(),
                entries.amax()
            ))
        })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let eigvals = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigvecs = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigvecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((eigvals, eigvecs))
}

/// N_D(lambda) = sum_i sigma_i / (sigma_i + lambda n), the trace of
/// (lambda n I + K)^{-1} K evaluated from the cached eigenvalues.
pub fn empirical_effective_dim(eigvals: &[f64], lambda: f64, n: usize) -> f64 {
    assert!(lambda > 0.0, "lambda must be positive");
    let reg = lambda * n as f64;
    eigvals
        .iter()
        .filter(|&&s| s > 0.0)
        .map(|&s| s / (s + reg))
        .sum()
}

/// Local empirical Rademacher complexity sqrt((1/n) sum_i min(sigma_i, eps^2)).
///
/// Expects eigenvalues of the normalized matrix K/n.
pub fn local_rademacher(eigvals: &[f64], epsilon: f64, n: usize) -> f64 {
    assert!(epsilon > 0.0, "epsilon must be positive");
    let cap = epsilon * epsilon;
    let sum: f64 = eigvals.iter().map(|&s| s.min(cap).max(0.0)).sum();
    (sum / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_matrix_decomposition() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let (vals, vecs) = eig_sym(&m).unwrap();
        assert!((vals[0] - 2.0).abs() < 1e-14);
        assert!((vals[1] - 1.0).abs() < 1e-14);
        // identity columns up to sign
        assert!((vecs[(0, 0)].abs() - 1.0).abs() < 1e-14);
        assert!((vecs[(1, 1)].abs() - 1.0).abs() < 1e-14);
        assert!(vecs[(1, 0)].abs() < 1e-14);
    }

    #[test]
    fn rank_one_matrix_decomposition() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (vals, _) = eig_sym(&m).unwrap();
        assert!((vals[0] - 2.0).abs() < 1e-12);
        assert!(vals[1].abs() < 1e-12);
    }

    #[test]
    fn non_finite_entries_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, f64::NAN, 1.0]);
        assert!(matches!(eig_sym(&m), Err(KgdError::Numeric(_))));
    }

    #[test]
    fn negative_definite_matrix_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            KernelMatrix::from_entries(m),
            Err(KgdError::Numeric(_))
        ));
    }

    #[test]
    fn effective_dim_trivial_values() {
        assert_eq!(empirical_effective_dim(&[0.0, 0.0], 0.3, 2), 0.0);
        // single eigenvalue sigma = lambda * n gives 1/2
        let v = empirical_effective_dim(&[3.0], 1.5, 2);
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn effective_dim_identity_closed_form() {
        // M = c I: N_D(lambda) = n c / (c + lambda n)
        let n = 7;
        let c = 0.9;
        let eigvals = vec![c; n];
        for &lambda in &[1e-3, 0.1, 2.0] {
            let expected = n as f64 * c / (c + lambda * n as f64);
            let got = empirical_effective_dim(&eigvals, lambda, n);
            assert!((got - expected).abs() <= 1e-12 * expected);
        }
    }

    #[test]
    fn local_rademacher_trivial_values() {
        // all eigenvalues above eps^2: value is eps
        let v = local_rademacher(&[1.0, 2.0, 3.0], 0.4, 3);
        assert!((v - 0.4).abs() < 1e-15);
        assert_eq!(local_rademacher(&[0.0, 0.0], 1.0, 2), 0.0);
        // mixed case: sqrt((0.2 + 0.1)/2)
        let v = local_rademacher(&[0.5, 0.1], 0.2_f64.sqrt(), 2);
        assert!((v - 0.15_f64.sqrt()).abs() < 1e-15);
    }
}
