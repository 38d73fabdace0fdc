//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, SymmetricEigen, SVD};

use crate::{Error, Matrix, Result, StateVector};

/// `(G + Gᵀ) / 2`.
pub fn symmetrize(g: &Matrix) -> Matrix {
    (g + g.transpose()) * 0.5
}

/// Largest `|g_ij - g_ji|`.
pub fn asymmetry(g: &Matrix) -> f64 {
    (g - g.transpose()).amax()
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(g: &Matrix) -> Vec<f64> {
    if g.is_empty() {
        return Vec::new();
    }
    let mut eigs: Vec<f64> = SymmetricEigen::new(symmetrize(g)).eigenvalues.iter().copied().collect();
    eigs.sort_by(f64::total_cmp);
    eigs
}

/// Solves `(εI + W) y = rhs` for symmetric positive semidefinite `W` and
/// `ε > 0`, by Cholesky factorization. Falls back to the eigen-decomposition
/// when roundoff leaves `εI + W` numerically indefinite.
pub fn regularized_solve(w: &Matrix, epsilon: f64, rhs: &StateVector) -> Result<StateVector> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive and finite, got {epsilon}")));
    }
    let n = w.nrows();
    if w.ncols() != n || rhs.len() != n {
        return Err(Error::DimensionMismatch { what: "regularized system", expected: n, got: rhs.len() });
    }
    let shifted = symmetrize(w) + Matrix::identity(n, n) * epsilon;
    if let Some(chol) = Cholesky::new(shifted.clone()) {
        return Ok(chol.solve(rhs));
    }
    let eig = SymmetricEigen::new(shifted);
    let coeffs = eig.eigenvectors.tr_mul(rhs);
    let scaled = StateVector::from_iterator(
        n,
        coeffs.iter().zip(eig.eigenvalues.iter()).map(|(c, l)| c / l.max(epsilon)),
    );
    Ok(eig.eigenvectors * scaled)
}

/// Number of singular values above `rel_tol · σ_max`.
pub fn numerical_rank(m: &Matrix, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = SVD::new(m.clone(), false, false).singular_values;
    let max = sv.max();
    if max <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};

    use super::*;

    #[test]
    fn eigenvalues_sorted() {
        let eigs = symmetric_eigenvalues(&dmatrix![2.0, 1.0; 1.0, 2.0]);
        assert_relative_eq!(eigs[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(eigs[1], 3.0, epsilon = 1e-14);
    }

    #[test]
    fn regularized_solve_singular_w() {
        let y = regularized_solve(&dmatrix![1.0, 0.0; 0.0, 0.0], 0.5, &dvector![1.0, 1.0]).unwrap();
        assert_relative_eq!(y, dvector![1.0 / 1.5, 2.0], epsilon = 1e-14);
        assert!(regularized_solve(&dmatrix![1.0], 0.0, &dvector![1.0]).is_err());
    }

    #[test]
    fn rank_of_simple_matrices() {
        assert_eq!(numerical_rank(&dmatrix![0.0, 1.0; 1.0, 0.0], 1e-9), 2);
        assert_eq!(numerical_rank(&dmatrix![1.0, 0.0; 0.0, 0.0], 1e-9), 1);
        assert_eq!(numerical_rank(&Matrix::zeros(3, 3), 1e-9), 0);
    }
}
