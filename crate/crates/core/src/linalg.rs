//! Small dense helpers: column-major vectorization, Kronecker products and a
//! symmetric Lyapunov solver.

use nalgebra::{DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Stacks the columns of `m` on top of each other.
pub fn vec(m: &DMatrix<f64>) -> DVector<f64> {
    // nalgebra storage is column-major
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`] for an `n x n` matrix.
pub fn unvec(v: &DVector<f64>, n: usize) -> DMatrix<f64> {
    assert_eq!(v.len(), n * n, "unvec: length {} is not {n}^2", v.len());
    DMatrix::from_column_slice(n, n, v.as_slice())
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Kronecker sum `A (+) A = A (x) I + I (x) A`.
pub fn kron_sum(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    a.kronecker(&eye) + eye.kronecker(a)
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Copy of `m` scaled to unit max-norm, with entries below `eps^2` flushed
/// to zero, and the scale. nalgebra's symmetric QR can return NaN when
/// entries span hundreds of orders of magnitude; dropping entries that small
/// moves eigenvalues far less than roundoff does.
fn conditioned(m: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let scale = m.amax();
    if scale == 0.0 || !scale.is_finite() {
        return (m.clone(), 1.0);
    }
    let floor = f64::EPSILON * f64::EPSILON;
    (m.map(|x| if (x / scale).abs() < floor { 0.0 } else { x / scale }), scale)
}

/// Eigenvalues of a symmetric matrix.
pub fn eigenvalues_sym(m: &DMatrix<f64>) -> DVector<f64> {
    let (c, scale) = conditioned(m);
    c.symmetric_eigenvalues() * scale
}

/// Eigendecomposition of a symmetric matrix.
pub fn eigen_sym(m: &DMatrix<f64>) -> SymmetricEigen<f64, Dyn> {
    let (c, scale) = conditioned(m);
    let mut eig = c.symmetric_eigen();
    eig.eigenvalues *= scale;
    eig
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigenvalue_sym(m: &DMatrix<f64>) -> f64 {
    eigenvalues_sym(m).max()
}

pub fn min_eigenvalue_sym(m: &DMatrix<f64>) -> f64 {
    eigenvalues_sym(m).min()
}

/// Solves `A X + X A = Q` for symmetric positive definite `A` through the
/// eigendecomposition `A = V diag(l) V^T`:
/// `X = V [ (V^T Q V)_ij / (l_i + l_j) ] V^T`.
pub fn lyapunov_sym(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = eigen_sym(a);
    let lmin = eig.eigenvalues.min();
    if lmin <= 0.0 {
        return Err(Error::numerical(format!(
            "Lyapunov operator is not positive definite (smallest eigenvalue {lmin:e})"
        )));
    }
    let v = &eig.eigenvectors;
    let mut qt = v.transpose() * q * v;
    let l = &eig.eigenvalues;
    for j in 0..qt.ncols() {
        for i in 0..qt.nrows() {
            qt[(i, j)] /= l[i] + l[j];
        }
    }
    Ok(v * qt * v.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vec_stacks_columns() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(vec(&m).as_slice(), &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(unvec(&vec(&m), 2), m);
    }

    #[test]
    fn vec_of_product_identity() {
        // vec(ABC) = (C^T (x) A) vec(B)
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -1.0, 0.5]);
        let b = DMatrix::from_row_slice(2, 2, &[0.3, -0.2, 0.7, 1.1]);
        let c = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, -3.0]);
        let lhs = vec(&(&a * &b * &c));
        let rhs = kron(&c.transpose(), &a) * vec(&b);
        assert!((lhs - rhs).amax() < 1e-14);
    }

    #[test]
    fn eigenvalues_survive_extreme_range_and_scale() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 1e-300, 0.0, 1e-300, 0.5, 1e-200, 0.0, 1e-200, 0.25]);
        let mut e = eigenvalues_sym(&m).as_slice().to_vec();
        e.sort_by(f64::total_cmp);
        assert_eq!(e, [0.25, 0.5, 1.0]);
        let big = &m * 1e300;
        assert!((eigenvalues_sym(&big).max() - 1e300).abs() <= 1e285);
        assert_eq!(eigenvalues_sym(&DMatrix::zeros(2, 2)).as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn lyapunov_matches_kronecker_solve() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 1.0]);
        let q = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 0.5, 0.1, 0.0, 0.1, 0.3]);
        let x = lyapunov_sym(&a, &q).unwrap();
        assert!((&a * &x + &x * &a - &q).amax() < 1e-13);
        let xk = kron_sum(&a).lu().solve(&vec(&q)).unwrap();
        assert!((vec(&x) - xk).amax() < 1e-13);
    }

    #[test]
    fn lyapunov_rejects_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(lyapunov_sym(&a, &DMatrix::identity(2, 2)).is_err());
    }
}
