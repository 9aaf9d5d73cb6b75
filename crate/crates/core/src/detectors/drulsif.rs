use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::windows::WindowStats;

/// Exact minimizer of `0.5 theta^T H_ref theta + theta^T e_opt + 0.5 nu |theta|^2`,
/// i.e. the solution of `(H_ref + nu I) theta = -e_opt`.
///
/// Solved by Cholesky with one step of iterative refinement.
pub fn drulsif_solve(stats: &WindowStats, nu: f64) -> Result<DVector<f64>> {
    if !(nu.is_finite() && nu >= 0.0) {
        return Err(Error::validation(format!("nu must be >= 0; got {nu}")));
    }
    let l = stats.dict_len();
    let mut a: DMatrix<f64> = stats.gram_ref().clone();
    for i in 0..l {
        a[(i, i)] += nu;
    }
    let rhs = -stats.e_opt();
    let chol = a.clone().cholesky().ok_or_else(|| {
        Error::numerical(format!("H_ref + nu I is not positive definite (nu = {nu}, L = {l}); increase nu"))
    })?;
    let scale = (0..l).map(|i| a[(i, i)]).fold(0.0, f64::max);
    let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v * v));
    if min_pivot <= 1e-13 * scale {
        return Err(Error::numerical(format!(
            "H_ref + nu I is numerically singular (pivot {min_pivot:e}, nu = {nu}); increase nu"
        )));
    }
    let mut theta = chol.solve(&rhs);
    let mut resid = &rhs - &a * &theta;
    theta += chol.solve(&resid);
    resid = &rhs - &a * &theta;
    if !theta.iter().all(|v| v.is_finite()) {
        return Err(Error::numerical("non-finite dRuLSIF solution"));
    }
    log::trace!("drulsif residual {:e}", resid.norm());
    Ok(theta)
}

/// `theta_hat^T h_test`.
pub fn drulsif_statistic(stats: &WindowStats, nu: f64) -> Result<f64> {
    Ok(drulsif_solve(stats, nu)?.dot(stats.h_test()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel_dict::{Dictionary, KernelParams};
    use crate::windows::WindowConfig;

    fn dict() -> Dictionary {
        Dictionary::from_atoms(vec![vec![0.0], vec![0.5], vec![-0.5], vec![1.0]], KernelParams::new(0.4).unwrap(), 1.0)
            .unwrap()
    }

    #[test]
    fn constant_stream_gives_zero() {
        let d = dict();
        let mut s = WindowStats::new(WindowConfig::new(4, 4).unwrap(), d.len());
        for _ in 0..8 {
            s.push(&[0.2], &d).unwrap();
        }
        let th = drulsif_solve(&s, 1e-2).unwrap();
        assert!(th.amax() < 1e-14);
    }

    #[test]
    fn ridge_dominated_limit() {
        let d = dict();
        let mut s = WindowStats::new(WindowConfig::new(3, 3).unwrap(), d.len());
        for y in [0.1, -0.4, 0.8, 0.0, 0.3, -0.9] {
            s.push(&[y], &d).unwrap();
        }
        let nu = 1e6;
        let th = drulsif_solve(&s, nu).unwrap();
        let approx = -s.e_opt() / nu;
        let rel = (&th - &approx).norm() / approx.norm();
        let bound = s.gram_ref().norm() / nu;
        assert!(rel <= 2.0 * bound, "rel {rel} bound {bound}");
    }

    #[test]
    fn singular_without_ridge() {
        let d = dict();
        let mut s = WindowStats::new(WindowConfig::new(2, 2).unwrap(), d.len());
        for y in [0.1, 0.1, 0.4, 0.2] {
            s.push(&[y], &d).unwrap();
        }
        // rank(H_ref) <= 1 < L = 4
        assert!(matches!(drulsif_solve(&s, 0.0), Err(Error::Numerical(_))));
    }
}
