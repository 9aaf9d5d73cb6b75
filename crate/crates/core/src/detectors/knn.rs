//! Nearest-neighbor graph two-sample statistic over the pooled windows.

use crate::error::{Error, Result};
use crate::kernel_dict::sq_dist;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnnConfig {
    pub k_neighbors: usize,
}

impl KnnConfig {
    pub fn new(k_neighbors: usize) -> Result<Self> {
        if k_neighbors == 0 {
            return Err(Error::validation("k_neighbors must be >= 1"));
        }
        Ok(Self { k_neighbors })
    }
}

/// Out-neighbors of every point in the directed k-NN graph (Euclidean).
/// Ties are broken by the smaller index; a point is never its own neighbor.
pub(crate) fn knn_graph(points: &[&[f64]], k: usize) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n);
    (0..n)
        .map(|i| {
            cand.clear();
            cand.extend((0..n).filter(|&j| j != i).map(|j| (sq_dist(points[i], points[j]), j)));
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < cand.len() {
                cand.select_nth_unstable_by(k - 1, cmp);
                cand.truncate(k);
            }
            cand.sort_unstable_by(cmp);
            cand.iter().map(|&(_, j)| j).collect()
        })
        .collect()
}

/// Number of directed k-NN edges joining a reference point (the first
/// `n_ref` points) and a test point, in either direction.
pub fn knn_cross_edges(pooled: &[&[f64]], n_ref: usize, cfg: KnnConfig) -> Result<usize> {
    check_pool(pooled.len(), n_ref, cfg)?;
    let graph = knn_graph(pooled, cfg.k_neighbors);
    Ok(graph.iter().enumerate().map(|(i, nb)| nb.iter().filter(|&&j| (i < n_ref) != (j < n_ref)).count()).sum())
}

/// Expected cross-edge count when the window labels are exchangeable:
/// `k * 2 n_ref n_test / (n_ref + n_test - 1)`.
pub fn knn_expected_cross_edges(n_ref: usize, n_test: usize, k: usize) -> f64 {
    let n = (n_ref + n_test) as f64;
    k as f64 * 2.0 * n_ref as f64 * n_test as f64 / (n - 1.0)
}

/// Cross-edge count minus its expectation under equal distributions. Large
/// negative values indicate separated windows.
pub fn knn_statistic(pooled: &[&[f64]], n_ref: usize, cfg: KnnConfig) -> Result<f64> {
    let ne = knn_cross_edges(pooled, n_ref, cfg)?;
    let n_test = pooled.len() - n_ref;
    Ok(ne as f64 - knn_expected_cross_edges(n_ref, n_test, cfg.k_neighbors))
}

fn check_pool(n: usize, n_ref: usize, cfg: KnnConfig) -> Result<()> {
    if n < cfg.k_neighbors + 1 {
        return Err(Error::validation(format!(
            "k-NN needs at least k+1 = {} pooled samples; got {n}",
            cfg.k_neighbors + 1
        )));
    }
    if n_ref == 0 || n_ref >= n {
        return Err(Error::validation(format!("bad reference size {n_ref} for {n} pooled samples")));
    }
    Ok(())
}
