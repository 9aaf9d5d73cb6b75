//! Sliding reference/test windows with recursively maintained kernel
//! statistics.
//!
//! With `W = n_ref + n_test` buffered samples ordered oldest first, the
//! reference window is the first `n_ref` of them and the test window the last
//! `n_test`. Each push costs `O(L^2)`:
//!
//! ```text
//! h_test = (1/n_test) sum_{test} k(y_i)
//! h_ref  = (1/n_ref)  sum_{ref}  k(y_i)
//! H_ref  = (1/n_ref)  sum_{ref}  k(y_i) k(y_i)^T
//! e_opt  = h_ref - h_test
//! ```

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::kernel_dict::Dictionary;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowConfig {
    pub n_ref: usize,
    pub n_test: usize,
}

impl WindowConfig {
    pub fn new(n_ref: usize, n_test: usize) -> Result<Self> {
        if n_ref == 0 || n_test == 0 {
            return Err(Error::validation(format!("window lengths must be >= 1; got n_ref={n_ref}, n_test={n_test}")));
        }
        Ok(Self { n_ref, n_test })
    }

    pub fn total(&self) -> usize {
        self.n_ref + self.n_test
    }
}

/// `m += alpha x x^T`, exactly symmetric (`ger` rounds `alpha x_i` first).
fn sym_rank1(m: &mut DMatrix<f64>, alpha: f64, x: &DVector<f64>) {
    let n = x.len();
    let x = x.as_slice();
    for (j, col) in m.as_mut_slice().chunks_exact_mut(n).enumerate() {
        let xj = x[j];
        for (c, xi) in col.iter_mut().zip(x) {
            *c += alpha * (xi * xj);
        }
    }
}

/// `m += alpha (x x^T - z z^T)` in one pass, exactly symmetric.
fn sym_rank2(m: &mut DMatrix<f64>, alpha: f64, x: &DVector<f64>, z: &DVector<f64>) {
    let n = x.len();
    let (x, z) = (x.as_slice(), z.as_slice());
    for (j, col) in m.as_mut_slice().chunks_exact_mut(n).enumerate() {
        let (xj, zj) = (x[j], z[j]);
        for ((c, xi), zi) in col.iter_mut().zip(x).zip(z) {
            *c += alpha * (xi * xj - zi * zj);
        }
    }
}

#[derive(Debug, Clone)]
pub struct WindowStats {
    cfg: WindowConfig,
    raw: VecDeque<Vec<f64>>,
    feats: VecDeque<DVector<f64>>,
    h_test: DVector<f64>,
    h_ref: DVector<f64>,
    gram_ref: DMatrix<f64>,
    e_opt: DVector<f64>,
    pushes: u64,
    since_repair: usize,
    repair_every: usize,
}

impl WindowStats {
    pub fn new(cfg: WindowConfig, dict_len: usize) -> Self {
        let w = cfg.total();
        Self {
            cfg,
            raw: VecDeque::with_capacity(w),
            feats: VecDeque::with_capacity(w),
            h_test: DVector::zeros(dict_len),
            h_ref: DVector::zeros(dict_len),
            gram_ref: DMatrix::zeros(dict_len, dict_len),
            e_opt: DVector::zeros(dict_len),
            pushes: 0,
            since_repair: 0,
            repair_every: 10 * w,
        }
    }

    /// Overrides the drift-repair period (pushes between full recomputations).
    /// `0` disables repair.
    pub fn with_repair_every(mut self, every: usize) -> Self {
        self.repair_every = every;
        self
    }

    pub fn config(&self) -> WindowConfig {
        self.cfg
    }

    /// Current dictionary size `L`.
    pub fn dict_len(&self) -> usize {
        self.h_test.len()
    }

    /// Number of buffered samples.
    pub fn fill(&self) -> usize {
        self.raw.len()
    }

    pub fn pushes(&self) -> u64 {
        self.pushes
    }

    /// True once both windows are complete.
    pub fn is_warm(&self) -> bool {
        self.raw.len() == self.cfg.total()
    }

    pub fn h_test(&self) -> &DVector<f64> {
        &self.h_test
    }

    pub fn h_ref(&self) -> &DVector<f64> {
        &self.h_ref
    }

    pub fn gram_ref(&self) -> &DMatrix<f64> {
        &self.gram_ref
    }

    pub fn e_opt(&self) -> &DVector<f64> {
        &self.e_opt
    }

    /// Buffered raw samples, oldest first.
    pub fn raw(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.raw.iter().map(Vec::as_slice)
    }

    /// Buffered feature images, oldest first.
    pub fn features(&self) -> impl ExactSizeIterator<Item = &DVector<f64>> {
        self.feats.iter()
    }

    /// Number of leading buffered samples that belong to the reference window.
    pub fn ref_count(&self) -> usize {
        self.raw.len().saturating_sub(self.cfg.n_test)
    }

    /// Shifts both windows by one sample.
    pub fn push(&mut self, y: &[f64], dict: &Dictionary) -> Result<()> {
        check_dim(dict.dim(), y.len())?;
        check_dim(self.dict_len(), dict.len())?;
        let mut k = DVector::zeros(dict.len());
        dict.kvec_into(y, k.as_mut_slice());
        self.push_feature(y.to_vec(), k);
        Ok(())
    }

    fn push_feature(&mut self, y: Vec<f64>, k: DVector<f64>) {
        let inv_ref = 1.0 / self.cfg.n_ref as f64;
        let inv_test = 1.0 / self.cfg.n_test as f64;

        let old = if self.raw.len() == self.cfg.total() {
            self.raw.pop_front();
            let old = self.feats.pop_front().expect("feature buffer in sync");
            self.h_ref.axpy(-inv_ref, &old, 1.0);
            Some(old)
        } else {
            None
        };
        if self.feats.len() >= self.cfg.n_test {
            let mig = &self.feats[self.feats.len() - self.cfg.n_test];
            self.h_test.axpy(-inv_test, mig, 1.0);
            self.h_ref.axpy(inv_ref, mig, 1.0);
            match &old {
                Some(old) => sym_rank2(&mut self.gram_ref, inv_ref, mig, old),
                None => sym_rank1(&mut self.gram_ref, inv_ref, mig),
            }
        } else if let Some(old) = &old {
            sym_rank1(&mut self.gram_ref, -inv_ref, old);
        }
        self.h_test.axpy(inv_test, &k, 1.0);
        self.raw.push_back(y);
        self.feats.push_back(k);

        self.pushes += 1;
        self.since_repair += 1;
        if self.repair_every > 0 && self.since_repair >= self.repair_every {
            self.recompute();
        } else {
            self.e_opt.copy_from(&self.h_ref);
            self.e_opt -= &self.h_test;
        }
    }

    /// Extends every statistic with the newest dictionary atom. Must follow a
    /// single insertion into `dict`.
    pub fn extend_dimension(&mut self, dict: &Dictionary) -> Result<()> {
        let l = self.dict_len();
        if dict.len() != l + 1 {
            return Err(Error::validation(format!(
                "extend_dimension expects a dictionary of size {} (one new atom); got {}",
                l + 1,
                dict.len()
            )));
        }
        let atom = dict.atom(l);
        let gamma = dict.params().gamma();
        for (y, k) in self.raw.iter().zip(self.feats.iter_mut()) {
            let v = crate::kernel_dict::kappa_unchecked(y, atom, gamma);
            *k = k.clone().push(v);
        }
        self.h_test = self.h_test.clone().push(0.0);
        self.h_ref = self.h_ref.clone().push(0.0);
        self.e_opt = self.e_opt.clone().push(0.0);
        self.gram_ref = self.gram_ref.clone().resize(l + 1, l + 1, 0.0);

        let n_ref_buf = self.ref_count();
        let inv_ref = 1.0 / self.cfg.n_ref as f64;
        let inv_test = 1.0 / self.cfg.n_test as f64;
        let mut ht = 0.0;
        let mut hr = 0.0;
        let mut col = DVector::<f64>::zeros(l + 1);
        for (i, k) in self.feats.iter().enumerate() {
            if i < n_ref_buf {
                hr += k[l];
                col.axpy(k[l], k, 1.0);
            } else {
                ht += k[l];
            }
        }
        self.h_test[l] = ht * inv_test;
        self.h_ref[l] = hr * inv_ref;
        col *= inv_ref;
        self.gram_ref.set_column(l, &col);
        self.gram_ref.set_row(l, &col.transpose());
        self.e_opt[l] = self.h_ref[l] - self.h_test[l];
        Ok(())
    }

    /// Recomputes every statistic from the buffered feature images.
    pub fn recompute(&mut self) {
        let l = self.dict_len();
        let n_ref_buf = self.ref_count();
        let inv_ref = 1.0 / self.cfg.n_ref as f64;
        let inv_test = 1.0 / self.cfg.n_test as f64;
        self.h_test = DVector::zeros(l);
        self.h_ref = DVector::zeros(l);
        self.gram_ref = DMatrix::zeros(l, l);
        for (i, k) in self.feats.iter().enumerate() {
            if i < n_ref_buf {
                self.h_ref.axpy(inv_ref, k, 1.0);
                sym_rank1(&mut self.gram_ref, inv_ref, k);
            } else {
                self.h_test.axpy(inv_test, k, 1.0);
            }
        }
        self.e_opt = &self.h_ref - &self.h_test;
        self.since_repair = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel_dict::KernelParams;

    fn dict2() -> Dictionary {
        Dictionary::from_atoms(
            vec![vec![0.0, 0.0], vec![0.5, -0.2], vec![-0.3, 0.4]],
            KernelParams::new(0.4).unwrap(),
            0.9,
        )
        .unwrap()
    }

    #[test]
    fn constant_stream() {
        let d = dict2();
        let mut s = WindowStats::new(WindowConfig::new(3, 2).unwrap(), d.len());
        let c = [0.2, 0.1];
        for i in 0..5 {
            assert!(!s.is_warm(), "warm too early at {i}");
            s.push(&c, &d).unwrap();
        }
        assert!(s.is_warm());
        let k = d.kvec(&c).unwrap();
        assert!((s.h_test() - &k).amax() < 1e-15);
        assert!((s.h_ref() - &k).amax() < 1e-15);
        assert!(s.e_opt().amax() < 1e-15);
        assert!((s.gram_ref() - &k * k.transpose()).amax() < 1e-15);
    }

    #[test]
    fn window_of_one() {
        let d = dict2();
        let mut s = WindowStats::new(WindowConfig::new(1, 1).unwrap(), d.len());
        let ys = [[0.1, 0.0], [0.3, -0.4], [-0.2, 0.2]];
        for (t, y) in ys.iter().enumerate() {
            s.push(y, &d).unwrap();
            if t >= 1 {
                assert!((s.h_test() - d.kvec(y).unwrap()).amax() < 1e-15);
                assert!((s.h_ref() - d.kvec(&ys[t - 1]).unwrap()).amax() < 1e-15);
            }
        }
    }

    #[test]
    fn push_rejects_wrong_dimension() {
        let d = dict2();
        let mut s = WindowStats::new(WindowConfig::new(2, 2).unwrap(), d.len());
        assert!(s.push(&[1.0], &d).is_err());
    }

    #[test]
    fn extend_without_insertion_fails() {
        let d = dict2();
        let mut s = WindowStats::new(WindowConfig::new(2, 2).unwrap(), d.len());
        assert!(s.extend_dimension(&d).is_err());
    }

    #[test]
    fn extend_cold_start_grows_zeroed() {
        let mut d = dict2();
        let mut s = WindowStats::new(WindowConfig::new(2, 2).unwrap(), d.len());
        assert!(d.try_insert(&[5.0, 5.0]).unwrap());
        s.extend_dimension(&d).unwrap();
        assert_eq!(s.dict_len(), 4);
        assert_eq!(s.gram_ref().shape(), (4, 4));
        assert_eq!(s.h_test().amax(), 0.0);
        assert_eq!(s.gram_ref().amax(), 0.0);
    }

    #[test]
    fn duplicate_atom_duplicates_gram_row() {
        let d = dict2();
        let mut s = WindowStats::new(WindowConfig::new(3, 2).unwrap(), d.len());
        for y in [[0.1, 0.2], [0.0, -0.3], [0.4, 0.4], [-0.1, 0.0], [0.2, 0.2], [0.3, 0.1]] {
            s.push(&y, &d).unwrap();
        }
        let mut atoms = d.atoms().to_vec();
        atoms.push(atoms[1].clone());
        let d2 = Dictionary::from_atoms(atoms, d.params(), d.eta0()).unwrap();
        s.extend_dimension(&d2).unwrap();
        let g = s.gram_ref();
        for j in 0..4 {
            assert!((g[(3, j)] - g[(1, j)]).abs() < 1e-15);
        }
        assert!((g[(3, 3)] - g[(1, 1)]).abs() < 1e-15);
        assert!((s.h_ref()[3] - s.h_ref()[1]).abs() < 1e-15);
    }
}
