//! Closed-form kernel moments for Gaussian data.
//!
//! Every moment is a product of Gaussian kernels, which reduces to the moment
//! generating function of a quadratic form of `y ~ N(mu, R)`:
//!
//! ```text
//! psi(s, W, b) = E exp(s (y^T W y + b^T y))
//!              = |I - 2 s W R|^(-1/2)
//!                * exp(s [mu^T W mu + b^T mu + (s/2) v^T R (I - 2 s W R)^(-1) v]),
//!   v = 2 W mu + b
//! ```
//!
//! With `c = 1/(2 sigma^2)` and atoms `a_i`:
//!
//! | moment | entry | `s` | `W` | `b` |
//! |---|---|---|---|---|
//! | `h_l` | `E k_l` | `-c` | `I` | `-2 a_l` |
//! | `H_lq` | `E k_l k_q` | `-2c` | `I` | `-(a_l + a_q)` |
//! | `Gamma` | `E k_q k_n k_r k_s` | `-2c` | `2I` | `-(a_q + a_n + a_r + a_s)` |
//! | `Delta` | `E k_q k_n k_r` | `-c` | `3I` | `-2(a_q + a_n + a_r)` |
//!
//! each multiplied by `exp(-c sum |a_i|^2)`.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector, Dyn, LU};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::io::fmt_f64;
use crate::kernel_dict::Dictionary;

/// Mean and covariance of a Gaussian data source.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianSpec {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let k = mean.len();
        if k == 0 {
            return Err(Error::validation("Gaussian dimension must be >= 1"));
        }
        if cov.nrows() != k || cov.ncols() != k {
            return Err(Error::validation(format!("covariance must be {k}x{k}; got {}x{}", cov.nrows(), cov.ncols())));
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::validation("non-finite Gaussian parameter"));
        }
        let scale = cov.amax().max(1.0);
        if (&cov - cov.transpose()).amax() > 1e-12 * scale {
            return Err(Error::validation("covariance is not symmetric"));
        }
        let lmin = crate::linalg::min_eigenvalue_sym(&cov);
        if lmin < -1e-12 * scale {
            return Err(Error::validation(format!("covariance is not positive semidefinite (eigenvalue {lmin:e})")));
        }
        Ok(Self { mean, cov })
    }

    /// Bivariate spec with equal standard deviations and correlation `rho`.
    pub fn bivariate(mean: [f64; 2], std: f64, rho: f64) -> Result<Self> {
        let v = std * std;
        Self::new(DVector::from_row_slice(&mean), DMatrix::from_row_slice(2, 2, &[v, rho * v, rho * v, v]))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }
}

/// `psi` with `(s, W, spec)` fixed: one factorization of `I - 2 s W R`
/// serves every linear term `b`.
pub struct PsiFactor<'a> {
    s: f64,
    w: DMatrix<f64>,
    spec: &'a GaussianSpec,
    lu: LU<f64, Dyn, Dyn>,
    ln_det: f64,
    w_mu: DVector<f64>,
    mu_w_mu: f64,
}

impl<'a> PsiFactor<'a> {
    pub fn new(s: f64, w: DMatrix<f64>, spec: &'a GaussianSpec) -> Result<Self> {
        let k = spec.dim();
        if w.nrows() != k || w.ncols() != k {
            return Err(Error::DimensionMismatch { expected: k, got: w.nrows() });
        }
        let m = DMatrix::<f64>::identity(k, k) - (&w * &spec.cov) * (2.0 * s);
        let lu = m.lu();
        let det = lu.determinant();
        if det.is_nan() || det <= 0.0 || det.is_infinite() {
            return Err(Error::numerical(format!("I - 2sWR is singular or has non-positive determinant ({det:e})")));
        }
        let w_mu = &w * &spec.mean;
        let mu_w_mu = spec.mean.dot(&w_mu);
        Ok(Self { s, w, spec, lu, ln_det: det.ln(), w_mu, mu_w_mu })
    }

    pub fn weight(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// `ln psi(s, W, b)`.
    pub fn ln_eval(&self, b: &DVector<f64>) -> f64 {
        let v = &self.w_mu * 2.0 + b;
        let mv = self.lu.solve(&v).expect("factor checked nonsingular");
        let quad = v.dot(&(&self.spec.cov * mv));
        -0.5 * self.ln_det + self.s * (self.mu_w_mu + b.dot(&self.spec.mean) + 0.5 * self.s * quad)
    }

    pub fn eval(&self, b: &DVector<f64>) -> f64 {
        self.ln_eval(b).exp()
    }
}

/// `E exp(s (y^T W y + b^T y))` for `y ~ spec`.
pub fn psi(s: f64, w: &DMatrix<f64>, b: &DVector<f64>, spec: &GaussianSpec) -> Result<f64> {
    check_dim(spec.dim(), b.len())?;
    Ok(PsiFactor::new(s, w.clone(), spec)?.eval(b))
}

fn check_dict(dict: &Dictionary, spec: &GaussianSpec) -> Result<()> {
    check_dim(spec.dim(), dict.dim())
}

struct AtomCache {
    atoms: Vec<DVector<f64>>,
    sq: Vec<f64>,
    c: f64,
}

impl AtomCache {
    fn new(dict: &Dictionary) -> Self {
        let atoms: Vec<DVector<f64>> = dict.atoms().iter().map(|a| DVector::from_row_slice(a)).collect();
        let sq = atoms.iter().map(|a| a.norm_squared()).collect();
        Self { atoms, sq, c: dict.params().gamma() }
    }

    /// `exp(-c sum |a_i|^2) psi(s, W, scale * sum a_i)` over the given atoms.
    fn entry(&self, f: &PsiFactor<'_>, idx: &[usize], scale: f64) -> f64 {
        let mut b = DVector::zeros(self.atoms[0].len());
        let mut sq = 0.0;
        for &i in idx {
            b += &self.atoms[i];
            sq += self.sq[i];
        }
        b *= scale;
        (f.ln_eval(&b) - self.c * sq).exp()
    }
}

fn scaled_identity(k: usize, v: f64) -> DMatrix<f64> {
    DMatrix::identity(k, k) * v
}

/// `E k(y)` under `spec`.
pub fn moment_h(dict: &Dictionary, spec: &GaussianSpec) -> Result<DVector<f64>> {
    check_dict(dict, spec)?;
    let cache = AtomCache::new(dict);
    let f = PsiFactor::new(-cache.c, scaled_identity(spec.dim(), 1.0), spec)?;
    Ok(DVector::from_iterator(dict.len(), (0..dict.len()).map(|l| cache.entry(&f, &[l], -2.0))))
}

/// `E k(y) k(y)^T` under `spec`.
pub fn moment_big_h(dict: &Dictionary, spec: &GaussianSpec) -> Result<DMatrix<f64>> {
    check_dict(dict, spec)?;
    let cache = AtomCache::new(dict);
    let f = PsiFactor::new(-2.0 * cache.c, scaled_identity(spec.dim(), 1.0), spec)?;
    let l = dict.len();
    let mut out = DMatrix::zeros(l, l);
    for q in 0..l {
        for p in q..l {
            let v = cache.entry(&f, &[p, q], -1.0);
            out[(p, q)] = v;
            out[(q, p)] = v;
        }
    }
    Ok(out)
}

/// `E (k k^T) (x) (k k^T)`, an `L^2 x L^2` matrix. Entry
/// `((q-1)L + r, (n-1)L + s)` is `E k_q k_n k_r k_s`.
pub fn moment_gamma(dict: &Dictionary, spec: &GaussianSpec) -> Result<DMatrix<f64>> {
    check_dict(dict, spec)?;
    let cache = AtomCache::new(dict);
    let f = PsiFactor::new(-2.0 * cache.c, scaled_identity(spec.dim(), 2.0), spec)?;
    let l = dict.len();
    let mut memo: HashMap<[usize; 4], f64> = HashMap::new();
    let mut out = DMatrix::zeros(l * l, l * l);
    for q in 0..l {
        for n in 0..l {
            for r in 0..l {
                for s in 0..l {
                    let mut key = [q, n, r, s];
                    key.sort_unstable();
                    let v = *memo.entry(key).or_insert_with(|| cache.entry(&f, &key, -1.0));
                    out[(q * l + r, n * l + s)] = v;
                }
            }
        }
    }
    Ok(out)
}

/// `E (k k^T) (x) k`, an `L^2 x L` matrix. Entry `((q-1)L + r, n)` is
/// `E k_q k_n k_r`.
pub fn moment_delta(dict: &Dictionary, spec: &GaussianSpec) -> Result<DMatrix<f64>> {
    check_dict(dict, spec)?;
    let cache = AtomCache::new(dict);
    let f = PsiFactor::new(-cache.c, scaled_identity(spec.dim(), 3.0), spec)?;
    let l = dict.len();
    let mut memo: HashMap<[usize; 3], f64> = HashMap::new();
    let mut out = DMatrix::zeros(l * l, l);
    for q in 0..l {
        for n in 0..l {
            for r in 0..l {
                let mut key = [q, n, r];
                key.sort_unstable();
                let v = *memo.entry(key).or_insert_with(|| cache.entry(&f, &key, -2.0));
                out[(q * l + r, n)] = v;
            }
        }
    }
    Ok(out)
}

/// First to fourth order kernel moments of one data distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    /// `E k`
    pub h: DVector<f64>,
    /// `E k k^T`
    pub gram: DMatrix<f64>,
    /// `E (k k^T) (x) (k k^T)`
    pub gamma: DMatrix<f64>,
    /// `E (k k^T) (x) k`
    pub delta: DMatrix<f64>,
}

impl MomentSet {
    /// Closed-form moments for Gaussian data.
    pub fn gaussian(dict: &Dictionary, spec: &GaussianSpec) -> Result<Self> {
        Ok(Self {
            h: moment_h(dict, spec)?,
            gram: moment_big_h(dict, spec)?,
            gamma: moment_gamma(dict, spec)?,
            delta: moment_delta(dict, spec)?,
        })
    }

    /// Empirical moments over the given samples.
    pub fn from_samples<'a>(dict: &Dictionary, samples: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let l = dict.len();
        let mut h = DVector::zeros(l);
        let mut gram = DMatrix::zeros(l, l);
        let mut gamma = DMatrix::zeros(l * l, l * l);
        let mut delta = DMatrix::zeros(l * l, l);
        let mut k = DVector::zeros(l);
        let mut n = 0usize;
        for y in samples {
            check_dim(dict.dim(), y.len())?;
            dict.kvec_into(y, k.as_mut_slice());
            let kk = k.kronecker(&k);
            h += &k;
            gram.ger(1.0, &k, &k, 1.0);
            gamma.ger(1.0, &kk, &kk, 1.0);
            delta.ger(1.0, &kk, &k, 1.0);
            n += 1;
        }
        if n == 0 {
            return Err(Error::validation("no samples for moment estimation"));
        }
        let inv = 1.0 / n as f64;
        Ok(Self { h: h * inv, gram: gram * inv, gamma: gamma * inv, delta: delta * inv })
    }

    /// Monte Carlo moments from `n` draws of `sampler`, for non-Gaussian data.
    pub fn monte_carlo<F>(dict: &Dictionary, n: usize, seed: u64, mut sampler: F) -> Result<Self>
    where
        F: FnMut(&mut ChaCha8Rng) -> Vec<f64>,
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws: Vec<Vec<f64>> = (0..n).map(|_| sampler(&mut rng)).collect();
        Self::from_samples(dict, draws.iter().map(Vec::as_slice))
    }

    pub fn dict_len(&self) -> usize {
        self.h.len()
    }

    /// Text dump: one line per matrix, `name,rows,cols,values...` with
    /// values in column-major order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# kernel moments L={}", self.dict_len())?;
        let h = DMatrix::from_column_slice(self.h.len(), 1, self.h.as_slice());
        for (name, m) in [("h", &h), ("H", &self.gram), ("Gamma", &self.gamma), ("Delta", &self.delta)] {
            write!(w, "{name},{},{}", m.nrows(), m.ncols())?;
            for v in m.iter() {
                write!(w, ",{}", fmt_f64(*v))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut found: HashMap<String, DMatrix<f64>> = HashMap::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let bad = |what: &str| Error::data(format!("line {}: {what}", lineno + 1));
            let name = parts.next().ok_or_else(|| bad("missing name"))?.trim().to_string();
            let rows: usize = parts.next().and_then(|s| s.trim().parse().ok()).ok_or_else(|| bad("bad row count"))?;
            let cols: usize =
                parts.next().and_then(|s| s.trim().parse().ok()).ok_or_else(|| bad("bad column count"))?;
            let vals = parts
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(&e.to_string()))?;
            if vals.len() != rows * cols {
                return Err(bad("value count does not match shape"));
            }
            found.insert(name, DMatrix::from_column_slice(rows, cols, &vals));
        }
        let mut take = |n: &str| found.remove(n).ok_or_else(|| Error::data(format!("moment dump lacks {n}")));
        let h = take("h")?;
        let out = Self {
            h: DVector::from_column_slice(h.as_slice()),
            gram: take("H")?,
            gamma: take("Gamma")?,
            delta: take("Delta")?,
        };
        let l = out.h.len();
        if out.gram.shape() != (l, l) || out.gamma.shape() != (l * l, l * l) || out.delta.shape() != (l * l, l) {
            return Err(Error::data("inconsistent moment shapes"));
        }
        Ok(out)
    }
}
