//! Synthetic streams, bandwidth selection and the Monte Carlo harness.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian_moments::GaussianSpec;
use crate::io::fmt_f64;
use crate::kernel_dict::{Dictionary, KernelParams};
use crate::linalg::eigen_sym;

/// Stream generator RNG.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of run `run` under `base`. Injective in `run` for a fixed `base`.
pub fn derive_seed(base: u64, run: u64) -> u64 {
    splitmix64(splitmix64(base) ^ run)
}

/// Draws from `N(mean, cov)` as `mean + F z` with `F F^T = cov`.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    mean: DVector<f64>,
    factor: DMatrix<f64>,
}

impl GaussianSampler {
    pub fn new(spec: &GaussianSpec) -> Self {
        let cov = spec.cov().clone();
        let factor = match cov.clone().cholesky() {
            Some(ch) => ch.l(),
            None => {
                // semidefinite: V diag(sqrt(max(l, 0)))
                let eig = eigen_sym(&cov);
                let mut v = eig.eigenvectors;
                for (j, l) in eig.eigenvalues.iter().enumerate() {
                    v.column_mut(j).scale_mut(l.max(0.0).sqrt());
                }
                v
            }
        };
        Self { mean: spec.mean().clone(), factor }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z = DVector::from_iterator(self.dim(), (0..self.dim()).map(|_| rng.sample::<f64, _>(StandardNormal)));
        (&self.mean + &self.factor * z).as_slice().to_vec()
    }
}

/// `n` i.i.d. draws from `spec`.
pub fn gen_gaussian_stream(spec: &GaussianSpec, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::validation("stream length must be >= 1"));
    }
    let sampler = GaussianSampler::new(spec);
    let mut rng = rng_from_seed(seed);
    Ok((0..n).map(|_| sampler.sample(&mut rng)).collect())
}

/// Samples `0..change_at` from `before` and the rest from `after`.
pub fn gen_gaussian_change(
    before: &GaussianSpec,
    after: &GaussianSpec,
    change_at: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::validation("stream length must be >= 1"));
    }
    if before.dim() != after.dim() {
        return Err(Error::DimensionMismatch { expected: before.dim(), got: after.dim() });
    }
    let (s0, s1) = (GaussianSampler::new(before), GaussianSampler::new(after));
    let mut rng = rng_from_seed(seed);
    Ok((0..n).map(|i| if i < change_at { s0.sample(&mut rng) } else { s1.sample(&mut rng) }).collect())
}

/// Dictionary made of `len` draws of `sampler`, without coherence screening.
pub fn sample_dictionary<R: Rng + ?Sized>(
    len: usize,
    params: KernelParams,
    rng: &mut R,
    mut sampler: impl FnMut(&mut R) -> Vec<f64>,
) -> Result<Dictionary> {
    if len == 0 {
        return Err(Error::validation("dictionary size must be >= 1"));
    }
    let atoms = (0..len).map(|_| sampler(rng)).collect();
    Dictionary::from_atoms(atoms, params, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmChangeSpec {
    /// Sample dimension.
    pub k: usize,
    pub n_components: usize,
    /// Dirichlet concentration of the mixture weights.
    pub alpha: f64,
    /// Index of the first post-change sample.
    pub t0: usize,
    /// Stream length.
    pub n_t: usize,
    pub seed: u64,
}

impl GmmChangeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n_components == 0 {
            return Err(Error::validation("GMM dimension and component count must be >= 1"));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::validation(format!("Dirichlet alpha must be > 0; got {}", self.alpha)));
        }
        if self.t0 > self.n_t {
            return Err(Error::validation(format!("t0 = {} exceeds stream length {}", self.t0, self.n_t)));
        }
        Ok(())
    }
}

/// One Gaussian mixture: component `q` (1-based) is `N(m_q, C_q / q)` with
/// `m_q ~ N(0, I)`, `C_q ~ Wishart(I, k + 2)` and weights ~ `Dirichlet(alpha)`.
#[derive(Debug, Clone)]
pub struct GmmParams {
    pub weights: Vec<f64>,
    pub means: Vec<DVector<f64>>,
    /// Lower-triangular factors of the component covariances.
    pub factors: Vec<DMatrix<f64>>,
}

impl GmmParams {
    pub fn draw<R: Rng + ?Sized>(k: usize, n_components: usize, alpha: f64, rng: &mut R) -> Result<Self> {
        let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::validation(e.to_string()))?;
        let mut weights: Vec<f64> = (0..n_components).map(|_| gamma.sample(rng)).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let mut means = Vec::with_capacity(n_components);
        let mut factors = Vec::with_capacity(n_components);
        for q in 1..=n_components {
            means.push(DVector::from_iterator(k, (0..k).map(|_| rng.sample::<f64, _>(StandardNormal))));
            factors.push(wishart_factor(k, (k + 2) as f64, rng)? / (q as f64).sqrt());
        }
        Ok(Self { weights, means, factors })
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    /// Covariance of component `q` (0-based).
    pub fn covariance(&self, q: usize) -> DMatrix<f64> {
        &self.factors[q] * self.factors[q].transpose()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut q = self.weights.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                q = i;
                break;
            }
        }
        let k = self.dim();
        let z = DVector::from_iterator(k, (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)));
        (&self.means[q] + &self.factors[q] * z).as_slice().to_vec()
    }
}

/// Bartlett factor `A` with `A A^T ~ Wishart(I, df)`.
fn wishart_factor<R: Rng + ?Sized>(k: usize, df: f64, rng: &mut R) -> Result<DMatrix<f64>> {
    let mut a = DMatrix::zeros(k, k);
    for i in 0..k {
        let chi = ChiSquared::new(df - i as f64).map_err(|e| Error::validation(e.to_string()))?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(a)
}

/// Mixture stream whose parameters are redrawn at `t0`.
pub fn gen_gmm_change(spec: &GmmChangeSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let mut params = GmmParams::draw(spec.k, spec.n_components, spec.alpha, &mut rng)?;
    let mut out = Vec::with_capacity(spec.n_t);
    for i in 0..spec.n_t {
        if i == spec.t0 {
            params = GmmParams::draw(spec.k, spec.n_components, spec.alpha, &mut rng)?;
        }
        out.push(params.sample(&mut rng));
    }
    Ok(out)
}

/// Median of all pairwise Euclidean distances. Returns 0 for identical
/// samples, which is not a usable bandwidth.
pub fn median_bandwidth(samples: &[Vec<f64>]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::validation("median bandwidth needs at least 2 samples"));
    }
    let mut d = Vec::with_capacity(samples.len() * (samples.len() - 1) / 2);
    for i in 0..samples.len() {
        for j in (i + 1)..samples.len() {
            d.push(crate::kernel_dict::sq_dist(&samples[i], &samples[j]).sqrt());
        }
    }
    let n = d.len();
    let mid = n / 2;
    let (_, &mut hi, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    let med = if n % 2 == 1 {
        hi
    } else {
        let lo = d[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    };
    if med == 0.0 {
        log::warn!("median bandwidth is 0; samples are degenerate");
    }
    Ok(med)
}

/// Runs `f(run, seed)` for every run in parallel and returns the results in
/// run order.
pub fn run_parallel<T, F>(n_runs: usize, base_seed: u64, f: F) -> Vec<Result<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync,
{
    (0..n_runs).into_par_iter().map(|r| f(r, derive_seed(base_seed, r as u64))).collect()
}

/// Per-`t` running mean and sum of squared deviations.
#[derive(Debug, Clone)]
struct Moments {
    n: Vec<u64>,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(len: usize) -> Self {
        Self { n: vec![0; len], mean: vec![0.0; len], m2: vec![0.0; len] }
    }

    fn push(&mut self, trace: &[f64]) {
        for (t, &x) in trace.iter().enumerate() {
            if x.is_nan() {
                continue;
            }
            self.n[t] += 1;
            let d = x - self.mean[t];
            self.mean[t] += d / self.n[t] as f64;
            self.m2[t] += d * (x - self.mean[t]);
        }
    }

    fn merge(&mut self, o: &Moments) {
        for t in 0..self.n.len() {
            let (na, nb) = (self.n[t] as f64, o.n[t] as f64);
            if nb == 0.0 {
                continue;
            }
            let n = na + nb;
            let d = o.mean[t] - self.mean[t];
            self.mean[t] += d * nb / n;
            self.m2[t] += o.m2[t] + d * d * na * nb / n;
            self.n[t] += o.n[t];
        }
    }
}

/// Per-`t` sample mean and unbiased variance of each traced series.
#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub names: Vec<String>,
    pub n_runs: usize,
    pub seeds: Vec<u64>,
    /// Runs that returned an error, with the message.
    pub failures: Vec<(usize, String)>,
    /// `mean[series][t]`
    pub mean: Vec<Vec<f64>>,
    /// `var[series][t]`
    pub var: Vec<Vec<f64>>,
    /// Number of finite samples behind each `(series, t)` entry.
    pub count: Vec<Vec<u64>>,
}

impl McReport {
    pub fn horizon(&self) -> usize {
        self.mean.first().map_or(0, Vec::len)
    }

    /// Standard error of the mean of `series` at `t`.
    pub fn std_err(&self, series: usize, t: usize) -> f64 {
        (self.var[series][t] / self.count[series][t] as f64).sqrt()
    }

    pub fn series(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Columns `t` (1-based trace position), then `<name>_mean,<name>_var`
    /// per series, then `runs`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "t")?;
        for n in &self.names {
            write!(w, ",{n}_mean,{n}_var")?;
        }
        writeln!(w, ",runs")?;
        for t in 0..self.horizon() {
            write!(w, "{}", t + 1)?;
            for s in 0..self.names.len() {
                write!(w, ",{},{}", fmt_f64(self.mean[s][t]), fmt_f64(self.var[s][t]))?;
            }
            writeln!(w, ",{}", self.count.first().map_or(0, |c| c[t]))?;
        }
        Ok(())
    }
}

const CHUNK: usize = 8;

/// Monte Carlo over `n_runs` independent runs. `run(index, seed)` returns one
/// trace per series, each of length `horizon`; `NaN` marks a missing value.
///
/// Runs are grouped in fixed chunks, accumulated in parallel and merged in
/// chunk order, so the report does not depend on thread scheduling.
pub fn monte_carlo<F>(names: Vec<String>, horizon: usize, n_runs: usize, base_seed: u64, run: F) -> Result<McReport>
where
    F: Fn(usize, u64) -> Result<Vec<Vec<f64>>> + Sync,
{
    if n_runs < 2 {
        return Err(Error::validation("Monte Carlo needs at least 2 runs"));
    }
    let n_series = names.len();
    let seeds: Vec<u64> = (0..n_runs).map(|r| derive_seed(base_seed, r as u64)).collect();
    type Chunk = (Vec<Moments>, Vec<(usize, String)>);
    let chunks: Vec<Chunk> = (0..n_runs.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![Moments::new(horizon); n_series];
            let mut failed = Vec::new();
            for (r, &seed) in seeds.iter().enumerate().take(((c + 1) * CHUNK).min(n_runs)).skip(c * CHUNK) {
                match run(r, seed).and_then(|traces| {
                    if traces.len() != n_series || traces.iter().any(|t| t.len() != horizon) {
                        Err(Error::data(format!(
                            "run returned a trace of the wrong shape (expected {n_series} x {horizon})"
                        )))
                    } else {
                        Ok(traces)
                    }
                }) {
                    Ok(traces) => acc.iter_mut().zip(&traces).for_each(|(a, tr)| a.push(tr)),
                    Err(e) => failed.push((r, e.to_string())),
                }
            }
            (acc, failed)
        })
        .collect();

    let mut total = vec![Moments::new(horizon); n_series];
    let mut failures = Vec::new();
    for (acc, failed) in chunks {
        total.iter_mut().zip(&acc).for_each(|(t, a)| t.merge(a));
        failures.extend(failed);
    }
    for (r, msg) in &failures {
        log::warn!("Monte Carlo run {r} failed: {msg}");
    }
    if n_runs - failures.len() < 2 {
        return Err(Error::numerical(format!("only {} of {n_runs} runs succeeded", n_runs - failures.len())));
    }
    let var = total
        .iter()
        .map(|m| m.m2.iter().zip(&m.n).map(|(&s, &n)| if n > 1 { s / (n - 1) as f64 } else { f64::NAN }).collect())
        .collect();
    Ok(McReport {
        names,
        n_runs,
        seeds,
        failures,
        mean: total.iter().map(|m| m.mean.clone()).collect(),
        var,
        count: total.into_iter().map(|m| m.n).collect(),
    })
}
