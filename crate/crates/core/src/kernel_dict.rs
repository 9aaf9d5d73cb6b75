//! Gaussian kernel evaluation and coherence-rule dictionaries.

use std::io::{BufRead, Write};

use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};
use crate::io::fmt_f64;

/// Bandwidth of the Gaussian kernel `exp(-|y - y'|^2 / (2 sigma^2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    sigma: f64,
}

impl KernelParams {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::validation(format!("sigma must be finite and > 0; got {sigma}")));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `1 / (2 sigma^2)`, the factor applied to squared distances.
    #[inline]
    pub fn gamma(&self) -> f64 {
        0.5 / (self.sigma * self.sigma)
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub(crate) fn kappa_unchecked(y: &[f64], y2: &[f64], gamma: f64) -> f64 {
    (-sq_dist(y, y2) * gamma).exp()
}

/// Gaussian kernel between two points of equal dimension.
pub fn kappa(y: &[f64], y2: &[f64], params: KernelParams) -> Result<f64> {
    check_dim(y.len(), y2.len())?;
    Ok(kappa_unchecked(y, y2, params.gamma()))
}

/// A set of kernel atoms. Atoms are stored by value in insertion order and
/// never evicted.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: Vec<Vec<f64>>,
    params: KernelParams,
    eta0: f64,
    max_len: Option<usize>,
}

impl Dictionary {
    /// Dictionary seeded with a single atom.
    pub fn seeded(first: &[f64], params: KernelParams, eta0: f64) -> Result<Self> {
        Self::from_atoms(vec![first.to_vec()], params, eta0)
    }

    /// Dictionary with caller-provided atoms (no coherence filtering).
    pub fn from_atoms(atoms: Vec<Vec<f64>>, params: KernelParams, eta0: f64) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::validation("dictionary needs at least one atom"));
        }
        if !(eta0 > 0.0 && eta0.is_finite()) {
            return Err(Error::validation(format!("eta0 must be in (0, 1]; got {eta0}")));
        }
        let k = atoms[0].len();
        if k == 0 {
            return Err(Error::validation("atoms must have dimension >= 1"));
        }
        for a in &atoms {
            check_dim(k, a.len())?;
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::data("non-finite atom coordinate"));
            }
        }
        Ok(Self { atoms, params, eta0, max_len: None })
    }

    /// Optional hard cap on the number of atoms; admission stops once reached.
    pub fn with_max_len(mut self, max_len: Option<usize>) -> Self {
        self.max_len = max_len;
        self
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    pub fn params(&self) -> KernelParams {
        self.params
    }

    pub fn eta0(&self) -> f64 {
        self.eta0
    }

    pub fn max_len(&self) -> Option<usize> {
        self.max_len
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i]
    }

    /// Feature image `[kappa(y, atom_1), ..., kappa(y, atom_L)]`.
    pub fn kvec(&self, y: &[f64]) -> Result<DVector<f64>> {
        check_dim(self.dim(), y.len())?;
        let mut out = DVector::zeros(self.len());
        self.kvec_into(y, out.as_mut_slice());
        Ok(out)
    }

    /// Unchecked variant writing into a caller buffer of length `L`.
    #[inline]
    pub(crate) fn kvec_into(&self, y: &[f64], out: &mut [f64]) {
        let g = self.params.gamma();
        for (o, a) in out.iter_mut().zip(&self.atoms) {
            *o = kappa_unchecked(y, a, g);
        }
    }

    /// Largest kernel value between `y` and any atom.
    pub fn coherence(&self, y: &[f64]) -> Result<f64> {
        check_dim(self.dim(), y.len())?;
        let g = self.params.gamma();
        Ok(self.atoms.iter().map(|a| kappa_unchecked(y, a, g)).fold(0.0, f64::max))
    }

    /// True iff `y` should be inserted: `max_i |kappa(y, atom_i)| <= eta0`
    /// and the size cap (if any) leaves room.
    pub fn coherence_admit(&self, y: &[f64]) -> Result<bool> {
        if self.max_len.is_some_and(|m| self.len() >= m) {
            return Ok(false);
        }
        Ok(self.coherence(y)? <= self.eta0)
    }

    /// Runs the admission rule and inserts `y` when it passes. Returns whether
    /// the dictionary grew.
    pub fn try_insert(&mut self, y: &[f64]) -> Result<bool> {
        if self.coherence_admit(y)? {
            self.atoms.push(y.to_vec());
            return Ok(true);
        }
        Ok(false)
    }

    /// Largest pairwise kernel value between distinct atoms (0 for `L = 1`).
    pub fn max_pairwise_coherence(&self) -> f64 {
        let g = self.params.gamma();
        let mut worst = 0.0f64;
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                worst = worst.max(kappa_unchecked(&self.atoms[i], &self.atoms[j], g));
            }
        }
        worst
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# sigma={},eta0={}", fmt_f64(self.params.sigma), fmt_f64(self.eta0))?;
        for a in &self.atoms {
            let row: Vec<String> = a.iter().map(|v| fmt_f64(*v)).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut sigma = None;
        let mut eta0 = None;
        let mut atoms = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                for kv in header.split(',') {
                    let Some((key, val)) = kv.split_once('=') else { continue };
                    let v: f64 = val
                        .trim()
                        .parse()
                        .map_err(|_| Error::data(format!("line {}: bad header value {val:?}", lineno + 1)))?;
                    match key.trim() {
                        "sigma" => sigma = Some(v),
                        "eta0" => eta0 = Some(v),
                        _ => {}
                    }
                }
                continue;
            }
            let row = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::data(format!("line {}: {e}", lineno + 1)))?;
            atoms.push(row);
        }
        let sigma = sigma.ok_or_else(|| Error::data("dictionary file lacks sigma header"))?;
        let eta0 = eta0.ok_or_else(|| Error::data("dictionary file lacks eta0 header"))?;
        Self::from_atoms(atoms, KernelParams::new(sigma)?, eta0)
    }
}

/// Builds a dictionary by scanning `samples` in order. The first sample is
/// always admitted; later samples are admitted by the coherence rule.
pub fn build_dictionary(samples: &[Vec<f64>], params: KernelParams, eta0: f64) -> Result<Dictionary> {
    let (first, rest) =
        samples.split_first().ok_or_else(|| Error::validation("cannot build a dictionary from no samples"))?;
    let mut dict = Dictionary::seeded(first, params, eta0)?;
    for y in rest {
        dict.try_insert(y)?;
    }
    Ok(dict)
}
