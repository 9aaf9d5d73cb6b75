use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use super::{
    drulsif_statistic, knn_statistic, ma_statistic, AlarmRule, GmaState, KnnConfig, NougatParams, NougatState,
};
use crate::error::{check_dim, Error, Result};
use crate::kernel_dict::{Dictionary, KernelParams};
use crate::windows::{WindowConfig, WindowStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorKind {
    Nougat,
    Drulsif,
    Ma,
    Gma,
    Knn,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 5] = [Self::Nougat, Self::Drulsif, Self::Ma, Self::Gma, Self::Knn];

    pub fn name(self) -> &'static str {
        match self {
            Self::Nougat => "nougat",
            Self::Drulsif => "drulsif",
            Self::Ma => "ma",
            Self::Gma => "gma",
            Self::Knn => "knn",
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::validation(format!("unknown detector {s:?}")))
    }
}

/// Where the dictionary comes from.
#[derive(Debug, Clone)]
pub enum DictionaryMode {
    Fixed(Dictionary),
    /// Seeded by the first sample, grown by the coherence rule.
    Online {
        params: KernelParams,
        eta0: f64,
        max_len: Option<usize>,
    },
}

/// Detectors to run on one stream, with their parameters.
#[derive(Debug, Clone)]
pub struct DetectorSet {
    pub kinds: Vec<DetectorKind>,
    pub mu: f64,
    pub nu: f64,
    /// Threshold per entry of `kinds`.
    pub thresholds: Vec<f64>,
    pub rule: AlarmRule,
    pub theta0: Option<DVector<f64>>,
    pub gma_alpha: f64,
    pub gma_nominal: Option<DVector<f64>>,
    pub knn_k: usize,
}

impl DetectorSet {
    /// All `kinds` share threshold `xi`.
    pub fn new(kinds: Vec<DetectorKind>, mu: f64, nu: f64, xi: f64) -> Self {
        let thresholds = vec![xi; kinds.len()];
        Self {
            kinds,
            mu,
            nu,
            thresholds,
            rule: AlarmRule::Shifted,
            theta0: None,
            gma_alpha: 0.05,
            gma_nominal: None,
            knn_k: 10,
        }
    }

    pub fn validate(&self, window: WindowConfig) -> Result<()> {
        if self.kinds.is_empty() {
            return Err(Error::validation("no detector selected"));
        }
        if self.thresholds.len() != self.kinds.len() {
            return Err(Error::validation("one threshold per detector required"));
        }
        if self.thresholds.iter().any(|x| x.is_nan()) {
            return Err(Error::validation("thresholds must not be NaN"));
        }
        if self.kinds.contains(&DetectorKind::Nougat) {
            NougatParams { mu: self.mu, nu: self.nu, xi: 0.0, rule: self.rule }.validate()?;
        }
        if !(self.nu.is_finite() && self.nu >= 0.0) {
            return Err(Error::validation(format!("nu must be >= 0; got {}", self.nu)));
        }
        if self.kinds.contains(&DetectorKind::Gma) && !(self.gma_alpha > 0.0 && self.gma_alpha <= 1.0) {
            return Err(Error::validation(format!("GMA alpha must be in (0, 1]; got {}", self.gma_alpha)));
        }
        if self.kinds.contains(&DetectorKind::Knn) && (self.knn_k == 0 || self.knn_k >= window.total()) {
            return Err(Error::validation(format!(
                "k-NN neighbors must be in [1, n_ref + n_test); got {}",
                self.knn_k
            )));
        }
        Ok(())
    }

    /// Value compared against the threshold; an alarm fires when it exceeds
    /// the threshold.
    pub fn score(&self, kind: DetectorKind, value: f64) -> f64 {
        match kind {
            DetectorKind::Nougat | DetectorKind::Drulsif => self.rule.score(value),
            DetectorKind::Ma | DetectorKind::Gma => value,
            DetectorKind::Knn => -value,
        }
    }
}

/// Output of one processed sample.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// 0-based sample index.
    pub t: u64,
    pub warm: bool,
    pub dict_len: usize,
    /// Raw statistic per detector (same order as `DetectorSet::kinds`).
    pub values: Vec<Option<f64>>,
    pub scores: Vec<Option<f64>>,
    pub alarms: Vec<bool>,
}

/// Runs a set of detectors over one stream, one sample at a time, following
/// the order: dictionary admission, window update, weight update, test.
#[derive(Debug, Clone)]
pub struct StreamDetector {
    set: DetectorSet,
    window: WindowConfig,
    mode: DictionaryMode,
    dict: Option<Dictionary>,
    stats: Option<WindowStats>,
    nougat: Option<NougatState>,
    gma: Option<GmaState>,
    t: u64,
    pooled: Vec<Vec<f64>>,
}

impl StreamDetector {
    pub fn new(set: DetectorSet, window: WindowConfig, mode: DictionaryMode) -> Result<Self> {
        set.validate(window)?;
        let mut det = Self {
            set,
            window,
            mode: mode.clone(),
            dict: None,
            stats: None,
            nougat: None,
            gma: None,
            t: 0,
            pooled: Vec::new(),
        };
        if let DictionaryMode::Fixed(d) = mode {
            det.init(d)?;
        }
        Ok(det)
    }

    fn init(&mut self, dict: Dictionary) -> Result<()> {
        let l = dict.len();
        self.stats = Some(WindowStats::new(self.window, l));
        if self.set.kinds.contains(&DetectorKind::Nougat) {
            let params = NougatParams { mu: self.set.mu, nu: self.set.nu, xi: 0.0, rule: self.set.rule };
            let theta0 = match &self.set.theta0 {
                Some(t) => {
                    check_dim(l, t.len())?;
                    t.clone()
                }
                None => DVector::zeros(l),
            };
            self.nougat = Some(NougatState::with_theta(params, theta0));
        }
        if self.set.kinds.contains(&DetectorKind::Gma) {
            let mut g = GmaState::new(self.set.gma_alpha, l)?;
            if let Some(n) = &self.set.gma_nominal {
                g = g.with_nominal(n.clone())?;
            }
            self.gma = Some(g);
        }
        self.dict = Some(dict);
        Ok(())
    }

    pub fn set(&self) -> &DetectorSet {
        &self.set
    }

    pub fn dictionary(&self) -> Option<&Dictionary> {
        self.dict.as_ref()
    }

    pub fn stats(&self) -> Option<&WindowStats> {
        self.stats.as_ref()
    }

    pub fn nougat(&self) -> Option<&NougatState> {
        self.nougat.as_ref()
    }

    pub fn step(&mut self, y: &[f64]) -> Result<StepRecord> {
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!("sample {} has a non-finite entry at {i}", self.t)));
        }
        match self.dict.as_mut() {
            None => {
                let DictionaryMode::Online { params, eta0, max_len } = self.mode else {
                    unreachable!("fixed dictionaries are installed at construction")
                };
                self.init(Dictionary::seeded(y, params, eta0)?.with_max_len(max_len))?;
            }
            Some(dict) => {
                if matches!(self.mode, DictionaryMode::Online { .. }) && dict.try_insert(y)? {
                    self.stats.as_mut().expect("stats").extend_dimension(dict)?;
                    if let Some(n) = self.nougat.as_mut() {
                        n.grow();
                    }
                    if let Some(g) = self.gma.as_mut() {
                        g.grow();
                    }
                }
            }
        }
        let dict = self.dict.as_ref().expect("dictionary present");
        let stats = self.stats.as_mut().expect("stats present");
        stats.push(y, dict)?;
        if let Some(g) = self.gma.as_mut() {
            g.step(y, dict)?;
        }
        let t = self.t;
        self.t += 1;

        let n = self.set.kinds.len();
        let mut values = vec![None; n];
        let warm = stats.is_warm();
        if warm {
            let stats = &*stats;
            for (i, kind) in self.set.kinds.iter().enumerate() {
                values[i] = match kind {
                    DetectorKind::Nougat => Some(self.nougat.as_mut().expect("nougat").step(stats)?),
                    DetectorKind::Drulsif => Some(drulsif_statistic(stats, self.set.nu)?),
                    DetectorKind::Ma => Some(ma_statistic(stats)),
                    DetectorKind::Gma => self.gma.as_ref().and_then(GmaState::statistic),
                    DetectorKind::Knn => {
                        self.pooled.clear();
                        self.pooled.extend(stats.raw().map(<[f64]>::to_vec));
                        let refs: Vec<&[f64]> = self.pooled.iter().map(Vec::as_slice).collect();
                        Some(knn_statistic(&refs, self.window.n_ref, KnnConfig::new(self.set.knn_k)?)?)
                    }
                };
            }
        }
        let scores: Vec<Option<f64>> =
            values.iter().zip(&self.set.kinds).map(|(v, &k)| v.map(|v| self.set.score(k, v))).collect();
        let alarms = scores.iter().zip(&self.set.thresholds).map(|(s, &xi)| s.is_some_and(|s| s > xi)).collect();
        Ok(StepRecord { t, warm, dict_len: dict.len(), values, scores, alarms })
    }

    pub fn run(&mut self, samples: &[Vec<f64>]) -> Result<Vec<StepRecord>> {
        samples.iter().map(|y| self.step(y)).collect()
    }
}
