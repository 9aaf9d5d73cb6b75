//! Command-line front end: configuration, time-delay embedding and the
//! `detect`, `theory`, `mc` and `bench` subcommands.
//!
//! Settings come from an optional TOML file, then from flags, which win.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::detectors::{AlarmRule, DetectorKind, DetectorSet, DictionaryMode, StreamDetector};
use crate::error::{Error, Result};
use crate::gaussian_moments::{GaussianSpec, MomentSet};
use crate::io::{fmt_f64, NumericCsvReader};
use crate::kernel_dict::{Dictionary, KernelParams};
use crate::metrics::bench_runtime;
use crate::simgen::{
    gen_gaussian_change, gen_gmm_change, monte_carlo, rng_from_seed, sample_dictionary, GaussianSampler, GmmChangeSpec,
};
use crate::theory::{self, AlgoConfig, ChangeScenario, TheoryOptions};
use crate::windows::WindowConfig;

/// Time-delay embedding: window `i` is `series[i..i + k]`.
pub fn embed(series: &[f64], k: usize) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Err(Error::validation("embedding dimension must be >= 1"));
    }
    if series.len() < k {
        return Err(Error::data(format!("series of length {} is shorter than k = {k}", series.len())));
    }
    Ok(series.windows(k).map(<[f64]>::to_vec).collect())
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheorySection {
    pub mean0: Vec<f64>,
    pub cov0: Vec<Vec<f64>>,
    /// Post-change distribution; absent for a no-change run.
    pub mean1: Option<Vec<f64>>,
    pub cov1: Option<Vec<Vec<f64>>>,
    /// First update whose test window holds a post-change sample.
    pub t0: usize,
    pub horizon: usize,
    /// Size of the dictionary drawn from the pre-change distribution when no
    /// dictionary file is given.
    pub dict_size: usize,
    /// Initial weights: empty for zeros, one value to fill every entry, or
    /// one value per atom.
    pub theta0: Vec<f64>,
    pub neglect_mean: bool,
    /// `closed-form` or `monte-carlo`.
    pub moments: String,
    pub mc_draws: usize,
    pub with_m: bool,
}

impl Default for TheorySection {
    fn default() -> Self {
        Self {
            mean0: vec![0.0, 0.0],
            cov0: vec![vec![0.25, 0.0625], vec![0.0625, 0.25]],
            mean1: None,
            cov1: None,
            t0: 0,
            horizon: 5000,
            dict_size: 16,
            theta0: Vec::new(),
            neglect_mean: false,
            moments: "closed-form".into(),
            mc_draws: 100_000,
            with_m: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub runs: usize,
    /// Samples per run.
    pub samples: usize,
    /// Index of the first post-change sample; uses the `theory` post-change
    /// distribution.
    pub change_at: Option<usize>,
}

impl Default for McSection {
    fn default() -> Self {
        Self { runs: 100, samples: 2000, change_at: None }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub sizes: Vec<usize>,
    pub repetitions: usize,
    pub n_t: usize,
    /// Sample dimension of the mixture stream.
    pub k: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self { sizes: vec![10, 20, 40, 80], repetitions: 5, n_t: 1200, k: 6 }
    }
}

/// All run settings.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub detectors: Vec<String>,
    pub n_ref: usize,
    pub n_test: usize,
    /// Kernel bandwidth; when absent, the median pairwise distance of the
    /// first `n_ref` samples.
    pub sigma: Option<f64>,
    pub mu: f64,
    pub nu: f64,
    pub xi: f64,
    pub eta0: f64,
    pub max_dict: Option<usize>,
    pub embed_k: usize,
    pub seed: u64,
    /// `shifted` or `two-sided`.
    pub rule: String,
    pub knn_k: usize,
    pub gma_alpha: f64,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Fixed dictionary to load.
    pub dict: Option<PathBuf>,
    /// Where to save the final dictionary.
    pub save_dict: Option<PathBuf>,
    pub theory: TheorySection,
    pub mc: McSection,
    pub bench: BenchSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            detectors: vec!["nougat".into()],
            n_ref: 64,
            n_test: 64,
            sigma: None,
            mu: 0.047,
            nu: 0.01,
            xi: 1.0,
            eta0: 0.7,
            max_dict: None,
            embed_k: 1,
            seed: 0,
            rule: "shifted".into(),
            knn_k: 10,
            gma_alpha: 0.05,
            input: None,
            output: None,
            dict: None,
            save_dict: None,
            theory: TheorySection::default(),
            mc: McSection::default(),
            bench: BenchSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::validation(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn window(&self) -> Result<WindowConfig> {
        WindowConfig::new(self.n_ref, self.n_test)
    }

    pub fn kinds(&self) -> Result<Vec<DetectorKind>> {
        self.detectors.iter().map(|s| s.parse()).collect()
    }

    pub fn alarm_rule(&self) -> Result<AlarmRule> {
        match self.rule.trim().to_ascii_lowercase().as_str() {
            "shifted" => Ok(AlarmRule::Shifted),
            "two-sided" | "twosided" => Ok(AlarmRule::TwoSided),
            other => Err(Error::validation(format!("unknown alarm rule {other:?}"))),
        }
    }

    pub fn detector_set(&self) -> Result<DetectorSet> {
        let mut set = DetectorSet::new(self.kinds()?, self.mu, self.nu, self.xi);
        set.rule = self.alarm_rule()?;
        set.knn_k = self.knn_k;
        set.gma_alpha = self.gma_alpha;
        set.validate(self.window()?)?;
        Ok(set)
    }

    /// Checks every parameter before any data is touched.
    pub fn validate(&self) -> Result<()> {
        self.detector_set()?;
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::validation(format!("mu must be > 0; got {}", self.mu)));
        }
        if let Some(s) = self.sigma {
            KernelParams::new(s)?;
        }
        if !(self.eta0 > 0.0 && self.eta0 <= 1.0) {
            return Err(Error::validation(format!("eta0 must be in (0, 1]; got {}", self.eta0)));
        }
        if self.max_dict == Some(0) {
            return Err(Error::validation("max_dict must be >= 1"));
        }
        if self.embed_k == 0 {
            return Err(Error::validation("embed_k must be >= 1"));
        }
        let th = &self.theory;
        if th.horizon == 0 || th.dict_size == 0 {
            return Err(Error::validation("theory horizon and dict_size must be >= 1"));
        }
        if th.mean1.is_some() != th.cov1.is_some() {
            return Err(Error::validation("theory mean1 and cov1 must be given together"));
        }
        if !matches!(th.moments.as_str(), "closed-form" | "monte-carlo") {
            return Err(Error::validation(format!("unknown moment source {:?}", th.moments)));
        }
        if th.moments == "monte-carlo" && th.mc_draws < 2 {
            return Err(Error::validation("mc_draws must be >= 2"));
        }
        if self.mc.runs < 2 {
            return Err(Error::validation("mc runs must be >= 2"));
        }
        if self.mc.samples < self.n_ref + self.n_test {
            return Err(Error::validation("mc samples must cover at least one full window"));
        }
        if self.mc.change_at.is_some() && th.mean1.is_none() {
            return Err(Error::validation("mc change_at needs theory.mean1/cov1"));
        }
        let b = &self.bench;
        if b.repetitions < 3 || b.sizes.contains(&0) || b.n_t == 0 || b.k == 0 {
            return Err(Error::validation("bench needs repetitions >= 3, sizes >= 1, n_t >= 1, k >= 1"));
        }
        Ok(())
    }

    fn spec0(&self) -> Result<GaussianSpec> {
        gaussian_spec(&self.theory.mean0, &self.theory.cov0)
    }

    fn spec1(&self) -> Result<Option<GaussianSpec>> {
        match (&self.theory.mean1, &self.theory.cov1) {
            (Some(m), Some(c)) => Ok(Some(gaussian_spec(m, c)?)),
            _ => Ok(None),
        }
    }
}

fn gaussian_spec(mean: &[f64], cov: &[Vec<f64>]) -> Result<GaussianSpec> {
    let k = mean.len();
    if cov.len() != k || cov.iter().any(|r| r.len() != k) {
        return Err(Error::validation(format!("covariance must be {k}x{k}")));
    }
    let flat: Vec<f64> = cov.iter().flatten().copied().collect();
    GaussianSpec::new(DVector::from_row_slice(mean), DMatrix::from_row_slice(k, k, &flat))
}

#[derive(Debug, Parser)]
#[command(name = "nougat", version, about = "Streaming kernel change-point detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run detectors over a CSV stream (file or stdin).
    Detect(Overrides),
    /// Predicted mean and variance of the NOUGAT statistic.
    Theory(Overrides),
    /// Monte Carlo mean and variance of detector statistics on Gaussian streams.
    Mc(Overrides),
    /// Median wall time per pass against dictionary size.
    Bench(Overrides),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Detector names, comma separated (nougat, drulsif, ma, gma, knn).
    #[arg(long, value_delimiter = ',')]
    pub detector: Option<Vec<String>>,
    /// Reference window length.
    #[arg(long)]
    pub nref: Option<usize>,
    /// Test window length.
    #[arg(long)]
    pub ntest: Option<usize>,
    /// Gaussian kernel bandwidth (default: median pairwise distance).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// NOUGAT step size.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Ridge regularization.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Alarm threshold.
    #[arg(long, allow_hyphen_values = true)]
    pub xi: Option<f64>,
    /// Coherence threshold for admitting dictionary atoms.
    #[arg(long)]
    pub eta0: Option<f64>,
    /// Delay-embedding length for single-column input.
    #[arg(long = "embed-k")]
    pub embed_k: Option<usize>,
    /// Random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Input CSV (default: stdin).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output CSV (default: stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Dictionary CSV to load.
    #[arg(long)]
    pub dict: Option<PathBuf>,
    /// Where to write the final dictionary.
    #[arg(long = "save-dict")]
    pub save_dict: Option<PathBuf>,
}

impl Overrides {
    /// Loads the config file (if any) and applies the flags on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.detector {
            cfg.detectors = v.clone();
        }
        macro_rules! set {
            ($($field:ident <- $flag:ident),*) => {$(
                if let Some(v) = &self.$flag {
                    cfg.$field = v.clone();
                }
            )*};
        }
        set!(n_ref <- nref, n_test <- ntest, mu <- mu, nu <- nu, xi <- xi, eta0 <- eta0,
             embed_k <- embed_k, seed <- seed);
        if self.sigma.is_some() {
            cfg.sigma = self.sigma;
        }
        if self.input.is_some() {
            cfg.input = self.input.clone();
        }
        if self.output.is_some() {
            cfg.output = self.output.clone();
        }
        if self.dict.is_some() {
            cfg.dict = self.dict.clone();
        }
        if self.save_dict.is_some() {
            cfg.save_dict = self.save_dict.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn load_dictionary(path: &Path) -> Result<Dictionary> {
    let f = File::open(path).map_err(|e| Error::data(format!("cannot open dictionary {}: {e}", path.display())))?;
    Dictionary::read_csv(BufReader::new(f))
}

fn open_output(path: &Option<PathBuf>) -> Result<(Box<dyn Write>, bool)> {
    Ok(match path {
        Some(p) => (Box::new(BufWriter::new(File::create(p)?)), false),
        None => (Box::new(std::io::stdout().lock()), true),
    })
}

/// Runs `cmd` and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Detect(o) => o.resolve().and_then(|cfg| {
            let input: Box<dyn Read> = match &cfg.input {
                Some(p) => Box::new(BufReader::new(
                    File::open(p).map_err(|e| Error::data(format!("cannot open {}: {e}", p.display())))?,
                )),
                None => Box::new(std::io::stdin().lock()),
            };
            let (out, streaming) = open_output(&cfg.output)?;
            run_detect(&cfg, input, out, streaming)
        }),
        Command::Theory(o) => o.resolve().and_then(|cfg| {
            let (out, _) = open_output(&cfg.output)?;
            run_theory(&cfg, out)
        }),
        Command::Mc(o) => o.resolve().and_then(|cfg| {
            let (out, _) = open_output(&cfg.output)?;
            run_mc(&cfg, out)
        }),
        Command::Bench(o) => o.resolve().and_then(|cfg| {
            let (out, _) = open_output(&cfg.output)?;
            run_bench(&cfg, out)
        }),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

struct Embedder {
    k: usize,
    buf: VecDeque<f64>,
}

impl Embedder {
    fn push(&mut self, row: Vec<f64>) -> Result<Option<Vec<f64>>> {
        if self.k == 1 {
            return Ok(Some(row));
        }
        if row.len() != 1 {
            return Err(Error::data(format!("embedding needs a single-column series; got {} columns", row.len())));
        }
        self.buf.push_back(row[0]);
        if self.buf.len() > self.k {
            self.buf.pop_front();
        }
        Ok((self.buf.len() == self.k).then(|| self.buf.iter().copied().collect()))
    }
}

/// Streams `input` through the configured detectors. One output row per warm
/// sample: `t` (0-based sample index after embedding), `dict_len`, then the
/// statistic and alarm flag of each detector.
pub fn run_detect<R: Read, W: Write>(cfg: &RunConfig, input: R, mut out: W, flush_rows: bool) -> Result<()> {
    cfg.validate()?;
    let set = cfg.detector_set()?;
    let window = cfg.window()?;
    let fixed = cfg.dict.as_deref().map(load_dictionary).transpose()?;
    let kinds = set.kinds.clone();

    write!(out, "t,dict_len")?;
    for k in &kinds {
        write!(out, ",{k},{k}_alarm")?;
    }
    writeln!(out)?;

    let make = |sigma: f64| -> Result<StreamDetector> {
        let mode = match &fixed {
            Some(d) => DictionaryMode::Fixed(d.clone()),
            None => DictionaryMode::Online { params: KernelParams::new(sigma)?, eta0: cfg.eta0, max_len: cfg.max_dict },
        };
        StreamDetector::new(set.clone(), window, mode)
    };
    let mut det = match (&fixed, cfg.sigma) {
        (Some(d), _) => Some(make(d.params().sigma())?),
        (None, Some(s)) => Some(make(s)?),
        (None, None) => None,
    };
    let mut pending: Vec<Vec<f64>> = Vec::new();
    let mut emb = Embedder { k: cfg.embed_k, buf: VecDeque::new() };
    let mut dim: Option<usize> = None;

    let feed = |det: &mut StreamDetector, y: &[f64], out: &mut W| -> Result<()> {
        let rec = det.step(y)?;
        if rec.warm {
            write!(out, "{},{}", rec.t, rec.dict_len)?;
            for i in 0..kinds.len() {
                let v = rec.values[i].map_or_else(String::new, fmt_f64);
                write!(out, ",{v},{}", u8::from(rec.alarms[i]))?;
            }
            writeln!(out)?;
            if flush_rows {
                out.flush()?;
            }
        }
        Ok(())
    };

    for row in NumericCsvReader::new(input)? {
        let Some(y) = emb.push(row?)? else { continue };
        match dim {
            None => dim = Some(y.len()),
            Some(d) if d != y.len() => {
                return Err(Error::data(format!("row has {} values; expected {d}", y.len())));
            }
            _ => {}
        }
        match det.as_mut() {
            Some(d) => feed(d, &y, &mut out)?,
            None => {
                pending.push(y);
                if pending.len() == cfg.n_ref.max(2) {
                    let mut d = make(bandwidth_from(&pending)?)?;
                    for p in pending.drain(..) {
                        feed(&mut d, &p, &mut out)?;
                    }
                    det = Some(d);
                }
            }
        }
    }
    if det.is_none() && pending.len() >= 2 {
        let mut d = make(bandwidth_from(&pending)?)?;
        for p in pending.drain(..) {
            feed(&mut d, &p, &mut out)?;
        }
        det = Some(d);
    }
    out.flush()?;
    if let (Some(path), Some(d)) = (&cfg.save_dict, det.as_ref().and_then(|d| d.dictionary())) {
        d.write_csv(BufWriter::new(File::create(path)?))?;
    }
    Ok(())
}

fn bandwidth_from(samples: &[Vec<f64>]) -> Result<f64> {
    let s = crate::simgen::median_bandwidth(samples)?;
    if s <= 0.0 {
        return Err(Error::data("median bandwidth of the leading samples is 0; set sigma explicitly"));
    }
    log::info!("median bandwidth {s}");
    Ok(s)
}

/// Dictionary for theory and Monte Carlo runs: loaded, or `dict_size` draws
/// of the pre-change distribution under the run seed.
fn theory_dictionary(cfg: &RunConfig, spec0: &GaussianSpec) -> Result<Dictionary> {
    if let Some(p) = &cfg.dict {
        return load_dictionary(p);
    }
    let sigma = cfg.sigma.ok_or_else(|| Error::validation("sigma is required for theory and mc runs"))?;
    let sampler = GaussianSampler::new(spec0);
    let mut rng = rng_from_seed(cfg.seed);
    sample_dictionary(cfg.theory.dict_size, KernelParams::new(sigma)?, &mut rng, |r| sampler.sample(r))
}

fn theta0(cfg: &RunConfig, l: usize) -> Result<DVector<f64>> {
    let v = &cfg.theory.theta0;
    match v.len() {
        0 => Ok(DVector::zeros(l)),
        1 => Ok(DVector::from_element(l, v[0])),
        n if n == l => Ok(DVector::from_row_slice(v)),
        n => Err(Error::validation(format!("theta0 has {n} entries; dictionary has {l}"))),
    }
}

fn moments(cfg: &RunConfig, dict: &Dictionary, spec: &GaussianSpec, seed: u64) -> Result<MomentSet> {
    if cfg.theory.moments == "monte-carlo" {
        let sampler = GaussianSampler::new(spec);
        MomentSet::monte_carlo(dict, cfg.theory.mc_draws, seed, |r| sampler.sample(r))
    } else {
        MomentSet::gaussian(dict, spec)
    }
}

/// Writes `t, mean_g, var_g` for the configured scenario.
pub fn run_theory<W: Write>(cfg: &RunConfig, out: W) -> Result<()> {
    cfg.validate()?;
    let spec0 = cfg.spec0()?;
    let dict = theory_dictionary(cfg, &spec0)?;
    let algo = AlgoConfig::new(cfg.mu, cfg.nu, cfg.window()?, theta0(cfg, dict.len())?)?;
    let m0 = moments(cfg, &dict, &spec0, cfg.seed ^ 1)?;
    let opts = TheoryOptions { neglect_mean: cfg.theory.neglect_mean, ..Default::default() };
    let trace = match cfg.spec1()? {
        None => {
            let ss = theory::steady_state_null(&algo, &m0)?;
            log::info!("steady-state variance {} (spectral radius {})", ss.var_inf, ss.rho);
            theory::variance_null(&algo, &m0, cfg.theory.horizon, opts)?
        }
        Some(spec1) => {
            let m1 = moments(cfg, &dict, &spec1, cfg.seed ^ 2)?;
            let sc = ChangeScenario { t0: cfg.theory.t0, moments0: m0, moments1: m1 };
            theory::variance_change(&algo, &sc, cfg.theory.horizon, opts)?
        }
    };
    trace.write_csv(out, cfg.theory.with_m)
}

/// Per-update Monte Carlo mean and variance of each detector's raw
/// statistic on Gaussian streams. Row `t` is the `t`-th warm sample.
pub fn run_mc<W: Write>(cfg: &RunConfig, out: W) -> Result<()> {
    cfg.validate()?;
    let spec0 = cfg.spec0()?;
    let spec1 = cfg.spec1()?.unwrap_or_else(|| spec0.clone());
    let dict = theory_dictionary(cfg, &spec0)?;
    let mut set = cfg.detector_set()?;
    if !cfg.theory.theta0.is_empty() {
        set.theta0 = Some(theta0(cfg, dict.len())?);
    }
    let window = cfg.window()?;
    let horizon = cfg.mc.samples - window.total() + 1;
    let change_at = cfg.mc.change_at.unwrap_or(usize::MAX);
    let names = set.kinds.iter().map(|k| k.to_string()).collect();
    let report = monte_carlo(names, horizon, cfg.mc.runs, cfg.seed, |_, seed| {
        let ys = gen_gaussian_change(&spec0, &spec1, change_at, cfg.mc.samples, seed)?;
        let mut det = StreamDetector::new(set.clone(), window, DictionaryMode::Fixed(dict.clone()))?;
        let mut traces = vec![Vec::with_capacity(horizon); set.kinds.len()];
        for y in &ys {
            let rec = det.step(y)?;
            if rec.warm {
                for (tr, v) in traces.iter_mut().zip(&rec.values) {
                    tr.push(v.unwrap_or(f64::NAN));
                }
            }
        }
        Ok(traces)
    })?;
    report.write_csv(out)
}

/// Median time of one full pass over a mixture stream against dictionary
/// size, for each selected detector.
pub fn run_bench<W: Write>(cfg: &RunConfig, mut out: W) -> Result<()> {
    cfg.validate()?;
    let b = &cfg.bench;
    let ys = gen_gmm_change(&GmmChangeSpec {
        k: b.k,
        n_components: 3,
        alpha: 5.0,
        t0: b.n_t / 2,
        n_t: b.n_t,
        seed: cfg.seed,
    })?;
    let sigma = match cfg.sigma {
        Some(s) => s,
        None => bandwidth_from(&ys[..ys.len().min(500)])?,
    };
    let params = KernelParams::new(sigma)?;
    let window = cfg.window()?;
    let mut rng = rng_from_seed(cfg.seed ^ 0x5eed);
    writeln!(out, "detector,L,median_seconds")?;
    for kind in cfg.kinds()? {
        let mut set = cfg.detector_set()?;
        set.kinds = vec![kind];
        set.thresholds = vec![cfg.xi];
        let dicts: Vec<Dictionary> = b
            .sizes
            .iter()
            .map(|&l| sample_dictionary(l, params, &mut rng, |r| ys[rand::Rng::random_range(r, 0..ys.len())].clone()))
            .collect::<Result<_>>()?;
        let rows = bench_runtime(&b.sizes, b.repetitions, |l| {
            let i = b.sizes.iter().position(|&s| s == l).expect("size from list");
            let mut det = StreamDetector::new(set.clone(), window, DictionaryMode::Fixed(dicts[i].clone()))?;
            for y in &ys {
                det.step(y)?;
            }
            Ok(())
        })?;
        for (l, secs) in rows {
            writeln!(out, "{kind},{l},{}", fmt_f64(secs))?;
        }
    }
    out.flush()?;
    Ok(())
}
