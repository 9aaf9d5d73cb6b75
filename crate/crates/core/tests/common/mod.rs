//! Property checks and oracles shared by the test targets.
#![allow(dead_code)]

use std::path::Path;
use std::process::Command;

use nalgebra::{DMatrix, DVector};
use nougat_core::detectors::{DetectorKind, DetectorSet, DictionaryMode, StreamDetector};
use nougat_core::gaussian_moments::{GaussianSpec, MomentSet};
use nougat_core::linalg::{min_eigenvalue_sym, unvec, vec};
use nougat_core::metrics::{roc, AlarmRecord};
use nougat_core::theory::{variance_change, variance_null, AlgoConfig, ChangeScenario, GVariance, TheoryOptions};
use nougat_core::{kappa, Dictionary, KernelParams, WindowConfig, WindowStats};
use proptest::collection::vec as pvec;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

pub type Check = Result<(), String>;

fn runner(cases: u32) -> TestRunner {
    let cfg = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(cfg, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn finish<T: std::fmt::Debug>(r: Result<(), proptest::test_runner::TestError<T>>) -> Check {
    r.map_err(|e| e.to_string())
}

fn point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    pvec(-5.0..5.0f64, dim)
}

fn stream(dim: usize, len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Vec<f64>>> {
    pvec(point(dim), len)
}

/// `kappa(a, b) = kappa(b, a)`, `0 < kappa <= 1`, `kappa(a, a) = 1`.
pub fn kernel_symmetry_bounds() -> Check {
    let strat = (1usize..6).prop_flat_map(|d| (point(d), point(d), 0.05..10.0f64));
    finish(runner(512).run(&strat, |(a, b, sigma)| {
        let p = KernelParams::new(sigma).unwrap();
        let kab = kappa(&a, &b, p).unwrap();
        let kba = kappa(&b, &a, p).unwrap();
        prop_assert_eq!(kab, kba);
        prop_assert!(kab <= 1.0);
        prop_assert!(kab >= 0.0);
        let d2: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
        if d2 / (2.0 * sigma * sigma) < 700.0 {
            prop_assert!(kab > 0.0);
        }
        prop_assert_eq!(kappa(&a, &a, p).unwrap(), 1.0);
        Ok(())
    }))
}

/// Online growth never admits an atom whose coherence with the dictionary
/// exceeds `eta0`.
pub fn coherence_invariant() -> Check {
    let strat = (1usize..4).prop_flat_map(|d| (stream(d, 1..120), 0.2..3.0f64, 0.05..0.99f64));
    finish(runner(256).run(&strat, |(ys, sigma, eta0)| {
        let p = KernelParams::new(sigma).unwrap();
        let mut dict = Dictionary::seeded(&ys[0], p, eta0).unwrap();
        for y in &ys[1..] {
            let before = dict.len();
            let admit = dict.coherence(y).unwrap() <= eta0;
            prop_assert_eq!(dict.try_insert(y).unwrap(), admit);
            prop_assert_eq!(dict.len(), before + usize::from(admit));
        }
        prop_assert!(dict.max_pairwise_coherence() <= eta0);
        Ok(())
    }))
}

/// `H_ref` stays symmetric PSD through pushes and dictionary growth, and the
/// predicted second moment of `theta` stays symmetric PSD with `var_g >= 0`.
pub fn psd_preservation() -> Check {
    let strat = (1usize..4).prop_flat_map(|d| (stream(d, 10..150), 0.3..3.0f64, 1usize..8, 1usize..6));
    finish(runner(128).run(&strat, |(ys, sigma, n_ref, n_test)| {
        let p = KernelParams::new(sigma).unwrap();
        let mut dict = Dictionary::seeded(&ys[0], p, 0.6).unwrap();
        let mut stats = WindowStats::new(WindowConfig::new(n_ref, n_test).unwrap(), dict.len());
        for y in &ys {
            if dict.try_insert(y).unwrap() {
                stats.extend_dimension(&dict).unwrap();
            }
            stats.push(y, &dict).unwrap();
            let g = stats.gram_ref();
            prop_assert!(g.iter().all(|v| v.is_finite()));
            prop_assert!((g - g.transpose()).abs().max() == 0.0);
            prop_assert!(min_eigenvalue_sym(g) >= -1e-12, "min eig {}", min_eigenvalue_sym(g));
        }
        Ok(())
    }))?;

    let strat = (
        pvec(-1.0..1.0f64, 2),
        0.2..1.0f64,
        -0.8..0.8f64,
        0.2..1.5f64,
        1usize..5,
        (1usize..6, 1usize..6),
        (1e-3..0.3f64, 0.0..0.5f64),
        -0.5..0.5f64,
        any::<u64>(),
    );
    finish(runner(48).run(&strat, |(mean, std, rho, sigma, l, (nr, nt), (mu, nu), th, seed)| {
        let spec0 = GaussianSpec::bivariate([mean[0], mean[1]], std, rho).unwrap();
        let spec1 = GaussianSpec::bivariate([mean[1], mean[0]], std * 1.3, -rho / 2.0).unwrap();
        let dict = random_dictionary(l, sigma, seed);
        let m0 = MomentSet::gaussian(&dict, &spec0).unwrap();
        let m1 = MomentSet::gaussian(&dict, &spec1).unwrap();
        let w = WindowConfig::new(nr, nt).unwrap();
        let Ok(cfg) = AlgoConfig::new(mu, nu, w, DVector::from_element(dict.len(), th)) else {
            return Ok(());
        };
        let sc = ChangeScenario { t0: 20, moments0: m0.clone(), moments1: m1 };
        for neglect_mean in [false, true] {
            for g_variance in [GVariance::Reduced, GVariance::Full] {
                let opts = TheoryOptions { neglect_mean, g_variance };
                let a = variance_null(&cfg, &m0, 60, opts).unwrap();
                let b = variance_change(&cfg, &sc, 60, opts).unwrap();
                for tr in [&a, &b] {
                    let c = &tr.c_final;
                    prop_assert!((c - c.transpose()).abs().max() == 0.0);
                    let scale = c.abs().max().max(1e-300);
                    prop_assert!(min_eigenvalue_sym(c) >= -1e-9 * scale, "C not PSD: {}", min_eigenvalue_sym(c));
                    if neglect_mean {
                        prop_assert!(tr.var_g.iter().all(|&v| v >= -1e-15));
                    }
                }
            }
        }
        Ok(())
    }))
}

/// Column-major `vec` and its inverse round-trip exactly.
pub fn vec_round_trip() -> Check {
    let strat = (1usize..7, 1usize..7).prop_flat_map(|(r, c)| (Just(r), Just(c), pvec(-1e3..1e3f64, r * c)));
    finish(runner(256).run(&strat, |(r, c, data)| {
        let m = DMatrix::from_vec(r, c, data);
        let v = vec(&m);
        prop_assert_eq!(v.len(), r * c);
        for j in 0..c {
            for i in 0..r {
                prop_assert_eq!(v[j * r + i], m[(i, j)]);
            }
        }
        if r == c {
            prop_assert_eq!(unvec(&v, r), m);
        }
        Ok(())
    }))
}

/// Raising the threshold shrinks the alarm set and never raises PFA or PD.
pub fn roc_monotonicity() -> Check {
    let strat = (pvec(pvec(-3.0..3.0f64, 40), 1..12), 1usize..39, pvec(-3.0..3.0f64, 2..20));
    finish(runner(256).run(&strat, |(traces, t0, mut xs)| {
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        for tr in &traces {
            for w in xs.windows(2) {
                let lo = AlarmRecord::from_trace(tr, w[0], t0);
                let hi = AlarmRecord::from_trace(tr, w[1], t0);
                prop_assert!(hi.alarms.iter().all(|a| lo.alarms.contains(a)));
            }
        }
        let curve = roc(&traces, t0, &xs).map_err(|e| TestCaseError::fail(e.to_string()))?;
        for w in curve.points.windows(2) {
            prop_assert!(w[0].threshold <= w[1].threshold);
            prop_assert!(w[1].pfa <= w[0].pfa);
            prop_assert!(w[1].pd <= w[0].pd);
        }
        for p in &curve.points {
            prop_assert!((0.0..=1.0).contains(&p.pfa) && (0.0..=1.0).contains(&p.pd));
        }
        Ok(())
    }))
}

/// Two CLI runs with the same config and seed produce byte-identical files.
pub fn cli_determinism(bin: &Path) -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = dir.path().join("in.csv");
    let mut csv = String::from("x,y\n");
    for i in 0..400 {
        let t = i as f64;
        let shift = if i >= 250 { 1.5 } else { 0.0 };
        csv.push_str(&format!("{},{}\n", (t * 0.37).sin() + shift, (t * 0.91).cos() * 0.5));
    }
    std::fs::write(&input, csv).map_err(|e| e.to_string())?;
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        "detectors = [\"nougat\", \"drulsif\", \"ma\", \"gma\", \"knn\"]\nn_ref = 30\nn_test = 15\nsigma = 0.8\nseed = 7\n\n\
         [mc]\nruns = 12\nsamples = 200\n\n[theory]\nhorizon = 200\ndict_size = 6\n",
    )
    .map_err(|e| e.to_string())?;

    let run = |cmd: &str, out: &Path, extra: &[&str]| -> Check {
        let status = Command::new(bin)
            .arg(cmd)
            .arg("--config")
            .arg(&config)
            .arg("--output")
            .arg(out)
            .args(extra)
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("{cmd} exited with {status}"));
        }
        Ok(())
    };
    let input_s = input.to_str().unwrap();
    for (cmd, extra) in [("detect", vec!["--input", input_s]), ("mc", vec![]), ("theory", vec![])] {
        let a = dir.path().join(format!("{cmd}_a.csv"));
        let b = dir.path().join(format!("{cmd}_b.csv"));
        run(cmd, &a, &extra)?;
        run(cmd, &b, &extra)?;
        let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
        if a.is_empty() || a != b {
            return Err(format!("{cmd}: outputs differ or are empty"));
        }
    }
    Ok(())
}

pub fn random_dictionary(l: usize, sigma: f64, seed: u64) -> Dictionary {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let atoms = (0..l).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
    Dictionary::from_atoms(atoms, KernelParams::new(sigma).unwrap(), 1.0).unwrap()
}

/// Gauss-Hermite nodes and weights for `int e^{-x^2} f(x) dx` (Golub-Welsch).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::zeros(n, n);
    for i in 1..n {
        let b = (i as f64 / 2.0).sqrt();
        j[(i, i - 1)] = b;
        j[(i - 1, i)] = b;
    }
    let eig = j.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> =
        (0..n).map(|i| (eig.eigenvalues[i], std::f64::consts::PI.sqrt() * eig.eigenvectors[(0, i)].powi(2))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// `E f(y)` for `y ~ N(mean, cov)` in two dimensions by tensor Gauss-Hermite
/// quadrature.
pub fn gh_expect2<F: FnMut(&[f64]) -> f64>(spec: &GaussianSpec, n: usize, mut f: F) -> f64 {
    let (x, w) = gauss_hermite(n);
    let chol = spec.cov().clone().cholesky().expect("positive definite").l();
    let mu = spec.mean();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let z = DVector::from_vec(vec![x[i] * 2f64.sqrt(), x[j] * 2f64.sqrt()]);
            let y = mu + &chol * z;
            acc += w[i] * w[j] * f(y.as_slice());
        }
    }
    acc / std::f64::consts::PI
}

/// Closed-form moments against quadrature; returns the largest absolute
/// error over `h`, `H`, `Gamma` and `Delta`.
pub fn moments_vs_quadrature(dict: &Dictionary, spec: &GaussianSpec, nodes: usize) -> f64 {
    let m = MomentSet::gaussian(dict, spec).unwrap();
    let l = dict.len();
    let k = |y: &[f64], i: usize| kappa(y, dict.atom(i), dict.params()).unwrap();
    let mut worst: f64 = 0.0;
    for q in 0..l {
        worst = worst.max((gh_expect2(spec, nodes, |y| k(y, q)) - m.h[q]).abs());
        for r in 0..l {
            worst = worst.max((gh_expect2(spec, nodes, |y| k(y, q) * k(y, r)) - m.gram[(q, r)]).abs());
            for n in 0..l {
                let e = gh_expect2(spec, nodes, |y| k(y, q) * k(y, r) * k(y, n));
                worst = worst.max((e - m.delta[(q * l + r, n)]).abs());
                for s in 0..l {
                    let e = gh_expect2(spec, nodes, |y| k(y, q) * k(y, r) * k(y, n) * k(y, s));
                    worst = worst.max((e - m.gamma[(q * l + r, n * l + s)]).abs());
                }
            }
        }
    }
    worst
}

pub fn detector_set(kinds: &[DetectorKind], mu: f64, nu: f64) -> DetectorSet {
    DetectorSet::new(kinds.to_vec(), mu, nu, f64::INFINITY)
}

pub fn fixed_detector(set: DetectorSet, w: WindowConfig, dict: &Dictionary) -> StreamDetector {
    StreamDetector::new(set, w, DictionaryMode::Fixed(dict.clone())).unwrap()
}

/// Largest deviation, relative to `L`, between recursively maintained window
/// statistics and a batch recomputation, over `steps` pushes of a drifting
/// stream whose dictionary keeps growing. Drift repair is disabled.
pub fn window_recursion_error(steps: usize, seed: u64) -> (f64, usize, usize) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let w = WindowConfig::new(40, 25).unwrap();
    let p = KernelParams::new(0.7).unwrap();
    let mut y = vec![0.0, 0.0, 0.0];
    let mut dict = Dictionary::seeded(&y, p, 0.3).unwrap().with_max_len(Some(48));
    let mut stats = WindowStats::new(w, dict.len()).with_repair_every(0);
    let mut worst: f64 = 0.0;
    let mut growth_steps = 0;
    for t in 0..steps {
        // slow random walk so new regions keep appearing
        for v in y.iter_mut() {
            *v = 0.999 * *v + rng.random_range(-0.15..0.15) + if t % 3000 == 0 { 2.0 } else { 0.0 };
        }
        if dict.try_insert(&y).unwrap() {
            stats.extend_dimension(&dict).unwrap();
            if t > w.total() {
                growth_steps += 1;
            }
        }
        stats.push(&y, &dict).unwrap();

        let l = dict.len();
        let feats: Vec<DVector<f64>> = stats.raw().map(|s| dict.kvec(s).unwrap()).collect();
        let n_ref_buf = stats.ref_count();
        let mut h_ref = DVector::zeros(l);
        let mut gram = DMatrix::zeros(l, l);
        for k in &feats[..n_ref_buf] {
            h_ref += k;
            gram += k * k.transpose();
        }
        h_ref /= w.n_ref as f64;
        gram /= w.n_ref as f64;
        let mut h_test = DVector::zeros(l);
        for k in &feats[n_ref_buf..] {
            h_test += k;
        }
        h_test /= w.n_test as f64;
        let err = (stats.h_ref() - &h_ref)
            .amax()
            .max((stats.h_test() - &h_test).amax())
            .max((stats.gram_ref() - &gram).amax())
            .max((stats.e_opt() - (&h_ref - &h_test)).amax());
        worst = worst.max(err / l as f64);
    }
    (worst, dict.len(), growth_steps)
}
