mod common;

use nalgebra::{DMatrix, DVector};
use nougat_core::gaussian_moments::{GaussianSpec, MomentSet};
use nougat_core::linalg::{unvec, vec};
use nougat_core::simgen::{rng_from_seed, sample_dictionary, GaussianSampler};
use nougat_core::theory::*;
use nougat_core::{KernelParams, WindowConfig};

struct Setup {
    cfg: AlgoConfig,
    m0: MomentSet,
    m1: MomentSet,
}

fn setup(l: usize, mu: f64, nu: f64, nr: usize, nt: usize, theta: f64) -> Setup {
    let spec0 = GaussianSpec::bivariate([0.0, 0.0], 0.5, 0.25).unwrap();
    let spec1 = GaussianSpec::bivariate([0.0, 0.0], 0.7, 0.1).unwrap();
    let sampler = GaussianSampler::new(&spec0);
    let mut rng = rng_from_seed(99);
    let params = KernelParams::new(0.25).unwrap();
    let dict = sample_dictionary(l, params, &mut rng, |r| sampler.sample(r)).unwrap();
    let w = WindowConfig::new(nr, nt).unwrap();
    let cfg = AlgoConfig::new(mu, nu, w, DVector::from_element(l, theta)).unwrap();
    Setup { cfg, m0: MomentSet::gaussian(&dict, &spec0).unwrap(), m1: MomentSet::gaussian(&dict, &spec1).unwrap() }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn change_model_degenerates_to_null_model() {
    for theta in [0.0, 0.3] {
        let s = setup(6, 0.01, 0.05, 12, 8, theta);
        let sc = ChangeScenario { t0: 50, moments0: s.m0.clone(), moments1: s.m0.clone() };
        for neglect_mean in [false, true] {
            for g_variance in [GVariance::Reduced, GVariance::Full] {
                let opts = TheoryOptions { neglect_mean, g_variance };
                let a = variance_null(&s.cfg, &s.m0, 300, opts).unwrap();
                let b = variance_change(&s.cfg, &sc, 300, opts).unwrap();
                let scale = a.c_final.amax();
                assert!((&a.c_final - &b.c_final).amax() <= 1e-12 * scale);
                for (x, y) in a.var_g.iter().zip(&b.var_g) {
                    assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300), "{x} vs {y}");
                }
                for (x, y) in a.mean_g.iter().zip(&b.mean_g) {
                    assert!((x - y).abs() <= 1e-12);
                }
            }
        }
    }
}

#[test]
fn means_agree_between_models() {
    let s = setup(5, 0.02, 0.01, 10, 10, 0.2);
    let a = mean_null(&s.cfg, &s.m0, 500).unwrap();
    let sc = ChangeScenario { t0: 1_000_000, moments0: s.m0.clone(), moments1: s.m1.clone() };
    let b = mean_change(&s.cfg, &sc, 500).unwrap();
    assert_eq!(a.mean_g, b.mean_g);

    // closed form of the linear mean recursion
    let l = 5;
    let a_mat = DMatrix::identity(l, l) * (1.0 - s.cfg.mu * s.cfg.nu) - &s.m0.gram * s.cfg.mu;
    let mut m = s.cfg.theta0.clone();
    for _ in 0..500 {
        m = &a_mat * m;
    }
    assert!((&m - &a.m_theta[499]).amax() < 1e-14);
    assert!((s.m0.h.dot(&m) - a.mean_g[499]).abs() < 1e-14);
}

#[test]
fn regime_schedule_matches_window_count() {
    for (nr, nt) in [(1, 1), (3, 2), (2, 5), (7, 7)] {
        let w = nr + nt;
        for t0 in 1..20 {
            for t in 1..(t0 + w + 5) {
                // update t holds samples t-w+1..=t; samples >= t0 are post-change
                let post = |lo: isize, hi: isize| (lo..=hi).filter(|&s| s >= t0 as isize).count();
                let (ti, wi, nti) = (t as isize, w as isize, nt as isize);
                let n1_ref = post(ti - wi + 1, ti - nti);
                let n1 = post(ti - nti + 1, ti);
                let s = regime_schedule(t, t0, nr, nt);
                assert_eq!((s.n1, s.n1_ref), (n1, n1_ref), "t={t} t0={t0} nr={nr} nt={nt}");
                assert_eq!(s.n0 + s.n1, nt);
                assert_eq!(s.n0_ref + s.n1_ref, nr);
                let expect = match (n1, n1_ref) {
                    (0, 0) => Regime::Pre,
                    (_, 0) => Regime::TestMixed,
                    // the step at which the reference window fills up still counts as ref-mixed
                    _ if t < t0 + nt + nr => Regime::RefMixed,
                    _ => Regime::Post,
                };
                assert_eq!(s.regime, expect);
            }
        }
    }
}

#[test]
fn operator_matches_kronecker_form() {
    let s = setup(4, 0.03, 0.02, 9, 6, 0.0);
    let op = null_operator(&s.cfg, &s.m0);
    let c = DVector::from_fn(16, |i, _| ((i * 7 % 5) as f64 - 2.0) * 0.1);
    let c = vec(&{
        let m = unvec(&c, 4);
        &m + m.transpose()
    });
    let a = &op * &c;
    let b = apply_null_operator(&s.cfg, &s.m0, &c);
    assert!((a - b).amax() < 1e-15);
    assert!((&op - op.transpose()).amax() < 1e-15);
}

#[test]
fn steady_state_is_fixed_point() {
    let s = setup(16, 5e-4, 1e-3, 250, 250, 0.0);
    let ss = steady_state_null(&s.cfg, &s.m0).unwrap();
    assert!(ss.rho < 1.0);
    let next = apply_null_operator(&s.cfg, &s.m0, &ss.c_inf) + vec(&null_q(&s.cfg, &s.m0)) * 25e-8;
    assert!((&next - &ss.c_inf).amax() <= 1e-10 * ss.c_inf.amax());
    assert!(ss.var_inf > 0.0);
}

#[test]
fn literal_iteration_reaches_steady_state() {
    let s = setup(4, 0.05, 0.2, 6, 4, 0.0);
    let ss = steady_state_null(&s.cfg, &s.m0).unwrap();
    let q = vec(&null_q(&s.cfg, &s.m0)) * (s.cfg.mu * s.cfg.mu);
    let mut c = DVector::zeros(16);
    for _ in 0..1_000_000 {
        c = apply_null_operator(&s.cfg, &s.m0, &c) + &q;
    }
    assert!((&c - &ss.c_inf).amax() <= 1e-8 * ss.c_inf.amax());
    let var = (&s.m0.gram * unvec(&c, 4)).trace() / 4.0;
    assert!(rel(var, ss.var_inf) < 1e-8);
}

#[test]
fn unstable_step_is_reported() {
    let mut s = setup(4, 0.05, 0.2, 6, 4, 0.0);
    s.cfg.mu = 50.0;
    assert!(matches!(steady_state_null(&s.cfg, &s.m0), Err(nougat_core::Error::Unstable { .. })));
}

#[test]
fn lyapunov_matches_kronecker() {
    for l in [3, 8, 16] {
        let s = setup(l, 5e-4, 1e-3, 250, 250, 0.0);
        let a = smallmu_variance(&s.cfg, &s.m0).unwrap();
        let b = smallmu_variance_kron(&s.cfg, &s.m0).unwrap();
        assert!(rel(a, b) < 1e-12, "L={l}: {a} vs {b}");
    }
}

#[test]
fn small_step_gap_shrinks_linearly() {
    let mut gaps = Vec::new();
    for mu in [1e-3, 1e-4, 1e-5] {
        let mut s = setup(8, mu, 1e-3, 250, 250, 0.0);
        s.cfg.mu = mu;
        let exact = steady_state_null(&s.cfg, &s.m0).unwrap().var_inf;
        let approx = smallmu_variance(&s.cfg, &s.m0).unwrap();
        gaps.push(rel(approx, exact));
    }
    for w in gaps.windows(2) {
        let ratio = w[0] / w[1];
        assert!((8.0..12.5).contains(&ratio), "gaps {gaps:?}");
    }
}

#[test]
fn null_q_is_error_covariance() {
    // e = h_ref - h_test with independent windows: Cov(e) = (1/N_ref + 1/N_test)(H - h h^T)
    let s = setup(3, 0.01, 0.01, 5, 3, 0.0);
    let spec = GaussianSpec::bivariate([0.0, 0.0], 0.5, 0.25).unwrap();
    let sampler = GaussianSampler::new(&spec);
    let mut rng = rng_from_seed(4);
    let dict = {
        let mut r = rng_from_seed(99);
        sample_dictionary(3, KernelParams::new(0.25).unwrap(), &mut r, |r| sampler.sample(r)).unwrap()
    };
    let n = 200_000;
    let mut acc = DMatrix::zeros(3, 3);
    for _ in 0..n {
        let mut e = DVector::zeros(3);
        for i in 0..8 {
            let k = dict.kvec(&sampler.sample(&mut rng)).unwrap();
            if i < 5 {
                e += k / 5.0;
            } else {
                e -= k / 3.0;
            }
        }
        acc += &e * e.transpose();
    }
    acc /= n as f64;
    let q = null_q(&s.cfg, &s.m0);
    assert!((acc - &q).amax() < 0.02 * q.amax(), "{q}");
}
