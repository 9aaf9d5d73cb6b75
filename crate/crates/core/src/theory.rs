//! Mean and second-moment recursions of the NOUGAT weights and statistic.
//!
//! Update `t = 1, 2, ...` uses the windows ending at the `t`-th warm sample.
//! Starting from `m_0 = theta0` and `C_0 = theta0 theta0^T`:
//!
//! ```text
//! m_t = m_{t-1} - mu (H_ref + nu I) m_{t-1} + mu (h_test - h_ref)
//! C_t = (1 - mu nu)^2 C - mu (1 - mu nu) (H_ref C + C H_ref)
//!       + mu^2 (T + Q + Z + Z^T) - mu (1 - mu nu) (N + N^T)
//! ```
//!
//! where `T = E{H_ref C H_ref}`, `Q = E{e e^T}`, `Z = E{e m^T H_ref}` and
//! `N = E{e} m^T`, `e = h_ref - h_test`, all evaluated from the window
//! composition (how many samples of each distribution sit in each window).
//! `C` is the raw second moment `E{theta theta^T}`, not a covariance.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::gaussian_moments::MomentSet;
use crate::io::fmt_f64;
use crate::linalg::{eigenvalues_sym, kron_sum, lyapunov_sym, max_eigenvalue_sym, symmetrize, unvec, vec};
use crate::windows::WindowConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct AlgoConfig {
    pub mu: f64,
    pub nu: f64,
    pub window: WindowConfig,
    pub theta0: DVector<f64>,
}

impl AlgoConfig {
    pub fn new(mu: f64, nu: f64, window: WindowConfig, theta0: DVector<f64>) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::validation(format!("mu must be > 0; got {mu}")));
        }
        if !(nu.is_finite() && nu >= 0.0) {
            return Err(Error::validation(format!("nu must be >= 0; got {nu}")));
        }
        if theta0.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("theta0 must be finite"));
        }
        Ok(Self { mu, nu, window, theta0 })
    }

    pub fn dict_len(&self) -> usize {
        self.theta0.len()
    }

    fn n_ref(&self) -> f64 {
        self.window.n_ref as f64
    }

    fn n_test(&self) -> f64 {
        self.window.n_test as f64
    }
}

/// A single switch from `moments0` to `moments1`. `t0` is the first update
/// whose test window holds a post-change sample.
#[derive(Debug, Clone)]
pub struct ChangeScenario {
    pub t0: usize,
    pub moments0: MomentSet,
    pub moments1: MomentSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Pre,
    TestMixed,
    RefMixed,
    Post,
}

/// Window composition at one update: `n0`/`n1` pre/post-change samples in the
/// test window, `n0_ref`/`n1_ref` in the reference window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegimeSchedule {
    pub regime: Regime,
    pub n0: usize,
    pub n1: usize,
    pub n0_ref: usize,
    pub n1_ref: usize,
}

pub fn regime_schedule(t: usize, t0: usize, n_ref: usize, n_test: usize) -> RegimeSchedule {
    if t < t0 {
        RegimeSchedule { regime: Regime::Pre, n0: n_test, n1: 0, n0_ref: n_ref, n1_ref: 0 }
    } else if t < t0 + n_test {
        let n1 = t - t0 + 1;
        RegimeSchedule { regime: Regime::TestMixed, n0: n_test - n1, n1, n0_ref: n_ref, n1_ref: 0 }
    } else if t < t0 + n_test + n_ref {
        let n1_ref = t - (t0 + n_test) + 1;
        RegimeSchedule { regime: Regime::RefMixed, n0: 0, n1: n_test, n0_ref: n_ref - n1_ref, n1_ref }
    } else {
        RegimeSchedule { regime: Regime::Post, n0: 0, n1: n_test, n0_ref: 0, n1_ref: n_ref }
    }
}

/// How `Var{g_t}` is evaluated from `(m_t, C_t)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum GVariance {
    /// `(tr(H_test C) - (h_test^T m)^2) / N_test`.
    #[default]
    Reduced,
    /// `tr(E{h_test h_test^T} C) - (h_test^T m)^2`, the exact value when
    /// `theta` and the test window are independent.
    Full,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TheoryOptions {
    /// Drop `m` from the second-moment recursion (`Z = N = 0`) and from
    /// `Var{g}`.
    pub neglect_mean: bool,
    pub g_variance: GVariance,
}

/// Per-update theory output. Index `i` holds update `t = i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryTrace {
    pub m_theta: Vec<DVector<f64>>,
    pub mean_g: Vec<f64>,
    /// Empty when only the mean was requested.
    pub var_g: Vec<f64>,
    /// `C` after the last update (`theta0 theta0^T` if only the mean ran).
    pub c_final: DMatrix<f64>,
}

impl TheoryTrace {
    pub fn len(&self) -> usize {
        self.mean_g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean_g.is_empty()
    }

    /// Columns `t, mean_g, var_g` and optionally `m_1..m_L`.
    pub fn write_csv<W: Write>(&self, mut w: W, with_m: bool) -> Result<()> {
        let l = self.m_theta.first().map_or(0, |m| m.len());
        write!(w, "t,mean_g,var_g")?;
        if with_m {
            for i in 1..=l {
                write!(w, ",m_{i}")?;
            }
        }
        writeln!(w)?;
        for i in 0..self.len() {
            let var = self.var_g.get(i).copied().unwrap_or(f64::NAN);
            write!(w, "{},{},{}", i + 1, fmt_f64(self.mean_g[i]), fmt_f64(var))?;
            if with_m {
                for v in self.m_theta[i].iter() {
                    write!(w, ",{}", fmt_f64(*v))?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Largest step size keeping the mean recursion stable: `2 / lambda_max(H + nu I)`.
pub fn step_bound(h: &DMatrix<f64>, nu: f64) -> f64 {
    let n = h.nrows();
    let lmax = max_eigenvalue_sym(&(h + DMatrix::identity(n, n) * nu));
    if lmax <= 0.0 {
        f64::INFINITY
    } else {
        2.0 / lmax
    }
}

fn check_moments(cfg: &AlgoConfig, m: &MomentSet) -> Result<()> {
    check_dim(cfg.dict_len(), m.dict_len())
}

/// `E{h h^T}` for a window of `n` samples holding `c0` draws of `m0` and `c1`
/// of `m1`.
fn window_outer(c0: f64, c1: f64, n: f64, m0: &MomentSet, m1: &MomentSet) -> DMatrix<f64> {
    let s = &m0.h * c0 + &m1.h * c1;
    let mut out = &s * s.transpose();
    if c0 > 0.0 {
        out += (&m0.gram - &m0.h * m0.h.transpose()) * c0;
    }
    if c1 > 0.0 {
        out += (&m1.gram - &m1.h * m1.h.transpose()) * c1;
    }
    out / (n * n)
}

struct Engine<'a> {
    cfg: &'a AlgoConfig,
    m0: &'a MomentSet,
    m1: &'a MomentSet,
    opts: TheoryOptions,
}

impl Engine<'_> {
    /// Advances `(m, c)` by one update and returns `(E{g}, Var{g})`.
    fn step(&self, sch: &RegimeSchedule, m: &mut DVector<f64>, c: Option<&mut DMatrix<f64>>) -> (f64, f64) {
        let cfg = self.cfg;
        let (m0, m1) = (self.m0, self.m1);
        let (nr, nt) = (cfg.n_ref(), cfg.n_test());
        let (a0, a1) = (sch.n0_ref as f64, sch.n1_ref as f64);
        let (b0, b1) = (sch.n0 as f64, sch.n1 as f64);
        let (mu, nu) = (cfg.mu, cfg.nu);
        let l = m.len();

        let sh_ref = &m0.h * a0 + &m1.h * a1;
        let sgram_ref = &m0.gram * a0 + &m1.gram * a1;
        let h_ref = &sh_ref / nr;
        let gram_ref = &sgram_ref / nr;
        let h_test = (&m0.h * b0 + &m1.h * b1) / nt;
        let a = 1.0 - mu * nu;

        let mut var = f64::NAN;
        let mut new_m = &*m * a - &gram_ref * &*m * mu + (&h_test - &h_ref) * mu;
        if let Some(c) = c {
            // T = E{H_ref C H_ref}
            let cv = vec(c);
            let mut t = &sgram_ref * &*c * &sgram_ref;
            for (cnt, mm) in [(a0, m0), (a1, m1)] {
                if cnt > 0.0 {
                    t += unvec(&(&mm.gamma * &cv), l) * cnt;
                    t -= &mm.gram * &*c * &mm.gram * cnt;
                }
            }
            t /= nr * nr;

            let outer_test = window_outer(b0, b1, nt, m0, m1);
            let outer_ref = window_outer(a0, a1, nr, m0, m1);
            let q = &outer_test + &outer_ref - &h_test * h_ref.transpose() - &h_ref * h_test.transpose();

            let mut next = &*c * (a * a) - (&gram_ref * &*c + &*c * &gram_ref) * (mu * a) + (t + q) * (mu * mu);
            if !self.opts.neglect_mean {
                // Z = E{e m^T H_ref}, N = E{e} m^T
                let mut z = &sh_ref * (&sgram_ref * &*m).transpose();
                for (cnt, mm) in [(a0, m0), (a1, m1)] {
                    if cnt > 0.0 {
                        z += unvec(&(&mm.delta * &*m), l) * cnt;
                        z -= &mm.h * (&mm.gram * &*m).transpose() * cnt;
                    }
                }
                z /= nr * nr;
                z -= &h_test * (&gram_ref * &*m).transpose();
                let n = (&h_ref - &h_test) * m.transpose();
                next += (&z + z.transpose()) * (mu * mu) - (&n + n.transpose()) * (mu * a);
            }
            symmetrize(&mut next);
            *c = next;

            let mean_part = if self.opts.neglect_mean { 0.0 } else { h_test.dot(&new_m).powi(2) };
            var = match self.opts.g_variance {
                GVariance::Reduced => {
                    let gram_test = (&m0.gram * b0 + &m1.gram * b1) / nt;
                    ((&gram_test * &*c).trace() - mean_part) / nt
                }
                GVariance::Full => (&outer_test * &*c).trace() - mean_part,
            };
        }
        std::mem::swap(m, &mut new_m);
        (h_test.dot(m), var)
    }

    fn run(&self, horizon: usize, t0: Option<usize>, with_var: bool) -> TheoryTrace {
        let w = self.cfg.window;
        let mut m = self.cfg.theta0.clone();
        let mut c = &m * m.transpose();
        let mut out = TheoryTrace {
            m_theta: Vec::with_capacity(horizon),
            mean_g: Vec::with_capacity(horizon),
            var_g: Vec::with_capacity(if with_var { horizon } else { 0 }),
            c_final: DMatrix::zeros(0, 0),
        };
        for t in 1..=horizon {
            let sch = regime_schedule(t, t0.unwrap_or(usize::MAX), w.n_ref, w.n_test);
            let (g, v) = self.step(&sch, &mut m, with_var.then_some(&mut c));
            out.m_theta.push(m.clone());
            out.mean_g.push(g);
            if with_var {
                out.var_g.push(v);
            }
        }
        out.c_final = c;
        out
    }
}

/// Mean of `theta_t` and `g_t` with no change.
pub fn mean_null(cfg: &AlgoConfig, moments: &MomentSet, horizon: usize) -> Result<TheoryTrace> {
    check_moments(cfg, moments)?;
    let e = Engine { cfg, m0: moments, m1: moments, opts: TheoryOptions::default() };
    Ok(e.run(horizon, None, false))
}

/// Mean and variance of `g_t` with no change.
///
/// With `neglect_mean` set, or `theta0 = 0`, this iterates the closed
/// operator `c <- S c + mu^2 vec(Q)` (see [`null_operator`]) and reports
/// `tr(H C) / N_test`.
pub fn variance_null(
    cfg: &AlgoConfig,
    moments: &MomentSet,
    horizon: usize,
    opts: TheoryOptions,
) -> Result<TheoryTrace> {
    check_moments(cfg, moments)?;
    if !(opts.neglect_mean || cfg.theta0.iter().all(|&v| v == 0.0)) {
        let e = Engine { cfg, m0: moments, m1: moments, opts };
        return Ok(e.run(horizon, None, true));
    }
    let l = cfg.dict_len();
    let mean = mean_null(cfg, moments, horizon)?;
    let q = null_q(cfg, moments);
    let mu2 = cfg.mu * cfg.mu;
    let mut c = &cfg.theta0 * cfg.theta0.transpose();
    let mut var_g = Vec::with_capacity(horizon);
    let outer = match opts.g_variance {
        GVariance::Reduced => moments.gram.clone() / cfg.n_test(),
        GVariance::Full => window_outer(cfg.n_test(), 0.0, cfg.n_test(), moments, moments),
    };
    for _ in 0..horizon {
        let mut next = unvec(&apply_null_operator(cfg, moments, &vec(&c)), l) + &q * mu2;
        symmetrize(&mut next);
        c = next;
        var_g.push((&outer * &c).trace());
    }
    Ok(TheoryTrace { var_g, c_final: c, ..mean })
}

/// `Q = (1/N_ref + 1/N_test)(H - h h^T)` under no change.
pub fn null_q(cfg: &AlgoConfig, moments: &MomentSet) -> DMatrix<f64> {
    (&moments.gram - &moments.h * moments.h.transpose()) * (1.0 / cfg.n_ref() + 1.0 / cfg.n_test())
}

/// `S c` with
/// `S = (1 - mu nu)^2 I + (mu^2 / N_ref)(Gamma + (N_ref - 1) H (x) H) - mu (1 - mu nu)(H (+) H)`,
/// without forming `S`.
pub fn apply_null_operator(cfg: &AlgoConfig, moments: &MomentSet, c: &DVector<f64>) -> DVector<f64> {
    let l = cfg.dict_len();
    let (mu, nr) = (cfg.mu, cfg.n_ref());
    let a = 1.0 - mu * cfg.nu;
    let h = &moments.gram;
    let cm = unvec(c, l);
    let hch = vec(&(h * &cm * h));
    let sum = vec(&(h * &cm + &cm * h));
    c * (a * a) + (&moments.gamma * c + hch * (nr - 1.0)) * (mu * mu / nr) - sum * (mu * a)
}

/// The matrix `S` of [`apply_null_operator`].
pub fn null_operator(cfg: &AlgoConfig, moments: &MomentSet) -> DMatrix<f64> {
    let l = cfg.dict_len();
    let (mu, nr) = (cfg.mu, cfg.n_ref());
    let a = 1.0 - mu * cfg.nu;
    let h = &moments.gram;
    let n = l * l;
    DMatrix::identity(n, n) * (a * a) + (&moments.gamma + h.kronecker(h) * (nr - 1.0)) * (mu * mu / nr)
        - kron_sum(h) * (mu * a)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    /// `vec(C_inf)`.
    pub c_inf: DVector<f64>,
    pub var_inf: f64,
    /// Spectral radius of `S`.
    pub rho: f64,
}

/// Fixed point `c_inf = mu^2 (I - S)^(-1) vec(Q)` of the no-change recursion,
/// with `m` neglected.
pub fn steady_state_null(cfg: &AlgoConfig, moments: &MomentSet) -> Result<SteadyState> {
    check_moments(cfg, moments)?;
    let l = cfg.dict_len();
    let s = null_operator(cfg, moments);
    // S is symmetric: Gamma, H (x) H and H (+) H all are.
    let eig = eigenvalues_sym(&s);
    let rho = eig.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if rho >= 1.0 {
        return Err(Error::Unstable { rho });
    }
    let n = l * l;
    let rhs = vec(&null_q(cfg, moments)) * (cfg.mu * cfg.mu);
    let lhs = DMatrix::identity(n, n) - s;
    let c_inf = lhs
        .clone()
        .cholesky()
        .map(|ch| ch.solve(&rhs))
        .or_else(|| lhs.lu().solve(&rhs))
        .ok_or_else(|| Error::numerical("I - S is singular"))?;
    let var_inf = (&moments.gram * unvec(&c_inf, l)).trace() / cfg.n_test();
    Ok(SteadyState { c_inf, var_inf, rho })
}

/// Small step-size steady-state variance `(mu / N_test) tr(H X)` with
/// `(nu I + H) X + X (nu I + H) = Q`.
pub fn smallmu_variance(cfg: &AlgoConfig, moments: &MomentSet) -> Result<f64> {
    check_moments(cfg, moments)?;
    let l = cfg.dict_len();
    let a = &moments.gram + DMatrix::identity(l, l) * cfg.nu;
    let x = lyapunov_sym(&a, &null_q(cfg, moments))?;
    Ok(cfg.mu / cfg.n_test() * (&moments.gram * x).trace())
}

/// Same value as [`smallmu_variance`] through
/// `(mu / N_test) vec(H)^T (2 nu I + H (+) H)^(-1) vec(Q)`.
pub fn smallmu_variance_kron(cfg: &AlgoConfig, moments: &MomentSet) -> Result<f64> {
    check_moments(cfg, moments)?;
    let l = cfg.dict_len();
    let n = l * l;
    let m = DMatrix::identity(n, n) * (2.0 * cfg.nu) + kron_sum(&moments.gram);
    let x =
        m.lu().solve(&vec(&null_q(cfg, moments))).ok_or_else(|| Error::numerical("2 nu I + H (+) H is singular"))?;
    Ok(cfg.mu / cfg.n_test() * vec(&moments.gram).dot(&x))
}

fn check_scenario(cfg: &AlgoConfig, sc: &ChangeScenario) -> Result<()> {
    check_moments(cfg, &sc.moments0)?;
    check_moments(cfg, &sc.moments1)
}

/// Mean of `theta_t` and `g_t` across a single change.
pub fn mean_change(cfg: &AlgoConfig, scenario: &ChangeScenario, horizon: usize) -> Result<TheoryTrace> {
    check_scenario(cfg, scenario)?;
    let e = Engine { cfg, m0: &scenario.moments0, m1: &scenario.moments1, opts: TheoryOptions::default() };
    Ok(e.run(horizon, Some(scenario.t0), false))
}

/// Mean and variance of `g_t` across a single change.
pub fn variance_change(
    cfg: &AlgoConfig,
    scenario: &ChangeScenario,
    horizon: usize,
    opts: TheoryOptions,
) -> Result<TheoryTrace> {
    check_scenario(cfg, scenario)?;
    let e = Engine { cfg, m0: &scenario.moments0, m1: &scenario.moments1, opts };
    Ok(e.run(horizon, Some(scenario.t0), true))
}
