use nalgebra::DVector;

use super::AlarmRule;
use crate::error::{check_dim, Error, Result};
use crate::windows::WindowStats;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NougatParams {
    /// Gradient step size.
    pub mu: f64,
    /// Ridge regularization.
    pub nu: f64,
    /// Detection threshold.
    pub xi: f64,
    pub rule: AlarmRule,
}

impl NougatParams {
    pub fn new(mu: f64, nu: f64, xi: f64) -> Result<Self> {
        let p = Self { mu, nu, xi, rule: AlarmRule::Shifted };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::validation(format!("mu must be > 0; got {}", self.mu)));
        }
        if !(self.nu.is_finite() && self.nu >= 0.0) {
            return Err(Error::validation(format!("nu must be >= 0; got {}", self.nu)));
        }
        if self.xi.is_nan() {
            return Err(Error::validation("xi must not be NaN"));
        }
        Ok(())
    }
}

/// Online density-ratio weights updated by one gradient step of the
/// windowed quadratic cost per sample:
///
/// `theta <- theta - mu * ((H_ref + nu I) theta + e_opt)`, then
/// `g = theta^T h_test`.
#[derive(Debug, Clone)]
pub struct NougatState {
    params: NougatParams,
    theta: DVector<f64>,
    g: f64,
    scratch: DVector<f64>,
}

impl NougatState {
    pub fn new(params: NougatParams, dict_len: usize) -> Self {
        Self::with_theta(params, DVector::zeros(dict_len))
    }

    pub fn with_theta(params: NougatParams, theta0: DVector<f64>) -> Self {
        let l = theta0.len();
        Self { params, theta: theta0, g: 0.0, scratch: DVector::zeros(l) }
    }

    pub fn params(&self) -> &NougatParams {
        &self.params
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    /// Last statistic value.
    pub fn g(&self) -> f64 {
        self.g
    }

    /// Appends a zero weight after a dictionary insertion.
    pub fn grow(&mut self) {
        self.theta = self.theta.clone().push(0.0);
        self.scratch = DVector::zeros(self.theta.len());
    }

    /// One update from warm window statistics; returns the new statistic.
    pub fn step(&mut self, stats: &WindowStats) -> Result<f64> {
        check_dim(self.theta.len(), stats.dict_len())?;
        let NougatParams { mu, nu, .. } = self.params;
        // scratch = H_ref theta
        self.scratch.gemv(1.0, stats.gram_ref(), &self.theta, 0.0);
        self.theta *= 1.0 - mu * nu;
        self.theta.axpy(-mu, &self.scratch, 1.0);
        self.theta.axpy(-mu, stats.e_opt(), 1.0);
        self.g = self.theta.dot(stats.h_test());
        Ok(self.g)
    }

    pub fn alarm(&self) -> bool {
        self.params.rule.fires(self.g, self.params.xi)
    }
}
