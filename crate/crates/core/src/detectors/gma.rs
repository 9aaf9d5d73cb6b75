use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};
use crate::kernel_dict::Dictionary;

/// Geometrically weighted feature-space mean,
/// `vartheta <- (1 - alpha) vartheta + alpha k(y)`.
///
/// The statistic `|vartheta - nominal|_2` is only available when the nominal
/// feature mean is known.
#[derive(Debug, Clone)]
pub struct GmaState {
    vartheta: DVector<f64>,
    alpha: f64,
    nominal: Option<DVector<f64>>,
}

impl GmaState {
    pub fn new(alpha: f64, dict_len: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::validation(format!("GMA alpha must be in (0, 1]; got {alpha}")));
        }
        Ok(Self { vartheta: DVector::zeros(dict_len), alpha, nominal: None })
    }

    pub fn with_nominal(mut self, nominal: DVector<f64>) -> Result<Self> {
        check_dim(self.vartheta.len(), nominal.len())?;
        self.nominal = Some(nominal);
        Ok(self)
    }

    pub fn vartheta(&self) -> &DVector<f64> {
        &self.vartheta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Appends a zero component after a dictionary insertion. Any nominal mean
    /// is dropped since it no longer matches the feature map.
    pub fn grow(&mut self) {
        self.vartheta = self.vartheta.clone().push(0.0);
        self.nominal = None;
    }

    pub fn step(&mut self, y: &[f64], dict: &Dictionary) -> Result<()> {
        check_dim(self.vartheta.len(), dict.len())?;
        let k = dict.kvec(y)?;
        self.vartheta *= 1.0 - self.alpha;
        self.vartheta.axpy(self.alpha, &k, 1.0);
        Ok(())
    }

    pub fn statistic(&self) -> Option<f64> {
        self.nominal.as_ref().map(|n| (&self.vartheta - n).norm())
    }
}
