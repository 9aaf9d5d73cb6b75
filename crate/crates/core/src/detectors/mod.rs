//! Change-point detectors built on the shared window statistics.

mod drulsif;
mod gma;
mod knn;
mod nougat;
mod runner;

pub use drulsif::{drulsif_solve, drulsif_statistic};
pub use gma::GmaState;
pub use knn::{knn_cross_edges, knn_expected_cross_edges, knn_statistic, KnnConfig};
pub use nougat::{NougatParams, NougatState};
pub use runner::{DetectorKind, DetectorSet, DictionaryMode, StepRecord, StreamDetector};

use crate::windows::WindowStats;

/// Thresholding rule for the density-ratio statistics (NOUGAT, dRuLSIF).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlarmRule {
    /// `|g + 1| > xi`: compares the estimated ratio itself to the threshold.
    #[default]
    Shifted,
    /// `|g| > xi`.
    TwoSided,
}

impl AlarmRule {
    pub fn score(self, g: f64) -> f64 {
        match self {
            Self::Shifted => (g + 1.0).abs(),
            Self::TwoSided => g.abs(),
        }
    }

    pub fn fires(self, g: f64, xi: f64) -> bool {
        self.score(g) > xi
    }
}

/// Moving-average statistic `|h_test - h_ref|_2`.
pub fn ma_statistic(stats: &WindowStats) -> f64 {
    stats.e_opt().norm()
}
