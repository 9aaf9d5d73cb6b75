//! Streaming kernel change-point detection.
//!
//! The core detector, [`detectors::NougatState`], keeps a kernel
//! density-ratio model between a reference and a test window and refines it
//! by one gradient step per sample. Exact (`drulsif`), moving-average and
//! nearest-neighbor detectors share the same window machinery. The
//! [`theory`] module predicts the mean and variance of the statistic for
//! Gaussian data, using the closed-form kernel moments of
//! [`gaussian_moments`].

pub mod cli;
pub mod detectors;
pub mod error;
pub mod gaussian_moments;
pub mod io;
pub mod kernel_dict;
pub mod linalg;
pub mod metrics;
pub mod simgen;
pub mod theory;
pub mod windows;

pub use error::{Error, Result};
pub use kernel_dict::{kappa, Dictionary, KernelParams};
pub use windows::{WindowConfig, WindowStats};
