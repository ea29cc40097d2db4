//! Rotating synthetic aperture radar (ROSAR) toolkit.
//!
//! The crate covers the full chain: closed-form geometry of a radar spinning
//! on a circle, deramped FMCW simulation and range compression, offline
//! synthesis of robust sparse azimuth filters by successive convex
//! approximation over second-order cone programs, the imaging backends, and
//! image-quality metrics.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod conic;
pub mod error;
pub mod geometry;
pub mod imaging;
pub mod io;
pub mod metrics;
pub mod rng;
pub mod signal;
pub mod synthesis;

pub use config::{Antenna, JitterModel, RadarConfig, SynthesisParams, DEFAULT_JITTER_SIGMA_DEG};
pub use error::{Error, Result};
pub use geometry::{ApertureWindow, SteeringVector, TargetPolar};
pub use imaging::{Backend, ImageGrid, ImageOptions, SarImage};
pub use signal::{DataKind, DataMatrix, PointScene, PointTarget};
pub use num_complex::{self, Complex64};
