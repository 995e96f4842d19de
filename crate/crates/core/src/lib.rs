//! Distribution-free Bayesian predictive inference with mixtures of finite
//! Polya trees over dyadic segmentations of the unit cube.
//!
//! The pipeline is: choose a [`SegmentationFamily`], fit a
//! [`PosteriorModel`] to data in `[0,1]^P`, then query posterior predictive
//! densities, draw predictive samples, compute conditional quantiles and
//! credible bands, or build full conformal prediction sets. The
//! [`encoding`] module maps mixed continuous/categorical tables into the cube
//! and back.

pub mod conformal;
pub mod encoding;
pub mod error;
pub mod hbeta;
pub mod posterior;
pub mod predictive;
pub mod segmentation;

pub use error::{Error, Result};
pub use hbeta::{BetaTree, Concentration, CountsTree, ProbVector};
pub use posterior::PosteriorModel;
pub use predictive::{CredibleBand, MixtureApproximation, PredictiveGrid, PredictiveSample, Region};

pub use segmentation::{CubeBox, Segmentation, SegmentationFamily, SubintervalPath};
