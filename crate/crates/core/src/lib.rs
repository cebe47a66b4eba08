//! Changepoint detection for multidimensional trajectories with continuous
//! piecewise-linear signal models.
//!
//! A trajectory is fitted by least squares on a hinge basis for every
//! candidate changepoint vector, scored with a penalized profile likelihood,
//! and the changepoint space is searched with a four-move Metropolis–Hastings
//! sampler. Population summaries (cumulative speed allocation, maximum
//! sustained speed ECDFs, duration-weighted KDEs) operate on the resulting
//! segmentations.
//!
//! Units are seconds and micrometres throughout.

pub mod criterion;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod model;
pub mod sampler;
pub mod seed;
pub mod simulate;
pub mod stats;

pub use criterion::{score, ScoreBreakdown, Scorer};
pub use error::{Error, Result};
pub use fit::{build_design, fit_given_changepoints, fit_with_times, rss_of, DesignMatrix};
pub use model::{
    cp_vector_to_times, parameter_count, ChainTrace, ChangepointVector, McmcConfig, ScoreConfig,
    Segmentation, Trajectory,
};
pub use sampler::{cplass, run_chain, Detection, ProposalKind, ProposalMix};
