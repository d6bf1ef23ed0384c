//! Robust mean estimation with overlapping-block median of means.
//!
//! The central estimator splits `N` observations into `n = l * k` contiguous
//! blocks, averages each block, and returns the median of the averages of
//! `l` blocks taken over every `l`-subset of blocks (or over `T` uniformly
//! drawn subsets when full enumeration is too costly). Classical
//! median-of-means is the `l = 1` case.
//!
//! Alongside the estimators the crate provides seeded synthetic
//! distributions, replicated deviation studies with thread-count independent
//! output, and Monte Carlo diagnostics for the Berry-Esseen functional `g(m)`
//! and the variance of the first Hajek projection of the sign kernel.

pub mod design;
pub mod diagnostics;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod plan;
pub mod rng;
pub mod sample;

pub use design::{
    binomial_saturating, default_t, enumerate_subsets, sample_subset, SubsetCount, SubsetDesign,
    SubsetSampler, ENUMERATION_CAP,
};
pub use diagnostics::{
    g_of_m, g_of_m_grid, hajek_variance, parameter_plan, DiagnosticsReport, GEstimate,
    HajekEstimate, ParameterPlan,
};
pub use distributions::{draw, standardize, DistributionSpec, Family};
pub use error::{Error, Result};
pub use estimators::{
    block_umom_exact, block_umom_subsampled, eval_objective, mom_estimate, sample_mean_estimate,
    umom_full, EstimateReport, EstimatorId,
};
pub use harness::{
    compare_estimators, run_replicates, run_study, tail_curve, variance_summary, Budget,
    DeviationStudyConfig, ErrorMatrix, TailCurve, Threads,
};
pub use plan::{block_means, make_block_plan, BlockMeans, BlockPlan};
pub use sample::{median, sample_mean, SampleBatch};
