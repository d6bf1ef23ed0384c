//! Median-of-means point estimators.
//!
//! All estimators here share one pipeline: split the batch into contiguous
//! blocks, average each block, average blocks over a family of `l`-subsets,
//! and take the median of those subset means. Classical median-of-means is
//! the `l = 1` case and the full permutation-invariant estimator is the
//! `b = 1` case.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::design::{enumerate_subsets, SubsetDesign, SubsetSampler};
use crate::error::{Error, Result};
use crate::plan::{block_means, make_block_plan, BlockMeans, BlockPlan};
use crate::sample::{median_in_place, pairwise_mean, SampleBatch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorId {
    Mom,
    UmomFull,
    BlockUmomExact,
    BlockUmomSubsampled,
    SampleMean,
}

impl EstimatorId {
    pub const ALL: [EstimatorId; 5] = [
        EstimatorId::Mom,
        EstimatorId::UmomFull,
        EstimatorId::BlockUmomExact,
        EstimatorId::BlockUmomSubsampled,
        EstimatorId::SampleMean,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorId::Mom => "mom",
            EstimatorId::UmomFull => "umom_full",
            EstimatorId::BlockUmomExact => "block_umom_exact",
            EstimatorId::BlockUmomSubsampled => "block_umom_subsampled",
            EstimatorId::SampleMean => "sample_mean",
        }
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown estimator '{s}'")))
    }
}

/// The outcome of one estimator run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimator_id: EstimatorId,
    pub value: f64,
    pub plan: BlockPlan,
    pub subset_means_evaluated: u64,
    pub design: SubsetDesign,
    pub discarded_tail: usize,
}

impl EstimateReport {
    fn new(estimator_id: EstimatorId, value: f64, plan: BlockPlan, design: SubsetDesign) -> Self {
        Self {
            estimator_id,
            value,
            plan,
            subset_means_evaluated: design.evaluations(),
            design,
            discarded_tail: plan.discarded_tail(),
        }
    }
}

/// Mean of the blocks indexed by `subset`, gathered through `scratch`.
///
/// Values are summed in ascending order so the result does not depend on
/// how blocks are labelled.
#[inline]
fn subset_mean(z: &[f64], subset: &[usize], scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend(subset.iter().map(|&j| z[j]));
    scratch.sort_unstable_by(f64::total_cmp);
    pairwise_mean(scratch)
}

/// Every subset mean `Z_J` of the exact design, in lexicographic order of `J`.
pub fn exact_subset_means(z: &BlockMeans) -> Result<Vec<f64>> {
    let plan = z.plan();
    let mut subsets = enumerate_subsets(plan.n, plan.l)?;
    let count = SubsetDesign::exact(plan.n, plan.l)?.evaluations();
    let mut means = Vec::with_capacity(count as usize);
    let mut scratch = Vec::with_capacity(plan.l);
    while let Some(subset) = subsets.next_subset() {
        means.push(subset_mean(z.values(), subset, &mut scratch));
    }
    Ok(means)
}

/// `T` subset means over uniformly drawn subsets (with replacement across draws).
pub fn sampled_subset_means(z: &BlockMeans, t: u64, seed: u64) -> Result<Vec<f64>> {
    let plan = z.plan();
    SubsetDesign::subsampled(plan.n, plan.l, t, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampler = SubsetSampler::new(plan.n, plan.l)?;
    let mut scratch = Vec::with_capacity(plan.l);
    Ok((0..t)
        .map(|_| subset_mean(z.values(), sampler.sample(&mut rng), &mut scratch))
        .collect())
}

/// Overlapping-block median of means over every `l`-subset of blocks.
pub fn block_umom_exact(batch: &SampleBatch, plan: &BlockPlan) -> Result<EstimateReport> {
    let design = SubsetDesign::exact(plan.n, plan.l)?;
    let z = block_means(batch, plan)?;
    let mut means = exact_subset_means(&z)?;
    let value = median_in_place(&mut means);
    Ok(EstimateReport::new(
        EstimatorId::BlockUmomExact,
        value,
        *plan,
        design,
    ))
}

/// Overlapping-block median of means over `t` random subsets of blocks.
///
/// Deterministic in `(batch, plan, t, seed)`.
pub fn block_umom_subsampled(
    batch: &SampleBatch,
    plan: &BlockPlan,
    t: u64,
    seed: u64,
) -> Result<EstimateReport> {
    let design = SubsetDesign::subsampled(plan.n, plan.l, t, seed)?;
    let z = block_means(batch, plan)?;
    let mut means = sampled_subset_means(&z, t, seed)?;
    let value = median_in_place(&mut means);
    Ok(EstimateReport::new(
        EstimatorId::BlockUmomSubsampled,
        value,
        *plan,
        design,
    ))
}

/// Classical median of means over `k` disjoint contiguous groups.
pub fn mom_estimate(batch: &SampleBatch, k: usize) -> Result<EstimateReport> {
    let plan = make_block_plan(batch.len(), k, 1)?;
    let design = SubsetDesign::exact(plan.n, 1)?;
    let z = block_means(batch, &plan)?;
    let mut means = z.values().to_vec();
    let value = median_in_place(&mut means);
    Ok(EstimateReport::new(EstimatorId::Mom, value, plan, design))
}

/// Median of means over every subset of `floor(N/k)` raw observations.
///
/// Only feasible for tiny batches; serves as a reference.
pub fn umom_full(batch: &SampleBatch, k: usize) -> Result<EstimateReport> {
    if k == 0 || k > batch.len() {
        return Err(Error::TooManyBlocks {
            blocks: k as u64,
            n_total: batch.len(),
        });
    }
    let plan = make_block_plan(batch.len(), k, batch.len() / k)?;
    debug_assert_eq!(plan.b, 1);
    let report = block_umom_exact(batch, &plan)?;
    Ok(EstimateReport {
        estimator_id: EstimatorId::UmomFull,
        ..report
    })
}

/// Arithmetic mean of every observation, reported in the common format.
pub fn sample_mean_estimate(batch: &SampleBatch) -> Result<EstimateReport> {
    let plan = make_block_plan(batch.len(), 1, 1)?;
    let design = SubsetDesign::exact(1, 1)?;
    let value = crate::sample::sample_mean(batch);
    Ok(EstimateReport::new(
        EstimatorId::SampleMean,
        value,
        plan,
        design,
    ))
}

/// The absolute-loss objective `F(z) = sum_J |sqrt(m) (Z_J - z)|`.
///
/// Its minimizers are exactly the medians of `subset_means`.
pub fn eval_objective(block_means: &BlockMeans, subset_means: &[f64], z: f64) -> f64 {
    let scale = (block_means.plan().m as f64).sqrt();
    subset_means.iter().map(|&s| (scale * (s - z)).abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(v: &[f64]) -> SampleBatch {
        SampleBatch::new(v.to_vec()).unwrap()
    }

    #[test]
    fn mom_examples() {
        let b = batch(&[1., 2., 3., 4., 5., 6.]);
        assert_eq!(mom_estimate(&b, 2).unwrap().value, 3.5);
        assert_eq!(mom_estimate(&b, 1).unwrap().value, 3.5);
        assert_eq!(mom_estimate(&batch(&[3., 1., 2.]), 3).unwrap().value, 2.0);
        assert!(mom_estimate(&b, 7).is_err());
    }

    #[test]
    fn mom_with_remainder_uses_leading_values() {
        let b = batch(&[1., 2., 3., 4., 5., 6., 100.]);
        let r = mom_estimate(&b, 1).unwrap();
        assert_eq!(r.value, pairwise_mean(b.values()));
        assert_eq!(r.discarded_tail, 0);
        let r = mom_estimate(&b, 2).unwrap();
        assert_eq!(r.value, 3.5);
        assert_eq!(r.discarded_tail, 1);
    }

    #[test]
    fn exact_examples() {
        let b = batch(&[0., 1., 2., 3.]);
        let plan = make_block_plan(4, 2, 2).unwrap();
        let r = block_umom_exact(&b, &plan).unwrap();
        assert_eq!(r.value, 1.5);
        assert_eq!(r.subset_means_evaluated, 6);
        assert_eq!(r.estimator_id, EstimatorId::BlockUmomExact);

        let z = block_means(&b, &plan).unwrap();
        assert_eq!(
            exact_subset_means(&z).unwrap(),
            vec![0.5, 1.0, 1.5, 1.5, 2.0, 2.5]
        );
    }

    #[test]
    fn exact_single_subset_is_truncated_mean() {
        let b = batch(&[1., 2., 3., 4., 5., 6., 7., 8., 9., 10., 11.]);
        let plan = make_block_plan(11, 1, 5).unwrap();
        let r = block_umom_exact(&b, &plan).unwrap();
        assert_eq!(r.value, 5.5);
        assert_eq!(r.discarded_tail, 1);
        assert_eq!(r.subset_means_evaluated, 1);
    }

    #[test]
    fn exact_refuses_large_design() {
        let b = batch(&vec![0.0; 4096]);
        let plan = make_block_plan(4096, 32, 8).unwrap();
        let err = block_umom_exact(&b, &plan).unwrap_err();
        assert!(err
            .to_string()
            .starts_with("design too large; use subsampled variant"));
    }

    #[test]
    fn subsampled_degenerate_design_is_grand_mean() {
        let b = batch(&[1., 2., 3., 4., 5., 6.]);
        let plan = make_block_plan(6, 1, 3).unwrap();
        let r = block_umom_subsampled(&b, &plan, 17, 9).unwrap();
        assert_eq!(r.value, 3.5);
        assert_eq!(r.subset_means_evaluated, 17);
    }

    #[test]
    fn subsampled_is_deterministic() {
        let values: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64).collect();
        let b = batch(&values);
        let plan = make_block_plan(200, 5, 4).unwrap();
        let a = block_umom_subsampled(&b, &plan, 300, 42).unwrap();
        let c = block_umom_subsampled(&b, &plan, 300, 42).unwrap();
        assert_eq!(a.value.to_bits(), c.value.to_bits());
    }

    #[test]
    fn umom_full_examples() {
        let b = batch(&[0., 1., 2., 3.]);
        let r = umom_full(&b, 2).unwrap();
        assert_eq!(r.value, 1.5);
        assert_eq!(r.estimator_id, EstimatorId::UmomFull);

        let b = batch(&[4., 8., 1., 0., 9., 2.]);
        let r = umom_full(&b, 3).unwrap();
        assert_eq!(r.subset_means_evaluated, 15);
        let mut pair_means = vec![];
        let v = b.values();
        for i in 0..6 {
            for j in i + 1..6 {
                pair_means.push((v[i] + v[j]) / 2.0);
            }
        }
        assert_eq!(r.value, crate::sample::median(&pair_means).unwrap());

        assert_eq!(umom_full(&b, 6).unwrap().value, 3.0);
    }

    #[test]
    fn sample_mean_report() {
        let r = sample_mean_estimate(&batch(&[1., 2., 3.])).unwrap();
        assert_eq!(r.value, 2.0);
        assert_eq!(r.subset_means_evaluated, 1);
        assert_eq!(r.discarded_tail, 0);
    }

    #[test]
    fn objective_examples() {
        let b = batch(&[0., 1., 2., 3.]);
        let z = block_means(&b, &make_block_plan(4, 4, 1).unwrap()).unwrap();
        assert_eq!(z.plan().m, 1);
        assert_eq!(eval_objective(&z, &[1.5], 1.5), 0.0);
        assert_eq!(eval_objective(&z, &[0.0, 2.0], 0.5), 2.0);
        assert_eq!(eval_objective(&z, &[0.0, 2.0], 1.0), 2.0);
        assert_eq!(eval_objective(&z, &[0.0, 2.0], 3.0), 4.0);
    }

    #[test]
    fn estimator_ids_parse() {
        for id in EstimatorId::ALL {
            assert_eq!(id.as_str().parse::<EstimatorId>().unwrap(), id);
        }
        assert!("median".parse::<EstimatorId>().is_err());
    }
}
