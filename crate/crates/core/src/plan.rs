//! Block geometry: `n = l * k` disjoint contiguous blocks of `b` observations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::{pairwise_mean, SampleBatch};

/// The `(N, k, l)` geometry of the overlapping-block estimator.
///
/// Observations are split into `n = l * k` contiguous blocks of size
/// `b = floor(N / (l * k))`; a subset of `l` blocks covers `m = l * b`
/// observations, the same group size as classical median-of-means with `k`
/// groups. The trailing `N - n * b` observations are not used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPlan {
    pub n_total: usize,
    pub k: usize,
    pub l: usize,
    pub n: usize,
    pub b: usize,
    pub m: usize,
    pub n_used: usize,
}

impl BlockPlan {
    pub fn new(n_total: usize, k: usize, l: usize) -> Result<Self> {
        if k == 0 || l == 0 {
            return Err(Error::invalid("k and l must be positive"));
        }
        let blocks = (k as u64).saturating_mul(l as u64);
        if blocks > n_total as u64 {
            return Err(Error::TooManyBlocks { blocks, n_total });
        }
        let n = k * l;
        let b = n_total / n;
        Ok(Self {
            n_total,
            k,
            l,
            n,
            b,
            m: l * b,
            n_used: n * b,
        })
    }

    /// Observations dropped from the end of the batch.
    pub fn discarded_tail(&self) -> usize {
        self.n_total - self.n_used
    }

    /// Range of raw observation indices forming block `j` (0-based).
    pub fn block_range(&self, j: usize) -> std::ops::Range<usize> {
        j * self.b..(j + 1) * self.b
    }
}

/// Convenience wrapper around [`BlockPlan::new`].
pub fn make_block_plan(n_total: usize, k: usize, l: usize) -> Result<BlockPlan> {
    BlockPlan::new(n_total, k, l)
}

/// The block means `Z_1, ..., Z_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMeans {
    z: Vec<f64>,
    plan: BlockPlan,
}

impl BlockMeans {
    pub fn values(&self) -> &[f64] {
        &self.z
    }

    pub fn plan(&self) -> &BlockPlan {
        &self.plan
    }

    /// Reorders the blocks; used to check block-level permutation invariance.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.z.len()];
        if order.len() != self.z.len() {
            return Err(Error::invalid(
                "permutation length differs from block count",
            ));
        }
        for &i in order {
            if i >= seen.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::invalid("not a permutation"));
            }
        }
        Ok(Self {
            z: order.iter().map(|&i| self.z[i]).collect(),
            plan: self.plan,
        })
    }
}

/// Averages each contiguous block of the batch, in batch order.
pub fn block_means(batch: &SampleBatch, plan: &BlockPlan) -> Result<BlockMeans> {
    if batch.len() != plan.n_total {
        return Err(Error::PlanMismatch {
            plan_total: plan.n_total,
            batch_total: batch.len(),
        });
    }
    let used = &batch.values()[..plan.n_used];
    let z = used.chunks_exact(plan.b).map(pairwise_mean).collect();
    Ok(BlockMeans { z, plan: *plan })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(v: &[f64]) -> SampleBatch {
        SampleBatch::new(v.to_vec()).unwrap()
    }

    #[test]
    fn plan_examples() {
        let p = make_block_plan(4096, 32, 8).unwrap();
        assert_eq!((p.n, p.b, p.m, p.n_used), (256, 16, 128, 4096));
        assert_eq!(p.discarded_tail(), 0);

        let p = make_block_plan(10, 2, 2).unwrap();
        assert_eq!((p.n, p.b, p.m, p.n_used), (4, 2, 4, 8));
        assert_eq!(p.discarded_tail(), 2);

        let err = make_block_plan(3, 2, 2).unwrap_err();
        assert!(matches!(
            err,
            Error::TooManyBlocks {
                blocks: 4,
                n_total: 3
            }
        ));
        assert!(err
            .to_string()
            .starts_with("too many blocks for sample size"));
    }

    #[test]
    fn zero_parameters_rejected() {
        assert!(make_block_plan(10, 0, 1).is_err());
        assert!(make_block_plan(10, 1, 0).is_err());
    }

    #[test]
    fn block_mean_examples() {
        let p = make_block_plan(4, 2, 2).unwrap();
        assert_eq!(
            block_means(&batch(&[0., 1., 2., 3.]), &p).unwrap().values(),
            &[0., 1., 2., 3.]
        );

        let p = make_block_plan(4, 2, 1).unwrap();
        assert_eq!(
            block_means(&batch(&[0., 2., 4., 6.]), &p).unwrap().values(),
            &[1., 5.]
        );

        let p = make_block_plan(6, 3, 1).unwrap();
        assert_eq!(
            block_means(&batch(&[1.; 6]), &p).unwrap().values(),
            &[1., 1., 1.]
        );
    }

    #[test]
    fn block_means_ignore_tail() {
        let p = make_block_plan(5, 2, 1).unwrap();
        let z = block_means(&batch(&[0., 2., 4., 6., 100.]), &p).unwrap();
        assert_eq!(z.values(), &[1., 5.]);
    }

    #[test]
    fn mismatched_plan_rejected() {
        let p = make_block_plan(8, 2, 2).unwrap();
        assert!(matches!(
            block_means(&batch(&[1.; 6]), &p),
            Err(Error::PlanMismatch {
                plan_total: 8,
                batch_total: 6
            })
        ));
    }

    #[test]
    fn permutation_checked() {
        let p = make_block_plan(3, 3, 1).unwrap();
        let z = block_means(&batch(&[1., 2., 3.]), &p).unwrap();
        assert_eq!(z.permuted(&[2, 0, 1]).unwrap().values(), &[3., 1., 2.]);
        assert!(z.permuted(&[0, 0, 1]).is_err());
        assert!(z.permuted(&[0, 1]).is_err());
    }
}
