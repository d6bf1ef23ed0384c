//! Benchmark fixtures shared by the criterion targets.

use blockmom::rng::stream;
use blockmom::{draw, DistributionSpec, SampleBatch};

/// A reproducible Gaussian batch of `n` observations.
pub fn gaussian_batch(n: usize, seed: u64) -> SampleBatch {
    let spec = DistributionSpec::gaussian(0.0, 1.0).expect("valid");
    draw(&spec, &mut stream(seed, 0), n).expect("nonempty")
}
