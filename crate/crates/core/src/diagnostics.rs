//! Monte Carlo versions of the analytic quantities behind the deviation bound:
//! the Berry-Esseen functional `g(m)`, the variance of the first Hajek
//! projection of the sign kernel, and the default parameter plan.

use rand::Rng;
use rand::SeedableRng;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::plan::BlockPlan;
use crate::rng::{stream, SimRng};
use crate::sample::pairwise_mean;

/// Points in the default confidence-parameter grid.
pub const GRID_POINTS: usize = 8;
/// Grid values below this are uninformative (exceedance probability near one).
pub const GRID_FLOOR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GEstimate {
    pub m: usize,
    pub estimate: f64,
    pub stderr: f64,
}

/// Monte Carlo estimate of `g(m) = (6/sqrt m) E[Y^2 min(|Y|, sqrt m)]` with
/// `Y = (X - mu) / sigma`, from `replicates` draws.
pub fn g_of_m(
    spec: &DistributionSpec,
    m: usize,
    replicates: usize,
    seed: u64,
) -> Result<GEstimate> {
    Ok(g_of_m_grid(spec, &[m], replicates, seed)?[0])
}

/// [`g_of_m`] over several `m` with common random numbers.
///
/// The integrand is pointwise nonincreasing in `m`, so with shared draws the
/// estimates are too.
pub fn g_of_m_grid(
    spec: &DistributionSpec,
    ms: &[usize],
    replicates: usize,
    seed: u64,
) -> Result<Vec<GEstimate>> {
    if replicates < 100 {
        return Err(Error::invalid("g(m) needs at least 100 replicates"));
    }
    if ms.contains(&0) {
        return Err(Error::invalid("m must be positive"));
    }
    let sampler = spec.sampler();
    let mut rng = SimRng::seed_from_u64(seed);
    let y: Vec<f64> = (0..replicates)
        .map(|_| spec.standardize(sampler.sample(&mut rng)))
        .collect();
    let mut terms = vec![0.0; replicates];
    Ok(ms
        .iter()
        .map(|&m| {
            let root = (m as f64).sqrt();
            for (term, &y) in terms.iter_mut().zip(&y) {
                *term = y * y * y.abs().min(root);
            }
            let (mean, sd) = mean_and_sd(&terms);
            let factor = 6.0 / root;
            GEstimate {
                m,
                estimate: factor * mean,
                stderr: factor * sd / (replicates as f64).sqrt(),
            }
        })
        .collect())
}

/// Sample mean and standard deviation (denominator `n - 1`).
fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let mean = pairwise_mean(values);
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (values.len() - 1) as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HajekEstimate {
    pub l: usize,
    pub b: usize,
    pub k: usize,
    pub t: f64,
    /// Bias-corrected variance, clamped at zero.
    pub estimate: f64,
    pub stderr: f64,
    /// Variance of the inner averages before the correction.
    pub raw_variance: f64,
    /// Mean inner sampling variance that was subtracted.
    pub inner_bias: f64,
}

/// Nested Monte Carlo estimate of `Var(h1(Z_1))`, where
///
/// `h1(z) = sqrt(l) * E[sign(sqrt(m) ((Z~_1 + ... + Z~_{l-1} + z) / l - sqrt(t / N)))]`
///
/// up to an additive constant, the `Z~_j` being independent block means of
/// `b` standardized draws and `sign(u) = -1` for `u <= 0`. Outer draw `i` uses
/// its own stream derived from `(seed, i)`, so the result does not depend on
/// the rayon pool size.
pub fn hajek_variance(
    spec: &DistributionSpec,
    plan: &BlockPlan,
    t: f64,
    outer: usize,
    inner: usize,
    seed: u64,
) -> Result<HajekEstimate> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("t must be positive, got {t}")));
    }
    if outer < 100 || inner < 100 {
        return Err(Error::invalid(
            "nested Monte Carlo needs at least 100 outer and inner draws",
        ));
    }
    let l = plan.l;
    let b = plan.b;
    let n_used = plan.n_used as f64;
    let shift = (t / n_used).sqrt();
    let mu = spec.mu();
    let inv_sigma = 1.0 / spec.sigma();
    let sampler = spec.sampler();
    let root_l = (l as f64).sqrt();

    let block_mean = |rng: &mut SimRng| -> f64 {
        let mut sum = 0.0;
        for _ in 0..b {
            sum += (sampler.sample(rng) - mu) * inv_sigma;
        }
        sum / b as f64
    };

    // (h1 value, inner sampling variance of that value)
    let draws: Vec<(f64, f64)> = (0..outer as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i);
            let z1 = block_mean(&mut rng);
            let mut positive = 0usize;
            for _ in 0..inner {
                let mut others = 0.0;
                for _ in 1..l {
                    others += block_mean(&mut rng);
                }
                // The positive factor sqrt(m) does not change the sign.
                if (others + z1) / l as f64 - shift > 0.0 {
                    positive += 1;
                }
            }
            let r = inner as f64;
            let mean_sign = (2 * positive) as f64 / r - 1.0;
            let sign_var = (1.0 - mean_sign * mean_sign) * r / (r - 1.0);
            (root_l * mean_sign, l as f64 * sign_var / r)
        })
        .collect();

    let h: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let (mean, sd) = mean_and_sd(&h);
    let raw_variance = sd * sd;
    let inner_bias = pairwise_mean(&draws.iter().map(|d| d.1).collect::<Vec<_>>());
    let fourth = pairwise_mean(&h.iter().map(|v| (v - mean).powi(4)).collect::<Vec<_>>());
    let stderr = ((fourth - raw_variance * raw_variance).max(0.0) / outer as f64).sqrt();
    Ok(HajekEstimate {
        l,
        b,
        k: plan.k,
        t,
        estimate: (raw_variance - inner_bias).max(0.0),
        stderr,
        raw_variance,
        inner_bias,
    })
}

/// Lower and upper ends `(L, M)` of the confidence-parameter range for
/// `n` blocks, subset order `l`, group size `m` and moment index `epsilon`:
/// `L = (n / l) ln(m) / m^epsilon` and `M = n / (l^2 ln(max(l, 2)))`.
pub fn t_range(n: usize, l: usize, m: usize, epsilon: f64) -> (f64, f64) {
    let (n, l_f, m) = (n as f64, l as f64, m as f64);
    let lower = (n / l_f) * m.ln() / m.powf(epsilon);
    let upper = n / (l_f * l_f * l_f.max(2.0).ln());
    (lower, upper)
}

/// `sqrt(L * M)`, the default evaluation point for the Hajek variance.
pub fn geometric_midpoint(lower: f64, upper: f64) -> f64 {
    (lower * upper).sqrt()
}

/// `points` geometrically spaced values from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let ratio = (hi / lo).ln() / (points - 1) as f64;
            (0..points)
                .map(|i| match i {
                    0 => lo,
                    i if i == points - 1 => hi,
                    i => lo * (ratio * i as f64).exp(),
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterPlan {
    pub n_total: usize,
    pub k: usize,
    pub l: usize,
    pub m: usize,
    pub n: usize,
    pub lower: f64,
    pub upper: f64,
    pub t_grid: Vec<f64>,
    pub epsilon: f64,
    /// Set when `M <= max(L, 0.5)` and the grid is empty.
    pub empty_grid: bool,
    /// Set when `l / m^epsilon >= 1`, i.e. `l` is not small against `m^epsilon`.
    pub l_too_large: bool,
}

/// The divisor of `m` nearest to `ln m`, ties going to the smaller one.
pub fn nearest_divisor_to_log(m: usize) -> usize {
    let target = (m as f64).ln();
    let mut best = 1;
    let mut best_gap = f64::INFINITY;
    for d in (1..=m).filter(|d| m % d == 0) {
        let gap = (d as f64 - target).abs();
        if gap < best_gap {
            best = d;
            best_gap = gap;
        }
    }
    best
}

/// Parameter choice `l ~ ln m` with the matching `[L, M]` range and grid.
pub fn parameter_plan(n_total: usize, k: usize, epsilon: f64) -> Result<ParameterPlan> {
    if k == 0 || k > n_total {
        return Err(Error::TooManyBlocks {
            blocks: k as u64,
            n_total,
        });
    }
    if !(epsilon > 0.0) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    let m = n_total / k;
    let l = nearest_divisor_to_log(m);
    let n = l * k;
    let (lower, upper) = t_range(n, l, m, epsilon);
    let floor = lower.max(GRID_FLOOR);
    let empty_grid = !(upper > floor);
    let t_grid = if empty_grid {
        vec![]
    } else {
        geometric_grid(floor, upper, GRID_POINTS)
    };
    Ok(ParameterPlan {
        n_total,
        k,
        l,
        m,
        n,
        lower,
        upper,
        t_grid,
        epsilon,
        empty_grid,
        l_too_large: l as f64 / (m as f64).powf(epsilon) >= 1.0,
    })
}

/// Common random draws for the g(m) grid plus an optional Hajek check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub g: Vec<GEstimate>,
    pub hajek: Option<HajekEstimate>,
}

/// Empirical `E|Y|^p` of `count` standardized draws; used for moment-bound checks.
pub fn standardized_abs_moment<R: Rng + ?Sized>(
    spec: &DistributionSpec,
    power: f64,
    count: usize,
    rng: &mut R,
) -> f64 {
    let sampler = spec.sampler();
    let values: Vec<f64> = (0..count)
        .map(|_| spec.standardize(sampler.sample(rng)).abs().powf(power))
        .collect();
    pairwise_mean(&values)
}
