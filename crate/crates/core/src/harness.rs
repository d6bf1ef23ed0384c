//! Replicated deviation studies.
//!
//! A study draws `R` independent batches, runs every requested estimator on
//! each batch (a paired design) and records the errors `mu_hat - mu`. Tail
//! curves, variance summaries and estimator comparisons are computed from the
//! resulting error matrix.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{default_t, ENUMERATION_CAP};
use crate::distributions::{draw, DistributionSpec};
use crate::error::{Error, Result};
use crate::estimators::{
    block_umom_exact, block_umom_subsampled, mom_estimate, sample_mean_estimate, EstimatorId,
};
use crate::plan::BlockPlan;
use crate::rng::{mix_seed, stream};

/// Minimum replicates for tail probabilities.
pub const MIN_TAIL_REPLICATES: usize = 1000;
/// Minimum replicates for variance summaries.
pub const MIN_VARIANCE_REPLICATES: usize = 100;

/// Stream index reserved for subset sampling inside a replicate.
const SUBSET_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Budget {
    Auto,
    Fixed(u64),
}

impl Budget {
    pub fn resolve(self, n: usize, l: usize) -> u64 {
        match self {
            Budget::Auto => default_t(n, l),
            Budget::Fixed(t) => t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Threads {
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationStudyConfig {
    pub spec: DistributionSpec,
    pub n_total: usize,
    pub estimators: Vec<EstimatorId>,
    pub k: usize,
    pub l: usize,
    pub budget: Budget,
    pub replicates: usize,
    pub t_grid: Vec<f64>,
    pub master_seed: u64,
    pub threads: Threads,
}

impl DeviationStudyConfig {
    pub fn plan(&self) -> Result<BlockPlan> {
        BlockPlan::new(self.n_total, self.k, self.l)
    }

    /// Subsample budget actually used.
    pub fn resolved_t(&self) -> Result<u64> {
        let plan = self.plan()?;
        Ok(self.budget.resolve(plan.n, plan.l))
    }

    /// Checks everything that can fail before any simulation starts.
    pub fn validate(&self) -> Result<BlockPlan> {
        let plan = self.plan()?;
        if self.estimators.is_empty() {
            return Err(Error::invalid("no estimators requested"));
        }
        if self.estimators.contains(&EstimatorId::UmomFull) {
            return Err(Error::invalid(
                "umom_full is a reference estimator and cannot be simulated",
            ));
        }
        if self.estimators.contains(&EstimatorId::BlockUmomExact) {
            crate::design::SubsetDesign::exact(plan.n, plan.l)?;
        }
        if self.replicates == 0 {
            return Err(Error::invalid("replicates must be positive"));
        }
        if self.budget == Budget::Fixed(0) {
            return Err(Error::invalid("T must be positive"));
        }
        if self.threads == Threads::Fixed(0) {
            return Err(Error::invalid("threads must be positive"));
        }
        validate_grid(&self.t_grid)?;
        Ok(plan)
    }
}

pub fn validate_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::invalid("t grid is empty"));
    }
    if t_grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::invalid("t grid values must be positive and finite"));
    }
    if t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("t grid must be strictly increasing"));
    }
    Ok(())
}

/// Errors `mu_hat - mu`, one row per replicate and one column per estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMatrix {
    estimators: Vec<EstimatorId>,
    rows: usize,
    data: Vec<f64>,
}

impl ErrorMatrix {
    pub fn from_columns(columns: Vec<(EstimatorId, Vec<f64>)>) -> Result<Self> {
        let rows = columns.first().map_or(0, |c| c.1.len());
        if columns.iter().any(|c| c.1.len() != rows) {
            return Err(Error::invalid("error columns differ in length"));
        }
        let estimators = columns.iter().map(|c| c.0).collect();
        let mut data = Vec::with_capacity(rows * columns.len());
        for r in 0..rows {
            data.extend(columns.iter().map(|c| c.1[r]));
        }
        Ok(Self {
            estimators,
            rows,
            data,
        })
    }

    pub fn estimators(&self) -> &[EstimatorId] {
        &self.estimators
    }

    pub fn replicates(&self) -> usize {
        self.rows
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let w = self.estimators.len();
        &self.data[r * w..(r + 1) * w]
    }

    pub fn column(&self, id: EstimatorId) -> Option<Vec<f64>> {
        let c = self.estimators.iter().position(|&e| e == id)?;
        Some(
            self.data
                .iter()
                .skip(c)
                .step_by(self.estimators.len())
                .copied()
                .collect(),
        )
    }
}

/// Runs one replicate: draws a batch and evaluates every estimator on it.
fn replicate(
    config: &DeviationStudyConfig,
    plan: &BlockPlan,
    t: u64,
    index: u64,
) -> Result<Vec<f64>> {
    let seed = mix_seed(config.master_seed, index);
    let mut rng = stream(config.master_seed, index);
    let batch = draw(&config.spec, &mut rng, config.n_total)?;
    let mu = config.spec.mu();
    config
        .estimators
        .iter()
        .map(|id| {
            let report = match id {
                EstimatorId::Mom => mom_estimate(&batch, config.k)?,
                EstimatorId::BlockUmomExact => block_umom_exact(&batch, plan)?,
                EstimatorId::BlockUmomSubsampled => {
                    block_umom_subsampled(&batch, plan, t, mix_seed(seed, SUBSET_STREAM))?
                }
                EstimatorId::SampleMean => sample_mean_estimate(&batch)?,
                EstimatorId::UmomFull => unreachable!("rejected by validate"),
            };
            Ok(report.value - mu)
        })
        .collect()
}

/// Runs all replicates of a study.
///
/// Replicate `i` draws from the stream `mix_seed(master_seed, i)` and writes
/// to row `i`, so the matrix is identical for every thread count.
pub fn run_replicates(config: &DeviationStudyConfig) -> Result<ErrorMatrix> {
    let plan = config.validate()?;
    let t = config.resolved_t()?;
    let run = || -> Result<Vec<Vec<f64>>> {
        (0..config.replicates as u64)
            .into_par_iter()
            .map(|i| replicate(config, &plan, t, i))
            .collect()
    };
    let rows = match config.threads {
        Threads::Auto => run()?,
        Threads::Fixed(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
            .install(run)?,
    };
    Ok(ErrorMatrix {
        estimators: config.estimators.clone(),
        rows: rows.len(),
        data: rows.into_iter().flatten().collect(),
    })
}

/// The deviation constant implied by the observed exceedance probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ConstantEstimate {
    Value(f64),
    /// No exceedances; the value is an upper bound.
    Censored(f64),
}

impl ConstantEstimate {
    pub fn value(self) -> f64 {
        match self {
            ConstantEstimate::Value(v) | ConstantEstimate::Censored(v) => v,
        }
    }

    pub fn is_censored(self) -> bool {
        matches!(self, ConstantEstimate::Censored(_))
    }
}

/// Solves `p = 3 exp(-t / (2 c))` for `c`.
pub fn implied_constant(t: f64, p: f64) -> f64 {
    t / (2.0 * (3.0 / p).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub t: f64,
    pub threshold: f64,
    pub p_hat: f64,
    pub p_stderr: f64,
    pub c_hat: ConstantEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub points: Vec<TailPoint>,
    pub var_scaled: f64,
    pub var_stderr: f64,
}

/// Exceedance probabilities `P(|err| >= sigma sqrt(t / N))` over `t_grid`.
pub fn tail_curve(errors: &[f64], sigma: f64, n_total: usize, t_grid: &[f64]) -> Result<TailCurve> {
    let r = errors.len();
    if r < MIN_TAIL_REPLICATES {
        return Err(Error::invalid(format!(
            "tail curves need at least {MIN_TAIL_REPLICATES} replicates, got {r}"
        )));
    }
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma must be positive"));
    }
    validate_grid(t_grid)?;
    let mut abs: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    abs.sort_unstable_by(f64::total_cmp);
    let rf = r as f64;
    let points = t_grid
        .iter()
        .map(|&t| {
            let threshold = sigma * (t / n_total as f64).sqrt();
            let below = abs.partition_point(|&a| a < threshold);
            let p_hat = (r - below) as f64 / rf;
            let c_hat = if r == below {
                ConstantEstimate::Censored(t / (2.0 * (3.0 * rf).ln()))
            } else {
                ConstantEstimate::Value(implied_constant(t, p_hat))
            };
            TailPoint {
                t,
                threshold,
                p_hat,
                p_stderr: (p_hat * (1.0 - p_hat) / rf).sqrt(),
                c_hat,
            }
        })
        .collect();
    let (var_scaled, var_stderr) = variance_summary(errors, n_total)?;
    Ok(TailCurve {
        points,
        var_scaled,
        var_stderr,
    })
}

/// Empirical variance of `sqrt(N) * err` and its Gaussian-theory standard
/// error `sqrt(2 / (R - 1)) * var`.
pub fn variance_summary(errors: &[f64], n_total: usize) -> Result<(f64, f64)> {
    let r = errors.len();
    if r < MIN_VARIANCE_REPLICATES {
        return Err(Error::invalid(format!(
            "variance summaries need at least {MIN_VARIANCE_REPLICATES} replicates, got {r}"
        )));
    }
    let root_n = (n_total as f64).sqrt();
    let scaled: Vec<f64> = errors.iter().map(|e| root_n * e).collect();
    let mean = crate::sample::pairwise_mean(&scaled);
    let ss: Vec<f64> = scaled.iter().map(|s| (s - mean).powi(2)).collect();
    let var = crate::sample::pairwise_sum(&ss) / (r - 1) as f64;
    Ok((var, (2.0 / (r - 1) as f64).sqrt() * var))
}

/// Empirical `level`-quantile, the smallest order statistic with at least
/// `ceil(level * R)` observations at or below it.
pub fn empirical_quantile(values: &[f64], level: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySequence);
    }
    if !(0.0..=1.0).contains(&level) {
        return Err(Error::invalid("quantile level outside [0, 1]"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let rank = ((level * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Ok(sorted[rank - 1])
}

/// Deviation level `1 - 2 exp(-t)` at which quantiles are compared.
pub fn comparison_level(t: f64) -> f64 {
    1.0 - 2.0 * (-t).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileRatio {
    pub t: f64,
    pub level: f64,
    pub quantile: f64,
    pub baseline_quantile: f64,
    /// `quantile / baseline_quantile`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorComparison {
    pub estimator: EstimatorId,
    pub baseline: EstimatorId,
    pub quantile_ratios: Vec<QuantileRatio>,
    /// `Var(baseline) / Var(estimator)`, both on the `sqrt(N)` scale.
    pub variance_ratio: f64,
}

/// Compares every column of a paired error matrix against `baseline`.
///
/// Per `t`, the ratio of the `(1 - 2e^{-t})`-quantiles of `|err|`
/// (estimator over baseline); per estimator, the variance ratio baseline over
/// estimator. Levels that are not in `(0, 1)` are skipped.
pub fn compare_estimators(
    errors: &ErrorMatrix,
    baseline: EstimatorId,
    t_grid: &[f64],
) -> Result<Vec<EstimatorComparison>> {
    let base = errors
        .column(baseline)
        .ok_or_else(|| Error::invalid(format!("baseline {baseline} not in error matrix")))?;
    let base_abs: Vec<f64> = base.iter().map(|e| e.abs()).collect();
    let base_var = variance_summary(&base, 1)?.0;
    errors
        .estimators()
        .iter()
        .map(|&id| {
            let col = errors.column(id).expect("listed estimator");
            let abs: Vec<f64> = col.iter().map(|e| e.abs()).collect();
            let quantile_ratios = t_grid
                .iter()
                .map(|&t| (t, comparison_level(t)))
                .filter(|&(_, level)| level > 0.0 && level < 1.0)
                .map(|(t, level)| {
                    let quantile = empirical_quantile(&abs, level)?;
                    let baseline_quantile = empirical_quantile(&base_abs, level)?;
                    Ok(QuantileRatio {
                        t,
                        level,
                        quantile,
                        baseline_quantile,
                        ratio: ratio(quantile, baseline_quantile),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(EstimatorComparison {
                estimator: id,
                baseline,
                quantile_ratios,
                variance_ratio: ratio(base_var, variance_summary(&col, 1)?.0),
            })
        })
        .collect()
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == den {
        1.0
    } else {
        num / den
    }
}

/// Summaries of one estimator's column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorCurve {
    pub estimator: EstimatorId,
    pub curve: TailCurve,
}

/// Everything a deviation study produces.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub errors: ErrorMatrix,
    pub curves: Vec<EstimatorCurve>,
    pub comparisons: Vec<EstimatorComparison>,
    pub t: u64,
}

/// Runs the study and computes a tail curve per estimator. Comparisons
/// against classical median-of-means are included when it was requested.
pub fn run_study(config: &DeviationStudyConfig) -> Result<StudyResult> {
    let errors = run_replicates(config)?;
    let sigma = config.spec.sigma();
    let curves = config
        .estimators
        .iter()
        .map(|&id| {
            let column = errors.column(id).expect("requested estimator");
            Ok(EstimatorCurve {
                estimator: id,
                curve: tail_curve(&column, sigma, config.n_total, &config.t_grid)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let comparisons = if config.estimators.contains(&EstimatorId::Mom) {
        compare_estimators(&errors, EstimatorId::Mom, &config.t_grid)?
    } else {
        vec![]
    };
    Ok(StudyResult {
        errors,
        curves,
        comparisons,
        t: config.resolved_t()?,
    })
}

/// `true` when an exact design for the plan stays within the enumeration cap.
pub fn exact_feasible(plan: &BlockPlan) -> bool {
    !crate::design::binomial_saturating(plan.n as u64, plan.l as u64).exceeds(ENUMERATION_CAP)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> DeviationStudyConfig {
        DeviationStudyConfig {
            spec: DistributionSpec::gaussian(0.0, 1.0).unwrap(),
            n_total: 64,
            estimators: vec![
                EstimatorId::Mom,
                EstimatorId::BlockUmomExact,
                EstimatorId::SampleMean,
            ],
            k: 4,
            l: 1,
            budget: Budget::Auto,
            replicates: 200,
            t_grid: vec![1.0, 2.0],
            master_seed: 3,
            threads: Threads::Fixed(1),
        }
    }

    #[test]
    fn implied_constant_inverts_bound() {
        for t in [0.5, 2.0, 4.0, 8.0] {
            let p = 3.0 * (-t / 2.0f64).exp();
            assert!((implied_constant(t, p) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_errors_are_censored() {
        let curve = tail_curve(&vec![0.0; 1000], 1.0, 100, &[1.0, 2.0, 4.0]).unwrap();
        for p in &curve.points {
            assert_eq!(p.p_hat, 0.0);
            assert!(p.c_hat.is_censored());
            assert_eq!(p.c_hat.value(), p.t / (2.0 * 3000f64.ln()));
        }
        assert_eq!(curve.var_scaled, 0.0);
    }

    #[test]
    fn tail_requires_replicates_and_grid() {
        assert!(tail_curve(&[0.0; 999], 1.0, 10, &[1.0]).is_err());
        assert!(tail_curve(&[0.0; 1000], 1.0, 10, &[]).is_err());
        assert!(tail_curve(&[0.0; 1000], 1.0, 10, &[2.0, 1.0]).is_err());
        assert!(variance_summary(&[0.0; 99], 10).is_err());
    }

    #[test]
    fn exceedance_counts_ties() {
        // threshold at t = 1, N = 1, sigma = 1 is exactly 1.
        let mut errors = vec![0.0; 990];
        errors.extend([1.0; 5]);
        errors.extend([-2.0; 5]);
        let curve = tail_curve(&errors, 1.0, 1, &[1.0, 4.0, 9.0]).unwrap();
        let p: Vec<f64> = curve.points.iter().map(|p| p.p_hat).collect();
        assert_eq!(p, vec![0.01, 0.005, 0.0]);
    }

    #[test]
    fn constant_errors_have_zero_variance() {
        assert_eq!(variance_summary(&[0.25; 500], 100).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn identical_columns_compare_to_one() {
        let col: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let m = ErrorMatrix::from_columns(vec![
            (EstimatorId::Mom, col.clone()),
            (EstimatorId::BlockUmomSubsampled, col),
        ])
        .unwrap();
        for cmp in compare_estimators(&m, EstimatorId::Mom, &[1.0, 2.0, 4.0]).unwrap() {
            assert_eq!(cmp.variance_ratio, 1.0);
            assert!(cmp.quantile_ratios.iter().all(|q| q.ratio == 1.0));
        }
    }

    #[test]
    fn quantile_definition() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(empirical_quantile(&v, 0.5).unwrap(), 2.0);
        assert_eq!(empirical_quantile(&v, 0.51).unwrap(), 3.0);
        assert_eq!(empirical_quantile(&v, 1.0).unwrap(), 4.0);
        assert_eq!(empirical_quantile(&v, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn matrix_is_paired_and_deterministic() {
        let c = config();
        let a = run_replicates(&c).unwrap();
        let b = run_replicates(&c).unwrap();
        assert_eq!(a, b);
        // l = 1 makes the exact overlapping estimator classical MOM.
        assert_eq!(
            a.column(EstimatorId::Mom),
            a.column(EstimatorId::BlockUmomExact)
        );
        assert_eq!(a.replicates(), 200);
        assert_eq!(a.row(0).len(), 3);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let mut c = config();
        let one = run_replicates(&c).unwrap();
        c.threads = Threads::Fixed(3);
        assert_eq!(run_replicates(&c).unwrap(), one);
    }

    #[test]
    fn validation_errors() {
        let mut c = config();
        c.k = 65;
        assert!(matches!(c.validate(), Err(Error::TooManyBlocks { .. })));

        let mut c = config();
        c.n_total = 4096;
        c.k = 32;
        c.l = 8;
        assert!(matches!(
            run_replicates(&c),
            Err(Error::DesignTooLarge { .. })
        ));

        let mut c = config();
        c.estimators = vec![EstimatorId::UmomFull];
        assert!(c.validate().is_err());

        let mut c = config();
        c.t_grid = vec![];
        assert!(c.validate().is_err());
    }
}
