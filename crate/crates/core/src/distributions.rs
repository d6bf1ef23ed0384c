//! Synthetic laws with known mean, standard deviation and moment index.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Pareto, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::SampleBatch;

/// Base family before the affine map `loc + scale * X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// Standard normal.
    Gaussian,
    /// Student's t with `dof` degrees of freedom; needs `dof > 2`.
    StudentT { dof: f64 },
    /// Pareto with unit minimum and tail index `shape`; needs `shape > 2`.
    Pareto { shape: f64 },
    /// `exp(N(0, log_sigma^2))`.
    Lognormal { log_sigma: f64 },
    /// Uniform on `{-1, +1}`.
    Rademacher,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::StudentT { .. } => "student_t",
            Family::Pareto { .. } => "pareto",
            Family::Lognormal { .. } => "lognormal",
            Family::Rademacher => "rademacher",
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDistribution(msg));
        match *self {
            Family::StudentT { dof } if !(dof > 2.0 && dof.is_finite()) => {
                bad(format!("student_t requires dof > 2, got {dof}"))
            }
            Family::Pareto { shape } if !(shape > 2.0 && shape.is_finite()) => {
                bad(format!("pareto requires shape > 2, got {shape}"))
            }
            Family::Lognormal { log_sigma } if !(log_sigma > 0.0 && log_sigma.is_finite()) => {
                bad(format!("lognormal requires log_sigma > 0, got {log_sigma}"))
            }
            _ => Ok(()),
        }
    }

    fn mean(&self) -> f64 {
        match *self {
            Family::Gaussian | Family::StudentT { .. } | Family::Rademacher => 0.0,
            Family::Pareto { shape } => shape / (shape - 1.0),
            Family::Lognormal { log_sigma } => (0.5 * log_sigma * log_sigma).exp(),
        }
    }

    fn variance(&self) -> f64 {
        match *self {
            Family::Gaussian | Family::Rademacher => 1.0,
            Family::StudentT { dof } => dof / (dof - 2.0),
            Family::Pareto { shape } => shape / ((shape - 1.0).powi(2) * (shape - 2.0)),
            Family::Lognormal { log_sigma } => {
                let s2 = log_sigma * log_sigma;
                s2.exp_m1() * s2.exp()
            }
        }
    }

    fn epsilon_max(&self) -> Option<f64> {
        match *self {
            Family::StudentT { dof } => Some(dof - 2.0),
            Family::Pareto { shape } => Some(shape - 2.0),
            Family::Gaussian | Family::Lognormal { .. } | Family::Rademacher => None,
        }
    }
}

/// A synthetic law `loc + scale * X` with `X` drawn from a base [`Family`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    #[serde(flatten)]
    family: Family,
    loc: f64,
    scale: f64,
}

impl DistributionSpec {
    pub fn new(family: Family, loc: f64, scale: f64) -> Result<Self> {
        family.validate()?;
        if !loc.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "loc must be finite, got {loc}"
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidDistribution(format!(
                "scale must be positive, got {scale}"
            )));
        }
        Ok(Self { family, loc, scale })
    }

    pub fn gaussian(mean: f64, std: f64) -> Result<Self> {
        Self::new(Family::Gaussian, mean, std)
    }

    pub fn student_t(dof: f64) -> Result<Self> {
        Self::new(Family::StudentT { dof }, 0.0, 1.0)
    }

    pub fn pareto(shape: f64, scale: f64) -> Result<Self> {
        Self::new(Family::Pareto { shape }, 0.0, scale)
    }

    pub fn lognormal(log_sigma: f64) -> Result<Self> {
        Self::new(Family::Lognormal { log_sigma }, 0.0, 1.0)
    }

    pub fn rademacher() -> Self {
        Self::new(Family::Rademacher, 0.0, 1.0).expect("valid")
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn loc(&self) -> f64 {
        self.loc
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// The same law translated by `shift`.
    pub fn shifted(&self, shift: f64) -> Result<Self> {
        Self::new(self.family, self.loc + shift, self.scale)
    }

    /// The same law rescaled to unit standard deviation around its own mean.
    pub fn standardized(&self) -> Self {
        let scale = 1.0 / self.family.variance().sqrt();
        Self {
            family: self.family,
            loc: -self.family.mean() * scale,
            scale,
        }
    }

    /// Exact population mean.
    pub fn mu(&self) -> f64 {
        self.loc + self.scale * self.family.mean()
    }

    /// Exact population standard deviation.
    pub fn sigma(&self) -> f64 {
        self.scale * self.family.variance().sqrt()
    }

    /// Supremum of the `eps` with a finite `2 + eps` absolute central
    /// moment (the bound itself is excluded). `None` when every moment is finite.
    pub fn epsilon_max(&self) -> Option<f64> {
        self.family.epsilon_max()
    }

    /// `(x - mu) / sigma`.
    pub fn standardize(&self, x: f64) -> f64 {
        (x - self.mu()) / self.sigma()
    }

    /// A reusable sampler for this law.
    pub fn sampler(&self) -> Sampler {
        let base = match self.family {
            Family::Gaussian => Base::Gaussian,
            Family::StudentT { dof } => Base::StudentT(StudentT::new(dof).expect("validated")),
            Family::Pareto { shape } => Base::Pareto(Pareto::new(1.0, shape).expect("validated")),
            Family::Lognormal { log_sigma } => {
                Base::Lognormal(LogNormal::new(0.0, log_sigma).expect("validated"))
            }
            Family::Rademacher => Base::Rademacher,
        };
        Sampler {
            base,
            loc: self.loc,
            scale: self.scale,
        }
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Gaussian | Family::Rademacher => write!(f, "{}", self.family.name())?,
            Family::StudentT { dof } => write!(f, "student_t(dof={dof})")?,
            Family::Pareto { shape } => write!(f, "pareto(shape={shape})")?,
            Family::Lognormal { log_sigma } => write!(f, "lognormal(log_sigma={log_sigma})")?,
        }
        if self.loc != 0.0 || self.scale != 1.0 {
            write!(f, "[loc={}, scale={}]", self.loc, self.scale)?;
        }
        Ok(())
    }
}

/// Names accepted by [`FamilyKind::from_str`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    Gaussian,
    StudentT,
    Pareto,
    Lognormal,
    Rademacher,
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "gaussian" | "normal" => FamilyKind::Gaussian,
            "student_t" => FamilyKind::StudentT,
            "pareto" => FamilyKind::Pareto,
            "lognormal" => FamilyKind::Lognormal,
            "rademacher" => FamilyKind::Rademacher,
            other => {
                return Err(Error::InvalidDistribution(format!(
                    "unknown family '{other}'"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Copy)]
enum Base {
    Gaussian,
    StudentT(StudentT<f64>),
    Pareto(Pareto<f64>),
    Lognormal(LogNormal<f64>),
    Rademacher,
}

/// Draws from a [`DistributionSpec`].
#[derive(Debug, Clone, Copy)]
pub struct Sampler {
    base: Base,
    loc: f64,
    scale: f64,
}

impl Distribution<f64> for Sampler {
    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let x = match &self.base {
            Base::Gaussian => StandardNormal.sample(rng),
            Base::StudentT(d) => d.sample(rng),
            Base::Pareto(d) => d.sample(rng),
            Base::Lognormal(d) => d.sample(rng),
            Base::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        };
        self.loc + self.scale * x
    }
}

/// `count` i.i.d. draws from `spec`.
pub fn draw<R: Rng + ?Sized>(
    spec: &DistributionSpec,
    rng: &mut R,
    count: usize,
) -> Result<SampleBatch> {
    let sampler = spec.sampler();
    SampleBatch::new((0..count).map(|_| sampler.sample(rng)).collect())
}

/// `(x - mu) / sigma` under `spec`.
pub fn standardize(spec: &DistributionSpec, x: f64) -> f64 {
    spec.standardize(x)
}
