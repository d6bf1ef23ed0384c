//! Combinatorics of the family of `l`-subsets of `n` block indices.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of subsets an exact design will enumerate.
pub const ENUMERATION_CAP: u64 = 10_000_000;

/// A binomial coefficient, or a marker that it does not fit in 64 bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsetCount {
    Exact(u64),
    Overflow,
}

impl SubsetCount {
    pub fn exact(self) -> Option<u64> {
        match self {
            SubsetCount::Exact(c) => Some(c),
            SubsetCount::Overflow => None,
        }
    }

    pub fn exceeds(self, cap: u64) -> bool {
        self.exact().is_none_or(|c| c > cap)
    }
}

impl fmt::Display for SubsetCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubsetCount::Exact(c) => write!(f, "{c}"),
            SubsetCount::Overflow => f.write_str(">2^64"),
        }
    }
}

/// `C(n, l)` computed exactly, or [`SubsetCount::Overflow`] past `u64::MAX`.
pub fn binomial_saturating(n: u64, l: u64) -> SubsetCount {
    if l > n {
        return SubsetCount::Exact(0);
    }
    let l = l.min(n - l);
    // After step i the accumulator holds C(n - l + i + 1, i + 1), so each
    // division is exact. Intermediates stay below 2^64 * n < 2^128.
    let mut acc: u128 = 1;
    for i in 0..l {
        acc = acc * u128::from(n - l + i + 1) / u128::from(i + 1);
        if acc > u128::from(u64::MAX) {
            return SubsetCount::Overflow;
        }
    }
    SubsetCount::Exact(acc as u64)
}

/// Lexicographic stream over the `l`-subsets of `{0, ..., n-1}`.
///
/// Use [`LexSubsets::next_subset`] in hot loops to avoid allocating; the
/// `Iterator` impl yields owned copies.
#[derive(Debug, Clone)]
pub struct LexSubsets {
    n: usize,
    idx: Vec<usize>,
    started: bool,
    done: bool,
}

impl LexSubsets {
    pub fn new(n: usize, l: usize) -> Self {
        Self {
            n,
            idx: (0..l).collect(),
            started: false,
            done: false,
        }
    }

    pub fn next_subset(&mut self) -> Option<&[usize]> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(&self.idx);
        }
        let l = self.idx.len();
        // Rightmost position that can still move up.
        let Some(pos) = (0..l).rev().find(|&i| self.idx[i] < self.n - l + i) else {
            self.done = true;
            return None;
        };
        self.idx[pos] += 1;
        for i in pos + 1..l {
            self.idx[i] = self.idx[i - 1] + 1;
        }
        Some(&self.idx)
    }
}

impl Iterator for LexSubsets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        self.next_subset().map(<[usize]>::to_vec)
    }
}

/// Streams every `l`-subset of `{0, ..., n-1}` in lexicographic order.
pub fn enumerate_subsets(n: usize, l: usize) -> Result<LexSubsets> {
    enumerate_subsets_capped(n, l, ENUMERATION_CAP)
}

pub fn enumerate_subsets_capped(n: usize, l: usize, cap: u64) -> Result<LexSubsets> {
    check_order(n, l)?;
    let count = binomial_saturating(n as u64, l as u64);
    if count.exceeds(cap) {
        return Err(Error::DesignTooLarge {
            count: count.to_string(),
            cap,
        });
    }
    Ok(LexSubsets::new(n, l))
}

fn check_order(n: usize, l: usize) -> Result<()> {
    if l == 0 || l > n {
        return Err(Error::invalid(format!(
            "subset order l={l} must satisfy 1 <= l <= n={n}"
        )));
    }
    Ok(())
}

/// Draws uniformly random `l`-subsets of `{0, ..., n-1}` by partial
/// Fisher-Yates selection over a reusable index pool.
///
/// Each draw is uniform over all `C(n, l)` subsets whatever the current
/// arrangement of the pool, so the pool is never reset between draws.
#[derive(Debug, Clone)]
pub struct SubsetSampler {
    pool: Vec<usize>,
    out: Vec<usize>,
    l: usize,
}

impl SubsetSampler {
    pub fn new(n: usize, l: usize) -> Result<Self> {
        check_order(n, l)?;
        Ok(Self {
            pool: (0..n).collect(),
            out: Vec::with_capacity(l),
            l,
        })
    }

    /// The next subset, sorted ascending.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &[usize] {
        let n = self.pool.len();
        for i in 0..self.l {
            let j = rng.random_range(i..n);
            self.pool.swap(i, j);
        }
        self.out.clear();
        self.out.extend_from_slice(&self.pool[..self.l]);
        self.out.sort_unstable();
        &self.out
    }
}

/// One uniformly random `l`-subset of `{0, ..., n-1}`, sorted ascending.
pub fn sample_subset<R: Rng + ?Sized>(n: usize, l: usize, rng: &mut R) -> Result<Vec<usize>> {
    Ok(SubsetSampler::new(n, l)?.sample(rng).to_vec())
}

/// Default subsample budget `ceil(10 * (n / l) * ln(max(n, 3)))`.
///
/// The ratio `T / (n / l) = 10 ln n` diverges, as the incomplete design needs.
pub fn default_t(n: usize, l: usize) -> u64 {
    let n_f = n as f64;
    let budget = 10.0 * (n_f / l as f64) * n_f.max(3.0).ln();
    (budget.ceil() as u64).max(1)
}

/// Which subsets an estimate was computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubsetDesign {
    Exact {
        n: usize,
        l: usize,
    },
    Subsampled {
        n: usize,
        l: usize,
        t: u64,
        seed: u64,
    },
}

impl SubsetDesign {
    pub fn exact(n: usize, l: usize) -> Result<Self> {
        check_order(n, l)?;
        let count = binomial_saturating(n as u64, l as u64);
        if count.exceeds(ENUMERATION_CAP) {
            return Err(Error::DesignTooLarge {
                count: count.to_string(),
                cap: ENUMERATION_CAP,
            });
        }
        Ok(SubsetDesign::Exact { n, l })
    }

    pub fn subsampled(n: usize, l: usize, t: u64, seed: u64) -> Result<Self> {
        check_order(n, l)?;
        if t == 0 {
            return Err(Error::invalid("subsample budget T must be at least 1"));
        }
        Ok(SubsetDesign::Subsampled { n, l, t, seed })
    }

    /// Number of subset means the design evaluates.
    pub fn evaluations(&self) -> u64 {
        match *self {
            SubsetDesign::Exact { n, l } => binomial_saturating(n as u64, l as u64)
                .exact()
                .expect("exact designs are capped"),
            SubsetDesign::Subsampled { t, .. } => t,
        }
    }
}
