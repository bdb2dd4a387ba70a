//! Probability mass functions over intervention counts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PmfError {
    #[error("horizon mismatch: {0} min vs {1} min")]
    HorizonMismatch(f64, f64),
    #[error("negative probability {value} at n = {index}")]
    Negative { index: usize, value: f64 },
    #[error("probabilities sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("truncation mass {mass} exceeds tolerance {eps}")]
    Truncation { mass: f64, eps: f64 },
    #[error("empty sample")]
    Empty,
}

/// Analytic PMF over `n = 0, 1, 2, ...`.
///
/// `truncation_mass` is the probability of counts beyond the last index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskloadPmf {
    pub probs: Vec<f64>,
    pub truncation_mass: f64,
    /// Counting window in minutes; `None` for horizon-free distributions
    /// such as occupancy counts.
    pub horizon: Option<f64>,
}

const NORM_TOL: f64 = 1e-9;

impl TaskloadPmf {
    pub fn new(probs: Vec<f64>, truncation_mass: f64, horizon: Option<f64>) -> Result<Self, PmfError> {
        let p = Self {
            probs,
            truncation_mass,
            horizon,
        };
        p.validate()?;
        Ok(p)
    }

    /// Point mass at `n`.
    pub fn point(n: usize, horizon: Option<f64>) -> Self {
        let mut probs = vec![0.0; n + 1];
        probs[n] = 1.0;
        Self {
            probs,
            truncation_mass: 0.0,
            horizon,
        }
    }

    /// Poisson law with mean `mean`, truncated once the residual drops below `eps`.
    pub fn poisson(mean: f64, eps: f64, horizon: Option<f64>) -> Self {
        if mean <= 0.0 {
            return Self::point(0, horizon);
        }
        let mut probs = Vec::new();
        // Work in logs so large means do not underflow the first term.
        let mut log_p = -mean;
        let mut cum = 0.0;
        let mut k = 0usize;
        loop {
            let p = log_p.exp();
            probs.push(p);
            cum += p;
            if k as f64 > mean && 1.0 - cum < eps {
                break;
            }
            k += 1;
            log_p += mean.ln() - (k as f64).ln();
            if k > 100_000 {
                break;
            }
        }
        Self {
            probs,
            truncation_mass: (1.0 - cum).max(0.0),
            horizon,
        }
    }

    pub fn validate(&self) -> Result<(), PmfError> {
        for (index, &value) in self.probs.iter().enumerate() {
            if !(value >= 0.0) {
                return Err(PmfError::Negative { index, value });
            }
        }
        if !(self.truncation_mass >= 0.0) {
            return Err(PmfError::Negative {
                index: self.probs.len(),
                value: self.truncation_mass,
            });
        }
        let total = self.total_mass();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(PmfError::NotNormalized(total));
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum::<f64>() + self.truncation_mass
    }

    pub fn prob(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// `P[N > n]`, counting the truncated tail.
    pub fn tail(&self, n: usize) -> f64 {
        self.probs.iter().skip(n + 1).sum::<f64>() + self.truncation_mass
    }

    /// Index of the largest mass.
    pub fn mode(&self) -> usize {
        self.probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(n, _)| n)
            .unwrap_or(0)
    }

    /// Drops trailing entries below `eps`, moving them to the truncation mass.
    pub fn trim(mut self, eps: f64) -> Self {
        while self.probs.len() > 1 {
            let last = *self.probs.last().unwrap();
            if last >= eps || self.truncation_mass + last >= eps {
                break;
            }
            self.truncation_mass += last;
            self.probs.pop();
        }
        self
    }

    /// Law of `max(N - 1, 0)`.
    pub fn shifted_down(&self) -> Self {
        let mut probs: Vec<f64> = self.probs.iter().skip(1).copied().collect();
        if probs.is_empty() {
            probs.push(0.0);
        }
        probs[0] += self.prob(0);
        Self {
            probs,
            truncation_mass: self.truncation_mass,
            horizon: self.horizon,
        }
    }

    pub fn with_horizon(mut self, horizon: Option<f64>) -> Self {
        self.horizon = horizon;
        self
    }
}

pub(crate) fn horizons_compatible(a: Option<f64>, b: Option<f64>) -> Result<Option<f64>, PmfError> {
    match (a, b) {
        (Some(x), Some(y)) if (x - y).abs() > 1e-9 * x.abs().max(1.0) => Err(PmfError::HorizonMismatch(x, y)),
        (Some(x), _) => Ok(Some(x)),
        (None, y) => Ok(y),
    }
}

/// Total-variation distance over the union of supports. Truncated masses are
/// treated as one extra cell.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    let mut s = 0.0;
    for i in 0..n {
        let x = a.get(i).copied().unwrap_or(0.0);
        let y = b.get(i).copied().unwrap_or(0.0);
        s += (x - y).abs();
    }
    0.5 * s
}

pub fn tv_distance(a: &TaskloadPmf, b: &TaskloadPmf) -> f64 {
    total_variation(&a.probs, &b.probs) + 0.5 * (a.truncation_mass - b.truncation_mass).abs()
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if p >= 1.0 { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

pub const Z95: f64 = 1.959_963_984_540_054;

/// Normal quantile for a two-sided simultaneous band over `cells` cells.
pub fn bonferroni_z(level: f64, cells: usize) -> f64 {
    let alpha = (1.0 - level) / cells.max(1) as f64;
    crate::distributions::normal_quantile(1.0 - alpha / 2.0)
}

/// A probability or a statement that it lies below what the sample resolves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Resolved {
    Value(f64),
    BelowFloor(f64),
}

impl std::fmt::Display for Resolved {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Resolved::Value(v) => write!(f, "{v:.6e}"),
            Resolved::BelowFloor(floor) => write!(f, "< {floor:.1e}"),
        }
    }
}

/// Histogram of per-run counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalPmf {
    /// `counts[n]` = number of runs with exactly `n` interventions.
    pub counts: Vec<u64>,
    pub n_runs: u64,
    pub horizon: f64,
}

impl EmpiricalPmf {
    pub fn empty(horizon: f64) -> Self {
        Self {
            counts: Vec::new(),
            n_runs: 0,
            horizon,
        }
    }

    pub fn from_samples(samples: &[u64], horizon: f64) -> Self {
        let mut e = Self::empty(horizon);
        for &s in samples {
            e.record(s);
        }
        e
    }

    pub fn record(&mut self, n: u64) {
        let n = n as usize;
        if self.counts.len() <= n {
            self.counts.resize(n + 1, 0);
        }
        self.counts[n] += 1;
        self.n_runs += 1;
    }

    /// Count addition. Merging is exact and order-independent.
    pub fn merge(&mut self, other: &EmpiricalPmf) -> Result<(), PmfError> {
        horizons_compatible(Some(self.horizon), Some(other.horizon))?;
        if self.counts.len() < other.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.n_runs += other.n_runs;
        Ok(())
    }

    pub fn prob(&self, n: usize) -> f64 {
        if self.n_runs == 0 {
            return 0.0;
        }
        self.counts.get(n).copied().unwrap_or(0) as f64 / self.n_runs as f64
    }

    pub fn probs(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|n| self.prob(n)).collect()
    }

    pub fn mean(&self) -> f64 {
        if self.n_runs == 0 {
            return 0.0;
        }
        let s: f64 = self.counts.iter().enumerate().map(|(n, &c)| n as f64 * c as f64).sum();
        s / self.n_runs as f64
    }

    /// Runs with more than `n` interventions.
    pub fn tail_count(&self, n: usize) -> u64 {
        self.counts.iter().skip(n + 1).sum()
    }

    /// Smallest nonzero probability the sample can express.
    pub fn resolution_floor(&self) -> f64 {
        1.0 / self.n_runs.max(1) as f64
    }

    pub fn resolved(&self, n: usize) -> Resolved {
        match self.counts.get(n).copied().unwrap_or(0) {
            0 => Resolved::BelowFloor(self.resolution_floor()),
            _ => Resolved::Value(self.prob(n)),
        }
    }

    pub fn resolved_tail(&self, n: usize) -> Resolved {
        match self.tail_count(n) {
            0 => Resolved::BelowFloor(self.resolution_floor()),
            k => Resolved::Value(k as f64 / self.n_runs as f64),
        }
    }

    pub fn ci(&self, n: usize, z: f64) -> (f64, f64) {
        wilson_interval(self.counts.get(n).copied().unwrap_or(0), self.n_runs, z)
    }

    pub fn ci95(&self, n: usize) -> (f64, f64) {
        self.ci(n, Z95)
    }

    /// Bins with 95% simultaneous (Bonferroni) coverage over the observed support.
    pub fn joint_ci95(&self) -> Vec<(f64, f64)> {
        let z = bonferroni_z(0.95, self.counts.len());
        (0..self.counts.len()).map(|n| self.ci(n, z)).collect()
    }

    pub fn to_pmf(&self) -> Result<TaskloadPmf, PmfError> {
        if self.n_runs == 0 {
            return Err(PmfError::Empty);
        }
        Ok(TaskloadPmf {
            probs: self.probs(),
            truncation_mass: 0.0,
            horizon: Some(self.horizon),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_mass_and_mean() {
        let p = TaskloadPmf::poisson(20.0, 1e-12, None);
        assert!((p.total_mass() - 1.0).abs() < 1e-12);
        assert!((p.mean() - 20.0).abs() < 1e-6);
        assert!((TaskloadPmf::poisson(1.0, 1e-12, None).prob(0) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn poisson_large_mean_does_not_underflow() {
        let p = TaskloadPmf::poisson(900.0, 1e-10, None);
        assert!((p.total_mass() - 1.0).abs() < 1e-9);
        assert!((p.mean() - 900.0).abs() < 1e-5);
    }

    #[test]
    fn validate_rejects_broken() {
        assert!(TaskloadPmf::new(vec![0.5, 0.4], 0.0, None).is_err());
        assert!(TaskloadPmf::new(vec![1.1, -0.1], 0.0, None).is_err());
        assert!(TaskloadPmf::new(vec![0.5, 0.4], 0.1, None).is_ok());
    }

    #[test]
    fn shift_down() {
        let p = TaskloadPmf::new(vec![0.2, 0.3, 0.5], 0.0, None).unwrap();
        assert_eq!(p.shifted_down().probs, vec![0.5, 0.5]);
    }

    #[test]
    fn tv_basics() {
        let a = TaskloadPmf::point(0, None);
        let b = TaskloadPmf::point(1, None);
        assert_eq!(tv_distance(&a, &a), 0.0);
        assert_eq!(tv_distance(&a, &b), 1.0);
    }

    #[test]
    fn wilson_known_value() {
        // 10 successes out of 100 trials, z = 1.96: [0.0552, 0.1744].
        let (lo, hi) = wilson_interval(10, 100, Z95);
        assert!((lo - 0.0552).abs() < 1e-4);
        assert!((hi - 0.1744).abs() < 1e-4);
        let (lo, hi) = wilson_interval(0, 100, Z95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
    }

    #[test]
    fn merge_is_addition() {
        let mut a = EmpiricalPmf::from_samples(&[0, 1, 1, 3], 120.0);
        let b = EmpiricalPmf::from_samples(&[2, 0], 120.0);
        a.merge(&b).unwrap();
        assert_eq!(a, EmpiricalPmf::from_samples(&[0, 1, 1, 3, 2, 0], 120.0));
        assert!(a.merge(&EmpiricalPmf::empty(60.0)).is_err());
    }

    #[test]
    fn zero_bins_below_floor() {
        let e = EmpiricalPmf::from_samples(&[0, 0, 2], 120.0);
        assert_eq!(e.resolved(1), Resolved::BelowFloor(1.0 / 3.0));
        assert_eq!(e.resolved_tail(2), Resolved::BelowFloor(1.0 / 3.0));
        assert!(matches!(e.resolved(2), Resolved::Value(_)));
    }
}
