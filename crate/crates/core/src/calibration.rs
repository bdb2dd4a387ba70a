//! OU parameter estimation from a uniformly sampled deviation series.
//!
//! Sampled at step `dt`, the process is the AR(1) recursion
//! `X[i+1] = a X[i] + b + eps` with `a = exp(-kappa dt)`,
//! `b = mu (1 - a)` and Gaussian `eps`. Least squares regresses on that
//! recursion; maximum likelihood solves the conditional-Gaussian score
//! equations by alternating between the `mu` and `kappa` conditions. Both
//! use the `1/n` residual variance, so they agree on every input.

use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

use crate::distributions::MomentSet;
use crate::ou_process::OuParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("series needs at least {need} points, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("sampling step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("non-finite value at index {0}")]
    NotFinite(usize),
    #[error("predictor values have zero variance")]
    ConstantPredictor,
    #[error("series has zero variance; shape moments undefined")]
    ZeroVariance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub values: Vec<f64>,
    pub dt: f64,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, dt: f64) -> Result<Self, CalibrationError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(CalibrationError::BadStep(dt));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(CalibrationError::NotFinite(i));
        }
        if values.len() < 3 {
            return Err(CalibrationError::TooShort {
                need: 3,
                got: values.len(),
            });
        }
        Ok(Self { values, dt })
    }

    /// Number of transitions.
    pub fn n(&self) -> usize {
        self.values.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationFlag {
    /// Autoregression coefficient at or below zero: no elasticity can be inferred.
    NoMeanMemory,
    /// Autoregression coefficient at or above one.
    NonMeanReverting,
    /// Maximum-likelihood iteration hit its bound without converging.
    NotConverged,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub method: &'static str,
    /// Present only when the recursion coefficient lies in (0, 1).
    pub params: Option<OuParams>,
    pub a_hat: f64,
    pub b_hat: f64,
    pub sigma_eps_hat: f64,
    pub loglik: f64,
    /// `sigma_eps / sqrt(1 - a^2)`; equals `sigma / sqrt(2 kappa)` when kappa is defined.
    pub stationary_sd: Option<f64>,
    pub iterations: usize,
    pub flags: Vec<CalibrationFlag>,
}

impl CalibrationReport {
    pub fn kappa(&self) -> Option<f64> {
        self.params.map(|p| p.kappa)
    }

    pub fn mu(&self) -> Option<f64> {
        self.params.map(|p| p.mu)
    }

    pub fn sigma(&self) -> Option<f64> {
        self.params.map(|p| p.sigma)
    }
}

struct Recursion {
    a: f64,
    b: f64,
    sigma_eps: f64,
}

fn ls_recursion(ts: &TimeSeries) -> Result<Recursion, CalibrationError> {
    let n = ts.n() as f64;
    let x = &ts.values[..ts.n()];
    let y = &ts.values[1..];
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    if sxx <= (1e-13 * scale).powi(2) * n {
        return Err(CalibrationError::ConstantPredictor);
    }
    let a = sxy / sxx;
    let b = my - a * mx;
    let rss: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - a * xi - b).powi(2)).sum();
    Ok(Recursion {
        a,
        b,
        sigma_eps: (rss / n).sqrt(),
    })
}

/// Maps recursion coefficients to OU parameters, flagging when impossible.
fn to_params(r: &Recursion, dt: f64, flags: &mut Vec<CalibrationFlag>) -> (Option<OuParams>, Option<f64>) {
    if r.a <= 0.0 {
        flags.push(CalibrationFlag::NoMeanMemory);
    }
    if r.a >= 1.0 {
        flags.push(CalibrationFlag::NonMeanReverting);
    }
    let stationary = (r.a.abs() < 1.0).then(|| r.sigma_eps / (1.0 - r.a * r.a).sqrt());
    if !(r.a > 0.0 && r.a < 1.0) {
        return (None, stationary);
    }
    let kappa = -r.a.ln() / dt;
    let params = OuParams {
        kappa,
        mu: r.b / (1.0 - r.a),
        sigma: r.sigma_eps * (2.0 * kappa / (1.0 - r.a * r.a)).sqrt(),
    };
    (Some(params), stationary)
}

/// Conditional Gaussian log-likelihood of the transitions given the first point.
pub fn log_likelihood(ts: &TimeSeries, p: &OuParams) -> f64 {
    let a = (-p.kappa * ts.dt).exp();
    let var = if p.kappa * ts.dt < 1e-12 {
        p.sigma * p.sigma * ts.dt
    } else {
        p.sigma * p.sigma * (1.0 - a * a) / (2.0 * p.kappa)
    };
    let n = ts.n() as f64;
    let ss: f64 = ts
        .values
        .windows(2)
        .map(|w| (w[1] - p.mu - a * (w[0] - p.mu)).powi(2))
        .sum();
    -0.5 * n * (2.0 * PI * var).ln() - ss / (2.0 * var)
}

fn recursion_loglik(ts: &TimeSeries, r: &Recursion) -> f64 {
    let n = ts.n() as f64;
    let var = r.sigma_eps * r.sigma_eps;
    if var <= 0.0 {
        return f64::INFINITY;
    }
    // At the optimum the residual sum of squares equals n * var.
    -0.5 * n * ((2.0 * PI * var).ln() + 1.0)
}

pub fn fit_least_squares(ts: &TimeSeries) -> Result<CalibrationReport, CalibrationError> {
    let r = ls_recursion(ts)?;
    let mut flags = Vec::new();
    let (params, stationary_sd) = to_params(&r, ts.dt, &mut flags);
    Ok(CalibrationReport {
        method: "least_squares",
        params,
        a_hat: r.a,
        b_hat: r.b,
        sigma_eps_hat: r.sigma_eps,
        loglik: recursion_loglik(ts, &r),
        stationary_sd,
        iterations: 0,
        flags,
    })
}

pub const MLE_MAX_ITER: usize = 100;
pub const MLE_REL_TOL: f64 = 1e-10;

/// Maximum likelihood, iterating from the least-squares estimate.
pub fn fit_mle(ts: &TimeSeries) -> Result<CalibrationReport, CalibrationError> {
    let start = ls_recursion(ts)?;
    let mu0 = if start.a < 1.0 && start.a > 0.0 {
        start.b / (1.0 - start.a)
    } else {
        ts.values.iter().sum::<f64>() / ts.values.len() as f64
    };
    fit_mle_from(ts, mu0)
}

/// Maximum likelihood, iterating from a given starting mean.
pub fn fit_mle_from(ts: &TimeSeries, mu_start: f64) -> Result<CalibrationReport, CalibrationError> {
    ls_recursion(ts)?;
    let n = ts.n() as f64;
    let x = &ts.values[..ts.n()];
    let y = &ts.values[1..];
    let mut flags = Vec::new();
    let mut mu = mu_start;
    let mut a = f64::NAN;
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=MLE_MAX_ITER {
        iterations = it;
        // kappa condition: a = sum (y - mu)(x - mu) / sum (x - mu)^2.
        let mut num = 0.0;
        let mut den = 0.0;
        for (xi, yi) in x.iter().zip(y) {
            num += (yi - mu) * (xi - mu);
            den += (xi - mu) * (xi - mu);
        }
        let a_new = num / den;
        if !(a_new < 1.0) {
            a = a_new;
            break;
        }
        // mu condition: mu = sum (y - a x) / (n (1 - a)).
        let s: f64 = x.iter().zip(y).map(|(xi, yi)| yi - a_new * xi).sum();
        let mu_new = s / (n * (1.0 - a_new));
        let done = (mu_new - mu).abs() <= MLE_REL_TOL * mu_new.abs().max(1e-300)
            && (a_new - a).abs() <= MLE_REL_TOL * a_new.abs();
        a = a_new;
        mu = mu_new;
        if done {
            converged = true;
            break;
        }
    }
    if !converged && a < 1.0 {
        flags.push(CalibrationFlag::NotConverged);
    }
    let b = mu * (1.0 - a);
    let rss: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - mu - a * (xi - mu)).powi(2)).sum();
    let r = Recursion {
        a,
        b,
        sigma_eps: (rss / n).sqrt(),
    };
    let (params, stationary_sd) = to_params(&r, ts.dt, &mut flags);
    Ok(CalibrationReport {
        method: "mle",
        params,
        a_hat: r.a,
        b_hat: r.b,
        sigma_eps_hat: r.sigma_eps,
        loglik: params.map_or_else(|| recursion_loglik(ts, &r), |p| log_likelihood(ts, &p)),
        stationary_sd,
        iterations,
        flags,
    })
}

/// Sample mean, unbiased variance and standardized shape moments.
pub fn sample_moments(values: &[f64]) -> Result<MomentSet, CalibrationError> {
    if values.len() < 4 {
        return Err(CalibrationError::TooShort {
            need: 4,
            got: values.len(),
        });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    if m2 <= 0.0 {
        return Err(CalibrationError::ZeroVariance);
    }
    let (m2b, m3b, m4b) = (m2 / n, m3 / n, m4 / n);
    Ok(MomentSet {
        mu1: mean,
        mu2: m2 / (n - 1.0),
        beta1: m3b * m3b / m2b.powi(3),
        beta2: m4b / (m2b * m2b),
        mu3: m3b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{johnson_sample, JohnsonSuParams, RandomSource};
    use crate::ou_process::ou_path;

    fn affine() -> TimeSeries {
        let mut v = vec![1.0];
        for _ in 0..20 {
            let last = *v.last().unwrap();
            v.push(0.5 * last + 0.1);
        }
        TimeSeries::new(v, 1.0).unwrap()
    }

    fn synthetic(p: &OuParams, n: usize, dt: f64, seed: u64) -> TimeSeries {
        let path = ou_path(p, p.mu, n as f64 * dt, dt, RandomSource::new(seed, 0));
        TimeSeries::new(path.into_iter().map(|s| s.x).collect(), dt).unwrap()
    }

    #[test]
    fn exact_affine_recovery() {
        for r in [fit_least_squares(&affine()).unwrap(), fit_mle(&affine()).unwrap()] {
            let p = r.params.unwrap();
            assert!((p.kappa - 2f64.ln()).abs() < 1e-9, "{}", r.method);
            assert!((p.mu - 0.2).abs() < 1e-9);
            assert!(p.sigma.abs() < 1e-7);
        }
    }

    #[test]
    fn rejects_bad_series() {
        assert!(TimeSeries::new(vec![1.0, 2.0], 1.0).is_err());
        assert!(TimeSeries::new(vec![1.0, 2.0, f64::NAN], 1.0).is_err());
        assert!(TimeSeries::new(vec![1.0, 2.0, 3.0], 0.0).is_err());
        let flat = TimeSeries::new(vec![3.0; 10], 1.0).unwrap();
        assert_eq!(fit_least_squares(&flat), Err(CalibrationError::ConstantPredictor));
        assert_eq!(sample_moments(&flat.values), Err(CalibrationError::ZeroVariance));
    }

    #[test]
    fn lateral_round_trip() {
        let truth = OuParams::LATERAL;
        let ts = synthetic(&truth, 100_000, 0.1, 21);
        for r in [fit_least_squares(&ts).unwrap(), fit_mle(&ts).unwrap()] {
            let p = r.params.unwrap();
            assert!(
                (p.kappa / truth.kappa - 1.0).abs() < 0.05,
                "{} kappa {}",
                r.method,
                p.kappa
            );
            assert!((p.mu / truth.mu - 1.0).abs() < 0.05, "{} mu {}", r.method, p.mu);
            assert!(
                (p.sigma / truth.sigma - 1.0).abs() < 0.05,
                "{} sigma {}",
                r.method,
                p.sigma
            );
        }
    }

    #[test]
    fn mle_converges_from_sample_mean() {
        let ts = synthetic(&OuParams::new(0.7, 2.0, 0.4).unwrap(), 5_000, 0.5, 22);
        let ls = fit_least_squares(&ts).unwrap();
        let mle = fit_mle_from(&ts, 0.0).unwrap();
        assert!(mle.flags.is_empty(), "{:?}", mle.flags);
        assert!(mle.iterations > 1);
        assert!((mle.kappa().unwrap() / ls.kappa().unwrap() - 1.0).abs() < 1e-8);
        assert!((mle.mu().unwrap() / ls.mu().unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn loglik_is_local_max() {
        let ts = synthetic(&OuParams::new(1.2, -0.5, 0.3).unwrap(), 20_000, 0.2, 23);
        let r = fit_mle(&ts).unwrap();
        let p = r.params.unwrap();
        let best = log_likelihood(&ts, &p);
        assert!((best - r.loglik).abs() < 1e-9 * best.abs());
        for f in [0.9, 1.1] {
            for q in [
                OuParams {
                    kappa: p.kappa * f,
                    ..p
                },
                OuParams { mu: p.mu * f, ..p },
                OuParams {
                    sigma: p.sigma * f,
                    ..p
                },
            ] {
                assert!(log_likelihood(&ts, &q) <= best);
            }
        }
        let ls = fit_least_squares(&ts).unwrap();
        assert!((ls.loglik - best).abs() < 1e-6 * best.abs());
    }

    #[test]
    fn iid_johnson_has_no_memory_or_weak_memory() {
        let v = johnson_sample(&JohnsonSuParams::LATERAL, RandomSource::new(24, 0), 100_000);
        let ts = TimeSeries::new(v.clone(), 1.0).unwrap();
        let m = sample_moments(&v).unwrap();
        let r = fit_least_squares(&ts).unwrap();
        let se = (m.mu2 / v.len() as f64).sqrt();
        match r.params {
            Some(p) => assert!((p.mu - m.mu1).abs() < 2.0 * se / (1.0 - r.a_hat)),
            None => assert!(r.flags.contains(&CalibrationFlag::NoMeanMemory)),
        }
        let sd = r.stationary_sd.unwrap();
        assert!((sd / m.mu2.sqrt() - 1.0).abs() < 0.25);
    }

    #[test]
    fn negative_autocorrelation_flagged() {
        let v: Vec<f64> = (0..50)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } + 0.01 * i as f64)
            .collect();
        let r = fit_least_squares(&TimeSeries::new(v, 1.0).unwrap()).unwrap();
        assert!(r.a_hat < 0.0);
        assert!(r.params.is_none());
        assert!(r.flags.contains(&CalibrationFlag::NoMeanMemory));
        assert!(r.stationary_sd.is_some());
    }

    #[test]
    fn random_walk_flagged_non_reverting() {
        let v: Vec<f64> = (0..50).map(|i| (i * i) as f64).collect();
        let r = fit_mle(&TimeSeries::new(v, 1.0).unwrap()).unwrap();
        assert!(r.params.is_none());
        assert!(r.flags.contains(&CalibrationFlag::NonMeanReverting));
    }

    #[test]
    fn gaussian_shape_moments() {
        let mut rng = RandomSource::new(25, 0).rng();
        let v: Vec<f64> = (0..1_000_000)
            .map(|_| crate::distributions::standard_normal(&mut rng))
            .collect();
        let m = sample_moments(&v).unwrap();
        assert!(m.beta1 < 0.01);
        assert!((m.beta2 - 3.0).abs() < 0.05);
    }

    #[test]
    fn johnson_kurtosis() {
        let v = johnson_sample(&JohnsonSuParams::LATERAL, RandomSource::new(26, 0), 1_000_000);
        let m = sample_moments(&v).unwrap();
        assert!((m.beta2 / 5.107 - 1.0).abs() < 0.2, "{}", m.beta2);
    }
}
