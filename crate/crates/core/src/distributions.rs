//! Johnson S_U flight-technical-error generator and the sampling primitives
//! shared by the simulators.
//!
//! Every random draw in the crate goes through a [`RandomSource`]: a
//! `(seed, stream_id)` pair that selects one ChaCha8 keystream. Normals come
//! from the ziggurat sampler in `rand_distr`, which is exact and fully
//! determined by the keystream, so identical sources always produce identical
//! variates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::axes::AxisTriple;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("parameter `{name}` must be finite, got {value}")]
    NotFinite { name: &'static str, value: f64 },
    #[error("parameter `{name}` must be positive, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("parameter `{name}` must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("{0}")]
    Invalid(String),
}

pub(crate) fn finite(name: &'static str, value: f64) -> Result<f64, ParamError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(ParamError::NotFinite { name, value })
    }
}

pub(crate) fn positive(name: &'static str, value: f64) -> Result<f64, ParamError> {
    finite(name, value)?;
    if value > 0.0 {
        Ok(value)
    } else {
        Err(ParamError::NotPositive { name, value })
    }
}

pub(crate) fn non_negative(name: &'static str, value: f64) -> Result<f64, ParamError> {
    finite(name, value)?;
    if value >= 0.0 {
        Ok(value)
    } else {
        Err(ParamError::Negative { name, value })
    }
}

/// A reproducible random stream.
///
/// The same `(seed, stream_id)` always yields the same sequence. Distinct
/// stream ids select disjoint ChaCha keystreams, which is what lets Monte
/// Carlo runs execute in any order and still merge to identical counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomSource {
    pub seed: u64,
    pub stream_id: u64,
}

impl RandomSource {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Child stream for the `index`-th independent work unit under this one.
    pub fn derive(&self, index: u64) -> RandomSource {
        RandomSource {
            seed: self.seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d))),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// Inverse of [`normal_cdf`].
pub fn normal_quantile(p: f64) -> f64 {
    let z = -std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p);
    if !z.is_finite() {
        return z;
    }
    // One Newton step polishes the series approximation.
    z - (normal_cdf(z) - p) / normal_pdf(z)
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Four-parameter Johnson unbounded (S_U) transform of a standard normal:
/// `X = scale_lambda * sinh((Z - gamma) / delta) + xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JohnsonSuParams {
    pub gamma: f64,
    pub delta: f64,
    pub scale_lambda: f64,
    pub xi: f64,
}

impl JohnsonSuParams {
    pub fn new(gamma: f64, delta: f64, scale_lambda: f64, xi: f64) -> Result<Self, ParamError> {
        let p = Self {
            gamma,
            delta,
            scale_lambda,
            xi,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        finite("gamma", self.gamma)?;
        positive("delta", self.delta)?;
        positive("scale_lambda", self.scale_lambda)?;
        finite("xi", self.xi)?;
        Ok(())
    }

    /// Fitted lateral FTE parameters (NM).
    pub const LATERAL: JohnsonSuParams = JohnsonSuParams {
        gamma: 0.4566,
        delta: 1.897,
        scale_lambda: 0.0443,
        xi: -0.01567,
    };

    /// Fitted vertical FTE parameters (ft).
    pub const VERTICAL: JohnsonSuParams = JohnsonSuParams {
        gamma: 0.4566,
        delta: 1.897,
        scale_lambda: 7.2907,
        xi: 10.0362,
    };

    /// Longitudinal FTE parameters (NM), obtained by scaling the lateral fit.
    pub const LONGITUDINAL: JohnsonSuParams = JohnsonSuParams {
        gamma: 0.4566,
        delta: 1.897,
        scale_lambda: 0.2145,
        xi: -0.0401,
    };

    pub fn defaults() -> AxisTriple<JohnsonSuParams> {
        AxisTriple::new(Self::LATERAL, Self::VERTICAL, Self::LONGITUDINAL)
    }
}

pub fn johnson_transform(z: f64, p: &JohnsonSuParams) -> f64 {
    p.scale_lambda * ((z - p.gamma) / p.delta).sinh() + p.xi
}

pub fn johnson_inverse(x: f64, p: &JohnsonSuParams) -> f64 {
    p.delta * ((x - p.xi) / p.scale_lambda).asinh() + p.gamma
}

/// Density of the transformed variable, `phi(g^-1(x)) / g'(g^-1(x))`.
pub fn johnson_density(x: f64, p: &JohnsonSuParams) -> f64 {
    let u = (x - p.xi) / p.scale_lambda;
    let z = johnson_inverse(x, p);
    // g'(g^-1(x)) = (lambda / delta) * cosh(asinh(u)) = (lambda / delta) * sqrt(1 + u^2)
    let slope = p.scale_lambda / p.delta * u.hypot(1.0);
    normal_pdf(z) / slope
}

/// CDF of the transformed variable; the transform is increasing so this is
/// just the normal CDF of the inverse.
pub fn johnson_cdf(x: f64, p: &JohnsonSuParams) -> f64 {
    normal_cdf(johnson_inverse(x, p))
}

pub fn johnson_draw<R: Rng + ?Sized>(p: &JohnsonSuParams, rng: &mut R) -> f64 {
    johnson_transform(standard_normal(rng), p)
}

/// `n` i.i.d. draws, fully determined by `src`.
pub fn johnson_sample(p: &JohnsonSuParams, src: RandomSource, n: usize) -> Vec<f64> {
    let mut rng = src.rng();
    (0..n).map(|_| johnson_draw(p, &mut rng)).collect()
}

/// Mean, variance and the two standardized shape moments.
///
/// `beta1` is the squared standardized skewness `mu3^2 / mu2^3` and `beta2`
/// the standardized kurtosis `mu4 / mu2^2`. Some tables print
/// `mu3^2 / mu2^2` for `beta1`; that form is not dimensionless and is not
/// used here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub mu1: f64,
    pub mu2: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Third central moment; its sign carries the skew direction lost in `beta1`.
    pub mu3: f64,
}

impl MomentSet {
    pub fn skewness(&self) -> f64 {
        self.mu3 / self.mu2.powf(1.5)
    }

    /// `beta2 >= beta1 + 1` holds for every distribution.
    pub fn is_feasible(&self) -> bool {
        self.mu2 > 0.0 && self.beta2 > 0.0 && self.beta2 >= self.beta1 + 1.0 - 1e-12
    }
}

/// Closed-form moments of the S_U law.
pub fn johnson_moments(p: &JohnsonSuParams) -> MomentSet {
    let w = (p.delta.powi(-2)).exp();
    let o = p.gamma / p.delta;
    let lam = p.scale_lambda;
    let mu1 = p.xi - lam * w.sqrt() * o.sinh();
    let mu2 = 0.5 * lam * lam * (w - 1.0) * (w * (2.0 * o).cosh() + 1.0);
    let mu3 = -0.25 * lam.powi(3) * w.sqrt() * (w - 1.0).powi(2) * (w * (w + 2.0) * (3.0 * o).sinh() + 3.0 * o.sinh());
    let mu4 = 0.125
        * lam.powi(4)
        * (w - 1.0).powi(2)
        * (w * w * (w.powi(4) + 2.0 * w.powi(3) + 3.0 * w * w - 3.0) * (4.0 * o).cosh()
            + 4.0 * w * w * (w + 2.0) * (2.0 * o).cosh()
            + 3.0 * (2.0 * w + 1.0));
    MomentSet {
        mu1,
        mu2,
        beta1: mu3 * mu3 / mu2.powi(3),
        beta2: mu4 / (mu2 * mu2),
        mu3,
    }
}

/// Poisson count with mean `intensity_time` (the product of rate and window).
pub fn poisson_sample<R: Rng + ?Sized>(intensity_time: f64, rng: &mut R) -> u64 {
    if intensity_time <= 0.0 {
        return 0;
    }
    let d = Poisson::new(intensity_time).expect("finite positive mean");
    d.sample(rng) as u64
}

/// Exponential gap with the given rate (per unit time).
pub fn exponential_sample<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    Exp::new(rate).expect("positive rate").sample(rng)
}
