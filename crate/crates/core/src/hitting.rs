//! First-passage densities and per-aircraft intervention counts.
//!
//! Interventions form a renewal process: after each barrier contact the
//! deviation restarts from the reset point, so the `n`-th contact time is a
//! sum of `n` independent first-passage times and
//! `P[N >= n] = integral over [0, T] of the (n-1)-fold autoconvolution of f`.

use serde::Serialize;
use thiserror::Error;

use crate::distributions::RandomSource;
use crate::ou_process::{first_passage_mc, Barrier, BarrierKind, Monitoring, OuParams};
use crate::pmf::{wilson_interval, TaskloadPmf, Z95};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HittingError {
    #[error("density grids differ: {0}")]
    GridMismatch(String),
    #[error("grid must start at t = 0 for convolution, starts at {0}")]
    OffsetGrid(f64),
    #[error("horizon {horizon} min lies beyond the grid span {span} min")]
    HorizonOutsideGrid { horizon: f64, span: f64 },
    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("closed form covers one-sided barriers only")]
    TwoSided,
    #[error("negative probability {value:.3e} at n = {n}: density is broken")]
    NegativeProbability { n: usize, value: f64 },
    #[error("P[N > {n_max}] = {mass:.3e} still exceeds {eps:.1e}")]
    Truncation { n_max: usize, mass: f64, eps: f64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// Density ordinates on the regular grid `t0 + j * dt_grid`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityGrid {
    pub t0: f64,
    pub dt_grid: f64,
    pub values: Vec<f64>,
}

impl DensityGrid {
    pub fn new(t0: f64, dt_grid: f64, values: Vec<f64>) -> Result<Self, HittingError> {
        if !(dt_grid > 0.0 && dt_grid.is_finite()) || !(t0 >= 0.0) {
            return Err(HittingError::Invalid(format!("grid t0 = {t0}, dt = {dt_grid}")));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(HittingError::Invalid(format!("density ordinate {v}")));
        }
        Ok(Self { t0, dt_grid, values })
    }

    /// Samples `f` at `0, dt, ..., span`.
    pub fn from_fn(dt_grid: f64, span: f64, f: impl Fn(f64) -> f64) -> Self {
        let n = (span / dt_grid).round() as usize;
        Self {
            t0: 0.0,
            dt_grid,
            values: (0..=n).map(|j| f(j as f64 * dt_grid).max(0.0)).collect(),
        }
    }

    pub fn zeros(dt_grid: f64, span: f64) -> Self {
        Self::from_fn(dt_grid, span, |_| 0.0)
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dt_grid
    }

    pub fn span_end(&self) -> f64 {
        self.time(self.values.len().saturating_sub(1))
    }

    pub fn is_empty(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Trapezoid integral over the whole grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.dt_grid)
    }

    /// Trapezoid integral from `t0` to `t`, with linear interpolation inside
    /// the last cell.
    pub fn integral_to(&self, t: f64) -> Result<f64, HittingError> {
        integral_to(&self.values, self.t0, self.dt_grid, t)
    }

    fn check_compatible(&self, other: &DensityGrid) -> Result<(), HittingError> {
        if self.t0 != 0.0 {
            return Err(HittingError::OffsetGrid(self.t0));
        }
        if other.t0 != 0.0 {
            return Err(HittingError::OffsetGrid(other.t0));
        }
        if (self.dt_grid - other.dt_grid).abs() > 1e-12 * self.dt_grid || self.values.len() != other.values.len() {
            return Err(HittingError::GridMismatch(format!(
                "dt {} vs {}, length {} vs {}",
                self.dt_grid,
                other.dt_grid,
                self.values.len(),
                other.values.len()
            )));
        }
        Ok(())
    }
}

fn trapezoid(v: &[f64], h: f64) -> f64 {
    match v.len() {
        0 | 1 => 0.0,
        n => h * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[n - 1])),
    }
}

fn integral_to(v: &[f64], t0: f64, h: f64, t: f64) -> Result<f64, HittingError> {
    let span = t0 + (v.len().saturating_sub(1)) as f64 * h;
    if t > span + 1e-9 * h {
        return Err(HittingError::HorizonOutsideGrid { horizon: t, span });
    }
    if t <= t0 {
        return Ok(0.0);
    }
    let pos = ((t - t0) / h).min((v.len() - 1) as f64);
    let m = (pos + 1e-9).floor() as usize;
    let frac = pos - m as f64;
    let mut s = trapezoid(&v[..=m], h);
    if frac > 1e-9 && m + 1 < v.len() {
        let end = v[m] + frac * (v[m + 1] - v[m]);
        s += 0.5 * frac * h * (v[m] + end);
    }
    Ok(s)
}

/// Trapezoid-rule convolution on a shared grid starting at 0, truncated to the grid span.
pub fn convolve_density(a: &DensityGrid, b: &DensityGrid) -> Result<DensityGrid, HittingError> {
    a.check_compatible(b)?;
    let n = a.values.len();
    let h = a.dt_grid;
    let (x, y) = (&a.values, &b.values);
    let mut out = vec![0.0; n];
    for m in 1..n {
        let mut s = 0.0;
        for j in 0..=m {
            s += x[j] * y[m - j];
        }
        s -= 0.5 * (x[0] * y[m] + x[m] * y[0]);
        out[m] = (h * s).max(0.0);
    }
    Ok(DensityGrid {
        t0: 0.0,
        dt_grid: h,
        values: out,
    })
}

/// `order`-fold autoconvolution; order 0 returns the input.
pub fn autoconvolve_density(f: &DensityGrid, order: usize) -> Result<DensityGrid, HittingError> {
    let mut acc = f.clone();
    for _ in 0..order {
        acc = convolve_density(&acc, f)?;
    }
    Ok(acc)
}

pub const DEFAULT_DT_GRID: f64 = 0.05;
pub const DEFAULT_N_MAX: usize = 64;
pub const DEFAULT_EPS: f64 = 1e-6;
/// Largest negative mass attributed to quadrature error rather than a broken density.
pub const NEGATIVE_TOL: f64 = 1e-4;

/// Intervention-count PMF over `[0, horizon]` from a first-passage density.
pub fn intervention_pmf(f: &DensityGrid, horizon: f64, n_max: usize, eps: f64) -> Result<TaskloadPmf, HittingError> {
    if n_max < 1 {
        return Err(HittingError::Invalid("n_max must be at least 1".into()));
    }
    if f.t0 != 0.0 {
        return Err(HittingError::OffsetGrid(f.t0));
    }
    // tails[n] = P[N >= n].
    let mut tails = vec![1.0];
    let mut conv = f.clone();
    loop {
        let n = tails.len();
        let tail = conv.integral_to(horizon)?.min(1.0);
        tails.push(tail);
        if tail < eps {
            break;
        }
        if n > n_max {
            return Err(HittingError::Truncation { n_max, mass: tail, eps });
        }
        conv = convolve_density(&conv, f)?;
    }
    let last = tails.len() - 1;
    let mut probs = Vec::with_capacity(last);
    for n in 0..last {
        let p = tails[n] - tails[n + 1];
        if p < -NEGATIVE_TOL {
            return Err(HittingError::NegativeProbability { n, value: p });
        }
        // Quadrature noise: keep the tail sequence monotone so the masses
        // still telescope to one.
        tails[n + 1] = tails[n + 1].min(tails[n]);
        probs.push(tails[n] - tails[n + 1]);
    }
    let pmf = TaskloadPmf {
        probs,
        truncation_mass: tails[last],
        horizon: Some(horizon),
    };
    Ok(pmf)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedFormFlag {
    /// Exponent outside floating-point range; ordinate replaced by 0.
    Overflow,
    /// Formula evaluated to a negative ordinate.
    Negative,
    /// No diffusion; the formula does not apply.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormOrdinate {
    pub value: f64,
    pub flag: Option<ClosedFormFlag>,
}

/// Published first-passage density for a one-sided barrier, evaluated
/// exactly as typeset:
///
/// `f(t) = (k - X0/s2) / sqrt(2 pi) * (kappa / (s2 sinh(kappa t)))^(3/2)
///        * exp[kappa/(2 s2) ((X0/s2 - mu)^2 - (k - mu)^2 + s2 t - (X0/s2)^2 coth(kappa t))]`
///
/// with `s2 = sigma^2`. The groupings look garbled (it does not integrate to
/// the simulated hitting probability), so it is kept for comparison only and
/// nothing downstream uses it.
pub fn fpt_density_closed_form(p: &OuParams, b: &Barrier, t: f64) -> Result<ClosedFormOrdinate, HittingError> {
    if !(t > 0.0) {
        return Err(HittingError::NonPositiveTime(t));
    }
    if !matches!(b.kind, BarrierKind::OneSided) {
        return Err(HittingError::TwoSided);
    }
    let s2 = p.sigma * p.sigma;
    if s2 == 0.0 {
        return Ok(ClosedFormOrdinate {
            value: 0.0,
            flag: Some(ClosedFormFlag::Degenerate),
        });
    }
    let (k, x0, mu, kappa) = (b.level, b.origin, p.mu, p.kappa);
    let kt = kappa * t;
    // kappa / sinh(kappa t) and kappa * coth(kappa t), both 1/t as kappa -> 0.
    let (k_over_sinh, k_coth) = if kt < 1e-8 {
        (1.0 / t, 1.0 / t)
    } else {
        (kappa / kt.sinh(), kappa / kt.tanh())
    };
    let r = x0 / s2;
    let prefactor = (k - r) / (2.0 * std::f64::consts::PI).sqrt();
    let exponent = 1.5 * (k_over_sinh / s2).ln()
        + (kappa * ((r - mu).powi(2) - (k - mu).powi(2) + s2 * t) - r * r * k_coth) / (2.0 * s2);
    if exponent > 700.0 || !exponent.is_finite() {
        return Ok(ClosedFormOrdinate {
            value: 0.0,
            flag: Some(ClosedFormFlag::Overflow),
        });
    }
    let value = prefactor * exponent.exp();
    Ok(ClosedFormOrdinate {
        value,
        flag: (value < 0.0).then_some(ClosedFormFlag::Negative),
    })
}

/// Closed-form ordinates on a grid, with their integral and any flags raised.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedFormCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub integral: f64,
    pub flags: Vec<ClosedFormFlag>,
}

pub fn closed_form_curve(
    p: &OuParams,
    b: &Barrier,
    horizon: f64,
    dt_grid: f64,
) -> Result<ClosedFormCurve, HittingError> {
    let n = (horizon / dt_grid).round() as usize;
    let mut times = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let mut flags = Vec::new();
    for j in 1..=n {
        let t = j as f64 * dt_grid;
        let o = fpt_density_closed_form(p, b, t)?;
        if let Some(f) = o.flag {
            if !flags.contains(&f) {
                flags.push(f);
            }
        }
        times.push(t);
        values.push(o.value);
    }
    let mut padded = vec![0.0];
    padded.extend(&values);
    Ok(ClosedFormCurve {
        integral: trapezoid(&padded, dt_grid),
        times,
        values,
        flags,
    })
}

/// Simulated first-passage density.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityOracle {
    pub grid: DensityGrid,
    /// Pointwise 95% band on the ordinates.
    pub ci_lo: Vec<f64>,
    pub ci_hi: Vec<f64>,
    /// Estimated `P[tau <= horizon]` and its 95% interval.
    pub probability: f64,
    pub probability_ci: (f64, f64),
    pub n_paths: u64,
    /// No path hit; the grid is all zeros.
    pub empty: bool,
}

/// Histogram density of simulated hitting times.
///
/// Node `j` collects hits in `((j - 1/2) r, (j + 1/2) r]` for resolution `r`.
/// With `r` equal to the simulation step every hit lands on its own node.
/// Ordinates are scaled so the trapezoid integral over `[0, horizon]` equals
/// the simulated hitting probability.
#[allow(clippy::too_many_arguments)]
pub fn fpt_density_oracle(
    p: &OuParams,
    b: &Barrier,
    horizon: f64,
    resolution: f64,
    dt: f64,
    n_paths: u64,
    src: RandomSource,
    monitoring: Monitoring,
) -> Result<DensityOracle, HittingError> {
    if !(resolution > 0.0) || !(horizon > 0.0) || n_paths == 0 {
        return Err(HittingError::Invalid(
            "resolution, horizon and n_paths must be positive".into(),
        ));
    }
    let fp = first_passage_mc(p, b, horizon, dt, n_paths, src, monitoring);
    // The grid must reach the horizon even when it is not a whole number of cells.
    let n_nodes = (horizon / resolution - 1e-9).ceil().max(1.0) as usize + 1;
    let mut counts = vec![0u64; n_nodes];
    for &t in &fp.hit_times {
        let j = ((t / resolution) - 0.5 - 1e-9).ceil().max(0.0) as usize;
        counts[j.min(n_nodes - 1)] += 1;
    }
    let width = n_paths as f64 * resolution;
    let raw: Vec<f64> = counts.iter().map(|&c| c as f64 / width).collect();
    let integral = integral_to(&raw, 0.0, resolution, horizon)?;
    let probability = fp.probability();
    let scale = if integral > 0.0 { probability / integral } else { 0.0 };
    let band = |z_sign: bool| -> Vec<f64> {
        counts
            .iter()
            .map(|&c| {
                let (lo, hi) = wilson_interval(c, n_paths, Z95);
                scale * if z_sign { hi } else { lo } * n_paths as f64 / width
            })
            .collect()
    };
    Ok(DensityOracle {
        grid: DensityGrid {
            t0: 0.0,
            dt_grid: resolution,
            values: raw.iter().map(|v| v * scale).collect(),
        },
        ci_lo: band(false),
        ci_hi: band(true),
        probability,
        probability_ci: fp.ci95(),
        n_paths,
        empty: fp.hit_times.is_empty(),
    })
}
