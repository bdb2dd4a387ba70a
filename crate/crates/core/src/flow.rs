//! Flow-level taskload: Poisson occupancy, discrete convolution of
//! per-aircraft PMFs, parallel lanes, and flow crossings.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::axes::AxisTriple;
use crate::distributions::{positive, ParamError};
use crate::pmf::{horizons_compatible, PmfError, TaskloadPmf};

#[derive(Debug, Error, PartialEq)]
pub enum FlowError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Pmf(#[from] PmfError),
    #[error("{0}")]
    Invalid(String),
    #[error("no positive real safe-zone bounds for alpha = {alpha_deg} deg")]
    NoSafeZone { alpha_deg: f64 },
    #[error("safe-zone transit time not set; solve the geometry first")]
    Unsolved,
}

/// Residual occupancy mass at which mixture sums stop.
pub const MIXTURE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceStandard {
    Stringent,
    Severe,
    Intermediate,
    Lax,
}

impl ToleranceStandard {
    pub const ALL: [ToleranceStandard; 4] = [
        ToleranceStandard::Stringent,
        ToleranceStandard::Severe,
        ToleranceStandard::Intermediate,
        ToleranceStandard::Lax,
    ];

    /// Half-widths: lateral NM, vertical ft, longitudinal NM.
    pub fn bounds(self) -> AxisTriple<f64> {
        match self {
            ToleranceStandard::Stringent => AxisTriple::new(0.1, 20.0, 0.5),
            ToleranceStandard::Severe => AxisTriple::new(0.12, 22.0, 0.6),
            ToleranceStandard::Intermediate => AxisTriple::new(0.15, 25.0, 0.8),
            ToleranceStandard::Lax => AxisTriple::new(0.2, 30.0, 1.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ToleranceStandard::Stringent => "stringent",
            ToleranceStandard::Severe => "severe",
            ToleranceStandard::Intermediate => "intermediate",
            ToleranceStandard::Lax => "lax",
        }
    }
}

impl std::str::FromStr for ToleranceStandard {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ToleranceStandard::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown tolerance standard `{s}`"))
    }
}

pub const DEFAULT_T_CROSS: f64 = 20.0;
pub const DEFAULT_SPEED_KT: f64 = 480.0;
pub const DEFAULT_LATERAL_EXTENT: f64 = 1.0;

/// One Poisson lane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    pub intensity_per_hour: f64,
    #[serde(default = "default_t_cross")]
    pub t_cross: f64,
    #[serde(default = "default_speed")]
    pub speed_kt: f64,
    pub tolerance: AxisTriple<f64>,
    #[serde(default = "default_extent")]
    pub lateral_extent: f64,
}

fn default_t_cross() -> f64 {
    DEFAULT_T_CROSS
}

fn default_speed() -> f64 {
    DEFAULT_SPEED_KT
}

fn default_extent() -> f64 {
    DEFAULT_LATERAL_EXTENT
}

impl FlowSpec {
    pub fn new(intensity_per_hour: f64, standard: ToleranceStandard) -> Self {
        Self {
            intensity_per_hour,
            t_cross: DEFAULT_T_CROSS,
            speed_kt: DEFAULT_SPEED_KT,
            tolerance: standard.bounds(),
            lateral_extent: DEFAULT_LATERAL_EXTENT,
        }
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        if !(self.intensity_per_hour >= 0.0 && self.intensity_per_hour.is_finite()) {
            return Err(FlowError::Invalid(format!(
                "intensity {} must be >= 0",
                self.intensity_per_hour
            )));
        }
        positive("t_cross", self.t_cross)?;
        positive("speed_kt", self.speed_kt)?;
        positive("lateral_extent", self.lateral_extent)?;
        for (axis, &b) in self.tolerance.iter() {
            if !(b > 0.0 && b.is_finite()) {
                return Err(FlowError::Invalid(format!("{axis} tolerance {b} must be positive")));
            }
        }
        Ok(())
    }

    /// Arrivals per minute.
    pub fn rate_per_min(&self) -> f64 {
        self.intensity_per_hour / 60.0
    }

    /// Mean number of aircraft present.
    pub fn mean_occupancy(&self) -> f64 {
        self.rate_per_min() * self.t_cross
    }

    /// Ground speed in NM per minute.
    pub fn speed_nm_per_min(&self) -> f64 {
        self.speed_kt / 60.0
    }
}

/// Number of aircraft present at a given instant.
pub fn poisson_occupancy(flow: &FlowSpec, eps: f64) -> Result<TaskloadPmf, FlowError> {
    flow.validate()?;
    Ok(TaskloadPmf::poisson(flow.mean_occupancy(), eps, None))
}

/// Law of the sum of two independent counts.
pub fn convolve_pmf(p: &TaskloadPmf, q: &TaskloadPmf) -> Result<TaskloadPmf, FlowError> {
    let horizon = horizons_compatible(p.horizon, q.horizon)?;
    let mut probs = vec![0.0; p.len() + q.len() - 1];
    for (i, &a) in p.probs.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for (j, &b) in q.probs.iter().enumerate() {
            probs[i + j] += a * b;
        }
    }
    let (tp, tq) = (p.truncation_mass, q.truncation_mass);
    Ok(TaskloadPmf {
        probs,
        truncation_mass: tp + tq - tp * tq,
        horizon,
    })
}

/// Drops the negligible upper tail that repeated convolution accumulates.
fn compact(p: TaskloadPmf) -> TaskloadPmf {
    p.trim(1e-300)
}

/// Poisson mixture of k-fold sums: the taskload of a whole lane.
pub fn single_lane_pmf(flow: &FlowSpec, per_aircraft: &TaskloadPmf) -> Result<TaskloadPmf, FlowError> {
    let occupancy = poisson_occupancy(flow, MIXTURE_EPS)?;
    mixture(&occupancy, per_aircraft)
}

/// `sum_i P[M = i] * (i-fold sum of per_aircraft)`, stopping once the
/// remaining occupancy mass drops below [`MIXTURE_EPS`].
pub fn mixture(occupancy: &TaskloadPmf, per_aircraft: &TaskloadPmf) -> Result<TaskloadPmf, FlowError> {
    let mut out = vec![0.0; 1];
    let mut trunc = 0.0;
    let mut power = TaskloadPmf::point(0, per_aircraft.horizon);
    let mut remaining = 1.0;
    for (i, &w) in occupancy.probs.iter().enumerate() {
        if i > 0 {
            power = compact(convolve_pmf(&power, per_aircraft)?);
        }
        if out.len() < power.len() {
            out.resize(power.len(), 0.0);
        }
        for (n, &p) in power.probs.iter().enumerate() {
            out[n] += w * p;
        }
        trunc += w * power.truncation_mass;
        remaining -= w;
        if remaining < MIXTURE_EPS && (i as f64) > occupancy.mean() {
            break;
        }
    }
    // Unvisited occupancy mass and the occupancy's own truncation.
    trunc += remaining.max(0.0);
    Ok(TaskloadPmf {
        probs: out,
        truncation_mass: trunc,
        horizon: per_aircraft.horizon,
    })
}

/// How parallel lanes are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultilaneRoute {
    /// Collapse to one lane at the summed intensity when every lane has the
    /// same tolerances, residency and per-aircraft PMF; convolve otherwise.
    Auto,
    /// Always convolve per-lane results.
    Convolve,
}

pub fn multilane_pmf(flows: &[FlowSpec], per_aircraft: &[TaskloadPmf]) -> Result<TaskloadPmf, FlowError> {
    multilane_pmf_with(flows, per_aircraft, MultilaneRoute::Auto)
}

pub fn multilane_pmf_with(
    flows: &[FlowSpec],
    per_aircraft: &[TaskloadPmf],
    route: MultilaneRoute,
) -> Result<TaskloadPmf, FlowError> {
    if flows.is_empty() || flows.len() != per_aircraft.len() {
        return Err(FlowError::Invalid(format!(
            "{} flows with {} per-aircraft PMFs",
            flows.len(),
            per_aircraft.len()
        )));
    }
    let uniform = flows
        .iter()
        .zip(per_aircraft)
        .all(|(f, p)| f.tolerance == flows[0].tolerance && f.t_cross == flows[0].t_cross && p == &per_aircraft[0]);
    if route == MultilaneRoute::Auto && uniform {
        let mut merged = flows[0].clone();
        merged.intensity_per_hour = flows.iter().map(|f| f.intensity_per_hour).sum();
        return single_lane_pmf(&merged, &per_aircraft[0]);
    }
    let mut acc: Option<TaskloadPmf> = None;
    for (f, p) in flows.iter().zip(per_aircraft) {
        let lane = single_lane_pmf(f, p)?;
        acc = Some(match acc {
            None => lane,
            Some(a) => convolve_pmf(&a, &lane)?,
        });
    }
    Ok(acc.expect("at least one flow"))
}

/// Two flows crossing at `alpha_deg`, and the safe zone around the crossing
/// point that admits one aircraft at a time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossingGeometry {
    pub alpha_deg: f64,
    pub e1: f64,
    pub e2: f64,
    #[serde(default = "default_d_min")]
    pub d_min: f64,
    /// Safe-zone half-lengths along each flow, filled by [`solve_safe_zone`].
    #[serde(default)]
    pub x1: Option<f64>,
    #[serde(default)]
    pub x2: Option<f64>,
    /// Safe-zone transit time in minutes.
    #[serde(default)]
    pub t_safe: Option<f64>,
}

fn default_d_min() -> f64 {
    5.0
}

impl CrossingGeometry {
    pub fn new(alpha_deg: f64, e1: f64, e2: f64, d_min: f64) -> Self {
        Self {
            alpha_deg,
            e1,
            e2,
            d_min,
            x1: None,
            x2: None,
            t_safe: None,
        }
    }

    /// Both flows at the default lateral extent, 5 NM minimum approach.
    pub fn standard(alpha_deg: f64) -> Self {
        Self::new(alpha_deg, DEFAULT_LATERAL_EXTENT, DEFAULT_LATERAL_EXTENT, 5.0)
    }

    /// Geometry with a prescribed transit time instead of a solved one.
    pub fn with_t_safe(mut self, t_safe: f64) -> Self {
        self.t_safe = Some(t_safe);
        self
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        if !(self.alpha_deg > 0.0 && self.alpha_deg < 180.0) {
            return Err(FlowError::Invalid(format!(
                "crossing angle {} must be in (0, 180)",
                self.alpha_deg
            )));
        }
        if !(self.e1 >= 0.0 && self.e2 >= 0.0) {
            return Err(FlowError::Invalid("lateral extents must be >= 0".into()));
        }
        positive("d_min", self.d_min)?;
        if let Some(t) = self.t_safe {
            positive("t_safe", t)?;
        }
        Ok(())
    }

    /// Squared corner distances minus `d_min^2` for both corner pairs.
    pub fn residuals(&self, x1: f64, x2: f64) -> (f64, f64) {
        let a = self.alpha_deg.to_radians();
        let (s, c) = a.sin_cos();
        let (g, h) = (self.e1 / 2.0, self.e2 / 2.0);
        let d2 = self.d_min * self.d_min;
        let r1 = (x1 + x2 * c - h * c).powi(2) + (-g + x2 * s + h * s).powi(2) - d2;
        let r2 = (x1 + x2 * c - h * s).powi(2) + (-g + x2 * s + h * c).powi(2) - d2;
        (r1, r2)
    }
}

/// Real roots of `a t^2 + b t + c = 0`.
fn quadratic(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a.abs() < 1e-300 {
        return if b != 0.0 { vec![-c / b] } else { vec![] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / a, c / q]
}

/// Solves the corner-distance equations for the safe-zone half-lengths and
/// the transit time at `speed_kt`.
///
/// Subtracting the equations leaves `(sin a - cos a) e2 (x1 + (cos a + sin a) x2 - e1/2) = 0`.
/// In general that fixes `x1` as a linear function of `x2` and the first
/// equation becomes a quadratic. When the factor vanishes (`e2 = 0` or
/// `a = 45 deg`) the two equations coincide and symmetry `|x1| = |x2|` is
/// imposed. The zone is symmetric about the crossing point, so roots are
/// taken by magnitude; among them the pair with the smallest larger
/// half-length is chosen, then the smallest sum. The zone is then extended
/// so both flows take the same time to cross it.
pub fn solve_safe_zone(g: &CrossingGeometry, speed_kt: f64) -> Result<CrossingGeometry, FlowError> {
    g.validate()?;
    positive("speed_kt", speed_kt)?;
    let a = g.alpha_deg.to_radians();
    let (s, c) = a.sin_cos();
    let (ge, he) = (g.e1 / 2.0, g.e2 / 2.0);
    let d2 = g.d_min * g.d_min;
    let scale = g.d_min.max(g.e1).max(g.e2);
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    let coincide = (he * (s - c)).abs() < 1e-12 * scale;
    // First equation with x1 = p + q x2: (p + (q + c) x2 - h c)^2 + (s x2 + h s - g)^2 = D^2.
    let mut solve_linear = |p: f64, q: f64| {
        let (u0, u1) = (p - he * c, q + c);
        let (v0, v1) = (he * s - ge, s);
        for x2 in quadratic(u1 * u1 + v1 * v1, 2.0 * (u0 * u1 + v0 * v1), u0 * u0 + v0 * v0 - d2) {
            pairs.push((p + q * x2, x2));
        }
    };
    if coincide {
        solve_linear(0.0, 1.0);
        solve_linear(0.0, -1.0);
    } else {
        solve_linear(ge, -(c + s));
    }
    let best = pairs
        .into_iter()
        .map(|(x1, x2)| (x1.abs(), x2.abs()))
        .filter(|(x1, x2)| x1.is_finite() && x2.is_finite() && *x1 > 0.0 && *x2 > 0.0)
        .min_by(|p, q| {
            let key = |z: &(f64, f64)| (z.0.max(z.1), z.0 + z.1);
            let (kp, kq) = (key(p), key(q));
            kp.0.total_cmp(&kq.0).then(kp.1.total_cmp(&kq.1))
        })
        .ok_or(FlowError::NoSafeZone { alpha_deg: g.alpha_deg })?;
    let half = best.0.max(best.1);
    let mut out = g.clone();
    out.x1 = Some(best.0);
    out.x2 = Some(best.1);
    out.t_safe = Some(2.0 * half / (speed_kt / 60.0));
    Ok(out)
}

/// Number of aircraft inside the safe zone at an instant.
pub fn conflict_pmf(
    g: &CrossingGeometry,
    lambda1_per_hour: f64,
    lambda2_per_hour: f64,
) -> Result<TaskloadPmf, FlowError> {
    let t_safe = g.t_safe.ok_or(FlowError::Unsolved)?;
    if !(lambda1_per_hour >= 0.0 && lambda2_per_hour >= 0.0) {
        return Err(FlowError::Invalid("intensities must be >= 0".into()));
    }
    let mean = (lambda1_per_hour + lambda2_per_hour) / 60.0 * t_safe;
    Ok(TaskloadPmf::poisson(mean, 1e-12, None))
}

/// Conflict-resolution interventions `max(A - 1, 0)`.
pub fn conflict_resolution_pmf(
    g: &CrossingGeometry,
    lambda1_per_hour: f64,
    lambda2_per_hour: f64,
) -> Result<TaskloadPmf, FlowError> {
    Ok(conflict_pmf(g, lambda1_per_hour, lambda2_per_hour)?.shifted_down())
}

/// Crossing taskload: `A - 1` conflicts plus structure maintenance of the
/// merged flow inside the safe zone. With no aircraft in the zone the
/// taskload is zero.
///
/// Residency inside the zone is `t_safe`, so each flow's crossing time is
/// replaced by it; `per_aircraft` must describe interventions over that
/// window.
pub fn crossing_pmf(
    g: &CrossingGeometry,
    flows: &[FlowSpec],
    per_aircraft: &[TaskloadPmf],
) -> Result<TaskloadPmf, FlowError> {
    if flows.len() != 2 {
        return Err(FlowError::Invalid(format!(
            "a crossing has 2 flows, got {}",
            flows.len()
        )));
    }
    let t_safe = g.t_safe.ok_or(FlowError::Unsolved)?;
    let zone_flows: Vec<FlowSpec> = flows
        .iter()
        .map(|f| FlowSpec {
            t_cross: t_safe,
            ..f.clone()
        })
        .collect();
    let control = multilane_pmf(&zone_flows, per_aircraft)?;
    let occupancy = conflict_pmf(g, flows[0].intensity_per_hour, flows[1].intensity_per_hour)?;
    Ok(combine_crossing(&occupancy, &control))
}

/// `P[0] = P[A=0] + P[A=1] P[N=0]` and `P[n] = sum_i P[A=i+1] P[N=n-i]` for `n >= 1`.
pub fn combine_crossing(occupancy: &TaskloadPmf, control: &TaskloadPmf) -> TaskloadPmf {
    let len = (occupancy.len().max(1) - 1) + control.len();
    let mut probs = vec![0.0; len.max(1)];
    probs[0] = occupancy.prob(0) + occupancy.prob(1) * control.prob(0);
    for (n, slot) in probs.iter_mut().enumerate().skip(1) {
        for i in 0..=n {
            *slot += occupancy.prob(i + 1) * control.prob(n - i);
        }
    }
    let a_pos = 1.0 - occupancy.prob(0) - occupancy.truncation_mass;
    TaskloadPmf {
        probs,
        truncation_mass: occupancy.truncation_mass + a_pos * control.truncation_mass,
        horizon: control.horizon,
    }
}
