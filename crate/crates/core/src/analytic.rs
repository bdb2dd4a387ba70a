//! Analytic taskload pipelines built from simulated first-passage densities.
//!
//! Per axis: hitting times from the deviation engine give a density, the
//! renewal formula turns it into a per-aircraft count PMF, axes are summed by
//! convolution, and the flow layer mixes over Poisson occupancy.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::axes::{AxisSet, AxisTriple};
use crate::distributions::RandomSource;
use crate::flow::{
    conflict_resolution_pmf, convolve_pmf, crossing_pmf, multilane_pmf, single_lane_pmf, CrossingGeometry, FlowError,
    FlowSpec,
};
use crate::hitting::{fpt_density_oracle, intervention_pmf, HittingError, DEFAULT_EPS, DEFAULT_N_MAX};
use crate::ou_process::{Barrier, Monitoring, OuParams};
use crate::pmf::TaskloadPmf;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticError {
    #[error(transparent)]
    Hitting(#[from] HittingError),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// Settings for the simulated density behind each per-axis PMF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSettings {
    pub n_paths: u64,
    /// Simulation step (min).
    pub dt: f64,
    /// Density grid spacing (min). Equal to `dt` by default so each simulated
    /// hitting time sits on a grid node.
    pub resolution: f64,
    pub monitoring: Monitoring,
    pub n_max: usize,
    pub eps: f64,
    pub seed: u64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            n_paths: 1_000_000,
            dt: 0.1,
            resolution: 0.1,
            monitoring: Monitoring::Bridge,
            n_max: DEFAULT_N_MAX,
            eps: DEFAULT_EPS,
            seed: 0,
        }
    }
}

impl OracleSettings {
    /// Resolution follows the step.
    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self.resolution = dt;
        self
    }
}

/// Interventions of one aircraft on one axis over `window` minutes.
pub fn axis_pmf(
    p: &OuParams,
    half_width: f64,
    window: f64,
    s: &OracleSettings,
    stream: u64,
) -> Result<TaskloadPmf, AnalyticError> {
    let barrier = Barrier::two_sided(half_width, 0.0);
    let oracle = fpt_density_oracle(
        p,
        &barrier,
        window,
        s.resolution,
        s.dt,
        s.n_paths,
        RandomSource::new(s.seed, stream),
        s.monitoring,
    )?;
    // The renewal formula needs at least as many terms as the mean count;
    // allow for that on wide windows with frequent hits.
    Ok(intervention_pmf(&oracle.grid, window, s.n_max.max(512), s.eps)?)
}

/// Interventions of one aircraft summed over `axes`.
pub fn aircraft_pmf(
    ou: &AxisTriple<OuParams>,
    tolerance: &AxisTriple<f64>,
    axes: AxisSet,
    window: f64,
    s: &OracleSettings,
) -> Result<TaskloadPmf, AnalyticError> {
    let mut acc: Option<TaskloadPmf> = None;
    for &axis in axes.axes() {
        let pmf = axis_pmf(ou.get(axis), *tolerance.get(axis), window, s, axis as u64)?;
        acc = Some(match acc {
            None => pmf,
            Some(a) => convolve_pmf(&a, &pmf)?,
        });
    }
    Ok(acc.expect("axis set is never empty"))
}

/// Lane taskload over `horizon`: each aircraft present counts over the whole
/// horizon (the Poisson-mixture convention).
pub fn lane_pmf(
    flow: &FlowSpec,
    ou: &AxisTriple<OuParams>,
    axes: AxisSet,
    horizon: f64,
    s: &OracleSettings,
) -> Result<TaskloadPmf, AnalyticError> {
    let per = aircraft_pmf(ou, &flow.tolerance, axes, horizon, s)?;
    Ok(single_lane_pmf(flow, &per)?)
}

/// Lane taskload for each prefix `1..=k` of `flows`.
pub fn multilane_prefixes(
    flows: &[FlowSpec],
    ou: &AxisTriple<OuParams>,
    axes: AxisSet,
    horizon: f64,
    s: &OracleSettings,
) -> Result<Vec<TaskloadPmf>, AnalyticError> {
    let pers = flows
        .iter()
        .map(|f| aircraft_pmf(ou, &f.tolerance, axes, horizon, s))
        .collect::<Result<Vec<_>, _>>()?;
    (1..=flows.len())
        .map(|k| Ok(multilane_pmf(&flows[..k], &pers[..k])?))
        .collect()
}

/// Crossing split: (deviation control inside the zone, conflict resolution, total).
///
/// These describe the safe zone at one moment, so they carry no horizon.
pub fn crossing_split(
    g: &CrossingGeometry,
    flows: &[FlowSpec],
    ou: &AxisTriple<OuParams>,
    axes: AxisSet,
    s: &OracleSettings,
) -> Result<(TaskloadPmf, TaskloadPmf, TaskloadPmf), AnalyticError> {
    let t_safe = g.t_safe.ok_or(FlowError::Unsolved)?;
    let pers = flows
        .iter()
        .map(|f| aircraft_pmf(ou, &f.tolerance, axes, t_safe, s))
        .collect::<Result<Vec<_>, _>>()?;
    let zone: Vec<FlowSpec> = flows
        .iter()
        .map(|f| FlowSpec {
            t_cross: t_safe,
            ..f.clone()
        })
        .collect();
    let control = multilane_pmf(&zone, &pers)?.with_horizon(None);
    let conflicts =
        conflict_resolution_pmf(g, flows[0].intensity_per_hour, flows[1].intensity_per_hour)?.with_horizon(None);
    let total = crossing_pmf(g, flows, &pers)?.with_horizon(None);
    Ok((control, conflicts, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::ToleranceStandard;

    #[test]
    fn unreachable_bounds_give_no_taskload() {
        let s = OracleSettings {
            n_paths: 2000,
            ..Default::default()
        };
        let flow = FlowSpec {
            tolerance: AxisTriple::new(1e3, 1e5, 1e3),
            ..FlowSpec::new(60.0, ToleranceStandard::Lax)
        };
        let p = lane_pmf(&flow, &OuParams::defaults(), AxisSet::All, 120.0, &s).unwrap();
        assert!((p.prob(0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn axes_add_up() {
        let s = OracleSettings {
            n_paths: 20_000,
            ..Default::default()
        };
        let ou = OuParams::defaults();
        let tol = ToleranceStandard::Stringent.bounds();
        let lat = aircraft_pmf(&ou, &tol, AxisSet::LateralOnly, 20.0, &s).unwrap();
        let all = aircraft_pmf(&ou, &tol, AxisSet::All, 20.0, &s).unwrap();
        assert!(all.mean() > lat.mean());
        assert!((all.total_mass() - 1.0).abs() < 1e-9);
    }
}
