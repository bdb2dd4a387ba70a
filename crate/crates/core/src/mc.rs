//! Monte Carlo taskload experiments.
//!
//! A run is one realization of the counting horizon. Run `r` draws all of
//! its randomness from `RandomSource::new(seed, 0).derive(r)`, so results do
//! not depend on execution order and batches merge exactly by count addition.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::axes::{Axis, AxisSet, AxisTriple};
use crate::distributions::{poisson_sample, RandomSource};
use crate::flow::{CrossingGeometry, FlowError, FlowSpec, ToleranceStandard};
use crate::ou_process::{Barrier, ExcursionSim, Monitoring, OuParams};
use crate::pmf::{horizons_compatible, EmpiricalPmf, PmfError, TaskloadPmf};

#[derive(Debug, Error, PartialEq)]
pub enum McError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Pmf(#[from] PmfError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    SingleLane,
    Multilane,
    Crossing,
}

/// Which interventions a run attributes to the controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Counting {
    /// Aircraft arrive over `[-t_cross, horizon)` and count only while inside
    /// the sector and inside `[0, horizon]`.
    #[default]
    Residency,
    /// The aircraft present at time 0 (a Poisson occupancy draw) each count
    /// over the whole horizon, or over one transit of a crossing's safe zone.
    Occupancy,
}

pub const DEFAULT_HORIZON: f64 = 120.0;
pub const DEFAULT_DT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub flows: Vec<FlowSpec>,
    #[serde(default)]
    pub geometry: Option<CrossingGeometry>,
    #[serde(default = "OuParams::defaults")]
    pub ou: AxisTriple<OuParams>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub n_runs: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub axes: AxisSet,
    #[serde(default)]
    pub counting: Counting,
    #[serde(default)]
    pub monitoring: Monitoring,
    /// Deviation an aircraft is returned to after an intervention.
    #[serde(default)]
    pub reset: f64,
}

fn default_horizon() -> f64 {
    DEFAULT_HORIZON
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

/// Preset run counts for the single-lane experiment.
pub fn single_lane_runs(intensity_per_hour: f64) -> u64 {
    preset(
        &[
            (2.5, 91_658),
            (5.0, 66_680),
            (7.5, 58_366),
            (10.0, 54_147),
            (60.0, 41_702),
        ],
        intensity_per_hour,
        50_000,
    )
}

/// Preset run counts for the multilane experiment.
pub fn multilane_runs(intensity_per_hour: f64) -> u64 {
    preset(
        &[
            (2.5, 22_915),
            (5.0, 16_670),
            (7.5, 14_592),
            (10.0, 13_537),
            (60.0, 10_426),
        ],
        intensity_per_hour,
        15_000,
    )
}

fn preset(table: &[(f64, u64)], intensity_per_hour: f64, fallback: u64) -> u64 {
    table
        .iter()
        .find(|p| p.0 == intensity_per_hour)
        .map_or(fallback, |p| p.1)
}

/// Crossing presets: angle, safe-zone transit time (min), runs.
pub const CROSSING_PRESETS: [(f64, f64, u64); 3] = [(30.0, 2.0, 5_412), (90.0, 1.0, 10_463), (120.0, 3.0, 3_826)];

impl ScenarioConfig {
    pub fn single_lane(intensity_per_hour: f64, standard: ToleranceStandard) -> Self {
        Self {
            kind: ScenarioKind::SingleLane,
            flows: vec![FlowSpec::new(intensity_per_hour, standard)],
            geometry: None,
            ou: OuParams::defaults(),
            horizon: DEFAULT_HORIZON,
            dt: DEFAULT_DT,
            n_runs: single_lane_runs(intensity_per_hour),
            seed: 0,
            axes: AxisSet::All,
            counting: Counting::Residency,
            monitoring: Monitoring::Bridge,
            reset: 0.0,
        }
    }

    /// Four lanes, one per tolerance standard from stringent to lax.
    pub fn multilane(intensity_per_hour: f64) -> Self {
        Self {
            kind: ScenarioKind::Multilane,
            flows: ToleranceStandard::ALL
                .iter()
                .map(|&s| FlowSpec::new(intensity_per_hour, s))
                .collect(),
            n_runs: multilane_runs(intensity_per_hour),
            ..Self::single_lane(intensity_per_hour, ToleranceStandard::Stringent)
        }
    }

    /// Two 2.5/h flows crossing at one of the preset angles.
    pub fn crossing(alpha_deg: f64, standard: ToleranceStandard) -> Self {
        let (t_safe, runs) = CROSSING_PRESETS
            .iter()
            .find(|p| p.0 == alpha_deg)
            .map(|p| (Some(p.1), p.2))
            .unwrap_or((None, 10_000));
        let mut geometry = CrossingGeometry::standard(alpha_deg);
        geometry.t_safe = t_safe;
        Self {
            kind: ScenarioKind::Crossing,
            flows: vec![FlowSpec::new(2.5, standard), FlowSpec::new(2.5, standard)],
            geometry: Some(geometry),
            n_runs: runs,
            ..Self::single_lane(2.5, standard)
        }
    }

    pub fn with_runs(mut self, n: u64) -> Self {
        self.n_runs = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), McError> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(McError::Invalid(format!("horizon {} must be positive", self.horizon)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(McError::Invalid(format!("dt {} must be positive", self.dt)));
        }
        for f in &self.flows {
            f.validate()?;
        }
        for (_, p) in self.ou.iter() {
            p.validate().map_err(FlowError::from)?;
        }
        match self.kind {
            ScenarioKind::SingleLane if self.flows.len() != 1 => Err(McError::Invalid(format!(
                "single lane needs 1 flow, got {}",
                self.flows.len()
            ))),
            ScenarioKind::Multilane if self.flows.is_empty() => Err(McError::Invalid("multilane needs flows".into())),
            ScenarioKind::Crossing => {
                if self.flows.len() != 2 {
                    return Err(McError::Invalid(format!(
                        "crossing needs 2 flows, got {}",
                        self.flows.len()
                    )));
                }
                let g = self
                    .geometry
                    .as_ref()
                    .ok_or_else(|| McError::Invalid("crossing needs a geometry".into()))?;
                g.validate()?;
                if g.t_safe.is_none() {
                    return Err(FlowError::Unsolved.into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Monte Carlo taskload estimate. All PMFs are per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    /// Deviation-control interventions on the lateral axis only.
    pub lateral: EmpiricalPmf,
    /// Deviation-control interventions summed over the configured axes.
    pub deviation_control: EmpiricalPmf,
    /// `max(A - 1, 0)` with `A` the safe-zone occupancy at the end of the run.
    pub conflict_resolution: Option<EmpiricalPmf>,
    /// Sum over safe-zone busy periods of (aircraft in the period - 1).
    pub conflict_episodes: Option<EmpiricalPmf>,
    /// Deviation control plus conflict resolution.
    pub total: EmpiricalPmf,
    /// Deviation control summed over lanes `1..=k`, for each `k`.
    pub lane_prefixes: Vec<EmpiricalPmf>,
    /// Lateral-only counterpart of `lane_prefixes`.
    pub lateral_lane_prefixes: Vec<EmpiricalPmf>,
    pub n_runs: u64,
    pub n_aircraft: u64,
    /// `1 / n_runs`: the smallest per-run probability the estimate resolves.
    pub resolution_floor: f64,
}

impl McEstimate {
    fn empty(horizon: f64, lanes: usize, crossing: bool) -> Self {
        let e = EmpiricalPmf::empty(horizon);
        Self {
            lateral: e.clone(),
            deviation_control: e.clone(),
            conflict_resolution: crossing.then(|| e.clone()),
            conflict_episodes: crossing.then(|| e.clone()),
            total: e.clone(),
            lane_prefixes: vec![e.clone(); lanes],
            lateral_lane_prefixes: vec![e; lanes],
            n_runs: 0,
            n_aircraft: 0,
            resolution_floor: 1.0,
        }
    }

    fn record(&mut self, r: &RunRecord) {
        self.lateral.record(r.lateral);
        self.deviation_control.record(r.control);
        self.total.record(r.control + r.conflicts);
        if let Some(c) = self.conflict_resolution.as_mut() {
            c.record(r.conflicts);
        }
        if let Some(c) = self.conflict_episodes.as_mut() {
            c.record(r.episodes);
        }
        let (mut acc, mut lat) = (0, 0);
        for (k, lane) in r.lanes.iter().enumerate() {
            acc += lane.0;
            lat += lane.1;
            self.lane_prefixes[k].record(acc);
            self.lateral_lane_prefixes[k].record(lat);
        }
        self.n_runs += 1;
        self.n_aircraft += r.aircraft;
        self.resolution_floor = 1.0 / self.n_runs as f64;
    }

    /// Count addition. Exact and order-independent.
    pub fn merge(&mut self, other: &McEstimate) -> Result<(), McError> {
        if self.lane_prefixes.len() != other.lane_prefixes.len()
            || self.conflict_resolution.is_some() != other.conflict_resolution.is_some()
        {
            return Err(McError::Invalid("estimates come from different scenario shapes".into()));
        }
        self.lateral.merge(&other.lateral)?;
        self.deviation_control.merge(&other.deviation_control)?;
        self.total.merge(&other.total)?;
        for (a, b) in [
            (&mut self.conflict_resolution, &other.conflict_resolution),
            (&mut self.conflict_episodes, &other.conflict_episodes),
        ] {
            if let (Some(a), Some(b)) = (a.as_mut(), b.as_ref()) {
                a.merge(b)?;
            }
        }
        for (a, b) in self.lane_prefixes.iter_mut().zip(&other.lane_prefixes) {
            a.merge(b)?;
        }
        for (a, b) in self.lateral_lane_prefixes.iter_mut().zip(&other.lateral_lane_prefixes) {
            a.merge(b)?;
        }
        self.n_runs += other.n_runs;
        self.n_aircraft += other.n_aircraft;
        self.resolution_floor = 1.0 / self.n_runs.max(1) as f64;
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
struct RunRecord {
    lateral: u64,
    control: u64,
    conflicts: u64,
    episodes: u64,
    /// Per lane: (all configured axes, lateral only).
    lanes: Vec<(u64, u64)>,
    aircraft: u64,
}

/// Per-flow simulators, one per configured axis.
struct LaneSim {
    flow: FlowSpec,
    /// Residency window for each aircraft.
    window: f64,
    /// How long each aircraft is followed under `Counting::Occupancy`: the
    /// horizon on a lane, one transit in a crossing's safe zone.
    observed: f64,
    sims: Vec<(Axis, ExcursionSim)>,
}

impl LaneSim {
    fn new(cfg: &ScenarioConfig, flow: &FlowSpec, window: f64, observed: f64) -> Self {
        let sims = cfg
            .axes
            .axes()
            .iter()
            .map(|&axis| {
                let barrier = Barrier::two_sided(*flow.tolerance.get(axis), 0.0);
                (
                    axis,
                    ExcursionSim::new(*cfg.ou.get(axis), barrier, cfg.dt, cfg.monitoring),
                )
            })
            .collect();
        Self {
            flow: flow.clone(),
            window,
            observed,
            sims,
        }
    }

    /// Interventions of one aircraft simulated over `length` minutes from
    /// entry, counting only after `count_after`. Returns (all axes, lateral).
    fn aircraft<R: Rng>(&self, cfg: &ScenarioConfig, length: f64, count_after: f64, rng: &mut R) -> (u64, u64) {
        let mut all = 0;
        let mut lat = 0;
        for (axis, sim) in &self.sims {
            let n = sim.count_contacts(0.0, cfg.reset, length, count_after, rng);
            all += n;
            if *axis == Axis::Lateral {
                lat = n;
            }
        }
        (all, lat)
    }

    /// Entry times of aircraft whose residency overlaps `[0, horizon]`.
    fn arrivals<R: Rng>(&self, cfg: &ScenarioConfig, rng: &mut R) -> Vec<f64> {
        let rate = self.flow.rate_per_min();
        match cfg.counting {
            Counting::Residency => {
                let span = cfg.horizon + self.window;
                let k = poisson_sample(rate * span, rng);
                let mut t: Vec<f64> = (0..k).map(|_| rng.random::<f64>() * span - self.window).collect();
                t.sort_by(f64::total_cmp);
                t
            }
            Counting::Occupancy => {
                let k = poisson_sample(rate * self.window, rng);
                vec![0.0; k as usize]
            }
        }
    }

    /// Interventions of every aircraft in one run: (all axes, lateral, aircraft).
    fn run<R: Rng>(&self, cfg: &ScenarioConfig, entries: &[f64], rng: &mut R) -> (u64, u64) {
        let mut all = 0;
        let mut lat = 0;
        for &s in entries {
            let (length, count_after) = match cfg.counting {
                Counting::Residency => ((s + self.window).min(cfg.horizon) - s, (-s).max(0.0)),
                Counting::Occupancy => (self.observed, 0.0),
            };
            let (a, l) = self.aircraft(cfg, length, count_after, rng);
            all += a;
            lat += l;
        }
        (all, lat)
    }
}

/// Sum over busy periods of (aircraft - 1) for residency intervals starting
/// at `entries` with length `window`, restricted to periods meeting `[0, horizon]`.
fn conflict_episodes(entries: &mut [f64], window: f64, horizon: f64) -> u64 {
    entries.sort_by(f64::total_cmp);
    let mut total = 0;
    let mut i = 0;
    while i < entries.len() {
        let start = entries[i];
        let mut end = start + window;
        let mut count = 1;
        i += 1;
        while i < entries.len() && entries[i] < end {
            end = end.max(entries[i] + window);
            count += 1;
            i += 1;
        }
        if end > 0.0 && start < horizon {
            total += count - 1;
        }
    }
    total
}

fn simulate(cfg: &ScenarioConfig, first_run: u64, n_runs: u64) -> Result<McEstimate, McError> {
    cfg.validate()?;
    let crossing = cfg.kind == ScenarioKind::Crossing;
    let t_safe = cfg.geometry.as_ref().and_then(|g| g.t_safe);
    let lanes: Vec<LaneSim> = cfg
        .flows
        .iter()
        .map(|f| match t_safe {
            Some(w) if crossing => LaneSim::new(cfg, f, w, w),
            _ => LaneSim::new(cfg, f, f.t_cross, cfg.horizon),
        })
        .collect();
    let src = RandomSource::new(cfg.seed, 0);
    let n_lanes = lanes.len();
    let one_run = |r: u64| -> RunRecord {
        let mut rng = src.derive(r).rng();
        let mut rec = RunRecord {
            lanes: Vec::with_capacity(n_lanes),
            ..Default::default()
        };
        let mut zone_entries = Vec::new();
        for lane in &lanes {
            let entries = lane.arrivals(cfg, &mut rng);
            let (all, lat) = lane.run(cfg, &entries, &mut rng);
            rec.control += all;
            rec.lateral += lat;
            rec.aircraft += entries.len() as u64;
            rec.lanes.push((all, lat));
            if crossing {
                zone_entries.extend(entries);
            }
        }
        if crossing {
            let w = t_safe.unwrap();
            let occupied = match cfg.counting {
                Counting::Residency => zone_entries
                    .iter()
                    .filter(|&&s| s <= cfg.horizon && s + w > cfg.horizon)
                    .count() as u64,
                Counting::Occupancy => zone_entries.len() as u64,
            };
            rec.conflicts = occupied.saturating_sub(1);
            rec.episodes = conflict_episodes(&mut zone_entries, w, cfg.horizon);
        }
        rec
    };
    let empty = McEstimate::empty(cfg.horizon, n_lanes, crossing);
    let est = (first_run..first_run + n_runs)
        .into_par_iter()
        .fold(
            || empty.clone(),
            |mut acc, r| {
                acc.record(&one_run(r));
                acc
            },
        )
        .reduce(
            || empty.clone(),
            |mut a, b| {
                a.merge(&b).expect("same shape");
                a
            },
        );
    Ok(est)
}

/// Runs `first_run .. first_run + n_runs` of a scenario. Disjoint ranges merge
/// into exactly the estimate of their union.
pub fn run_range(cfg: &ScenarioConfig, first_run: u64, n_runs: u64) -> Result<McEstimate, McError> {
    simulate(cfg, first_run, n_runs)
}

pub fn run(cfg: &ScenarioConfig) -> Result<McEstimate, McError> {
    simulate(cfg, 0, cfg.n_runs)
}

fn expect_kind(cfg: &ScenarioConfig, kind: ScenarioKind) -> Result<(), McError> {
    if cfg.kind != kind {
        return Err(McError::Invalid(format!(
            "expected a {kind:?} scenario, got {:?}",
            cfg.kind
        )));
    }
    Ok(())
}

pub fn run_single_lane(cfg: &ScenarioConfig) -> Result<McEstimate, McError> {
    expect_kind(cfg, ScenarioKind::SingleLane)?;
    run(cfg)
}

pub fn run_multilane(cfg: &ScenarioConfig) -> Result<McEstimate, McError> {
    expect_kind(cfg, ScenarioKind::Multilane)?;
    run(cfg)
}

pub fn run_crossing(cfg: &ScenarioConfig) -> Result<McEstimate, McError> {
    expect_kind(cfg, ScenarioKind::Crossing)?;
    run(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub tv: f64,
    /// `(mc - analytic) / sqrt(analytic (1 - analytic) / n_runs)` per bin.
    pub z_scores: Vec<f64>,
    pub threshold: f64,
    pub pass: bool,
}

/// Total-variation comparison of an analytic PMF against a simulated one.
pub fn compare(analytic: &TaskloadPmf, mc: &EmpiricalPmf, threshold: f64) -> Result<ComparisonReport, McError> {
    horizons_compatible(analytic.horizon, Some(mc.horizon))?;
    if mc.n_runs == 0 {
        return Err(PmfError::Empty.into());
    }
    let emp = mc.to_pmf()?;
    let tv = crate::pmf::tv_distance(analytic, &emp);
    let len = analytic.len().max(mc.counts.len());
    let z_scores = (0..len)
        .map(|n| {
            let p = analytic.prob(n);
            let se = (p * (1.0 - p) / mc.n_runs as f64).sqrt();
            let d = mc.prob(n) - p;
            if se > 0.0 {
                d / se
            } else if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect();
    Ok(ComparisonReport {
        tv,
        z_scores,
        threshold,
        pass: tv <= threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ScenarioKind) -> ScenarioConfig {
        let base = match kind {
            ScenarioKind::SingleLane => ScenarioConfig::single_lane(10.0, ToleranceStandard::Stringent),
            ScenarioKind::Multilane => ScenarioConfig::multilane(5.0),
            ScenarioKind::Crossing => ScenarioConfig::crossing(90.0, ToleranceStandard::Stringent),
        };
        ScenarioConfig {
            horizon: 30.0,
            ..base.with_runs(300).with_seed(7)
        }
    }

    #[test]
    fn zero_intensity_zero_taskload() {
        let cfg = ScenarioConfig::single_lane(0.0, ToleranceStandard::Stringent).with_runs(50);
        let e = run_single_lane(&cfg).unwrap();
        assert_eq!(e.total.counts, vec![50]);
        assert_eq!(e.n_aircraft, 0);
    }

    #[test]
    fn deterministic() {
        for kind in [
            ScenarioKind::SingleLane,
            ScenarioKind::Multilane,
            ScenarioKind::Crossing,
        ] {
            let cfg = small(kind);
            assert_eq!(run(&cfg).unwrap(), run(&cfg).unwrap());
        }
    }

    #[test]
    fn batches_merge_exactly() {
        for kind in [ScenarioKind::SingleLane, ScenarioKind::Crossing] {
            let cfg = small(kind);
            let mut a = run_range(&cfg, 0, 100).unwrap();
            a.merge(&run_range(&cfg, 100, 100).unwrap()).unwrap();
            a.merge(&run_range(&cfg, 200, 100).unwrap()).unwrap();
            assert_eq!(a, run(&cfg).unwrap());
        }
    }

    #[test]
    fn one_lane_multilane_equals_single_lane() {
        let single = small(ScenarioKind::SingleLane);
        let multi = ScenarioConfig {
            kind: ScenarioKind::Multilane,
            ..single.clone()
        };
        let (a, b) = (run(&single).unwrap(), run(&multi).unwrap());
        assert_eq!(a.total, b.total);
        assert_eq!(b.lane_prefixes[0], a.deviation_control);
    }

    #[test]
    fn lane_prefixes_accumulate() {
        let e = run(&small(ScenarioKind::Multilane)).unwrap();
        assert_eq!(e.lane_prefixes.len(), 4);
        assert_eq!(e.lane_prefixes[3], e.deviation_control);
        for w in e.lane_prefixes.windows(2) {
            assert!(w[1].mean() >= w[0].mean());
        }
    }

    #[test]
    fn crossing_split_adds_up() {
        let e = run(&small(ScenarioKind::Crossing)).unwrap();
        let c = e.conflict_resolution.as_ref().unwrap();
        let mean = e.deviation_control.mean() + c.mean();
        assert!((e.total.mean() - mean).abs() < 1e-12);
    }

    #[test]
    fn wrong_kind_rejected() {
        let cfg = small(ScenarioKind::SingleLane);
        assert!(run_crossing(&cfg).is_err());
        let mut bad = small(ScenarioKind::Crossing);
        bad.geometry.as_mut().unwrap().t_safe = None;
        assert!(matches!(run(&bad), Err(McError::Flow(FlowError::Unsolved))));
    }

    #[test]
    fn episodes_sweep() {
        let mut e = vec![0.5, 1.0, 5.0, 5.2, 5.4, 10.0];
        assert_eq!(conflict_episodes(&mut e, 1.0, 120.0), 1 + 2);
        let mut before = vec![-5.0, -4.5];
        assert_eq!(conflict_episodes(&mut before, 1.0, 120.0), 0);
    }

    #[test]
    fn compare_extremes() {
        let point0 = TaskloadPmf::point(0, Some(120.0));
        let mc0 = EmpiricalPmf::from_samples(&[0, 0, 0], 120.0);
        let r = compare(&point0, &mc0, 0.02).unwrap();
        assert_eq!(r.tv, 0.0);
        assert!(r.pass);
        let point1 = TaskloadPmf::point(1, Some(120.0));
        let r = compare(&point1, &mc0, 0.02).unwrap();
        assert_eq!(r.tv, 1.0);
        assert!(!r.pass);
        assert!(r.z_scores[0].is_infinite());
        assert!(matches!(
            compare(&point1, &EmpiricalPmf::from_samples(&[1], 60.0), 0.02),
            Err(McError::Pmf(PmfError::HorizonMismatch(..)))
        ));
    }

    /// 95% Wilson intervals on a known Bernoulli(0.3) cover the truth in at
    /// least 90 of 100 repetitions.
    #[test]
    fn interval_coverage() {
        let mut covered = 0;
        for rep in 0..100 {
            let mut rng = RandomSource::new(31, rep).rng();
            let samples: Vec<u64> = (0..500).map(|_| u64::from(rng.random::<f64>() < 0.3)).collect();
            let e = EmpiricalPmf::from_samples(&samples, 1.0);
            let (lo, hi) = e.ci95(1);
            if lo <= 0.3 && 0.3 <= hi {
                covered += 1;
            }
        }
        assert!(covered >= 90, "{covered}");
    }

    #[test]
    fn occupancy_counting_uses_full_horizon() {
        let cfg = ScenarioConfig {
            counting: Counting::Occupancy,
            axes: AxisSet::LateralOnly,
            ..small(ScenarioKind::SingleLane)
        };
        let e = run(&cfg).unwrap();
        // About 10/h * 20 min = 3.3 aircraft each over 30 min.
        assert!(e.n_aircraft as f64 / 300.0 > 2.5 && (e.n_aircraft as f64 / 300.0) < 4.2);
        assert_eq!(e.lateral, e.deviation_control);
    }

    #[test]
    fn crossing_occupancy_matches_analytic_total() {
        use crate::analytic::{crossing_split, OracleSettings};
        let cfg = ScenarioConfig {
            counting: Counting::Occupancy,
            ..ScenarioConfig::crossing(90.0, ToleranceStandard::Stringent)
        };
        let s = OracleSettings {
            n_paths: 50_000,
            ..Default::default()
        };
        let g = cfg.geometry.clone().unwrap();
        let (control, _, total) = crossing_split(&g, &cfg.flows, &cfg.ou, cfg.axes, &s).unwrap();
        let e = run(&cfg).unwrap();
        let r = compare(&total, &e.total, 0.03).unwrap();
        assert!(r.pass, "TV {}", r.tv);
        assert!(compare(&control, &e.deviation_control, 0.03).unwrap().pass);
    }
}
