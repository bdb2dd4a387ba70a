//! Acceptance suite. Runs every criterion in sequence, prints one PASS/FAIL
//! line each, and exits non-zero if any failed.
//!
//! Full run takes roughly a quarter of an hour on one core.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use flowload::analytic::{aircraft_pmf, lane_pmf, multilane_prefixes, OracleSettings};
use flowload::calibration::{fit_least_squares, fit_mle, TimeSeries};
use flowload::distributions::{johnson_sample, johnson_transform};
use flowload::flow::{
    conflict_resolution_pmf, multilane_pmf, single_lane_pmf, solve_safe_zone, CrossingGeometry, FlowSpec,
    ToleranceStandard,
};
use flowload::hitting::{intervention_pmf, DensityGrid};
use flowload::mc::{self, Counting, ScenarioConfig, CROSSING_PRESETS};
use flowload::ou_process::{first_passage_mc, ou_path, FirstPassage};
use flowload::pmf::{tv_distance, EmpiricalPmf, Resolved, TaskloadPmf};
use flowload::{AxisSet, Barrier, JohnsonSuParams, Monitoring, OuParams, RandomSource};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new() -> Self {
        Self {
            pass: true,
            detail: String::new(),
        }
    }

    fn check(&mut self, ok: bool, what: String) {
        self.pass &= ok;
        if !self.detail.is_empty() {
            self.detail.push_str("; ");
        }
        self.detail.push_str(if ok { "" } else { "FAILED " });
        self.detail.push_str(&what);
    }
}

fn max_entry_diff(a: &TaskloadPmf, b: &TaskloadPmf) -> f64 {
    (0..a.len().max(b.len()))
        .map(|n| (a.prob(n) - b.prob(n)).abs())
        .fold(0.0, f64::max)
}

fn johnson_anchors() -> Outcome {
    let mut o = Outcome::new();
    let table: [(JohnsonSuParams, [f64; 4], f64); 3] = [
        (JohnsonSuParams::LATERAL, [-6.98e-2, -3.89e-2, -1.46e-2, 9.98e-3], 1e-3),
        (JohnsonSuParams::VERTICAL, [1.147, 6.215, 10.2, 14.27], 0.05),
        (JohnsonSuParams::LONGITUDINAL, [-0.302, -0.152, -3.52e-2, 8.42e-2], 1e-3),
    ];
    let mut worst = 0.0f64;
    for (p, expect, tol) in table {
        for (z, want) in [-1.5, -0.5, 0.5, 1.5].into_iter().zip(expect) {
            let got = johnson_transform(z, &p);
            let ok = (got - want).abs() <= tol;
            worst = worst.max((got - want).abs() / tol);
            if !ok {
                o.check(false, format!("z={z}: {got} vs {want}"));
            }
        }
    }
    o.check(true, format!("12 anchors, worst error {worst:.2} of tolerance"));
    o
}

fn generator_moments() -> Outcome {
    let mut o = Outcome::new();
    let xs = johnson_sample(&JohnsonSuParams::LATERAL, RandomSource::new(2, 0), 1_000_000);
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    o.check(
        (mean + 0.028).abs() <= 3.0 * se,
        format!("mean {mean:.5} ({:.2} se from -0.028)", (mean + 0.028) / se),
    );
    o.check(
        (var / 9e-4 - 1.0).abs() <= 0.15,
        format!("variance {var:.3e} ({:+.1}% of 9e-4)", 100.0 * (var / 9e-4 - 1.0)),
    );
    o
}

fn calibration_round_trip() -> Outcome {
    let mut o = Outcome::new();
    let mut rng = RandomSource::new(3, 0).rng();
    let (mut ls_ok, mut mle_ok, mut coincide) = (0, 0, 0);
    let mut worst_gap = 0.0f64;
    let dt = 0.1;
    for i in 0..20u64 {
        let kappa: f64 = rng.random_range(1.0..5.0);
        let sigma = rng.random_range(0.1..10.0);
        let sd = sigma / (2.0 * kappa).sqrt();
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let mu = sign * rng.random_range(2.0..10.0) * sd;
        let truth = OuParams::new(kappa, mu, sigma).unwrap();
        let path = ou_path(&truth, mu, 99_999.0 * dt, dt, RandomSource::new(3, 1 + i));
        let ts = TimeSeries::new(path.iter().map(|s| s.x).collect(), dt).unwrap();
        let within = |r: &flowload::calibration::CalibrationReport| {
            [(r.kappa(), kappa), (r.mu(), mu), (r.sigma(), sigma)]
                .iter()
                .all(|&(got, want)| got.is_some_and(|g| ((g - want) / want).abs() < 0.05))
        };
        let ls = fit_least_squares(&ts).unwrap();
        let mle = fit_mle(&ts).unwrap();
        ls_ok += within(&ls) as u32;
        mle_ok += within(&mle) as u32;
        let rel = |a: Option<f64>, b: Option<f64>| {
            let (a, b) = (a.unwrap(), b.unwrap());
            (a - b).abs() / a.abs().max(b.abs())
        };
        let gap = rel(ls.kappa(), mle.kappa()).max(rel(ls.mu(), mle.mu()));
        worst_gap = worst_gap.max(gap);
        coincide += (gap < 1e-6) as u32;
    }
    o.check(ls_ok >= 19, format!("LS within 5% in {ls_ok}/20"));
    o.check(mle_ok >= 19, format!("MLE within 5% in {mle_ok}/20"));
    o.check(
        coincide == 20,
        format!("LS/MLE kappa, mu agree to {worst_gap:.1e} relative"),
    );
    o
}

fn first_passage(level: f64, dt: f64) -> FirstPassage {
    first_passage_mc(
        &OuParams::LATERAL,
        &Barrier::two_sided(level, 0.0),
        120.0,
        dt,
        1_000_000,
        RandomSource::new(4, 0),
        Monitoring::Bridge,
    )
}

struct FirstPassageRuns {
    at_03: FirstPassage,
    at_04: FirstPassage,
}

fn first_passage_anchor(dt: f64) -> (Outcome, FirstPassageRuns) {
    let mut o = Outcome::new();
    let a = first_passage(0.3, dt);
    let p = a.probability();
    o.check(
        (3e-4..=1.2e-3).contains(&p),
        format!(
            "0.3 NM: {} hits in {} paths, P = {p:.2e} (want [3e-4, 1.2e-3])",
            a.n_hits(),
            a.n_paths
        ),
    );
    let b = first_passage(0.4, dt);
    o.check(b.n_hits() == 0, format!("0.4 NM: {} hits", b.n_hits()));
    (o, FirstPassageRuns { at_03: a, at_04: b })
}

fn renewal_poisson() -> Outcome {
    let mut o = Outcome::new();
    for r in [0.1, 1.0, 10.0] {
        let rate = r / 60.0;
        let f = DensityGrid::from_fn(0.05, 120.0, |t| rate * (-rate * t).exp());
        let pmf = intervention_pmf(&f, 120.0, 64, 1e-9).unwrap();
        let tv = tv_distance(&pmf, &TaskloadPmf::poisson(2.0 * r, 1e-12, Some(120.0)));
        o.check(tv <= 1e-3, format!("rate {r}/h: TV {tv:.1e}"));
    }
    o
}

/// Bonferroni bands overlap in every bin.
fn joint_overlap(a: &EmpiricalPmf, b: &EmpiricalPmf) -> (bool, usize) {
    let (ja, jb) = (a.joint_ci95(), b.joint_ci95());
    let n = ja.len().max(jb.len());
    let zero = |e: &EmpiricalPmf, k: usize| e.ci95(k);
    let mut bad = 0;
    for k in 0..n {
        let (la, ha) = ja.get(k).copied().unwrap_or_else(|| zero(a, k));
        let (lb, hb) = jb.get(k).copied().unwrap_or_else(|| zero(b, k));
        if la > hb || lb > ha {
            bad += 1;
        }
    }
    (bad == 0, bad)
}

fn superposition() -> Outcome {
    let mut o = Outcome::new();
    let s = OracleSettings {
        n_paths: 200_000,
        ..Default::default()
    };
    let ou = OuParams::defaults();
    let half = FlowSpec::new(5.0, ToleranceStandard::Stringent);
    let whole = FlowSpec::new(10.0, ToleranceStandard::Stringent);
    let per = aircraft_pmf(&ou, &half.tolerance, AxisSet::LateralOnly, 120.0, &s).unwrap();
    let two = multilane_pmf(&[half.clone(), half.clone()], &[per.clone(), per.clone()]).unwrap();
    let one = single_lane_pmf(&whole, &per).unwrap();
    let tv = tv_distance(&two, &one);
    o.check(tv <= 1e-9, format!("analytic TV {tv:.1e}"));

    let lanes = ScenarioConfig {
        kind: mc::ScenarioKind::Multilane,
        flows: vec![half.clone(), half],
        axes: AxisSet::LateralOnly,
        ..ScenarioConfig::single_lane(5.0, ToleranceStandard::Stringent).with_runs(20_000)
    }
    .with_seed(61);
    let merged = ScenarioConfig {
        axes: AxisSet::LateralOnly,
        ..ScenarioConfig::single_lane(10.0, ToleranceStandard::Stringent).with_runs(20_000)
    }
    .with_seed(62);
    let a = mc::run(&lanes).unwrap();
    let b = mc::run(&merged).unwrap();
    let (ok, bad) = joint_overlap(&a.lateral, &b.lateral);
    o.check(
        ok,
        format!(
            "MC two lanes vs merged: joint bands disjoint in {bad} bins (means {:.3} vs {:.3})",
            a.lateral.mean(),
            b.lateral.mean()
        ),
    );
    o
}

struct SingleLane {
    analytic: TaskloadPmf,
    mc: EmpiricalPmf,
}

fn single_lane(dt: f64) -> (Outcome, SingleLane) {
    let mut o = Outcome::new();
    let s = OracleSettings::default().with_dt(dt);
    let flow = FlowSpec::new(60.0, ToleranceStandard::Stringent);
    let analytic = lane_pmf(&flow, &OuParams::defaults(), AxisSet::LateralOnly, 120.0, &s).unwrap();
    let cfg = ScenarioConfig {
        counting: Counting::Occupancy,
        axes: AxisSet::LateralOnly,
        dt,
        ..ScenarioConfig::single_lane(60.0, ToleranceStandard::Stringent).with_runs(200_000)
    }
    .with_seed(7);
    let e = mc::run(&cfg).unwrap();
    let r = mc::compare(&analytic, &e.lateral, 0.02).unwrap();
    o.check(
        r.pass,
        format!(
            "TV {:.4} over {} runs (means analytic {:.2}, MC {:.2})",
            r.tv,
            e.n_runs,
            analytic.mean(),
            e.lateral.mean()
        ),
    );
    let tail = e.lateral.resolved_tail(10);
    o.check(
        matches!(tail, Resolved::BelowFloor(_)),
        format!("P[N > 10] = {tail:?}, floor {:.1e}", e.lateral.resolution_floor()),
    );
    (
        o,
        SingleLane {
            analytic,
            mc: e.lateral,
        },
    )
}

fn multilane_marginality() -> Outcome {
    let mut o = Outcome::new();
    let s = OracleSettings {
        n_paths: 200_000,
        seed: 8,
        ..Default::default()
    };
    let ou = OuParams::defaults();
    let flows: Vec<FlowSpec> = ToleranceStandard::ALL
        .iter()
        .map(|&st| FlowSpec::new(60.0, st))
        .collect();
    for axes in [AxisSet::LateralOnly, AxisSet::All] {
        let p = multilane_prefixes(&flows, &ou, axes, 120.0, &s).unwrap();
        let d = max_entry_diff(&p[1], &p[3]);
        o.check(
            d < 0.01,
            format!(
                "analytic {axes:?}: max entry change {d:.1e}, modes {}->{}",
                p[1].mode(),
                p[3].mode()
            ),
        );
    }
    let cfg = ScenarioConfig {
        counting: Counting::Occupancy,
        axes: AxisSet::LateralOnly,
        ..ScenarioConfig::multilane(60.0)
    }
    .with_seed(8);
    let e = mc::run(&cfg).unwrap();
    let (two, four) = (&e.lateral_lane_prefixes[1], &e.lateral_lane_prefixes[3]);
    let d = (0..two.counts.len().max(four.counts.len()))
        .map(|n| (two.prob(n) - four.prob(n)).abs())
        .fold(0.0, f64::max);
    o.check(
        d < 0.01,
        format!("MC lateral over {} runs: max entry change {d:.1e}", e.n_runs),
    );
    o
}

fn safe_zone_geometry() -> Outcome {
    let mut o = Outcome::new();
    let g = solve_safe_zone(&CrossingGeometry::new(90.0, 0.0, 0.0, 5.0), 480.0).unwrap();
    let exact = 5.0 / 2f64.sqrt();
    let err = (g.x1.unwrap() - exact).abs().max((g.x2.unwrap() - exact).abs());
    o.check(err <= 1e-9, format!("zero-extent 90 deg: error {err:.1e}"));
    let mut extent = Vec::new();
    for &(alpha, t_ref, _) in &CROSSING_PRESETS {
        let g = solve_safe_zone(&CrossingGeometry::standard(alpha), 480.0).unwrap();
        let (x1, x2, t) = (g.x1.unwrap(), g.x2.unwrap(), g.t_safe.unwrap());
        extent.push(x1.max(x2));
        o.check(
            (t / t_ref - 1.0).abs() <= 0.3,
            format!("{alpha} deg: x1 {x1:.3}, x2 {x2:.3}, t_safe {t:.3} min (reference {t_ref})"),
        );
    }
    // presets are ordered 30, 90, 120
    let ordered = extent[1] < extent[0] && extent[0] < extent[2];
    o.check(
        ordered,
        format!(
            "extent 90 < 30 < 120: {:.3}, {:.3}, {:.3}",
            extent[1], extent[0], extent[2]
        ),
    );
    o
}

fn crossing_behaviour() -> Outcome {
    let mut o = Outcome::new();
    for &(alpha, _, _) in &CROSSING_PRESETS {
        let cfg = ScenarioConfig::crossing(alpha, ToleranceStandard::Lax).with_seed(10);
        let e = mc::run(&cfg).unwrap();
        let p0 = e.deviation_control.prob(0);
        o.check(p0 > 0.99, format!("{alpha} deg: P[no control] {p0:.4}"));
        let g = cfg.geometry.as_ref().unwrap();
        let analytic = conflict_resolution_pmf(g, 2.5, 2.5).unwrap();
        let r = mc::compare(&analytic, e.conflict_resolution.as_ref().unwrap(), 0.03).unwrap();
        o.check(r.pass, format!("{alpha} deg: conflict TV {:.4}", r.tv));
    }
    o
}

fn discretisation(fp: (&FirstPassageRuns, &FirstPassageRuns), lane: (&SingleLane, &SingleLane)) -> Outcome {
    let mut o = Outcome::new();
    for (name, a, b) in [("0.3", &fp.0.at_03, &fp.1.at_03), ("0.4", &fp.0.at_04, &fp.1.at_04)] {
        let (lo, hi) = a.ci95();
        let d = (a.probability() - b.probability()).abs();
        o.check(
            d < hi - lo,
            format!(
                "{name} NM: P {:.2e} -> {:.2e}, CI width {:.1e}",
                a.probability(),
                b.probability(),
                hi - lo
            ),
        );
    }
    let (a, b) = lane;
    let bands = a.mc.joint_ci95();
    let width = |n: usize| bands.get(n).map_or_else(|| a.mc.ci95(n).1, |(lo, hi)| hi - lo);
    let cells =
        a.mc.counts
            .len()
            .max(b.mc.counts.len())
            .max(a.analytic.len())
            .max(b.analytic.len());
    let (mut mc_bad, mut an_bad) = (0, 0);
    let (mut mc_worst, mut an_worst) = (0.0f64, 0.0f64);
    for n in 0..cells {
        let w = width(n);
        let dm = (a.mc.prob(n) - b.mc.prob(n)).abs();
        let da = (a.analytic.prob(n) - b.analytic.prob(n)).abs();
        mc_worst = mc_worst.max(dm / w);
        an_worst = an_worst.max(da / w);
        mc_bad += (dm >= w) as u32;
        an_bad += (da >= w) as u32;
    }
    o.check(
        mc_bad == 0,
        format!("single lane MC: worst change {mc_worst:.2} of joint band width"),
    );
    o.check(
        an_bad == 0,
        format!("single lane analytic: worst change {an_worst:.2} of joint band width"),
    );
    o
}

fn cli(dir: &Path, args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_flowload"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn same_files(a: &Path, b: &Path, names: &[&str]) -> Result<(), String> {
    for n in names {
        let x = std::fs::read(a.join(n)).map_err(|e| format!("{n}: {e}"))?;
        let y = std::fs::read(b.join(n)).map_err(|e| format!("{n}: {e}"))?;
        if x != y {
            return Err(format!("{n} differs"));
        }
    }
    Ok(())
}

fn reproducibility() -> Outcome {
    let mut o = Outcome::new();
    let root = tempfile::tempdir().unwrap();
    let cfg_path = root.path().join("config.json");
    std::fs::write(
        &cfg_path,
        r#"{"schema_version": 1, "seed": 12,
            "scenario": {"kind": "crossing", "geometry": {"alpha_deg": 90, "e1": 1, "e2": 1}},
            "oracle": {"n_paths": 20000, "dt": 0.1, "resolution": 0.1, "monitoring": "bridge", "n_max": 64, "eps": 1e-6, "seed": 12}}"#,
    )
    .unwrap();
    let cfg = cfg_path.to_str().unwrap();
    let runs: [(&str, Vec<&str>, Vec<&str>); 4] = [
        ("generate", vec!["generate", "--n", "1000"], vec!["fte_lateral.csv"]),
        (
            "simulate",
            vec!["simulate", "--config", cfg, "--runs", "3000"],
            vec!["mc_total.csv", "mc_conflict_resolution.csv", "mc_deviation_control.csv"],
        ),
        (
            "analytic",
            vec!["analytic", "--config", cfg],
            vec!["analytic_total.csv", "analytic_conflict_resolution.csv"],
        ),
        (
            "safe_zone",
            vec!["safe-zone", "--format", "json"],
            vec!["safe_zone.json"],
        ),
    ];
    for (cmd, args, files) in runs {
        let first = root.path().join(format!("{cmd}-a"));
        let again = root.path().join(format!("{cmd}-b"));
        cli(&first, &args);
        let resolved = first.join(format!("{cmd}.config.json"));
        let sub = args[0];
        cli(&again, &[sub, "--config", resolved.to_str().unwrap()]);
        let r = same_files(&first, &again, &files);
        o.check(
            r.is_ok(),
            format!("{cmd}: {}", r.err().unwrap_or_else(|| "identical".into())),
        );
    }
    o
}

/// Criterion numbers given on the command line restrict the run; none runs all.
fn main() {
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |id: u32| only.is_empty() || only.contains(&id);
    let start = Instant::now();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |id: u32, name: &'static str, o: Outcome| {
        println!(
            "{} criterion {id:>2} {name}: {} [{:.0}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
        results.push((id, name, o));
    };
    if wanted(1) {
        report(1, "Johnson transform anchors", johnson_anchors());
    }
    if wanted(2) {
        report(2, "generator moments", generator_moments());
    }
    if wanted(3) {
        report(3, "calibration round trip", calibration_round_trip());
    }
    let mut fp_coarse = None;
    if wanted(4) || wanted(11) {
        let (c4, runs) = first_passage_anchor(0.1);
        fp_coarse = Some(runs);
        if wanted(4) {
            report(4, "first-passage anchor", c4);
        }
    }
    if wanted(5) {
        report(5, "renewal-Poisson oracle", renewal_poisson());
    }
    if wanted(6) {
        report(6, "superposition", superposition());
    }
    let mut lane_coarse = None;
    if wanted(7) || wanted(11) {
        let (c7, lane) = single_lane(0.1);
        lane_coarse = Some(lane);
        if wanted(7) {
            report(7, "single-lane cross-validation", c7);
        }
    }
    if wanted(8) {
        report(8, "multilane marginality", multilane_marginality());
    }
    if wanted(9) {
        report(9, "safe-zone geometry", safe_zone_geometry());
    }
    if wanted(10) {
        report(10, "crossing behaviour", crossing_behaviour());
    }
    if let (Some(fp), Some(lane)) = (&fp_coarse, &lane_coarse) {
        let (_, fp_fine) = first_passage_anchor(0.05);
        let (_, lane_fine) = single_lane(0.05);
        report(
            11,
            "discretisation robustness",
            discretisation((fp, &fp_fine), (lane, &lane_fine)),
        );
    }
    if wanted(12) {
        report(12, "reproducibility", reproducibility());
    }

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria passed in {:.0}s",
        results.len() - failed.len(),
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
