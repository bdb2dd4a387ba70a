//! Cross-validates the analytic single-lane PMF against Monte Carlo and
//! prints the worst bins by z-score.

use flowload::analytic::{lane_pmf, OracleSettings};
use flowload::flow::{FlowSpec, ToleranceStandard};
use flowload::mc::{self, Counting, ScenarioConfig};
use flowload::{AxisSet, OuParams};

fn main() {
    let lambda = 7.5;
    let flow = FlowSpec::new(lambda, ToleranceStandard::Stringent);
    let s = OracleSettings {
        n_paths: 200_000,
        ..Default::default()
    };
    let analytic = lane_pmf(&flow, &OuParams::defaults(), AxisSet::All, 120.0, &s).unwrap();
    let cfg = ScenarioConfig {
        counting: Counting::Occupancy,
        ..ScenarioConfig::single_lane(lambda, ToleranceStandard::Stringent).with_runs(20_000)
    }
    .with_seed(3);
    let est = mc::run(&cfg).unwrap();
    let report = mc::compare(&analytic, &est.deviation_control, 0.05).unwrap();
    println!(
        "{lambda}/h stringent, 3 axes: TV {:.4} ({}) over {} runs",
        report.tv,
        if report.pass { "pass" } else { "fail" },
        est.n_runs
    );
    let mut worst: Vec<(usize, f64)> = report.z_scores.iter().copied().enumerate().collect();
    worst.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
    for (n, z) in worst.into_iter().take(5) {
        let (lo, hi) = est.deviation_control.ci95(n);
        println!(
            "  n {n:>3}: analytic {:.5}, MC {:.5} [{lo:.5}, {hi:.5}], z {z:+.2}",
            analytic.prob(n),
            est.deviation_control.prob(n)
        );
    }
}
