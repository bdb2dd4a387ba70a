//! Parallel lanes with different tolerance standards, added one at a time.

use flowload::analytic::{multilane_prefixes, OracleSettings};
use flowload::flow::{FlowSpec, ToleranceStandard};
use flowload::mc::{self, Counting, ScenarioConfig};
use flowload::{AxisSet, OuParams};

fn main() {
    let lambda = 10.0;
    let flows: Vec<FlowSpec> = ToleranceStandard::ALL
        .iter()
        .map(|&st| FlowSpec::new(lambda, st))
        .collect();
    let s = OracleSettings {
        n_paths: 50_000,
        ..Default::default()
    };
    let prefixes = multilane_prefixes(&flows, &OuParams::defaults(), AxisSet::LateralOnly, 120.0, &s).unwrap();

    let cfg = ScenarioConfig {
        counting: Counting::Occupancy,
        axes: AxisSet::LateralOnly,
        ..ScenarioConfig::multilane(lambda).with_runs(4_000)
    };
    let est = mc::run(&cfg).unwrap();

    println!("lateral taskload, {lambda}/h per lane, 2 h");
    println!("{:<28} {:>10} {:>10} {:>6}", "lanes", "analytic", "MC", "mode");
    for (k, p) in prefixes.iter().enumerate() {
        let names: Vec<&str> = ToleranceStandard::ALL[..=k].iter().map(|s| s.name()).collect();
        println!(
            "{:<28} {:>10.2} {:>10.2} {:>6}",
            names.join("+"),
            p.mean(),
            est.lateral_lane_prefixes[k].mean(),
            p.mode()
        );
    }
}
