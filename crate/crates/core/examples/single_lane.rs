//! Two-hour taskload of a single corridor lane across flow intensities and
//! tolerance standards.

use flowload::analytic::{lane_pmf, OracleSettings};
use flowload::flow::{FlowSpec, ToleranceStandard};
use flowload::{AxisSet, OuParams};

fn main() {
    let ou = OuParams::defaults();
    let s = OracleSettings {
        n_paths: 50_000,
        ..Default::default()
    };
    println!(
        "{:<14} {:>6} {:>10} {:>10} {:>6} {:>10}",
        "standard", "lambda", "axes", "mean", "mode", "P[N=0]"
    );
    for standard in ToleranceStandard::ALL {
        for lambda in [2.5, 10.0] {
            for axes in [AxisSet::LateralOnly, AxisSet::All] {
                let flow = FlowSpec::new(lambda, standard);
                let p = lane_pmf(&flow, &ou, axes, 120.0, &s).unwrap();
                println!(
                    "{:<14} {lambda:>6} {:>10} {:>10.2} {:>6} {:>10.4}",
                    standard.name(),
                    format!("{axes:?}"),
                    p.mean(),
                    p.mode(),
                    p.prob(0)
                );
            }
        }
    }
}
