//! Safe-zone bounds at a crossing and the split of taskload between
//! deviation control and conflict resolution.

use flowload::analytic::{crossing_split, OracleSettings};
use flowload::flow::{solve_safe_zone, CrossingGeometry, ToleranceStandard};
use flowload::mc::{self, Counting, ScenarioConfig, CROSSING_PRESETS};

fn main() {
    println!("{:>6} {:>8} {:>8} {:>10}", "alpha", "x1 (NM)", "x2 (NM)", "t_safe");
    for alpha in [30.0, 45.0, 60.0, 90.0, 120.0, 150.0] {
        let g = solve_safe_zone(&CrossingGeometry::standard(alpha), 480.0).unwrap();
        println!(
            "{alpha:>6} {:>8.3} {:>8.3} {:>10.3}",
            g.x1.unwrap(),
            g.x2.unwrap(),
            g.t_safe.unwrap()
        );
    }

    let s = OracleSettings {
        n_paths: 50_000,
        ..Default::default()
    };
    for &(alpha, _, _) in &CROSSING_PRESETS {
        let cfg = ScenarioConfig::crossing(alpha, ToleranceStandard::Stringent);
        let g = cfg.geometry.clone().unwrap();
        let (control, conflicts, total) = crossing_split(&g, &cfg.flows, &cfg.ou, cfg.axes, &s).unwrap();
        // Snapshot of the zone, the convention the analytic split describes.
        let est = mc::run(&ScenarioConfig {
            counting: Counting::Occupancy,
            ..cfg.clone()
        })
        .unwrap();
        println!(
            "\n{alpha} deg, stringent, t_safe {} min, {} runs",
            g.t_safe.unwrap(),
            est.n_runs
        );
        println!(
            "{:>4} {:>22} {:>22} {:>22}",
            "n", "control (an / MC)", "conflict (an / MC)", "total (an / MC)"
        );
        let conf = est.conflict_resolution.as_ref().unwrap();
        for n in 0..4 {
            println!(
                "{n:>4} {:>10.5} / {:<9.5} {:>10.5} / {:<9.5} {:>10.5} / {:<9.5}",
                control.prob(n),
                est.deviation_control.prob(n),
                conflicts.prob(n),
                conf.prob(n),
                total.prob(n),
                est.total.prob(n)
            );
        }
        let two_hours = mc::run(&cfg).unwrap();
        println!(
            "  over 2 h of transits: mean control {:.3}, mean conflict episodes {:.4}",
            two_hours.deviation_control.mean(),
            two_hours.conflict_episodes.as_ref().unwrap().mean()
        );
    }
}
