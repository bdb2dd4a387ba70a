//! Per-aircraft intervention counts from a first-passage density.
//!
//! The renewal formula is checked against Poisson counts for exponential
//! gaps, then applied to simulated lateral hitting times.

use flowload::analytic::{axis_pmf, OracleSettings};
use flowload::hitting::{closed_form_curve, intervention_pmf, DensityGrid};
use flowload::ou_process::intervention_count_mc;
use flowload::pmf::{tv_distance, TaskloadPmf};
use flowload::{Barrier, Monitoring, OuParams, RandomSource};

fn main() {
    let rate = 3.0 / 60.0;
    let f = DensityGrid::from_fn(0.05, 120.0, |t| rate * (-rate * t).exp());
    let pmf = intervention_pmf(&f, 120.0, 64, 1e-9).unwrap();
    let poisson = TaskloadPmf::poisson(6.0, 1e-12, Some(120.0));
    println!(
        "exponential gaps, 3/h over 2 h: TV to Poisson(6) = {:.2e}",
        tv_distance(&pmf, &poisson)
    );

    let p = OuParams::LATERAL;
    let half = 0.1;
    let window = 20.0;
    let s = OracleSettings {
        n_paths: 100_000,
        ..Default::default()
    };
    let analytic = axis_pmf(&p, half, window, &s, 0).unwrap();
    let mc = intervention_count_mc(
        &p,
        &Barrier::two_sided(half, 0.0),
        window,
        0.1,
        0.0,
        100_000,
        RandomSource::new(7, 1),
        Monitoring::Bridge,
    )
    .unwrap();
    println!("\nlateral, +/-{half} NM, {window} min window:");
    println!("{:>4} {:>12} {:>12}", "n", "renewal", "direct MC");
    for n in 0..analytic.len().max(mc.counts.len()).min(15) {
        println!("{n:>4} {:>12.5} {:>12.5}", analytic.prob(n), mc.prob(n));
    }
    println!("means: {:.3} vs {:.3}", analytic.mean(), mc.mean());

    let curve = closed_form_curve(&p, &Barrier::one_sided(half, 0.0), 5.0, 0.5).unwrap();
    println!("\nclosed-form one-sided density, first ordinates:");
    for (t, v) in curve.times.iter().zip(&curve.values).take(6) {
        println!("  t {t:>4.1}  f {v:>12.5e}");
    }
    println!("  integral {:.4}, flags {:?}", curve.integral, curve.flags);
}
