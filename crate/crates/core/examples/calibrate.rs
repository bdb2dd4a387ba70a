//! Fits the OU model to generated deviation data, by least squares and by
//! maximum likelihood, then to an exact OU path with known parameters.

use flowload::calibration::{fit_least_squares, fit_mle, CalibrationReport, TimeSeries};
use flowload::distributions::johnson_sample;
use flowload::ou_process::ou_path;
use flowload::{Axis, JohnsonSuParams, OuParams, RandomSource};

fn show(label: &str, r: &CalibrationReport) {
    let f = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{x:.5}"));
    println!(
        "  {label:<5} kappa {:>10}  mu {:>10}  sigma {:>10}  loglik {:>12.2}  flags {:?}",
        f(r.kappa()),
        f(r.mu()),
        f(r.sigma()),
        r.loglik,
        r.flags
    );
}

fn main() {
    // Independent draws sampled once a minute, as in the generator workflow.
    // They carry almost no memory, so the fitted AR coefficient often lands
    // at or below zero and the fit is flagged.
    let params = JohnsonSuParams::defaults();
    for (i, axis) in [Axis::Lateral, Axis::Vertical, Axis::Longitudinal]
        .into_iter()
        .enumerate()
    {
        let xs = johnson_sample(params.get(axis), RandomSource::new(6, i as u64), 50_000);
        let ts = TimeSeries::new(xs, 1.0).unwrap();
        println!("{axis} ({}):", axis.unit());
        show("LS", &fit_least_squares(&ts).unwrap());
        show("MLE", &fit_mle(&ts).unwrap());
    }

    let truth = OuParams::new(0.8, 0.3, 0.2).unwrap();
    let path = ou_path(&truth, 0.3, 20_000.0, 0.2, RandomSource::new(6, 9));
    let ts = TimeSeries::new(path.iter().map(|s| s.x).collect(), 0.2).unwrap();
    println!("\nexact path, truth kappa 0.8, mu 0.3, sigma 0.2:");
    show("LS", &fit_least_squares(&ts).unwrap());
    show("MLE", &fit_mle(&ts).unwrap());
}
