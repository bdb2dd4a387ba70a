//! Draws flight-technical-error samples on each axis and compares their
//! moments with the closed-form Johnson S_U moments.

use flowload::calibration::sample_moments;
use flowload::distributions::{johnson_moments, johnson_sample, johnson_transform};
use flowload::{Axis, JohnsonSuParams, RandomSource};

fn main() {
    let params = JohnsonSuParams::defaults();
    println!(
        "{:<8} {:>12} {:>12} {:>12} {:>12} {:>8} {:>8}",
        "axis", "mean", "exact", "variance", "exact", "beta1", "beta2"
    );
    for (i, axis) in [Axis::Lateral, Axis::Vertical, Axis::Longitudinal]
        .into_iter()
        .enumerate()
    {
        let p = params.get(axis);
        let xs = johnson_sample(p, RandomSource::new(1, i as u64), 200_000);
        let m = sample_moments(&xs).expect("non-degenerate sample");
        let exact = johnson_moments(p);
        println!(
            "{:<8} {:>12.5} {:>12.5} {:>12.4e} {:>12.4e} {:>8.3} {:>8.3}",
            axis.to_string(),
            m.mu1,
            exact.mu1,
            m.mu2,
            exact.mu2,
            m.beta1,
            m.beta2
        );
    }

    println!("\nquartile-style anchors (z = -1.5, -0.5, 0.5, 1.5):");
    for axis in [Axis::Lateral, Axis::Vertical, Axis::Longitudinal] {
        let p = params.get(axis);
        let q: Vec<String> = [-1.5, -0.5, 0.5, 1.5]
            .iter()
            .map(|&z| format!("{:.4}", johnson_transform(z, p)))
            .collect();
        println!("  {:<12} {} [{}]", axis.to_string(), q.join("  "), axis.unit());
    }
}
