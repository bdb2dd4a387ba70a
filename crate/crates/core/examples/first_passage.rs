//! Lateral deviation paths and the chance of touching a corridor bound.
//!
//! Sweeps the bound half-width and reports the fraction of paths that reach
//! it within two hours, with Wilson intervals.

use flowload::ou_process::{first_passage_mc, ou_path};
use flowload::{Barrier, Monitoring, OuParams, RandomSource};

fn main() {
    let p = OuParams::LATERAL;
    println!(
        "lateral OU: kappa {} /min, mu {} NM, sigma {} NM/sqrt(min), stationary sd {:.4} NM",
        p.kappa,
        p.mu,
        p.sigma,
        p.stationary_sd().expect("mean reverting")
    );

    let path = ou_path(&p, 0.0, 10.0, 0.5, RandomSource::new(5, 0));
    let xs: Vec<String> = path.iter().map(|s| format!("{:+.3}", s.x)).collect();
    println!("one path, 0.5 min steps: {}", xs.join(" "));

    let n_paths = 100_000;
    println!("\n{n_paths} paths over 120 min, dt 0.1 min");
    println!(
        "{:>10} {:>8} {:>12} {:>24} {:>12}",
        "half (NM)", "hits", "P[hit]", "95% CI", "median t"
    );
    for half in [0.05, 0.08, 0.1, 0.12, 0.15, 0.2] {
        let fp = first_passage_mc(
            &p,
            &Barrier::two_sided(half, 0.0),
            120.0,
            0.1,
            n_paths,
            RandomSource::new(5, 1),
            Monitoring::Bridge,
        );
        let mut t = fp.hit_times.clone();
        t.sort_by(f64::total_cmp);
        let median = t.get(t.len() / 2).map_or("-".to_string(), |m| format!("{m:.2}"));
        let (lo, hi) = fp.ci95();
        println!(
            "{half:>10} {:>8} {:>12.4e} {:>24} {median:>12}",
            fp.n_hits(),
            fp.probability(),
            format!("[{lo:.2e}, {hi:.2e}]")
        );
    }
}
