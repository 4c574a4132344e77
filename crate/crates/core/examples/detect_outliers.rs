//! End-to-end detection on a synthetic Gaussian mixture, checked against the
//! brute-force oracle.
//!
//!     cargo run --release --example detect_outliers -- [n] [dim]

use std::time::Instant;

use dodgraph::synth::{radius_for_outlier_ratio, MixtureSpec};
use dodgraph::{brute_force_outliers, build_graph, detect, BuildParams, DodParams, GraphKind, MetricKind};

fn main() -> dodgraph::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(20_000);
    let dim: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(4);

    let ds = MixtureSpec::new(n, dim, 7).dataset(MetricKind::L2)?;
    let k = 20;
    let r = radius_for_outlier_ratio(&ds, k, 0.01, 1000, 0);
    println!("n={n} dim={dim} r={r:.4} k={k}");

    for kind in [GraphKind::KGraph, GraphKind::MrpgBasic, GraphKind::Mrpg] {
        let report = build_graph(&ds, kind, &BuildParams::new(10).with_seed(1))?;
        let g = &report.graph;
        let res = detect(&ds, g, None, &DodParams::new(r, k))?;
        println!(
            "{kind:<10} build {:>7.2}s  filter {:>6.3}s  verify {:>6.3}s  edges {:>7}  f {:>5}  t {:>5}  verified {:>5}  rho {:>6.2}",
            report.timings.total().as_secs_f64(),
            res.filter_time.as_secs_f64(),
            res.verify_time.as_secs_f64(),
            g.edge_count(),
            res.false_positive_count,
            res.outlier_count,
            res.candidates.len(),
            res.rho,
        );
        if kind == GraphKind::Mrpg {
            let started = Instant::now();
            let oracle = brute_force_outliers(&ds, r, k);
            println!(
                "oracle     {:>7.2}s  agrees: {}",
                started.elapsed().as_secs_f64(),
                oracle.outliers == res.outliers
            );
        }
    }
    Ok(())
}
