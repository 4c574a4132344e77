//! Detection time across thread counts; the outlier set never changes.
//!
//!     cargo run --release --example thread_scaling -- [n]

use std::time::Instant;

use dodgraph::synth::{radius_for_outlier_ratio, MixtureSpec};
use dodgraph::{build_mrpg, detect_partitioned, BuildParams, DodParams, MetricKind};

fn main() -> dodgraph::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(80_000);
    let ds = MixtureSpec::new(n, 4, 6).dataset(MetricKind::L2)?;
    let g = build_mrpg(&ds, &BuildParams::new(10).with_seed(6))?;
    let k = 20;
    let r = radius_for_outlier_ratio(&ds, k, 0.01, 2_000, 6);
    let cores = std::thread::available_parallelism().map_or(1, |c| c.get());
    println!("n={n} r={r:.3} k={k}, {cores} core(s) available");

    let mut baseline = None;
    for threads in [1, 2, 4, 8] {
        let started = Instant::now();
        let res = detect_partitioned(&ds, &g, None, &DodParams::new(r, k).with_threads(threads))?;
        let secs = started.elapsed().as_secs_f64();
        let (base_secs, base_outliers) = baseline.get_or_insert((secs, res.outliers.clone())).clone();
        println!(
            "threads {threads}: {secs:.3}s  speedup {:.2}x  outliers {}  same set: {}",
            base_secs / secs,
            res.outlier_count,
            res.outliers == base_outliers
        );
    }
    Ok(())
}
